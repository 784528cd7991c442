#include "perturbex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "perturbex/util.hpp"

namespace perturbex {

using nlohmann::json;

std::string to_string(Plausibility p) {
    switch (p) {
        case Plausibility::unjudged: return "unjudged";
        case Plausibility::plausible: return "plausible";
        case Plausibility::implausible: return "implausible";
    }
    throw Error("unknown plausibility");
}

Plausibility plausibility_from_string(const std::string& name) {
    if (name == "unjudged") return Plausibility::unjudged;
    if (name == "plausible") return Plausibility::plausible;
    if (name == "implausible") return Plausibility::implausible;
    throw ConfigError("unknown plausibility: " + name);
}

double thresholded_top_confidence(const std::vector<Detection>& detections, double tau) {
    double top = 0.0;
    for (const auto& d : detections) top = std::max(top, d.confidence);
    return top >= tau ? top : 0.0;
}

int count_above_threshold(const std::vector<Detection>& detections, double tau) {
    int n = 0;
    for (const auto& d : detections) {
        if (d.confidence >= tau) ++n;
    }
    return n;
}

OutcomeRecord make_outcome_record(std::string image_id, SpecSummary spec,
                                  std::vector<Detection> pre, std::vector<Detection> post,
                                  double tau) {
    sort_detections(pre);
    sort_detections(post);
    OutcomeRecord rec;
    rec.image_id = std::move(image_id);
    rec.spec = std::move(spec);
    rec.pre_top_tau = thresholded_top_confidence(pre, tau);
    rec.post_top_tau = thresholded_top_confidence(post, tau);
    rec.pre_count_tau = count_above_threshold(pre, tau);
    rec.post_count_tau = count_above_threshold(post, tau);
    rec.pre_detections = std::move(pre);
    rec.post_detections = std::move(post);
    return rec;
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

// Population statistics (divide by N). Empty input -> NaN marker.
MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) {
        double nan = std::numeric_limits<double>::quiet_NaN();
        return {nan, nan};
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

bool is_flip(const OutcomeRecord& rec, double tau) {
    return count_above_threshold(rec.post_detections, tau) == 0;
}

}  // namespace

int flip_count(const std::vector<OutcomeRecord>& records, double tau) {
    int flips = 0;
    for (const auto& rec : records) {
        if (is_flip(rec, tau)) ++flips;
    }
    return flips;
}

double flip_rate(const std::vector<OutcomeRecord>& records, double tau) {
    if (records.empty()) throw ConfigError("flip_rate over empty record set");
    return static_cast<double>(flip_count(records, tau)) /
           static_cast<double>(records.size());
}

CdStats confidence_drop(const std::vector<OutcomeRecord>& records, double tau) {
    if (records.empty()) throw ConfigError("confidence_drop over empty record set");
    std::vector<double> all;
    std::vector<double> persisting;
    all.reserve(records.size());
    for (const auto& rec : records) {
        double pre = thresholded_top_confidence(rec.pre_detections, tau);
        double post = thresholded_top_confidence(rec.post_detections, tau);
        all.push_back(pre - post);
        if (count_above_threshold(rec.post_detections, tau) > 0) {
            persisting.push_back(pre - post);
        }
    }
    MeanStd a = mean_std(all);
    MeanStd p = mean_std(persisting);
    CdStats stats;
    stats.mean = a.mean;
    stats.stddev = a.stddev;
    stats.persisting_mean = p.mean;
    stats.persisting_stddev = p.stddev;
    stats.persisting_count = static_cast<int>(persisting.size());
    return stats;
}

PersistingStats persisting_stats(const std::vector<OutcomeRecord>& records, double tau) {
    std::vector<double> tops;
    for (const auto& rec : records) {
        if (count_above_threshold(rec.post_detections, tau) > 0) {
            tops.push_back(thresholded_top_confidence(rec.post_detections, tau));
        }
    }
    MeanStd ms = mean_std(tops);
    PersistingStats stats;
    stats.count = static_cast<int>(tops.size());
    stats.mean = ms.mean;
    stats.stddev = ms.stddev;
    return stats;
}

std::map<std::string, EnvStats> per_environment_breakdown(
    const std::vector<OutcomeRecord>& records, double tau) {
    std::map<std::string, EnvStats> groups;
    for (const auto& rec : records) {
        if (rec.spec.environment.empty()) {
            throw ConfigError("record " + rec.image_id +
                              " has no environment label; cannot group by environment");
        }
        EnvStats& g = groups[rec.spec.environment];
        ++g.n;
        if (is_flip(rec, tau)) ++g.flips;
    }
    for (auto& [name, g] : groups) {
        g.flip_rate = static_cast<double>(g.flips) / static_cast<double>(g.n);
    }
    return groups;
}

int detection_count_delta(const OutcomeRecord& record, double tau) {
    return count_above_threshold(record.post_detections, tau) -
           count_above_threshold(record.pre_detections, tau);
}

PlausibilityBreakdown plausibility_breakdown(const std::vector<OutcomeRecord>& records,
                                             double tau) {
    PlausibilityBreakdown b;
    for (const auto& rec : records) {
        switch (rec.plausibility) {
            case Plausibility::plausible:
                ++b.plausible;
                if (is_flip(rec, tau)) ++b.plausible_flips;
                break;
            case Plausibility::implausible:
                ++b.implausible;
                if (is_flip(rec, tau)) ++b.implausible_flips;
                break;
            case Plausibility::unjudged: ++b.unjudged; break;
        }
    }
    return b;
}

MetricsSummary summarize(const std::string& condition,
                         const std::vector<OutcomeRecord>& records, double tau) {
    if (records.empty()) {
        throw ConfigError("summarize: no records for condition " + condition);
    }
    MetricsSummary s;
    s.condition = condition;
    s.tau = tau;
    s.n = static_cast<int>(records.size());
    s.flips = flip_count(records, tau);
    s.flip_rate = static_cast<double>(s.flips) / static_cast<double>(s.n);
    s.cd = confidence_drop(records, tau);
    s.persisting = persisting_stats(records, tau);

    std::vector<double> pre, post;
    pre.reserve(records.size());
    post.reserve(records.size());
    s.spurious_candidates = 0;
    bool all_labeled = true;
    for (const auto& rec : records) {
        pre.push_back(thresholded_top_confidence(rec.pre_detections, tau));
        post.push_back(thresholded_top_confidence(rec.post_detections, tau));
        if (detection_count_delta(rec, tau) > 0) ++s.spurious_candidates;
        if (rec.spec.environment.empty()) all_labeled = false;
        if (rec.plausibility != Plausibility::unjudged) s.has_plausibility = true;
    }
    MeanStd pre_ms = mean_std(pre);
    MeanStd post_ms = mean_std(post);
    s.pre_top_mean = pre_ms.mean;
    s.pre_top_stddev = pre_ms.stddev;
    s.post_top_mean = post_ms.mean;
    s.post_top_stddev = post_ms.stddev;
    if (all_labeled) s.per_environment = per_environment_breakdown(records, tau);
    if (s.has_plausibility) s.plausibility = plausibility_breakdown(records, tau);
    return s;
}

// --- serialization -----------------------------------------------------------

namespace {

json detection_to_json(const Detection& d) {
    return json{{"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                {"class", d.class_label},
                {"confidence", d.confidence}};
}

Detection detection_from_json(const json& j) {
    Detection d;
    d.class_label = j.at("class").get<std::string>();
    const json& b = j.at("bbox");
    d.bbox = BBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                  b.at(3).get<int>()};
    d.confidence = j.at("confidence").get<double>();
    return d;
}

json detections_to_json(const std::vector<Detection>& dets) {
    json arr = json::array();
    for (const auto& d : dets) arr.push_back(detection_to_json(d));
    return arr;
}

std::vector<Detection> detections_from_json(const json& arr) {
    std::vector<Detection> dets;
    dets.reserve(arr.size());
    for (const auto& item : arr) dets.push_back(detection_from_json(item));
    return dets;
}

std::string csv_num(double v) {
    if (std::isnan(v)) return "";
    return format_double(v);
}

}  // namespace

std::string record_to_json_line(const OutcomeRecord& record) {
    json j = {
        {"image_id", record.image_id},
        {"spec",
         {{"hash", record.spec.spec_hash},
          {"kind", to_string(record.spec.kind)},
          {"target_class", record.spec.target_class},
          {"environment", record.spec.environment},
          {"mask_mode", to_string(record.spec.mask_mode)}}},
        {"pre_detections", detections_to_json(record.pre_detections)},
        {"post_detections", detections_to_json(record.post_detections)},
        {"pre_top_tau", record.pre_top_tau},
        {"post_top_tau", record.post_top_tau},
        {"pre_count_tau", record.pre_count_tau},
        {"post_count_tau", record.post_count_tau},
        {"manual_plausibility", to_string(record.plausibility)},
        {"failed", record.failed},
        {"fail_reason", record.fail_reason},
    };
    return j.dump();
}

OutcomeRecord record_from_json_line(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed record line: " + line.substr(0, 120));
    try {
        OutcomeRecord rec;
        rec.image_id = j.at("image_id").get<std::string>();
        const json& spec = j.at("spec");
        rec.spec.spec_hash = spec.at("hash").get<std::string>();
        rec.spec.kind = perturb_kind_from_string(spec.at("kind").get<std::string>());
        rec.spec.target_class = spec.at("target_class").get<std::string>();
        rec.spec.environment = spec.at("environment").get<std::string>();
        rec.spec.mask_mode = mask_mode_from_string(spec.at("mask_mode").get<std::string>());
        rec.pre_detections = detections_from_json(j.at("pre_detections"));
        rec.post_detections = detections_from_json(j.at("post_detections"));
        rec.pre_top_tau = j.at("pre_top_tau").get<double>();
        rec.post_top_tau = j.at("post_top_tau").get<double>();
        rec.pre_count_tau = j.at("pre_count_tau").get<int>();
        rec.post_count_tau = j.at("post_count_tau").get<int>();
        rec.plausibility =
            plausibility_from_string(j.at("manual_plausibility").get<std::string>());
        rec.failed = j.at("failed").get<bool>();
        rec.fail_reason = j.at("fail_reason").get<std::string>();
        return rec;
    } catch (const json::exception& e) {
        throw IoError("record line missing fields (" + std::string(e.what()) +
                      "): " + line.substr(0, 120));
    }
}

std::string summaries_to_json(const std::vector<MetricsSummary>& summaries,
                              const std::map<std::string, std::string>& metadata) {
    json out;
    out["metadata"] = metadata;
    json arr = json::array();
    for (const auto& s : summaries) {
        json j = {
            {"condition", s.condition},
            {"tau", s.tau},
            {"n", s.n},
            {"flips", s.flips},
            {"flip_rate", s.flip_rate},
            {"cd_all", {{"mean", s.cd.mean}, {"stddev", s.cd.stddev}}},
            {"cd_persisting",
             {{"count", s.cd.persisting_count},
              {"mean", s.cd.persisting_mean},
              {"stddev", s.cd.persisting_stddev}}},
            {"persisting_top",
             {{"count", s.persisting.count},
              {"mean", s.persisting.mean},
              {"stddev", s.persisting.stddev}}},
            {"pre_top", {{"mean", s.pre_top_mean}, {"stddev", s.pre_top_stddev}}},
            {"post_top", {{"mean", s.post_top_mean}, {"stddev", s.post_top_stddev}}},
            {"spurious_candidates", s.spurious_candidates},
        };
        if (!s.per_environment.empty()) {
            json envs;
            for (const auto& [name, g] : s.per_environment) {
                envs[name] = {{"n", g.n}, {"flips", g.flips}, {"flip_rate", g.flip_rate}};
            }
            j["per_environment"] = std::move(envs);
        }
        if (s.has_plausibility) {
            j["plausibility"] = {{"plausible", s.plausibility.plausible},
                                 {"implausible", s.plausibility.implausible},
                                 {"unjudged", s.plausibility.unjudged},
                                 {"plausible_flips", s.plausibility.plausible_flips},
                                 {"implausible_flips", s.plausibility.implausible_flips}};
        }
        arr.push_back(std::move(j));
    }
    out["summaries"] = std::move(arr);
    // NaN dumps as null, which is the undefined-marker for empty subsets.
    return out.dump(2) + "\n";
}

std::string summaries_to_csv(const std::vector<MetricsSummary>& summaries) {
    std::string out =
        "condition,environment,tau,n,flips,flip_rate,"
        "cd_all_mean,cd_all_stddev,cd_persisting_mean,cd_persisting_stddev,"
        "cd_persisting_count,persisting_top_count,persisting_top_mean,"
        "persisting_top_stddev,pre_top_mean,pre_top_stddev,post_top_mean,"
        "post_top_stddev,spurious_candidates\n";
    for (const auto& s : summaries) {
        out += s.condition + "," + "," + csv_num(s.tau) + "," + std::to_string(s.n) + "," +
               std::to_string(s.flips) + "," + csv_num(s.flip_rate) + "," +
               csv_num(s.cd.mean) + "," + csv_num(s.cd.stddev) + "," +
               csv_num(s.cd.persisting_mean) + "," + csv_num(s.cd.persisting_stddev) +
               "," + std::to_string(s.cd.persisting_count) + "," +
               std::to_string(s.persisting.count) + "," + csv_num(s.persisting.mean) +
               "," + csv_num(s.persisting.stddev) + "," + csv_num(s.pre_top_mean) + "," +
               csv_num(s.pre_top_stddev) + "," + csv_num(s.post_top_mean) + "," +
               csv_num(s.post_top_stddev) + "," + std::to_string(s.spurious_candidates) +
               "\n";
        for (const auto& [name, g] : s.per_environment) {
            out += s.condition + "," + name + "," + csv_num(s.tau) + "," +
                   std::to_string(g.n) + "," + std::to_string(g.flips) + "," +
                   csv_num(g.flip_rate) + ",,,,,,,,,,,,,\n";
        }
    }
    return out;
}

}  // namespace perturbex
