#include "perturbex/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "perturbex/image_io.hpp"
#include "perturbex/util.hpp"

namespace fs = std::filesystem;

namespace perturbex {

using nlohmann::json;

namespace {

// 3x5 glyphs for confidence labels; row bits, msb = left column.
struct Glyph {
    char ch;
    std::uint8_t rows[5];
};

constexpr Glyph kGlyphs[] = {
    {'0', {0b111, 0b101, 0b101, 0b101, 0b111}},
    {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
    {'2', {0b111, 0b001, 0b111, 0b100, 0b111}},
    {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
    {'4', {0b101, 0b101, 0b111, 0b001, 0b001}},
    {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
    {'6', {0b111, 0b100, 0b111, 0b101, 0b111}},
    {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
    {'8', {0b111, 0b101, 0b111, 0b101, 0b111}},
    {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
    {'.', {0b000, 0b000, 0b000, 0b000, 0b010}},
};

const Glyph* find_glyph(char ch) {
    for (const auto& g : kGlyphs) {
        if (g.ch == ch) return &g;
    }
    return nullptr;
}

void put_pixel(RasterImage& img, int x, int y, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
    std::uint8_t* px = img.at(x, y);
    px[0] = r;
    px[1] = g;
    px[2] = b;
}

// Perimeter stroke; dashed skips 2-on/2-off along a running parameter so the
// pattern is continuous around corners.
void stroke_rect(RasterImage& img, const BBox& box, bool dashed, std::uint8_t r,
                 std::uint8_t g, std::uint8_t b) {
    auto clamped = box.clamped(img.width, img.height);
    if (!clamped) return;
    const int x0 = clamped->x;
    const int y0 = clamped->y;
    const int x1 = clamped->x + clamped->w - 1;
    const int y1 = clamped->y + clamped->h - 1;
    int t = 0;
    auto on = [&] { return !dashed || (t / 2) % 2 == 0; };
    for (int x = x0; x <= x1; ++x, ++t) {
        if (on()) put_pixel(img, x, y0, r, g, b);
    }
    for (int y = y0 + 1; y <= y1; ++y, ++t) {
        if (on()) put_pixel(img, x1, y, r, g, b);
    }
    for (int x = x1 - 1; x >= x0; --x, ++t) {
        if (on()) put_pixel(img, x, y1, r, g, b);
    }
    for (int y = y1 - 1; y >= y0 + 1; --y, ++t) {
        if (on()) put_pixel(img, x0, y, r, g, b);
    }
}

// Confidence label on a dark patch just inside the box's top-left corner;
// skipped when the box is too small to hold it.
void draw_label(RasterImage& img, const BBox& box, const std::string& text) {
    const int glyph_w = 4;  // 3 px + 1 spacing
    const int text_w = static_cast<int>(text.size()) * glyph_w - 1;
    const int patch_w = text_w + 2;
    const int patch_h = 7;
    if (box.w < patch_w + 4 || box.h < patch_h + 4) return;
    const int px0 = box.x + 2;
    const int py0 = box.y + 2;
    if (px0 + patch_w > img.width || py0 + patch_h > img.height) return;
    for (int y = 0; y < patch_h; ++y) {
        for (int x = 0; x < patch_w; ++x) {
            put_pixel(img, px0 + x, py0 + y, 20, 20, 20);
        }
    }
    int cx = px0 + 1;
    for (char ch : text) {
        const Glyph* glyph = find_glyph(ch);
        if (glyph) {
            for (int y = 0; y < 5; ++y) {
                for (int x = 0; x < 3; ++x) {
                    if (glyph->rows[y] & (1 << (2 - x))) {
                        put_pixel(img, cx + x, py0 + 1 + y, 240, 240, 240);
                    }
                }
            }
        }
        cx += glyph_w;
    }
}

}  // namespace

RasterImage draw_detections(const RasterImage& image,
                            const std::vector<Detection>& detections, double tau) {
    RasterImage out = image;
    for (const auto& d : detections) {
        const bool solid = d.confidence >= tau;
        if (solid) {
            stroke_rect(out, d.bbox, false, 0, 200, 0);
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%.2f", d.confidence);
            draw_label(out, d.bbox, buf);
        } else {
            stroke_rect(out, d.bbox, true, 235, 170, 0);
        }
    }
    return out;
}

// --- gallery -------------------------------------------------------------------

namespace {

std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string slug(const std::string& s) {
    std::string out;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
        out += ok ? c : '_';
    }
    return out;
}

std::string percent(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", rate * 100.0);
    return buf;
}

std::string fixed3(double v) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("short write to " + path.string());
}

std::vector<OutcomeRecord> load_records(const fs::path& run_dir) {
    const fs::path path = run_dir / "records.jsonl";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<OutcomeRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json_line(line));
    }
    return records;
}

json load_summary_json(const fs::path& run_dir) {
    const fs::path path = run_dir / "summary.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw IoError(path.string() + " is not valid JSON");
    return j;
}

double run_tau(const json& summary) {
    if (summary.contains("metadata") && summary["metadata"].contains("tau")) {
        return std::stod(summary["metadata"]["tau"].get<std::string>());
    }
    return 0.40;
}

const char* kStyle = R"(
  body { font-family: sans-serif; margin: 1.5em; background: #fafafa; color: #222; }
  h1 { font-size: 1.4em; } h2 { font-size: 1.15em; margin-top: 1.6em; }
  table.stats { border-collapse: collapse; margin: 0.8em 0; }
  table.stats td, table.stats th { border: 1px solid #ccc; padding: 0.25em 0.6em; text-align: left; }
  .row { display: flex; gap: 10px; margin: 0.9em 0; padding: 0.6em; background: #fff;
         border: 1px solid #ddd; align-items: flex-start; }
  .cell { flex: 0 1 auto; max-width: 31%; }
  .cell img { max-width: 100%; image-rendering: pixelated; border: 1px solid #bbb; }
  .cell .cap { font-size: 0.75em; color: #555; margin-top: 2px; }
  .meta { flex: 1 1 8em; font-size: 0.85em; }
  .badge { display: inline-block; padding: 1px 7px; border-radius: 3px; font-size: 0.78em;
           font-weight: bold; margin-right: 4px; color: #fff; }
  .flip { background: #c62828; } .spurious { background: #ef6c00; }
  .kept { background: #2e7d32; } .failed { background: #555; }
  .missing { width: 96px; height: 72px; display: flex; align-items: center; justify-content: center;
             background: #eee; border: 1px dashed #aaa; color: #888; font-size: 0.75em; }
)";

struct GalleryRow {
    const OutcomeRecord* record;
};

std::string condition_of_record(const OutcomeRecord& rec) {
    switch (rec.spec.kind) {
        case PerturbKind::removal: return "removal";
        case PerturbKind::replacement: return "replacement:" + rec.spec.target_class;
        case PerturbKind::background: return "background";
    }
    throw Error("unknown perturbation kind");
}

}  // namespace

GalleryResult render_gallery(const std::string& run_dir, const std::string& output_dir) {
    const fs::path run_path(run_dir);
    const fs::path out_path = output_dir.empty() ? run_path / "gallery"
                                                 : fs::path(output_dir);
    std::error_code ec;
    fs::create_directories(out_path / "overlays", ec);
    if (ec) {
        throw IoError("cannot create " + (out_path / "overlays").string() + ": " +
                      ec.message());
    }

    std::vector<OutcomeRecord> records = load_records(run_path);
    json summary = load_summary_json(run_path);
    const double tau = run_tau(summary);

    GalleryResult result;

    // Condition -> rows, in records.jsonl order (already (image_id, hash) sorted).
    std::map<std::string, std::vector<const OutcomeRecord*>> by_condition;
    for (const auto& rec : records) by_condition[condition_of_record(rec)].push_back(&rec);

    std::string index =
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n"
        "<title>perturbation gallery</title>\n<style>" +
        std::string(kStyle) + "</style></head><body>\n<h1>Perturbation gallery</h1>\n";
    if (summary.contains("metadata")) {
        index += "<table class=\"stats\">\n";
        for (const auto& [key, value] : summary["metadata"].items()) {
            index += "<tr><th>" + html_escape(key) + "</th><td>" +
                     html_escape(value.get<std::string>()) + "</td></tr>\n";
        }
        index += "</table>\n";
    }
    index += "<h2>Conditions</h2>\n<table class=\"stats\">\n"
             "<tr><th>condition</th><th>records</th><th>flips</th><th>flip rate</th>"
             "<th>cd (all)</th><th>page</th></tr>\n";

    for (const auto& [condition, rows] : by_condition) {
        const std::string page_name = slug(condition) + ".html";

        std::vector<OutcomeRecord> live;
        int failed = 0;
        for (const auto* rec : rows) {
            if (rec->failed) ++failed;
            else live.push_back(*rec);
        }
        MetricsSummary stats;
        bool have_stats = false;
        if (!live.empty()) {
            stats = summarize(condition, live, tau);
            have_stats = true;
        }

        std::string page =
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n<title>" +
            html_escape(condition) + "</title>\n<style>" + std::string(kStyle) +
            "</style></head><body>\n<p><a href=\"index.html\">&larr; index</a></p>\n" +
            "<h1>" + html_escape(condition) + "</h1>\n";
        if (have_stats) {
            page += "<table class=\"stats\">"
                    "<tr><th>records</th><th>flips</th><th>flip rate</th>"
                    "<th>cd (all)</th><th>cd (persisting)</th><th>spurious</th>"
                    "<th>failed</th></tr>"
                    "<tr><td>" + std::to_string(stats.n) + "</td><td>" +
                    std::to_string(stats.flips) + "</td><td>" + percent(stats.flip_rate) +
                    "</td><td>" + fixed3(stats.cd.mean) + " &plusmn; " +
                    fixed3(stats.cd.stddev) + "</td><td>" +
                    fixed3(stats.cd.persisting_mean) + " &plusmn; " +
                    fixed3(stats.cd.persisting_stddev) + "</td><td>" +
                    std::to_string(stats.spurious_candidates) + "</td><td>" +
                    std::to_string(failed) + "</td></tr></table>\n";
        }
        if (have_stats && !stats.plausibility.unjudged &&
            (stats.plausibility.plausible || stats.plausibility.implausible)) {
            page += "<p>plausibility: " + std::to_string(stats.plausibility.plausible) +
                    " plausible (" + std::to_string(stats.plausibility.plausible_flips) +
                    " flips), " + std::to_string(stats.plausibility.implausible) +
                    " implausible (" +
                    std::to_string(stats.plausibility.implausible_flips) + " flips)</p>\n";
        }

        // Background rows group by environment with per-group rate headers.
        const bool grouped = have_stats && !stats.per_environment.empty();
        std::string current_env;

        auto emit_row = [&](const OutcomeRecord& rec) {
            const fs::path art_dir = run_path / rec.image_id / rec.spec.spec_hash;
            page += "<div class=\"row\">\n";

            auto cell = [&](const fs::path& src, const std::string& caption) {
                const std::string rel =
                    fs::proximate(src, out_path, ec).generic_string();
                page += "<div class=\"cell\"><img src=\"" + html_escape(rel) +
                        "\" alt=\"" + html_escape(caption) + "\"><div class=\"cap\">" +
                        html_escape(caption) + "</div></div>\n";
            };
            auto missing_cell = [&](const std::string& caption, const fs::path& src) {
                page += "<div class=\"cell\"><div class=\"missing\">missing</div>"
                        "<div class=\"cap\">" + html_escape(caption) + "</div></div>\n";
                result.warnings.push_back("missing artifact: " + src.string() +
                                          " (image " + rec.image_id + ", spec " +
                                          rec.spec.spec_hash + ")");
            };

            const std::string base = rec.image_id + "_" + rec.spec.spec_hash;
            // Column 1: original with pre-detections overlaid.
            const fs::path original = art_dir / "original.png";
            if (fs::exists(original)) {
                RasterImage img = read_image(original.string());
                RasterImage overlay = draw_detections(img, rec.pre_detections, tau);
                const fs::path dst = out_path / "overlays" / (base + "_pre.png");
                write_image(overlay, dst.string());
                cell(dst, "original + detections");
            } else {
                missing_cell("original + detections", original);
            }
            // Column 2: the edit mask.
            const fs::path mask = art_dir / "mask.png";
            if (fs::exists(mask)) cell(mask, "mask");
            else missing_cell("mask", mask);
            // Column 3: perturbed with post-detections overlaid.
            const fs::path perturbed = art_dir / "perturbed.png";
            if (fs::exists(perturbed)) {
                RasterImage img = read_image(perturbed.string());
                RasterImage overlay = draw_detections(img, rec.post_detections, tau);
                const fs::path dst = out_path / "overlays" / (base + "_post.png");
                write_image(overlay, dst.string());
                cell(dst, "perturbed + detections");
            } else {
                missing_cell("perturbed + detections", perturbed);
            }

            page += "<div class=\"meta\">";
            if (rec.failed) {
                page += "<span class=\"badge failed\">FAILED</span>";
            } else if (rec.post_count_tau == 0) {
                page += "<span class=\"badge flip\">FLIP</span>";
            } else {
                page += "<span class=\"badge kept\">KEPT</span>";
            }
            if (!rec.failed && rec.post_count_tau > rec.pre_count_tau) {
                page += "<span class=\"badge spurious\">SPURIOUS</span>";
            }
            page += "<br>" + html_escape(rec.image_id) + "<br>spec " +
                    html_escape(rec.spec.spec_hash) + "<br>pre " +
                    fixed3(rec.pre_top_tau) + " (" + std::to_string(rec.pre_count_tau) +
                    " det)<br>post " + fixed3(rec.post_top_tau) + " (" +
                    std::to_string(rec.post_count_tau) + " det)";
            if (rec.plausibility != Plausibility::unjudged) {
                page += "<br>judged " + to_string(rec.plausibility);
            }
            if (rec.failed) page += "<br>" + html_escape(rec.fail_reason);
            page += "</div>\n</div>\n";
        };

        if (grouped) {
            // Stable order: environment name, then record order.
            std::vector<const OutcomeRecord*> ordered(rows.begin(), rows.end());
            std::stable_sort(ordered.begin(), ordered.end(),
                             [](const OutcomeRecord* a, const OutcomeRecord* b) {
                                 return a->spec.environment < b->spec.environment;
                             });
            for (const auto* rec : ordered) {
                if (rec->spec.environment != current_env) {
                    current_env = rec->spec.environment;
                    auto it = stats.per_environment.find(current_env);
                    page += "<h2>" + html_escape(current_env);
                    if (it != stats.per_environment.end()) {
                        page += " &mdash; " + std::to_string(it->second.flips) + "/" +
                                std::to_string(it->second.n) + " flips (" +
                                percent(it->second.flip_rate) + ")";
                    }
                    page += "</h2>\n";
                }
                emit_row(*rec);
            }
        } else {
            for (const auto* rec : rows) emit_row(*rec);
        }

        page += "</body></html>\n";
        const fs::path page_path = out_path / page_name;
        write_file(page_path, page);
        result.condition_pages.push_back(page_path.string());

        index += "<tr><td><a href=\"" + page_name + "\">" + html_escape(condition) +
                 "</a></td><td>" + std::to_string(static_cast<int>(rows.size())) +
                 "</td><td>" + (have_stats ? std::to_string(stats.flips) : "-") +
                 "</td><td>" + (have_stats ? percent(stats.flip_rate) : "-") +
                 "</td><td>" + (have_stats ? fixed3(stats.cd.mean) : "-") +
                 "</td><td><a href=\"" + page_name + "\">" + page_name +
                 "</a></td></tr>\n";
    }

    index += "</table>\n";
    if (by_condition.empty()) index += "<p>No records.</p>\n";
    if (!result.warnings.empty()) {
        index += "<h2>Warnings</h2>\n<ul>\n";
        for (const auto& w : result.warnings) {
            index += "<li>" + html_escape(w) + "</li>\n";
        }
        index += "</ul>\n";
    }
    index += "</body></html>\n";

    const fs::path index_path = out_path / "index.html";
    write_file(index_path, index);
    result.index_path = index_path.string();
    return result;
}

// --- annotation import -----------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace

AnnotationImportResult import_annotations(const std::string& csv_path,
                                          const std::string& run_dir) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open annotations file " + csv_path);

    const fs::path run_path(run_dir);
    std::vector<OutcomeRecord> records = load_records(run_path);
    std::map<std::pair<std::string, std::string>, std::size_t> by_key;
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_key[{records[i].image_id, records[i].spec.spec_hash}] = i;
    }

    AnnotationImportResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (line_no == 1 && fields.size() >= 1 && fields[0] == "image_id") {
            continue;  // header row
        }
        if (fields.size() != 3) {
            throw ConfigError("annotations row " + std::to_string(line_no) +
                              ": expected 3 columns (image_id,spec_hash,plausibility), got " +
                              std::to_string(fields.size()));
        }
        auto it = by_key.find({fields[0], fields[1]});
        if (it == by_key.end()) {
            throw ConfigError("annotations row " + std::to_string(line_no) +
                              ": no record for image \"" + fields[0] + "\" spec \"" +
                              fields[1] + "\"");
        }
        Plausibility p;
        try {
            p = plausibility_from_string(fields[2]);
        } catch (const ConfigError&) {
            throw ConfigError("annotations row " + std::to_string(line_no) +
                              ": invalid plausibility \"" + fields[2] + "\"");
        }
        records[it->second].plausibility = p;
        ++result.updated;
    }

    // Rewrite records and refresh the summaries with the new breakdown.
    std::string lines;
    for (const auto& rec : records) lines += record_to_json_line(rec) + "\n";
    write_file(run_path / "records.jsonl", lines);

    json old_summary = load_summary_json(run_path);
    const double tau = run_tau(old_summary);
    std::map<std::string, std::string> metadata;
    if (old_summary.contains("metadata")) {
        for (const auto& [key, value] : old_summary["metadata"].items()) {
            metadata[key] = value.get<std::string>();
        }
    }
    std::map<std::string, std::vector<OutcomeRecord>> by_condition;
    for (const auto& rec : records) {
        if (rec.failed) continue;
        by_condition[condition_of_record(rec)].push_back(rec);
    }
    std::vector<MetricsSummary> summaries;
    for (const auto& [condition, group] : by_condition) {
        summaries.push_back(summarize(condition, group, tau));
    }
    write_file(run_path / "summary.json", summaries_to_json(summaries, metadata));
    write_file(run_path / "summary.csv", summaries_to_csv(summaries));

    result.records = std::move(records);
    return result;
}

}  // namespace perturbex
