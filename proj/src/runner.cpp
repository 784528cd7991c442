#include "perturbex/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "perturbex/cache.hpp"
#include "perturbex/image_io.hpp"
#include "perturbex/util.hpp"

namespace fs = std::filesystem;

namespace perturbex {

using nlohmann::json;

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::detect: return "detect";
        case Phase::mask: return "mask";
        case Phase::inpaint: return "inpaint";
        case Phase::redetect: return "redetect";
        case Phase::composite: return "composite";
    }
    throw Error("unknown phase");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Per-box content-addressed caching over an inner segmenter. Keys cover the
/// model identity, the exact pixels, and the box, so a hit can only ever
/// return what the backend would have produced.
class CachingSegmenter : public Segmenter {
public:
    CachingSegmenter(Segmenter& inner, ContentCache* cache)
        : inner_(inner), cache_(cache) {}

    std::vector<BinaryMask> segment(const RasterImage& image,
                                    const std::vector<BBox>& boxes) override {
        if (cache_ == nullptr) return inner_.segment(image, boxes);
        const std::string image_sum =
            sha256_hex(image.pixels.data(), image.pixels.size());
        std::vector<BinaryMask> masks;
        masks.reserve(boxes.size());
        for (const auto& box : boxes) {
            std::string material = "segment/v1\n" + inner_.model_id() + "\n" +
                                   std::to_string(image.width) + "x" +
                                   std::to_string(image.height) + "\n" + image_sum +
                                   "\n" + std::to_string(box.x) + "," +
                                   std::to_string(box.y) + "," + std::to_string(box.w) +
                                   "," + std::to_string(box.h);
            auto bytes = cache_->get_or_compute(ContentCache::key_of(material), [&] {
                auto one = inner_.segment(image, {box});
                if (one.size() != 1) {
                    throw BackendError("segmenter returned " + std::to_string(one.size()) +
                                       " masks for one box");
                }
                return encode_mask_png(one[0]);
            });
            masks.push_back(decode_mask_png(bytes));
        }
        return masks;
    }

    std::string model_id() const override { return inner_.model_id(); }

private:
    Segmenter& inner_;
    ContentCache* cache_;
};

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("short write to " + path.string());
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string condition_of(const SpecSummary& spec) {
    switch (spec.kind) {
        case PerturbKind::removal: return "removal";
        case PerturbKind::replacement: return "replacement:" + spec.target_class;
        case PerturbKind::background: return "background";
    }
    throw Error("unknown perturbation kind");
}

SpecSummary summarize_spec(const PerturbationSpec& spec) {
    SpecSummary s;
    s.spec_hash = spec_hash(spec);
    s.kind = spec.kind;
    s.target_class = spec.target_class;
    s.environment = spec.environment;
    s.mask_mode = spec.mask_mode;
    return s;
}

struct ImageSlot {
    std::vector<OutcomeRecord> records;
    std::vector<Exclusion> exclusions;
    std::vector<PhaseTiming> timings;
    int failed = 0;
};

struct RunContext {
    const RunConfig& config;
    std::unique_ptr<Detector> detector;
    std::unique_ptr<Segmenter> segmenter_backend;
    std::unique_ptr<Segmenter> segmenter;  // caching wrapper or passthrough
    std::unique_ptr<Inpainter> inpainter;
    std::unique_ptr<ContentCache> cache;
    PromptRegistry prompts;
    std::vector<std::string> spec_hashes;
};

void bootstrap_backends(RunContext& ctx) {
    const RunConfig& config = ctx.config;
    ctx.detector = make_detector(config.detector);
    ctx.segmenter_backend = make_segmenter(config.segmenter);
    ctx.inpainter = make_inpainter(config.inpainter);
    for (const auto* desc : {&config.detector, &config.segmenter, &config.inpainter}) {
        if (desc->endpoint.rfind("http", 0) == 0) {
            HealthStatus st = healthcheck(*desc);
            if (!st.reachable) {
                throw BackendError(to_string(desc->kind) + " backend " + desc->endpoint +
                                   " is not healthy: " + st.cause);
            }
        }
    }
    if (!config.cache_dir.empty()) {
        ctx.cache = std::make_unique<ContentCache>(config.cache_dir);
    }
    ctx.segmenter =
        std::make_unique<CachingSegmenter>(*ctx.segmenter_backend, ctx.cache.get());
    if (!config.prompt_overrides_path.empty()) {
        ctx.prompts = PromptRegistry::with_overrides_file(config.prompt_overrides_path);
    }
    for (const auto& spec : config.perturbations) {
        ctx.spec_hashes.push_back(spec_hash(spec));
    }
}

void process_image(RunContext& ctx, const ManifestEntry& entry, ImageSlot& slot) {
    const RunConfig& config = ctx.config;
    const ModelFamily family = config.inpainter.model_family;
    const MaskMode detect_mode = config.perturbations.empty()
                                     ? MaskMode::segmentation
                                     : config.perturbations.front().mask_mode;

    RasterImage image;
    try {
        image = read_image(entry.path);
    } catch (const std::exception& e) {
        for (std::size_t s = 0; s < config.perturbations.size(); ++s) {
            slot.exclusions.push_back(
                {entry.image_id, "spec " + ctx.spec_hashes[s] +
                                     ": cannot read image: " + e.what()});
        }
        return;
    }

    std::vector<Detection> pre;
    try {
        auto t0 = Clock::now();
        pre = ctx.detector->detect(image);
        slot.timings.push_back(
            {entry.image_id, Phase::detect, seconds_since(t0), detect_mode});
    } catch (const std::exception& e) {
        for (std::size_t s = 0; s < config.perturbations.size(); ++s) {
            OutcomeRecord rec = make_outcome_record(
                entry.image_id, summarize_spec(config.perturbations[s]), {}, {},
                config.tau);
            rec.failed = true;
            rec.fail_reason = std::string("detect: ") + e.what();
            slot.records.push_back(std::move(rec));
            ++slot.failed;
        }
        return;
    }

    for (std::size_t s = 0; s < config.perturbations.size(); ++s) {
        const PerturbationSpec& spec = config.perturbations[s];
        const std::string& hash = ctx.spec_hashes[s];
        SpecSummary spec_summary = summarize_spec(spec);

        try {
            auto t_mask = Clock::now();
            EditMaskResult mask = build_edit_mask(pre, spec, ctx.segmenter.get(), image,
                                                  config.tau);
            slot.timings.push_back(
                {entry.image_id, Phase::mask, seconds_since(t_mask), spec.mask_mode});
            if (!mask.mask) {
                slot.exclusions.push_back(
                    {entry.image_id, "spec " + hash + " (" + condition_key(spec) +
                                         "): " + mask.skip_reason});
                continue;
            }
            const EditMask& edit = *mask.mask;

            fs::path dir = fs::path(config.output_dir) / entry.image_id / hash;
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
            write_image(image, (dir / "original.png").string());
            write_binary_mask(edit.binary, (dir / "mask.png").string());

            RasterImage perturbed;
            if (spec.kind == PerturbKind::background) {
                auto t_inpaint = Clock::now();
                RasterImage scene =
                    generate_background(image.width, image.height, spec.environment,
                                        spec, *ctx.inpainter, family, ctx.prompts);
                slot.timings.push_back({entry.image_id, Phase::inpaint,
                                        seconds_since(t_inpaint), spec.mask_mode});
                auto t_comp = Clock::now();
                perturbed = composite(image, edit.soft, scene);
                slot.timings.push_back({entry.image_id, Phase::composite,
                                        seconds_since(t_comp), spec.mask_mode});
            } else {
                auto t_inpaint = Clock::now();
                PerturbedImage result =
                    spec.kind == PerturbKind::removal
                        ? apply_removal(image, edit, spec, *ctx.inpainter, family,
                                        ctx.prompts)
                        : apply_replacement(image, edit, spec, *ctx.inpainter, family,
                                            ctx.prompts);
                slot.timings.push_back({entry.image_id, Phase::inpaint,
                                        seconds_since(t_inpaint), spec.mask_mode});
                perturbed = std::move(result.image);
            }
            write_image(perturbed, (dir / "perturbed.png").string());

            auto t_re = Clock::now();
            std::vector<Detection> post = ctx.detector->detect(perturbed);
            slot.timings.push_back(
                {entry.image_id, Phase::redetect, seconds_since(t_re), spec.mask_mode});

            slot.records.push_back(make_outcome_record(entry.image_id, spec_summary, pre,
                                                       post, config.tau));
        } catch (const std::exception& e) {
            OutcomeRecord rec =
                make_outcome_record(entry.image_id, spec_summary, pre, {}, config.tau);
            rec.failed = true;
            rec.fail_reason = e.what();
            slot.records.push_back(std::move(rec));
            ++slot.failed;
        }
    }
}

std::vector<ManifestEntry> sorted_manifest(const std::string& path) {
    DatasetManifest manifest = load_manifest(path);
    std::vector<ManifestEntry> entries = std::move(manifest.entries);
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.image_id < b.image_id;
              });
    return entries;
}

// Bounded pool; each worker claims whole images. Results land in
// preallocated per-image slots, so aggregation order never depends on
// scheduling.
void run_pool(int workers, std::size_t n, const std::function<void(std::size_t)>& work) {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> poisoned{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto loop = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n || poisoned.load()) break;
            try {
                work(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mutex);
                if (!first_error) first_error = std::current_exception();
                poisoned.store(true);
                break;
            }
        }
    };

    int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    std::vector<std::thread> threads;
    threads.reserve(count);
    for (int i = 0; i < count; ++i) threads.emplace_back(loop);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string timings_to_csv(const std::vector<PhaseTiming>& timings) {
    std::string out = "image_id,phase,wall_seconds,mask_mode\n";
    for (const auto& t : timings) {
        out += csv_quote(t.image_id) + "," + to_string(t.phase) + "," +
               format_double(t.wall_seconds) + "," + to_string(t.mask_mode) + "\n";
    }
    return out;
}

std::string exclusions_to_csv(const std::vector<Exclusion>& exclusions) {
    std::string out = "image_id,reason\n";
    for (const auto& e : exclusions) {
        out += csv_quote(e.image_id) + "," + csv_quote(e.reason) + "\n";
    }
    return out;
}

std::vector<MetricsSummary> summarize_run(const std::vector<OutcomeRecord>& records,
                                          double tau) {
    std::map<std::string, std::vector<OutcomeRecord>> by_condition;
    for (const auto& rec : records) {
        if (rec.failed) continue;
        by_condition[condition_of(rec.spec)].push_back(rec);
    }
    std::vector<MetricsSummary> summaries;
    summaries.reserve(by_condition.size());
    for (const auto& [condition, group] : by_condition) {
        summaries.push_back(summarize(condition, group, tau));
    }
    return summaries;
}

}  // namespace

RunResult run(const RunConfig& config) {
    config.validate();
    if (config.perturbations.empty()) {
        throw ConfigError("run requires at least one perturbation");
    }

    RunContext ctx{config};
    bootstrap_backends(ctx);
    std::vector<ManifestEntry> entries = sorted_manifest(config.manifest_path);

    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) {
        throw IoError("cannot create output dir " + config.output_dir + ": " +
                      ec.message());
    }

    std::vector<ImageSlot> slots(entries.size());
    run_pool(config.workers, entries.size(),
             [&](std::size_t i) { process_image(ctx, entries[i], slots[i]); });

    RunResult result;
    result.output_dir = config.output_dir;
    for (auto& slot : slots) {
        result.records.insert(result.records.end(),
                              std::make_move_iterator(slot.records.begin()),
                              std::make_move_iterator(slot.records.end()));
        result.exclusions.insert(result.exclusions.end(),
                                 std::make_move_iterator(slot.exclusions.begin()),
                                 std::make_move_iterator(slot.exclusions.end()));
        result.timings.insert(result.timings.end(),
                              std::make_move_iterator(slot.timings.begin()),
                              std::make_move_iterator(slot.timings.end()));
        result.failed_records += slot.failed;
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const OutcomeRecord& a, const OutcomeRecord& b) {
                  if (a.image_id != b.image_id) return a.image_id < b.image_id;
                  return a.spec.spec_hash < b.spec.spec_hash;
              });

    result.summaries = summarize_run(result.records, config.tau);

    if (ctx.cache) {
        result.cache_hits = ctx.cache->hits();
        result.cache_misses = ctx.cache->misses();
        result.cache_corruptions = ctx.cache->corruptions();
    }

    std::string lines;
    for (const auto& rec : result.records) lines += record_to_json_line(rec) + "\n";
    write_text_file(fs::path(config.output_dir) / "records.jsonl", lines);

    std::map<std::string, std::string> metadata = {
        {"schema", "1"},
        {"tool", "perturbex 0.1.0"},
        {"tau", format_double(config.tau)},
        {"seed", std::to_string(config.seed)},
        {"images", std::to_string(entries.size())},
        {"records", std::to_string(result.records.size())},
        {"failed_records", std::to_string(result.failed_records)},
        {"exclusions", std::to_string(result.exclusions.size())},
        {"stddev", "population"},
    };
    write_text_file(fs::path(config.output_dir) / "summary.json",
                    summaries_to_json(result.summaries, metadata));
    write_text_file(fs::path(config.output_dir) / "summary.csv",
                    summaries_to_csv(result.summaries));
    write_text_file(fs::path(config.output_dir) / "timings.csv",
                    timings_to_csv(result.timings));
    write_text_file(fs::path(config.output_dir) / "exclusions.csv",
                    exclusions_to_csv(result.exclusions));
    write_text_file(fs::path(config.output_dir) / "effective_config.json",
                    config_to_json(config));
    return result;
}

std::string run_detect_only(const RunConfig& config) {
    config.validate();
    RunContext ctx{config};
    ctx.detector = make_detector(config.detector);
    if (config.detector.endpoint.rfind("http", 0) == 0) {
        HealthStatus st = healthcheck(config.detector);
        if (!st.reachable) {
            throw BackendError("detector backend " + config.detector.endpoint +
                               " is not healthy: " + st.cause);
        }
    }
    std::vector<ManifestEntry> entries = sorted_manifest(config.manifest_path);

    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) {
        throw IoError("cannot create output dir " + config.output_dir + ": " +
                      ec.message());
    }

    std::vector<std::string> lines(entries.size());
    run_pool(config.workers, entries.size(), [&](std::size_t i) {
        RasterImage image = read_image(entries[i].path);
        std::vector<Detection> dets = ctx.detector->detect(image);
        json arr = json::array();
        for (const auto& d : dets) {
            arr.push_back({{"class", d.class_label},
                           {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                           {"confidence", d.confidence}});
        }
        json line = {{"image_id", entries[i].image_id},
                     {"detections", std::move(arr)},
                     {"count_tau", count_above_threshold(dets, config.tau)}};
        lines[i] = line.dump();
    });

    std::string text;
    for (const auto& line : lines) text += line + "\n";
    fs::path path = fs::path(config.output_dir) / "detections.jsonl";
    write_text_file(path, text);
    return path.string();
}

// --- sweeps -------------------------------------------------------------------

namespace {

void apply_sweep_value(InpaintParams& params, const std::string& name,
                       const std::string& value) {
    try {
        if (name == "guidance_scale") {
            params.guidance_scale = std::stod(value);
        } else if (name == "num_inference_steps") {
            params.num_inference_steps = std::stoi(value);
        } else if (name == "strength" || name == "prompt_strength") {
            params.strength = std::stod(value);
        } else if (name == "scheduler") {
            params.scheduler = value;
        } else if (name == "seed") {
            params.seed = std::stoll(value);
        } else if (name == "target_width") {
            params.target_width = std::stoi(value);
        } else if (name == "target_height") {
            params.target_height = std::stoi(value);
        } else {
            throw ConfigError("unknown sweep parameter \"" + name + "\"");
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("sweep parameter \"" + name + "\": bad value \"" + value + "\"");
    } catch (const std::out_of_range&) {
        throw ConfigError("sweep parameter \"" + name + "\": value out of range \"" +
                          value + "\"");
    }
}

// Cartesian product in grid-map key order; values keep their listed order.
std::vector<std::vector<std::pair<std::string, std::string>>> grid_combinations(
    const SweepGrid& grid) {
    std::vector<std::vector<std::pair<std::string, std::string>>> combos = {{}};
    for (const auto& [name, values] : grid.values) {
        if (values.empty()) {
            throw ConfigError("sweep parameter \"" + name + "\" has no values");
        }
        std::vector<std::vector<std::pair<std::string, std::string>>> expanded;
        expanded.reserve(combos.size() * values.size());
        for (const auto& combo : combos) {
            for (const auto& value : values) {
                auto next = combo;
                next.emplace_back(name, value);
                expanded.push_back(std::move(next));
            }
        }
        combos = std::move(expanded);
    }
    return combos;
}

std::string combo_label(const std::vector<std::pair<std::string, std::string>>& combo) {
    if (combo.empty()) return "base";
    std::string label;
    for (const auto& [name, value] : combo) {
        if (!label.empty()) label += "_";
        label += name + "=" + value;
    }
    return label;
}

}  // namespace

std::vector<InpaintParams> expand_grid(const InpaintParams& base, const SweepGrid& grid) {
    std::vector<InpaintParams> out;
    for (const auto& combo : grid_combinations(grid)) {
        InpaintParams params = base;
        for (const auto& [name, value] : combo) apply_sweep_value(params, name, value);
        out.push_back(std::move(params));
    }
    return out;
}

SweepGrid family_sweep_grid(ModelFamily family) {
    SweepGrid grid;
    switch (family) {
        case ModelFamily::stable_diffusion:
            grid.values["guidance_scale"] = {"10", "15", "20"};
            grid.values["num_inference_steps"] = {"50", "100", "250", "500"};
            grid.values["seed"] = {"42", "123"};
            break;
        case ModelFamily::flux:
            grid.values["guidance_scale"] = {"10", "15", "20"};
            grid.values["strength"] = {"0.5", "0.75", "1.0"};
            grid.values["num_inference_steps"] = {"30", "40", "50"};
            grid.values["seed"] = {"42", "123"};
            break;
        case ModelFamily::sdxl:
            grid.values["guidance_scale"] = {"25", "35", "50"};
            grid.values["num_inference_steps"] = {"20", "40", "100", "250", "500"};
            grid.values["prompt_strength"] = {"0.5", "0.75", "1.0"};
            grid.values["seed"] = {"42", "123"};
            break;
        case ModelFamily::lama:
            grid.values["seed"] = {"42", "123"};
            break;
    }
    return grid;
}

InpaintParams family_default_params(ModelFamily family) {
    InpaintParams p;
    switch (family) {
        case ModelFamily::stable_diffusion:
            p.target_width = 512;
            p.target_height = 512;
            p.scheduler = "DPMSolverMultistep";
            break;
        case ModelFamily::sdxl:
            p.target_width = 1024;
            p.target_height = 1024;
            p.scheduler = "K_EULER";
            break;
        case ModelFamily::flux:
            p.target_width = 1024;
            p.target_height = 1024;
            p.scheduler = "";  // built-in flow scheduler
            break;
        case ModelFamily::lama:
            p.target_width = 0;  // native resolution
            p.target_height = 0;
            p.scheduler = "";
            break;
    }
    return p;
}

std::vector<SweepEntry> expand_sweep(const RunConfig& config) {
    SweepGrid grid = config.sweep.empty()
                         ? family_sweep_grid(config.inpainter.model_family)
                         : config.sweep;
    InpaintParams base = config.perturbations.empty() ? InpaintParams{}
                                                      : config.perturbations.front().params;
    std::vector<SweepEntry> entries;
    for (const auto& combo : grid_combinations(grid)) {
        SweepEntry entry;
        entry.params = base;
        for (const auto& [name, value] : combo) {
            apply_sweep_value(entry.params, name, value);
        }
        entry.label = combo_label(combo);
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<RunResult> sweep(const RunConfig& config) {
    config.validate();
    if (config.perturbations.empty()) {
        throw ConfigError("sweep requires at least one perturbation");
    }
    SweepGrid grid = config.sweep.empty()
                         ? family_sweep_grid(config.inpainter.model_family)
                         : config.sweep;

    std::vector<RunResult> results;
    for (const auto& combo : grid_combinations(grid)) {
        RunConfig sub = config;
        sub.sweep = SweepGrid{};
        sub.output_dir =
            (fs::path(config.output_dir) / "sweep" / combo_label(combo)).string();
        for (auto& spec : sub.perturbations) {
            for (const auto& [name, value] : combo) {
                apply_sweep_value(spec.params, name, value);
            }
        }
        results.push_back(run(sub));
    }
    return results;
}

// --- mask-mode comparison ------------------------------------------------------

namespace {

ModeTiming mode_timing(const RunResult& result) {
    // Per-image totals first, then the mean across images, so a missing phase
    // on one image (an exclusion) weighs as zero rather than being skipped.
    std::map<std::string, std::map<Phase, double>> per_image;
    for (const auto& t : result.timings) {
        per_image[t.image_id][t.phase] += t.wall_seconds;
    }
    ModeTiming mt;
    if (per_image.empty()) return mt;
    for (const auto& [id, phases] : per_image) {
        double total = 0.0;
        for (const auto& [phase, secs] : phases) {
            mt.phase_mean_s[phase] += secs;
            total += secs;
        }
        mt.total_mean_s += total;
    }
    const double n = static_cast<double>(per_image.size());
    for (auto& [phase, secs] : mt.phase_mean_s) secs /= n;
    mt.total_mean_s /= n;
    return mt;
}

json mode_timing_to_json(const ModeTiming& mt) {
    json phases = json::object();
    for (const auto& [phase, secs] : mt.phase_mean_s) {
        phases[to_string(phase)] = secs;
    }
    return json{{"phase_mean_s", std::move(phases)}, {"total_mean_s", mt.total_mean_s}};
}

}  // namespace

MaskModeReport compare_mask_modes(const RunConfig& config) {
    config.validate();

    std::string replacement_target = "boat";
    for (const auto& spec : config.perturbations) {
        if (spec.kind == PerturbKind::replacement && !spec.target_class.empty()) {
            replacement_target = spec.target_class;
            break;
        }
    }
    InpaintParams params = config.perturbations.empty()
                               ? InpaintParams{}
                               : config.perturbations.front().params;

    auto make_run = [&](PerturbKind kind, MaskMode mode, const std::string& name,
                        const std::string& cache_name) {
        RunConfig sub = config;
        sub.sweep = SweepGrid{};
        PerturbationSpec spec = kind == PerturbKind::removal
                                    ? PerturbationSpec::removal()
                                    : PerturbationSpec::replacement(replacement_target);
        spec.mask_mode = mode;
        spec.params = params;
        sub.perturbations = {spec};
        sub.output_dir = (fs::path(config.output_dir) / "compare" / name).string();
        sub.cache_dir = (fs::path(config.output_dir) / "compare" / cache_name).string();
        return run(sub);
    };

    MaskModeReport report;
    // Removal first on a cold cache, then replacement against the cache the
    // removal pass just warmed. Segmentation runs share one cache; bbox runs
    // get their own (never consulted, masks come straight from boxes).
    report.removal_segmentation = mode_timing(
        make_run(PerturbKind::removal, MaskMode::segmentation, "removal_seg", "cache_seg"));
    report.removal_bbox = mode_timing(
        make_run(PerturbKind::removal, MaskMode::bbox, "removal_bbox", "cache_bbox"));
    report.replacement_segmentation = mode_timing(make_run(
        PerturbKind::replacement, MaskMode::segmentation, "replacement_seg", "cache_seg"));
    report.replacement_bbox = mode_timing(make_run(PerturbKind::replacement,
                                                   MaskMode::bbox, "replacement_bbox",
                                                   "cache_bbox"));

    if (report.removal_bbox.total_mean_s > 0.0) {
        report.removal_speedup =
            report.removal_segmentation.total_mean_s / report.removal_bbox.total_mean_s;
    }
    if (report.replacement_bbox.total_mean_s > 0.0) {
        report.cached_replacement_speedup = report.replacement_segmentation.total_mean_s /
                                            report.replacement_bbox.total_mean_s;
    }

    write_text_file(fs::path(config.output_dir) / "mask_mode_comparison.json",
                    mask_mode_report_to_json(report));
    return report;
}

std::string mask_mode_report_to_json(const MaskModeReport& report) {
    json j = {
        {"removal",
         {{"segmentation", mode_timing_to_json(report.removal_segmentation)},
          {"bbox", mode_timing_to_json(report.removal_bbox)},
          {"speedup", report.removal_speedup}}},
        {"replacement_cached",
         {{"segmentation", mode_timing_to_json(report.replacement_segmentation)},
          {"bbox", mode_timing_to_json(report.replacement_bbox)},
          {"speedup", report.cached_replacement_speedup}}},
    };
    return j.dump(2) + "\n";
}

}  // namespace perturbex
