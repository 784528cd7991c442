#include "perturbex/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "perturbex/util.hpp"

namespace fs = std::filesystem;

namespace perturbex {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key \"" + key + "\" in " + where);
        }
    }
}

std::string resolve_path(const std::string& path, const fs::path& base_dir) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (base_dir / p).lexically_normal().string();
}

InpaintParams parse_params(const json& j, const std::string& where,
                           const InpaintParams& defaults) {
    check_keys(j,
               {"guidance_scale", "num_inference_steps", "strength", "scheduler", "seed",
                "target_width", "target_height"},
               where);
    InpaintParams p = defaults;
    p.guidance_scale = j.value("guidance_scale", p.guidance_scale);
    p.num_inference_steps = j.value("num_inference_steps", p.num_inference_steps);
    p.strength = j.value("strength", p.strength);
    p.scheduler = j.value("scheduler", p.scheduler);
    p.seed = j.value("seed", p.seed);
    p.target_width = j.value("target_width", p.target_width);
    p.target_height = j.value("target_height", p.target_height);
    if (p.num_inference_steps <= 0) {
        throw ConfigError(where + ": num_inference_steps must be positive");
    }
    if (p.strength < 0.0 || p.strength > 1.0) {
        throw ConfigError(where + ": strength must be in [0,1]");
    }
    if ((p.target_width > 0) != (p.target_height > 0)) {
        throw ConfigError(where + ": target_width and target_height go together");
    }
    return p;
}

BackendDescriptor parse_backend(const json& j, BackendKind kind,
                                const std::string& where) {
    check_keys(j,
               {"endpoint", "model_family", "max_concurrency", "timeout_s", "max_retries",
                "backoff_s", "simulate_delay_s"},
               where);
    BackendDescriptor d;
    d.kind = kind;
    if (!j.contains("endpoint") || !j.at("endpoint").is_string()) {
        throw ConfigError(where + ": \"endpoint\" (string) is required");
    }
    d.endpoint = j.at("endpoint").get<std::string>();
    if (j.contains("model_family")) {
        d.model_family = model_family_from_string(j.at("model_family").get<std::string>());
    }
    d.max_concurrency = j.value("max_concurrency", d.max_concurrency);
    d.timeout_s = j.value("timeout_s", d.timeout_s);
    d.retry.max_retries = j.value("max_retries", d.retry.max_retries);
    d.retry.backoff_s = j.value("backoff_s", d.retry.backoff_s);
    d.simulate_delay_s = j.value("simulate_delay_s", d.simulate_delay_s);
    if (d.max_concurrency < 1) throw ConfigError(where + ": max_concurrency must be >= 1");
    if (d.timeout_s <= 0) throw ConfigError(where + ": timeout_s must be positive");
    if (d.retry.max_retries < 0) throw ConfigError(where + ": max_retries must be >= 0");
    return d;
}

// One config entry may fan out to several specs (background over a list of
// environments, or "all").
std::vector<PerturbationSpec> parse_perturbation(const json& j, const std::string& where,
                                                 long long run_seed) {
    check_keys(j,
               {"kind", "target_class", "environment", "environments", "mask_mode",
                "scope", "pad_px", "feather_radius", "params"},
               where);
    if (!j.contains("kind")) throw ConfigError(where + ": \"kind\" is required");
    PerturbKind kind = perturb_kind_from_string(j.at("kind").get<std::string>());

    PerturbationSpec base;
    switch (kind) {
        case PerturbKind::removal: base = PerturbationSpec::removal(); break;
        case PerturbKind::replacement:
            if (!j.contains("target_class")) {
                throw ConfigError(where + ": replacement requires \"target_class\"");
            }
            base = PerturbationSpec::replacement(j.at("target_class").get<std::string>());
            break;
        case PerturbKind::background:
            base = PerturbationSpec::background("");
            break;
    }
    if (kind != PerturbKind::replacement && j.contains("target_class")) {
        throw ConfigError(where + ": \"target_class\" only applies to replacement");
    }
    if (kind != PerturbKind::background &&
        (j.contains("environment") || j.contains("environments"))) {
        throw ConfigError(where + ": environments only apply to background");
    }

    if (j.contains("mask_mode")) {
        base.mask_mode = mask_mode_from_string(j.at("mask_mode").get<std::string>());
    }
    if (j.contains("scope")) {
        const json& s = j.at("scope");
        check_keys(s, {"per_detection", "index"}, where + ".scope");
        base.scope.per_detection = s.value("per_detection", false);
        base.scope.index = s.value("index", 0);
        if (base.scope.index < 0) throw ConfigError(where + ": scope.index must be >= 0");
    }
    base.pad_px = j.value("pad_px", base.pad_px);
    base.feather_radius = j.value("feather_radius", base.feather_radius);
    if (base.pad_px < 0) throw ConfigError(where + ": pad_px must be >= 0");
    if (base.feather_radius < 0) {
        throw ConfigError(where + ": feather_radius must be >= 0");
    }
    InpaintParams defaults;
    defaults.seed = run_seed;
    base.params = j.contains("params") ? parse_params(j.at("params"), where + ".params",
                                                      defaults)
                                       : defaults;

    if (kind != PerturbKind::background) return {base};

    // Background fan-out: one spec per environment.
    std::vector<std::string> envs;
    if (j.contains("environment") && j.contains("environments")) {
        throw ConfigError(where + ": give either \"environment\" or \"environments\"");
    }
    if (j.contains("environment")) {
        envs.push_back(j.at("environment").get<std::string>());
    } else if (j.contains("environments")) {
        const json& e = j.at("environments");
        if (e.is_string()) {
            if (e.get<std::string>() != "all") {
                throw ConfigError(where + ": \"environments\" must be a list or \"all\"");
            }
            for (const auto& env : list_environments()) envs.push_back(env.name);
        } else if (e.is_array()) {
            for (const auto& item : e) envs.push_back(item.get<std::string>());
        } else {
            throw ConfigError(where + ": \"environments\" must be a list or \"all\"");
        }
    } else {
        throw ConfigError(where + ": background requires \"environment\" or \"environments\"");
    }
    if (envs.empty()) throw ConfigError(where + ": empty environment list");

    std::set<std::string> known;
    for (const auto& env : list_environments()) known.insert(env.name);
    std::vector<PerturbationSpec> out;
    for (const auto& env : envs) {
        if (!known.count(env)) {
            throw ConfigError(where + ": unknown environment \"" + env + "\"");
        }
        PerturbationSpec spec = base;
        spec.environment = env;
        out.push_back(std::move(spec));
    }
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (manifest_path.empty()) throw ConfigError("manifest path is required");
    if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0,1]");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir is required");
    if (detector.kind != BackendKind::detector ||
        segmenter.kind != BackendKind::segmenter ||
        inpainter.kind != BackendKind::inpainter) {
        throw ConfigError("backend descriptors have mismatched kinds");
    }
    for (std::size_t i = 0; i < perturbations.size(); ++i) {
        const auto& spec = perturbations[i];
        const std::string where = "perturbations[" + std::to_string(i) + "]";
        if (spec.kind == PerturbKind::replacement && spec.target_class.empty()) {
            throw ConfigError(where + ": replacement requires a target class");
        }
        if (spec.kind == PerturbKind::background && spec.environment.empty()) {
            throw ConfigError(where + ": background requires an environment");
        }
    }
    for (const auto& [param, values] : sweep.values) {
        if (values.empty()) {
            throw ConfigError("sweep parameter \"" + param + "\" has no values");
        }
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(j,
               {"manifest", "tau", "seed", "workers", "cache_dir", "output_dir",
                "prompt_overrides", "backends", "perturbations", "sweep"},
               "config");

    const fs::path base_dir = fs::path(path).parent_path();
    RunConfig cfg;
    try {
        if (!j.contains("manifest") || !j.at("manifest").is_string()) {
            throw ConfigError("config: \"manifest\" (string) is required");
        }
        cfg.manifest_path = resolve_path(j.at("manifest").get<std::string>(), base_dir);
        cfg.tau = j.value("tau", cfg.tau);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.workers = j.value("workers", cfg.workers);
        cfg.cache_dir = resolve_path(j.value("cache_dir", ""), base_dir);
        cfg.output_dir = resolve_path(j.value("output_dir", ""), base_dir);
        cfg.prompt_overrides_path =
            resolve_path(j.value("prompt_overrides", ""), base_dir);

        if (!j.contains("backends") || !j.at("backends").is_object()) {
            throw ConfigError("config: \"backends\" (object) is required");
        }
        const json& b = j.at("backends");
        check_keys(b, {"detector", "segmenter", "inpainter"}, "backends");
        for (const char* name : {"detector", "segmenter", "inpainter"}) {
            if (!b.contains(name)) {
                throw ConfigError("backends: \"" + std::string(name) + "\" is required");
            }
        }
        cfg.detector =
            parse_backend(b.at("detector"), BackendKind::detector, "backends.detector");
        cfg.segmenter =
            parse_backend(b.at("segmenter"), BackendKind::segmenter, "backends.segmenter");
        cfg.inpainter =
            parse_backend(b.at("inpainter"), BackendKind::inpainter, "backends.inpainter");

        if (j.contains("perturbations")) {
            const json& specs = j.at("perturbations");
            if (!specs.is_array()) {
                throw ConfigError("config: \"perturbations\" must be an array");
            }
            for (std::size_t i = 0; i < specs.size(); ++i) {
                auto expanded =
                    parse_perturbation(specs.at(i),
                                       "perturbations[" + std::to_string(i) + "]",
                                       cfg.seed);
                cfg.perturbations.insert(cfg.perturbations.end(), expanded.begin(),
                                         expanded.end());
            }
        }

        if (j.contains("sweep")) {
            const json& sweep = j.at("sweep");
            if (!sweep.is_object()) throw ConfigError("config: \"sweep\" must be an object");
            for (const auto& [param, values] : sweep.items()) {
                if (!values.is_array() || values.empty()) {
                    throw ConfigError("sweep parameter \"" + param +
                                      "\" must be a non-empty array");
                }
                std::vector<std::string> list;
                for (const auto& v : values) {
                    list.push_back(v.is_string() ? v.get<std::string>() : v.dump());
                }
                cfg.sweep.values[param] = std::move(list);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }

    cfg.validate();
    return cfg;
}

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides) {
    if (overrides.manifest_path) config.manifest_path = *overrides.manifest_path;
    if (overrides.tau) config.tau = *overrides.tau;
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.workers) config.workers = *overrides.workers;
    if (overrides.cache_dir) config.cache_dir = *overrides.cache_dir;
    if (overrides.output_dir) config.output_dir = *overrides.output_dir;
    if (overrides.mask_mode) {
        MaskMode mode = mask_mode_from_string(*overrides.mask_mode);
        for (auto& spec : config.perturbations) spec.mask_mode = mode;
    }
    config.validate();
}

namespace {

json backend_to_json(const BackendDescriptor& d) {
    return json{{"endpoint", d.endpoint},
                {"model_family", to_string(d.model_family)},
                {"max_concurrency", d.max_concurrency},
                {"timeout_s", d.timeout_s},
                {"max_retries", d.retry.max_retries},
                {"backoff_s", d.retry.backoff_s},
                {"simulate_delay_s", d.simulate_delay_s}};
}

json spec_to_json(const PerturbationSpec& spec) {
    json j = {{"kind", to_string(spec.kind)},
              {"mask_mode", to_string(spec.mask_mode)},
              {"scope",
               {{"per_detection", spec.scope.per_detection}, {"index", spec.scope.index}}},
              {"pad_px", spec.pad_px},
              {"feather_radius", spec.feather_radius},
              {"params",
               {{"guidance_scale", spec.params.guidance_scale},
                {"num_inference_steps", spec.params.num_inference_steps},
                {"strength", spec.params.strength},
                {"scheduler", spec.params.scheduler},
                {"seed", spec.params.seed},
                {"target_width", spec.params.target_width},
                {"target_height", spec.params.target_height}}},
              {"spec_hash", spec_hash(spec)}};
    if (spec.kind == PerturbKind::replacement) j["target_class"] = spec.target_class;
    if (spec.kind == PerturbKind::background) j["environment"] = spec.environment;
    return j;
}

}  // namespace

std::string config_to_json(const RunConfig& config) {
    json j = {{"manifest", config.manifest_path},
              {"tau", config.tau},
              {"seed", config.seed},
              {"workers", config.workers},
              {"cache_dir", config.cache_dir},
              {"output_dir", config.output_dir},
              {"prompt_overrides", config.prompt_overrides_path},
              {"backends",
               {{"detector", backend_to_json(config.detector)},
                {"segmenter", backend_to_json(config.segmenter)},
                {"inpainter", backend_to_json(config.inpainter)}}}};
    json specs = json::array();
    for (const auto& spec : config.perturbations) specs.push_back(spec_to_json(spec));
    j["perturbations"] = std::move(specs);
    json sweep = json::object();
    for (const auto& [param, values] : config.sweep.values) sweep[param] = values;
    j["sweep"] = std::move(sweep);
    return j.dump(2) + "\n";
}

}  // namespace perturbex
