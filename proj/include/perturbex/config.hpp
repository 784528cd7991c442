#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perturbex/backends.hpp"
#include "perturbex/perturb.hpp"

namespace perturbex {

/// Sweep grid: parameter name -> list of values (mirrors the inpainting
/// parameter study). Values are free-form JSON scalars serialized as
/// strings; expand_grid interprets them per parameter.
struct SweepGrid {
    std::map<std::string, std::vector<std::string>> values;
    bool empty() const { return values.empty(); }
};

struct RunConfig {
    std::string manifest_path;
    BackendDescriptor detector;
    BackendDescriptor segmenter;
    BackendDescriptor inpainter;
    double tau = 0.40;
    long long seed = 42;
    std::vector<PerturbationSpec> perturbations;
    SweepGrid sweep;
    int workers = 1;
    std::string cache_dir;
    std::string output_dir;
    std::string prompt_overrides_path;

    void validate() const;  // throws ConfigError
};

/// Parse a JSON run config. Relative paths resolve against the config
/// file's directory. A background spec with an "environments" list (or
/// "all") fans out into one spec per environment.
RunConfig load_run_config(const std::string& path);

/// Optional CLI-side field overrides; flags beat config-file values.
struct ConfigOverrides {
    std::optional<std::string> manifest_path;
    std::optional<double> tau;
    std::optional<long long> seed;
    std::optional<int> workers;
    std::optional<std::string> mask_mode;  // applied to every spec
    std::optional<std::string> cache_dir;
    std::optional<std::string> output_dir;
};

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides);

/// Canonical JSON echo of the effective config (what lands in
/// output_dir/effective_config.json).
std::string config_to_json(const RunConfig& config);

}  // namespace perturbex
