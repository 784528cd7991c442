#pragma once

#include <map>
#include <string>
#include <vector>

#include "perturbex/backends.hpp"
#include "perturbex/config.hpp"
#include "perturbex/metrics.hpp"

namespace perturbex {

enum class Phase { detect, mask, inpaint, redetect, composite };

std::string to_string(Phase phase);

struct PhaseTiming {
    std::string image_id;
    Phase phase = Phase::detect;
    double wall_seconds = 0.0;
    MaskMode mask_mode = MaskMode::segmentation;
};

struct Exclusion {
    std::string image_id;
    std::string reason;
};

struct RunResult {
    std::vector<OutcomeRecord> records;  // sorted by (image_id, spec_hash)
    std::vector<Exclusion> exclusions;   // threshold-failing images etc.
    int failed_records = 0;              // backend failures, kept out of metrics
    std::vector<MetricsSummary> summaries;
    std::vector<PhaseTiming> timings;
    std::string output_dir;
    // Mask-cache traffic for this run. Not part of the output tree: counters
    // differ between cold and warm runs, which must stay byte-identical.
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t cache_corruptions = 0;
};

/// Full pipeline: detect -> threshold -> masks (cached) -> perturb ->
/// re-detect -> aggregate. Per-image failures are isolated as failed
/// records; the run itself fails only on config/bootstrap errors. Every
/// artifact lands under output_dir as
/// {image_id}/{spec_hash}/{original|mask|perturbed}.png plus records.jsonl,
/// summary.json, summary.csv, timings.csv, effective_config.json.
RunResult run(const RunConfig& config);

/// Detection pass only; writes detections.jsonl under output_dir.
std::string run_detect_only(const RunConfig& config);

// --- Parameter sweeps -------------------------------------------------------

/// Cartesian expansion of a grid over a base spec's inpaint params.
std::vector<InpaintParams> expand_grid(const InpaintParams& base,
                                       const SweepGrid& grid);

/// The stock per-family parameter study grids (stable-diffusion 24, flux 54,
/// sdxl 90, lama 2 combinations).
SweepGrid family_sweep_grid(ModelFamily family);

/// Model-family conventions: request resolution (512 for stable-diffusion,
/// 1024 for sdxl/flux, native for lama) and default scheduler.
InpaintParams family_default_params(ModelFamily family);

struct SweepEntry {
    InpaintParams params;
    std::string label;  // short param summary, used as the subdir name
};

std::vector<SweepEntry> expand_sweep(const RunConfig& config);

/// One run() per grid combination, each under output_dir/sweep/<label>/.
std::vector<RunResult> sweep(const RunConfig& config);

// --- Mask-mode runtime comparison -------------------------------------------

struct ModeTiming {
    std::map<Phase, double> phase_mean_s;  // mean per-image wall time by phase
    double total_mean_s = 0.0;             // mean per-image total
};

struct MaskModeReport {
    ModeTiming removal_segmentation;
    ModeTiming removal_bbox;
    ModeTiming replacement_segmentation;  // rerun against the warm mask cache
    ModeTiming replacement_bbox;
    double removal_speedup = 0.0;             // seg total / bbox total
    double cached_replacement_speedup = 0.0;  // ~1.0 once masks are cached
};

/// Runs removal under both mask modes (cold cache), then replacement under
/// both modes against the now-warm cache, and reports per-phase means and
/// speedups. Writes mask_mode_comparison.json under output_dir.
MaskModeReport compare_mask_modes(const RunConfig& config);

std::string mask_mode_report_to_json(const MaskModeReport& report);

}  // namespace perturbex
