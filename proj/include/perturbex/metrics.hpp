#pragma once

#include <map>
#include <string>
#include <vector>

#include "perturbex/core.hpp"
#include "perturbex/perturb.hpp"

namespace perturbex {

enum class Plausibility { unjudged, plausible, implausible };

std::string to_string(Plausibility p);
Plausibility plausibility_from_string(const std::string& name);

/// Compact spec identity carried by every record.
struct SpecSummary {
    std::string spec_hash;
    PerturbKind kind = PerturbKind::removal;
    std::string target_class;
    std::string environment;
    MaskMode mask_mode = MaskMode::segmentation;
};

/// Pre/post detector outcome for one (image, perturbation) pair. The
/// *_tau fields are derived at the run threshold and re-derivable from the
/// raw detection lists at any other threshold.
struct OutcomeRecord {
    std::string image_id;
    SpecSummary spec;
    std::vector<Detection> pre_detections;
    std::vector<Detection> post_detections;
    double pre_top_tau = 0.0;   // s_i at tau: top confidence if >= tau, else 0
    double post_top_tau = 0.0;  // s'_i at tau
    int pre_count_tau = 0;
    int post_count_tau = 0;     // n'_i
    Plausibility plausibility = Plausibility::unjudged;
    bool failed = false;
    std::string fail_reason;
};

OutcomeRecord make_outcome_record(std::string image_id, SpecSummary spec,
                                  std::vector<Detection> pre,
                                  std::vector<Detection> post, double tau);

/// Top confidence if it meets tau, else 0. Empty list -> 0.
double thresholded_top_confidence(const std::vector<Detection>& detections,
                                  double tau);

int count_above_threshold(const std::vector<Detection>& detections, double tau);

/// Fraction of records whose post-perturbation detections vanished at tau:
/// (1/N) * sum 1{n'_i == 0}. Records must be non-empty.
double flip_rate(const std::vector<OutcomeRecord>& records, double tau);

int flip_count(const std::vector<OutcomeRecord>& records, double tau);

/// Confidence drop over thresholded top confidences. mean/stddev run over
/// all N records (the definition); the persisting_* companions condition on
/// records that kept a detection, surfacing the other common reading.
/// Stddev is population (divide by N).
struct CdStats {
    double mean = 0.0;
    double stddev = 0.0;
    double persisting_mean = 0.0;
    double persisting_stddev = 0.0;
    int persisting_count = 0;
};

CdStats confidence_drop(const std::vector<OutcomeRecord>& records, double tau);

/// mean/stddev of post_top_tau over records with post_count_tau > 0.
/// count 0 leaves the stats NaN (serialized as null).
struct PersistingStats {
    int count = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

PersistingStats persisting_stats(const std::vector<OutcomeRecord>& records,
                                 double tau);

struct EnvStats {
    int n = 0;
    int flips = 0;
    double flip_rate = 0.0;
};

/// Group by environment label. Throws ConfigError if any record lacks one.
std::map<std::string, EnvStats> per_environment_breakdown(
    const std::vector<OutcomeRecord>& records, double tau);

/// post_count - pre_count at tau; positive values flag spurious-detection
/// candidates.
int detection_count_delta(const OutcomeRecord& record, double tau);

struct PlausibilityBreakdown {
    int plausible = 0;
    int implausible = 0;
    int unjudged = 0;
    int plausible_flips = 0;
    int implausible_flips = 0;
};

PlausibilityBreakdown plausibility_breakdown(
    const std::vector<OutcomeRecord>& records, double tau);

/// Everything reported for one perturbation condition.
struct MetricsSummary {
    std::string condition;
    double tau = 0.0;
    int n = 0;
    int flips = 0;
    double flip_rate = 0.0;
    CdStats cd;
    PersistingStats persisting;
    double pre_top_mean = 0.0;   // mean/std of s_i over all N
    double pre_top_stddev = 0.0;
    double post_top_mean = 0.0;  // mean/std of s'_i over all N
    double post_top_stddev = 0.0;
    int spurious_candidates = 0;  // records with positive count delta
    std::map<std::string, EnvStats> per_environment;  // background runs only
    PlausibilityBreakdown plausibility;
    bool has_plausibility = false;
};

/// Aggregate one condition's records (failed records must be filtered out by
/// the caller). Attaches the per-environment breakdown when every record
/// carries an environment label.
MetricsSummary summarize(const std::string& condition,
                         const std::vector<OutcomeRecord>& records, double tau);

// JSON/CSV serialization. JSON is canonical (sorted keys, round-trip floats)
// so identical inputs produce identical bytes.
std::string record_to_json_line(const OutcomeRecord& record);
OutcomeRecord record_from_json_line(const std::string& line);
std::string summaries_to_json(const std::vector<MetricsSummary>& summaries,
                              const std::map<std::string, std::string>& metadata);
std::string summaries_to_csv(const std::vector<MetricsSummary>& summaries);

}  // namespace perturbex
