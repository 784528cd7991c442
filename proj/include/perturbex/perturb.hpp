#pragma once

#include <optional>
#include <string>
#include <vector>

#include "perturbex/backends.hpp"
#include "perturbex/core.hpp"
#include "perturbex/maskops.hpp"
#include "perturbex/prompts.hpp"

namespace perturbex {

enum class PerturbKind { removal, replacement, background };
enum class MaskMode { segmentation, bbox };

std::string to_string(PerturbKind kind);
PerturbKind perturb_kind_from_string(const std::string& name);
std::string to_string(MaskMode mode);
MaskMode mask_mode_from_string(const std::string& name);

/// union = one mask ORed over every above-threshold detection;
/// per_detection = exactly one detection's mask (index into the
/// confidence-sorted above-threshold list).
struct MaskScope {
    bool per_detection = false;
    int index = 0;

    bool operator==(const MaskScope&) const = default;
};

/// One planned edit. Defaults follow the pipeline conventions: removal and
/// replacement edit through hard masks (pad 0, feather 0); background
/// replacement pads 3 px and feathers at radius 1 for clean composite
/// boundaries.
struct PerturbationSpec {
    PerturbKind kind = PerturbKind::removal;
    std::string target_class;  // replacement only
    std::string environment;   // background only
    MaskMode mask_mode = MaskMode::segmentation;
    MaskScope scope;
    int pad_px = 0;
    double feather_radius = 0.0;
    InpaintParams params;

    static PerturbationSpec removal();
    static PerturbationSpec replacement(const std::string& target_class);
    static PerturbationSpec background(const std::string& environment);
};

/// Stable content hash of a spec (12 hex chars); keys artifact directories.
std::string spec_hash(const PerturbationSpec& spec);

/// Condition label used when grouping records into summaries:
/// "removal", "replacement:<target>", "background".
std::string condition_key(const PerturbationSpec& spec);

struct EditMask {
    BinaryMask binary;  // threshold(feather(pad(raw)), 0.5), sent to the inpainter
    SoftMask soft;      // feather(pad(raw)), retained for compositing
    std::vector<Detection> used;  // detections that produced the mask
};

struct EditMaskResult {
    std::optional<EditMask> mask;
    std::string skip_reason;  // set when not applicable (no above-tau detections, ...)
};

/// Build the edit region for one spec. Segmentation mode consults the
/// segmenter; bbox mode rasterizes detector boxes directly. Images with no
/// above-tau detections come back not-applicable rather than erroring, so
/// the runner can record them as exclusions.
EditMaskResult build_edit_mask(const std::vector<Detection>& detections,
                               const PerturbationSpec& spec, Segmenter* segmenter,
                               const RasterImage& image, double tau);

struct PerturbedImage {
    RasterImage image;
    BinaryMask edit_mask;
    SoftMask alpha;
    std::string positive_prompt;
    std::string negative_prompt;
};

/// Uniform mid-gray canvas used as the seed for background generation.
RasterImage blank_canvas(int width, int height);

// The three interventions, taking a prebuilt edit mask so the runner can
// time and cache mask construction separately.

PerturbedImage apply_removal(const RasterImage& image, const EditMask& edit,
                             const PerturbationSpec& spec, Inpainter& inpainter,
                             ModelFamily family, const PromptRegistry& prompts);

PerturbedImage apply_replacement(const RasterImage& image, const EditMask& edit,
                                 const PerturbationSpec& spec, Inpainter& inpainter,
                                 ModelFamily family, const PromptRegistry& prompts);

/// Generates a fresh scene on a blank canvas and composites the original
/// foreground back over it through the soft alpha.
PerturbedImage apply_background(const RasterImage& image, const EditMask& edit,
                                const PerturbationSpec& spec, Inpainter& inpainter,
                                ModelFamily family, const PromptRegistry& prompts);

/// Background generation half of apply_background, exposed so the runner
/// can time inpainting and compositing as separate phases.
RasterImage generate_background(int width, int height, const std::string& environment,
                                const PerturbationSpec& spec, Inpainter& inpainter,
                                ModelFamily family, const PromptRegistry& prompts);

/// Convenience wrapper: build the mask and apply the spec in one step.
/// nullopt when the image is not applicable for this spec.
std::optional<PerturbedImage> apply_perturbation(
    const RasterImage& image, const std::vector<Detection>& detections,
    const PerturbationSpec& spec, Segmenter* segmenter, Inpainter& inpainter,
    ModelFamily family, const PromptRegistry& prompts, double tau);

}  // namespace perturbex
