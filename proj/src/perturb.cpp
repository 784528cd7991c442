#include "perturbex/perturb.hpp"

#include <algorithm>

#include <json.hpp>

#include "perturbex/util.hpp"

namespace perturbex {

using nlohmann::json;

std::string to_string(PerturbKind kind) {
    switch (kind) {
        case PerturbKind::removal: return "removal";
        case PerturbKind::replacement: return "replacement";
        case PerturbKind::background: return "background";
    }
    throw Error("unknown perturbation kind");
}

PerturbKind perturb_kind_from_string(const std::string& name) {
    if (name == "removal") return PerturbKind::removal;
    if (name == "replacement") return PerturbKind::replacement;
    if (name == "background") return PerturbKind::background;
    throw ConfigError("unknown perturbation kind: " + name);
}

std::string to_string(MaskMode mode) {
    switch (mode) {
        case MaskMode::segmentation: return "segmentation";
        case MaskMode::bbox: return "bbox";
    }
    throw Error("unknown mask mode");
}

MaskMode mask_mode_from_string(const std::string& name) {
    if (name == "segmentation") return MaskMode::segmentation;
    if (name == "bbox") return MaskMode::bbox;
    throw ConfigError("unknown mask mode: " + name);
}

PerturbationSpec PerturbationSpec::removal() {
    PerturbationSpec spec;
    spec.kind = PerturbKind::removal;
    return spec;
}

PerturbationSpec PerturbationSpec::replacement(const std::string& target_class) {
    PerturbationSpec spec;
    spec.kind = PerturbKind::replacement;
    spec.target_class = target_class;
    return spec;
}

PerturbationSpec PerturbationSpec::background(const std::string& environment) {
    PerturbationSpec spec;
    spec.kind = PerturbKind::background;
    spec.environment = environment;
    spec.pad_px = 3;
    spec.feather_radius = 1.0;
    return spec;
}

std::string spec_hash(const PerturbationSpec& spec) {
    // nlohmann::json object keys are sorted, so dump() is canonical.
    json j = {
        {"kind", to_string(spec.kind)},
        {"target_class", spec.target_class},
        {"environment", spec.environment},
        {"mask_mode", to_string(spec.mask_mode)},
        {"scope", {{"per_detection", spec.scope.per_detection}, {"index", spec.scope.index}}},
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
    };
    return sha256_hex(j.dump()).substr(0, 12);
}

std::string condition_key(const PerturbationSpec& spec) {
    switch (spec.kind) {
        case PerturbKind::removal: return "removal";
        case PerturbKind::replacement: return "replacement:" + spec.target_class;
        case PerturbKind::background: return "background";
    }
    throw Error("unknown perturbation kind");
}

EditMaskResult build_edit_mask(const std::vector<Detection>& detections,
                               const PerturbationSpec& spec, Segmenter* segmenter,
                               const RasterImage& image, double tau) {
    EditMaskResult result;

    std::vector<Detection> above;
    for (const auto& d : detections) {
        if (d.confidence >= tau) above.push_back(d);
    }
    sort_detections(above);
    if (above.empty()) {
        result.skip_reason = "no detections at confidence >= " + format_double(tau);
        return result;
    }

    std::vector<Detection> used;
    if (spec.scope.per_detection) {
        if (spec.scope.index < 0 || spec.scope.index >= static_cast<int>(above.size())) {
            result.skip_reason = "detection index " + std::to_string(spec.scope.index) +
                                 " out of range (have " + std::to_string(above.size()) +
                                 ")";
            return result;
        }
        used.push_back(above[spec.scope.index]);
    } else {
        used = std::move(above);
    }

    std::vector<BinaryMask> parts;
    parts.reserve(used.size());
    if (spec.mask_mode == MaskMode::segmentation) {
        if (segmenter == nullptr) {
            throw ConfigError("segmentation mask mode requires a segmenter");
        }
        std::vector<BBox> boxes;
        boxes.reserve(used.size());
        for (const auto& d : used) boxes.push_back(d.bbox);
        parts = segmenter->segment(image, boxes);
        if (parts.size() != boxes.size()) {
            throw BackendError("segmenter returned " + std::to_string(parts.size()) +
                               " masks for " + std::to_string(boxes.size()) + " boxes");
        }
        for (const auto& m : parts) {
            if (m.width != image.width || m.height != image.height) {
                throw BackendError("segmenter mask dimensions do not match image");
            }
        }
    } else {
        for (const auto& d : used) {
            parts.push_back(bbox_to_mask(d.bbox, image.width, image.height));
        }
    }

    BinaryMask raw = union_masks(parts);
    if (!raw.any()) {
        result.skip_reason = "edit mask is empty";
        return result;
    }

    EditMask edit;
    edit.soft = feather(pad(raw, spec.pad_px), spec.feather_radius);
    edit.binary = threshold(edit.soft, 0.5);
    edit.used = std::move(used);
    result.mask = std::move(edit);
    return result;
}

RasterImage blank_canvas(int width, int height) {
    return RasterImage::filled(width, height, 128, 128, 128);
}

PerturbedImage apply_removal(const RasterImage& image, const EditMask& edit,
                             const PerturbationSpec& spec, Inpainter& inpainter,
                             ModelFamily family, const PromptRegistry& prompts) {
    PromptPair pair = prompts.get(family, PromptPurpose::removal_positive);
    PerturbedImage out;
    out.image = inpaint_localized(inpainter, image, edit.binary, pair.positive,
                                  pair.negative, spec.params);
    out.edit_mask = edit.binary;
    out.alpha = edit.soft;
    out.positive_prompt = pair.positive;
    out.negative_prompt = pair.negative;
    return out;
}

PerturbedImage apply_replacement(const RasterImage& image, const EditMask& edit,
                                 const PerturbationSpec& spec, Inpainter& inpainter,
                                 ModelFamily family, const PromptRegistry& prompts) {
    if (spec.target_class.empty()) {
        throw ConfigError("replacement requires a target class");
    }
    std::string positive = PromptRegistry::replacement_positive(spec.target_class);
    std::string negative =
        prompts.get(family, PromptPurpose::per_class_negative, spec.target_class).negative;
    PerturbedImage out;
    out.image = inpaint_localized(inpainter, image, edit.binary, positive, negative,
                                  spec.params);
    out.edit_mask = edit.binary;
    out.alpha = edit.soft;
    out.positive_prompt = positive;
    out.negative_prompt = negative;
    return out;
}

RasterImage generate_background(int width, int height, const std::string& environment,
                                const PerturbationSpec& spec, Inpainter& inpainter,
                                ModelFamily family, const PromptRegistry& prompts) {
    PromptPair pair =
        prompts.get(family, PromptPurpose::background_env, "", environment);
    RasterImage canvas = blank_canvas(width, height);
    BinaryMask all = BinaryMask::filled(width, height, true);
    return inpaint_localized(inpainter, canvas, all, pair.positive, pair.negative,
                             spec.params);
}

PerturbedImage apply_background(const RasterImage& image, const EditMask& edit,
                                const PerturbationSpec& spec, Inpainter& inpainter,
                                ModelFamily family, const PromptRegistry& prompts) {
    if (spec.environment.empty()) {
        throw ConfigError("background replacement requires an environment");
    }
    PromptPair pair =
        prompts.get(family, PromptPurpose::background_env, "", spec.environment);
    RasterImage scene = generate_background(image.width, image.height, spec.environment,
                                            spec, inpainter, family, prompts);
    PerturbedImage out;
    out.image = composite(image, edit.soft, scene);
    out.edit_mask = edit.binary;
    out.alpha = edit.soft;
    out.positive_prompt = pair.positive;
    out.negative_prompt = pair.negative;
    return out;
}

std::optional<PerturbedImage> apply_perturbation(
    const RasterImage& image, const std::vector<Detection>& detections,
    const PerturbationSpec& spec, Segmenter* segmenter, Inpainter& inpainter,
    ModelFamily family, const PromptRegistry& prompts, double tau) {
    EditMaskResult mask = build_edit_mask(detections, spec, segmenter, image, tau);
    if (!mask.mask) return std::nullopt;
    switch (spec.kind) {
        case PerturbKind::removal:
            return apply_removal(image, *mask.mask, spec, inpainter, family, prompts);
        case PerturbKind::replacement:
            return apply_replacement(image, *mask.mask, spec, inpainter, family, prompts);
        case PerturbKind::background:
            return apply_background(image, *mask.mask, spec, inpainter, family, prompts);
    }
    throw Error("unknown perturbation kind");
}

}  // namespace perturbex
