#include "perturbex/prompts.hpp"

#include <fstream>

#include <json.hpp>

using json = nlohmann::json;

namespace perturbex {

std::string to_string(ModelFamily family) {
    switch (family) {
        case ModelFamily::stable_diffusion: return "stable-diffusion";
        case ModelFamily::sdxl: return "sdxl";
        case ModelFamily::flux: return "flux";
        case ModelFamily::lama: return "lama";
    }
    throw Error("unknown model family");
}

ModelFamily model_family_from_string(const std::string& name) {
    if (name == "stable-diffusion") return ModelFamily::stable_diffusion;
    if (name == "sdxl") return ModelFamily::sdxl;
    if (name == "flux") return ModelFamily::flux;
    if (name == "lama") return ModelFamily::lama;
    throw ConfigError("unknown model family: " + name);
}

std::string to_string(PromptPurpose purpose) {
    switch (purpose) {
        case PromptPurpose::removal_positive: return "removal_positive";
        case PromptPurpose::removal_negative: return "removal_negative";
        case PromptPurpose::per_class_negative: return "per_class_negative";
        case PromptPurpose::background_env: return "background_env";
        case PromptPurpose::background_negative: return "background_negative";
    }
    throw Error("unknown prompt purpose");
}

PromptPurpose prompt_purpose_from_string(const std::string& name) {
    if (name == "removal_positive") return PromptPurpose::removal_positive;
    if (name == "removal_negative") return PromptPurpose::removal_negative;
    if (name == "per_class_negative") return PromptPurpose::per_class_negative;
    if (name == "background_env") return PromptPurpose::background_env;
    if (name == "background_negative") return PromptPurpose::background_negative;
    throw ConfigError("unknown prompt purpose: " + name);
}

namespace {

constexpr const char* kSdRemovalPositive =
    "photorealistic natural background scene, seamlessly filled area, consistent "
    "lighting and perspective, no artificial boundaries or seams.";
constexpr const char* kSdRemovalNegative =
    "duplicate, distorted, glitch, blur, shadow, extra limbs, deformed, low quality, "
    "bad anatomy, seams, harsh edges, inconsistent lighting, artifacts, pixelated.";
constexpr const char* kFluxRemovalPositive =
    "natural coherent background environment, perfectly blended inpainting, no "
    "visible artifacts or object remnants, realistic lighting.";
constexpr const char* kSdxlRemovalPositive =
    "clean photorealistic background that flows naturally with the original scene "
    "context, seamless integration, professional quality.";
constexpr const char* kSdxlRemovalNegative =
    "duplicate, distorted, glitch, blur, shadow, extra limbs, deformed, low quality, "
    "bad anatomy, seams, harsh transitions, inconsistent texture, artifacts.";
constexpr const char* kPerClassNegative =
    "<class>, duplicate, distortion, seams, artifacts, low quality.";
constexpr const char* kBackgroundNegative =
    "people, animals, text, logo, watermark, artifacts, distortion, low quality.";

std::string removal_positive_for(ModelFamily family) {
    switch (family) {
        case ModelFamily::stable_diffusion: return kSdRemovalPositive;
        case ModelFamily::flux: return kFluxRemovalPositive;
        case ModelFamily::sdxl: return kSdxlRemovalPositive;
        case ModelFamily::lama: return "";  // lama takes no prompt
    }
    return "";
}

std::string removal_negative_for(ModelFamily family) {
    switch (family) {
        case ModelFamily::stable_diffusion: return kSdRemovalNegative;
        case ModelFamily::sdxl: return kSdxlRemovalNegative;
        case ModelFamily::flux: return "";  // no stock negative for flux removal
        case ModelFamily::lama: return "";
    }
    return "";
}

std::string substitute_class(std::string text, const std::string& class_label) {
    const std::string placeholder = "<class>";
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), class_label);
        pos += class_label.size();
    }
    return text;
}

}  // namespace

const std::vector<EnvironmentPrompt>& list_environments() {
    static const std::vector<EnvironmentPrompt> kEnvironments = {
        {"forest", "dense green forest with tall trees, natural woodland environment."},
        {"mountain", "majestic mountain landscape with rocky peaks and dramatic scenery."},
        {"beach", "tropical beach with white sand and blue ocean waves."},
        {"city", "modern urban cityscape with tall buildings and streets."},
        {"desert", "vast sandy desert with rolling dunes under clear sky."},
        {"countryside", "peaceful rural countryside with green fields and rolling hills."},
        {"garden", "beautiful botanical garden with colorful flowers and lush plants."},
        {"winter", "snowy winter landscape with snow-covered trees and ground."},
        {"tropical", "tropical paradise with palm trees and exotic vegetation."},
        {"rocky", "rugged rocky terrain with dramatic stone formations."},
        {"sunset", "beautiful golden sunset sky with warm dramatic lighting."},
        {"cloudy", "overcast sky with dramatic clouds and soft lighting."},
        {"office", "modern office interior with clean professional environment."},
        {"indoor", "clean indoor environment with neutral lighting."},
        {"studio", "professional photography studio with neutral background."},
    };
    return kEnvironments;
}

PromptRegistry PromptRegistry::with_overrides_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("prompt override file not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("prompt override parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("prompt overrides must be a JSON object");
    PromptRegistry reg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        reg.set_override(prompt_purpose_from_string(it.key()),
                         it.value().get<std::string>());
    }
    return reg;
}

void PromptRegistry::set_override(PromptPurpose purpose, const std::string& text) {
    overrides_[purpose] = text;
}

bool PromptRegistry::is_custom(PromptPurpose purpose) const {
    return overrides_.count(purpose) > 0;
}

std::vector<std::string> PromptRegistry::custom_purposes() const {
    std::vector<std::string> out;
    for (const auto& [purpose, text] : overrides_) {
        out.push_back(to_string(purpose));
    }
    return out;
}

std::string PromptRegistry::resolve(ModelFamily family, PromptPurpose purpose,
                                    const std::string& class_label,
                                    const std::string& environment) const {
    auto it = overrides_.find(purpose);
    switch (purpose) {
        case PromptPurpose::removal_positive:
            if (it != overrides_.end()) return it->second;
            return removal_positive_for(family);
        case PromptPurpose::removal_negative:
            if (it != overrides_.end()) return it->second;
            return removal_negative_for(family);
        case PromptPurpose::per_class_negative: {
            if (class_label.empty()) {
                throw ConfigError("per_class_negative requires a class label");
            }
            std::string tmpl = it != overrides_.end() ? it->second : kPerClassNegative;
            if (family == ModelFamily::lama) return "";
            return substitute_class(tmpl, class_label);
        }
        case PromptPurpose::background_env: {
            if (environment.empty()) {
                throw ConfigError("background_env requires an environment name");
            }
            if (it != overrides_.end()) return it->second;
            if (family == ModelFamily::lama) return "";
            for (const auto& env : list_environments()) {
                if (env.name == environment) return env.description;
            }
            throw ConfigError("unknown environment name: " + environment);
        }
        case PromptPurpose::background_negative:
            if (it != overrides_.end()) return it->second;
            if (family == ModelFamily::lama) return "";
            return kBackgroundNegative;
    }
    throw Error("unknown prompt purpose");
}

PromptPair PromptRegistry::get(ModelFamily family, PromptPurpose purpose,
                               const std::string& class_label,
                               const std::string& environment) const {
    PromptPair pair;
    switch (purpose) {
        case PromptPurpose::removal_positive:
            pair.positive = resolve(family, PromptPurpose::removal_positive, "", "");
            pair.negative = resolve(family, PromptPurpose::removal_negative, "", "");
            break;
        case PromptPurpose::removal_negative:
            pair.negative = resolve(family, PromptPurpose::removal_negative, "", "");
            break;
        case PromptPurpose::per_class_negative:
            pair.negative =
                resolve(family, PromptPurpose::per_class_negative, class_label, "");
            break;
        case PromptPurpose::background_env:
            pair.positive =
                resolve(family, PromptPurpose::background_env, "", environment);
            pair.negative = resolve(family, PromptPurpose::background_negative, "", "");
            break;
        case PromptPurpose::background_negative:
            pair.negative = resolve(family, PromptPurpose::background_negative, "", "");
            break;
    }
    return pair;
}

std::string PromptRegistry::replacement_positive(const std::string& target_class) {
    return "a realistic " + target_class + ", consistent lighting and perspective";
}

}  // namespace perturbex
