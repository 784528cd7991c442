#pragma once

#include <map>
#include <string>
#include <vector>

#include "perturbex/core.hpp"

namespace perturbex {

enum class ModelFamily { stable_diffusion, sdxl, flux, lama };

std::string to_string(ModelFamily family);
ModelFamily model_family_from_string(const std::string& name);

enum class PromptPurpose {
    removal_positive,
    removal_negative,
    per_class_negative,
    background_env,
    background_negative,
};

std::string to_string(PromptPurpose purpose);
PromptPurpose prompt_purpose_from_string(const std::string& name);

struct PromptPair {
    std::string positive;
    std::string negative;
};

struct EnvironmentPrompt {
    std::string name;
    std::string description;
};

/// The 15 background environments in registry order (forest first,
/// studio last).
const std::vector<EnvironmentPrompt>& list_environments();

/// Registry of the verbatim prompt texts, with placeholder substitution and
/// optional per-purpose overrides. Default-constructed, it returns the stock
/// texts; overridden entries are flagged as custom so runs that used them
/// are distinguishable from stock-prompt runs.
class PromptRegistry {
public:
    PromptRegistry() = default;

    /// Load overrides from a JSON file mapping purpose name -> text.
    static PromptRegistry with_overrides_file(const std::string& path);

    void set_override(PromptPurpose purpose, const std::string& text);
    bool is_custom(PromptPurpose purpose) const;
    std::vector<std::string> custom_purposes() const;

    /// Resolve the (positive, negative) pair for one purpose. per_class
    /// negatives require class_label; background_env requires environment.
    /// LaMa takes no prompts and yields empty strings; FLUX removal has no
    /// stock negative and yields an empty negative.
    PromptPair get(ModelFamily family, PromptPurpose purpose,
                   const std::string& class_label = "",
                   const std::string& environment = "") const;

    /// Replacement positive is not part of the stock registry; this
    /// synthesized text is always flagged as non-stock in run metadata.
    static std::string replacement_positive(const std::string& target_class);

private:
    std::map<PromptPurpose, std::string> overrides_;
    std::string resolve(ModelFamily family, PromptPurpose purpose,
                        const std::string& class_label,
                        const std::string& environment) const;
};

}  // namespace perturbex
