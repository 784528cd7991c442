#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "perturbex/core.hpp"

namespace perturbex {

/// Content-addressed byte cache. Keys are SHA-256 over canonical key
/// material; entries are written atomically (temp file + rename) so readers
/// never observe partial files, and a checksummed header lets corrupt
/// entries be detected and recomputed instead of trusted.
class ContentCache {
public:
    explicit ContentCache(std::string dir);

    /// Hex key for arbitrary key material.
    static std::string key_of(const std::string& key_material);

    std::vector<std::uint8_t> get_or_compute(
        const std::string& key,
        const std::function<std::vector<std::uint8_t>()>& producer);

    const std::string& dir() const { return dir_; }
    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }
    std::uint64_t corruptions() const { return corruptions_.load(); }

private:
    std::string dir_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
    std::atomic<std::uint64_t> corruptions_{0};
};

}  // namespace perturbex
