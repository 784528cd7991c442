#pragma once

// Shared test fixtures: scratch directories, synthetic blob imagery, and
// small dataset/config builders used across the suites.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "perturbex/core.hpp"
#include "perturbex/image_io.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Unique scratch directory, removed (recursively) on scope exit.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        std::mt19937_64 rng(rd());
        for (int attempt = 0; attempt < 64; ++attempt) {
            char name[32];
            std::snprintf(name, sizeof(name), "pxtest-%016llx",
                          static_cast<unsigned long long>(rng()));
            fs::path candidate = fs::temp_directory_path() / name;
            std::error_code ec;
            if (fs::create_directory(candidate, ec) && !ec) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create scratch directory");
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    fs::path operator/(const std::string& sub) const { return path_ / sub; }

private:
    fs::path path_;
};

/// Solid rectangle in the blob color the mock detector keys on.
inline void add_blob(perturbex::RasterImage& img, const perturbex::BBox& box,
                     std::uint8_t r = 200, std::uint8_t g = 30, std::uint8_t b = 40) {
    for (int y = box.y; y < box.y + box.h; ++y) {
        for (int x = box.x; x < box.x + box.w; ++x) {
            if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
            auto* px = img.at(x, y);
            px[0] = r;
            px[1] = g;
            px[2] = b;
        }
    }
}

/// Non-blob background plus the given blobs.
inline perturbex::RasterImage blob_image(int w, int h,
                                         const std::vector<perturbex::BBox>& blobs) {
    perturbex::RasterImage img = perturbex::RasterImage::filled(w, h, 90, 140, 200);
    for (const auto& box : blobs) add_blob(img, box);
    return img;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

/// n single-blob images plus a manifest; blob sizes keep the mock detector's
/// confidence (area/1000) between 0.5 and 1.0 so nothing falls below the
/// default threshold. Returns the manifest path.
inline std::string write_blob_dataset(const fs::path& dir, int n, unsigned seed,
                                      int img_w = 96, int img_h = 72) {
    fs::create_directories(dir);
    std::mt19937 rng(seed);
    nlohmann::json entries = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<int> wdist(20, 40);
        std::uniform_int_distribution<int> hdist(25, 30);
        // Clamp so the blob plus margins fits even into small images;
        // inverted distribution bounds are undefined behaviour.
        const int bw = std::min(wdist(rng), img_w - 8);
        const int bh = std::min(hdist(rng), img_h - 8);
        std::uniform_int_distribution<int> xdist(4, std::max(4, img_w - bw - 4));
        std::uniform_int_distribution<int> ydist(4, std::max(4, img_h - bh - 4));
        perturbex::BBox blob{xdist(rng), ydist(rng), bw, bh};
        const std::string id = "img" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        perturbex::write_image(blob_image(img_w, img_h, {blob}),
                               (dir / (id + ".png")).string());
        entries.push_back({{"image_id", id}, {"path", id + ".png"}});
    }
    const fs::path manifest = dir / "manifest.json";
    write_text(manifest, nlohmann::json{{"entries", entries}}.dump(1));
    return manifest.string();
}

/// Minimal run config over mock backends. Callers patch the returned JSON
/// before writing it when they need something unusual.
inline nlohmann::json base_run_config(const std::string& manifest,
                                      const std::string& output_dir,
                                      const std::string& cache_dir = "") {
    nlohmann::json cfg = {
        {"manifest", manifest},
        {"tau", 0.40},
        {"seed", 42},
        {"workers", 2},
        {"output_dir", output_dir},
        {"backends",
         {{"detector", {{"endpoint", "mock:blob"}}},
          {"segmenter", {{"endpoint", "mock:blob"}}},
          {"inpainter", {{"endpoint", "mock:fill"}}}}},
        {"perturbations", nlohmann::json::array({{{"kind", "removal"}}})},
    };
    if (!cache_dir.empty()) cfg["cache_dir"] = cache_dir;
    return cfg;
}

inline std::string write_config(const fs::path& dir, const nlohmann::json& cfg,
                                const std::string& name = "run.json") {
    const fs::path path = dir / name;
    write_text(path, cfg.dump(1));
    return path.string();
}

/// Deterministic RNG for property tests; fixed seeds keep failures replayable.
inline std::mt19937& property_rng() {
    static std::mt19937 rng(0x5eed);
    return rng;
}

}  // namespace testutil
