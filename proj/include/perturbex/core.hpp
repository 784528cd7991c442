#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace perturbex {

// Error taxonomy. The CLI maps these onto exit codes
// (config=2, backend=3, io=4); everything else is a plain Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

/// Row-major RGB8 image. The unit flowing through every pipeline stage.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width*height*3 bytes, RGB

    static RasterImage filled(int w, int h,
                              std::uint8_t r, std::uint8_t g, std::uint8_t b);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    std::uint8_t* at(int x, int y) {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    bool operator==(const RasterImage&) const = default;
};

/// Per-pixel edit region, one byte per pixel (0 or 1).
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // width*height, values 0/1

    static BinaryMask filled(int w, int h, bool value);

    bool get(int x, int y) const {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int x, int y, bool v) {
        bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
    }
    std::size_t count_set() const;
    bool any() const { return count_set() > 0; }

    bool operator==(const BinaryMask&) const = default;
};

/// Feathered alpha mask, values in [0,1]. 1 = foreground.
struct SoftMask {
    int width = 0;
    int height = 0;
    std::vector<double> alpha;  // width*height

    static SoftMask filled(int w, int h, double value);

    double get(int x, int y) const {
        return alpha[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, double v) {
        alpha[static_cast<std::size_t>(y) * width + x] = v;
    }

    bool operator==(const SoftMask&) const = default;
};

/// Axis-aligned pixel box, top-left origin.
struct BBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    // Intersection with a width*height image. Empty result -> nullopt.
    std::optional<BBox> clamped(int image_w, int image_h) const;

    bool operator==(const BBox&) const = default;
};

struct Detection {
    std::string class_label;
    BBox bbox;
    double confidence = 0.0;  // in [0,1]

    bool operator==(const Detection&) const = default;
};

struct ManifestEntry {
    std::string image_id;
    std::string path;  // resolved to an absolute path at load time
    std::vector<Detection> annotations;
    bool has_annotations = false;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

/// Load and validate a dataset manifest (JSON, see README for the schema).
/// Entry order in the file is preserved. Paths are resolved relative to the
/// manifest's directory and must exist.
DatasetManifest load_manifest(const std::string& path);

// Sort detections by descending confidence; ties broken by bbox position so
// the ordering is total and stable across runs.
void sort_detections(std::vector<Detection>& dets);

// Clamp detection boxes to image bounds. Boxes that fall entirely outside
// are dropped. Returns the number of boxes that needed clamping.
int clamp_detections(std::vector<Detection>& dets, int image_w, int image_h);

}  // namespace perturbex
