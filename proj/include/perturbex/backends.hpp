#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "perturbex/core.hpp"
#include "perturbex/prompts.hpp"

namespace perturbex {

/// Sampling parameters forwarded verbatim to the inpainting backend.
/// target_width/height of 0 means "native": the request is sent at the
/// image's own resolution.
struct InpaintParams {
    double guidance_scale = 20.0;
    int num_inference_steps = 100;
    double strength = 1.0;
    std::string scheduler = "DPMSolverMultistep";
    long long seed = 42;
    int target_width = 0;
    int target_height = 0;

    bool operator==(const InpaintParams&) const = default;
};

struct RetryPolicy {
    int max_retries = 2;
    double backoff_s = 0.5;  // doubled after each attempt
};

enum class BackendKind { detector, segmenter, inpainter };

std::string to_string(BackendKind kind);

/// Where a backend lives. endpoint is either an http(s) URL or a mock name
/// ("mock:blob", "mock:rect", "mock:fill", "mock:identity",
/// "mock:stamp:<target>"); mock backends ignore the network fields.
/// simulate_delay_s injects an artificial per-call delay into mock backends
/// for runtime experiments.
struct BackendDescriptor {
    BackendKind kind = BackendKind::detector;
    std::string endpoint;
    ModelFamily model_family = ModelFamily::stable_diffusion;
    int max_concurrency = 4;
    double timeout_s = 30.0;
    RetryPolicy retry;
    double simulate_delay_s = 0.0;
};

struct HealthStatus {
    bool reachable = false;
    std::string model;  // reported model identity
    std::string cause;  // failure category/detail when unreachable
};

class Detector {
public:
    virtual ~Detector() = default;
    /// Detections sorted by descending confidence, boxes clamped to the
    /// image, confidences in [0,1].
    virtual std::vector<Detection> detect(const RasterImage& image) = 0;
    virtual std::string model_id() const = 0;
};

class Segmenter {
public:
    virtual ~Segmenter() = default;
    /// One mask per box, each sharing the image's dimensions. Masks may
    /// extend beyond their box (real segmenters overreach).
    virtual std::vector<BinaryMask> segment(const RasterImage& image,
                                            const std::vector<BBox>& boxes) = 0;
    virtual std::string model_id() const = 0;
};

class Inpainter {
public:
    virtual ~Inpainter() = default;
    /// Raw backend call at the resolution given. Callers wanting the
    /// resize/restore policy go through inpaint_localized().
    virtual RasterImage inpaint(const RasterImage& image, const BinaryMask& mask,
                                const std::string& positive,
                                const std::string& negative,
                                const InpaintParams& params) = 0;
    virtual std::string model_id() const = 0;
};

/// The inpainting round-trip policy: resize image (bilinear) and mask
/// (nearest-neighbor) to params.target resolution when one is set, call the
/// backend, map the result back to native size, then paste the original
/// pixels back everywhere the mask bit is false. Diffusion services
/// re-encode the whole frame, so client-side restoration is what guarantees
/// the edit is mask-localized.
RasterImage inpaint_localized(Inpainter& backend, const RasterImage& image,
                              const BinaryMask& mask, const std::string& positive,
                              const std::string& negative,
                              const InpaintParams& params);

// ---------------------------------------------------------------------------
// Mock backends. Shipped as part of the library, not test-only code, so
// acceptance runs are reproducible anywhere without model weights. All are
// deterministic pure functions of their inputs.
// ---------------------------------------------------------------------------

/// True for the saturated-red pixels the mock suite treats as "the animal".
bool is_blob_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Connected-component detector over is_blob_pixel (4-connectivity).
/// confidence = min(1, area/1000).
class BlobDetector : public Detector {
public:
    explicit BlobDetector(std::string class_label = "blob", double delay_s = 0.0)
        : class_label_(std::move(class_label)), delay_s_(delay_s) {}
    std::vector<Detection> detect(const RasterImage& image) override;
    std::string model_id() const override { return "mock:blob-detector"; }

private:
    std::string class_label_;
    double delay_s_;
};

/// mask == bbox_to_mask(box) for each box.
class RectSegmenter : public Segmenter {
public:
    explicit RectSegmenter(double delay_s = 0.0) : delay_s_(delay_s) {}
    std::vector<BinaryMask> segment(const RasterImage& image,
                                    const std::vector<BBox>& boxes) override;
    std::string model_id() const override { return "mock:rect-segmenter"; }

private:
    double delay_s_;
};

/// Within each (clamped) box, selects exactly the blob-colored pixels.
class BlobSegmenter : public Segmenter {
public:
    explicit BlobSegmenter(double delay_s = 0.0) : delay_s_(delay_s) {}
    std::vector<BinaryMask> segment(const RasterImage& image,
                                    const std::vector<BBox>& boxes) override;
    std::string model_id() const override { return "mock:blob-segmenter"; }

private:
    double delay_s_;
};

/// Fills masked pixels with the mean color of the 2-px unmasked ring around
/// the mask; an all-true mask (no ring) fills with mid-gray (128,128,128),
/// which doubles as the blank-canvas background generator.
class FillInpainter : public Inpainter {
public:
    explicit FillInpainter(double delay_s = 0.0) : delay_s_(delay_s) {}
    RasterImage inpaint(const RasterImage& image, const BinaryMask& mask,
                        const std::string& positive, const std::string& negative,
                        const InpaintParams& params) override;
    std::string model_id() const override { return "mock:fill-inpainter"; }

private:
    double delay_s_;
};

class IdentityInpainter : public Inpainter {
public:
    explicit IdentityInpainter(double delay_s = 0.0) : delay_s_(delay_s) {}
    RasterImage inpaint(const RasterImage& image, const BinaryMask& mask,
                        const std::string& positive, const std::string& negative,
                        const InpaintParams& params) override;
    std::string model_id() const override { return "mock:identity-inpainter"; }

private:
    double delay_s_;
};

/// Replaces the masked region with a deterministic glyph raster (a little
/// hull-and-sail silhouette) whose palette is derived from the target name
/// and never matches is_blob_pixel.
class StampInpainter : public Inpainter {
public:
    explicit StampInpainter(std::string target = "boat", double delay_s = 0.0)
        : target_(std::move(target)), delay_s_(delay_s) {}
    RasterImage inpaint(const RasterImage& image, const BinaryMask& mask,
                        const std::string& positive, const std::string& negative,
                        const InpaintParams& params) override;
    std::string model_id() const override { return "mock:stamp-inpainter:" + target_; }

    struct Palette {
        std::uint8_t fill[3];
        std::uint8_t hull[3];
        std::uint8_t sail[3];
    };
    static Palette palette_for(const std::string& target);

private:
    std::string target_;
    double delay_s_;
};

// Factories dispatch on the endpoint: "mock:*" names build the mock suite,
// http(s):// URLs build the wire adapters from http_backend.hpp.
std::unique_ptr<Detector> make_detector(const BackendDescriptor& desc);
std::unique_ptr<Segmenter> make_segmenter(const BackendDescriptor& desc);
std::unique_ptr<Inpainter> make_inpainter(const BackendDescriptor& desc);

/// Reachability + reported model identity. Failures are carried in the
/// status, never thrown.
HealthStatus healthcheck(const BackendDescriptor& desc);

}  // namespace perturbex
