#include "perturbex/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "perturbex/http_backend.hpp"
#include "perturbex/maskops.hpp"
#include "perturbex/util.hpp"

namespace perturbex {

std::string to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::detector: return "detector";
        case BackendKind::segmenter: return "segmenter";
        case BackendKind::inpainter: return "inpainter";
    }
    throw Error("unknown backend kind");
}

namespace {

void simulate_delay(double seconds) {
    if (seconds > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
}

bool is_mock_endpoint(const std::string& endpoint) {
    return endpoint.rfind("mock:", 0) == 0;
}

bool is_http_endpoint(const std::string& endpoint) {
    return endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0;
}

}  // namespace

bool is_blob_pixel(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return r >= 128 && g < 100 && b < 100;
}

RasterImage inpaint_localized(Inpainter& backend, const RasterImage& image,
                              const BinaryMask& mask, const std::string& positive,
                              const std::string& negative, const InpaintParams& params) {
    if (mask.width != image.width || mask.height != image.height) {
        throw Error("inpaint: mask dimensions do not match image");
    }
    if (!mask.any()) throw Error("inpaint: empty mask");

    RasterImage result;
    const bool resize = params.target_width > 0 && params.target_height > 0 &&
                        (params.target_width != image.width ||
                         params.target_height != image.height);
    if (resize) {
        RasterImage req_img = resize_image(image, params.target_width, params.target_height);
        BinaryMask req_mask = resize_mask(mask, params.target_width, params.target_height);
        RasterImage out = backend.inpaint(req_img, req_mask, positive, negative, params);
        if (out.width != params.target_width || out.height != params.target_height) {
            throw BackendError("inpaint: backend changed requested resolution");
        }
        result = resize_image(out, image.width, image.height);
    } else {
        result = backend.inpaint(image, mask, positive, negative, params);
        if (result.width != image.width || result.height != image.height) {
            throw BackendError("inpaint: backend changed image dimensions");
        }
    }
    // Paste originals back outside the mask; diffusion services re-encode the
    // whole frame, and the measurement assumes mask-localized edits.
    for (std::size_t p = 0; p < mask.bits.size(); ++p) {
        if (!mask.bits[p]) {
            result.pixels[p * 3] = image.pixels[p * 3];
            result.pixels[p * 3 + 1] = image.pixels[p * 3 + 1];
            result.pixels[p * 3 + 2] = image.pixels[p * 3 + 2];
        }
    }
    return result;
}

// --- BlobDetector ------------------------------------------------------------

std::vector<Detection> BlobDetector::detect(const RasterImage& image) {
    simulate_delay(delay_s_);
    const int w = image.width;
    const int h = image.height;
    std::vector<std::uint8_t> blob(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* px = image.at(x, y);
            blob[static_cast<std::size_t>(y) * w + x] =
                is_blob_pixel(px[0], px[1], px[2]) ? 1 : 0;
        }
    }

    std::vector<Detection> dets;
    std::vector<std::uint8_t> seen(blob.size(), 0);
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            std::size_t p0 = static_cast<std::size_t>(y0) * w + x0;
            if (!blob[p0] || seen[p0]) continue;
            // flood fill, 4-connectivity
            int min_x = x0, max_x = x0, min_y = y0, max_y = y0;
            std::size_t area = 0;
            stack.clear();
            stack.emplace_back(x0, y0);
            seen[p0] = 1;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                ++area;
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int i = 0; i < 4; ++i) {
                    if (nx[i] < 0 || nx[i] >= w || ny[i] < 0 || ny[i] >= h) continue;
                    std::size_t np = static_cast<std::size_t>(ny[i]) * w + nx[i];
                    if (blob[np] && !seen[np]) {
                        seen[np] = 1;
                        stack.emplace_back(nx[i], ny[i]);
                    }
                }
            }
            Detection d;
            d.class_label = class_label_;
            d.bbox = BBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
            d.confidence = std::min(1.0, static_cast<double>(area) / 1000.0);
            dets.push_back(std::move(d));
        }
    }
    sort_detections(dets);
    return dets;
}

// --- Segmenters --------------------------------------------------------------

std::vector<BinaryMask> RectSegmenter::segment(const RasterImage& image,
                                               const std::vector<BBox>& boxes) {
    simulate_delay(delay_s_);
    std::vector<BinaryMask> masks;
    masks.reserve(boxes.size());
    for (const auto& box : boxes) {
        masks.push_back(bbox_to_mask(box, image.width, image.height));
    }
    return masks;
}

std::vector<BinaryMask> BlobSegmenter::segment(const RasterImage& image,
                                               const std::vector<BBox>& boxes) {
    simulate_delay(delay_s_);
    std::vector<BinaryMask> masks;
    masks.reserve(boxes.size());
    for (const auto& box : boxes) {
        BinaryMask mask = BinaryMask::filled(image.width, image.height, false);
        if (auto c = box.clamped(image.width, image.height)) {
            for (int y = c->y; y < c->y + c->h; ++y) {
                for (int x = c->x; x < c->x + c->w; ++x) {
                    const std::uint8_t* px = image.at(x, y);
                    if (is_blob_pixel(px[0], px[1], px[2])) mask.set(x, y, true);
                }
            }
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

// --- Inpainters --------------------------------------------------------------

RasterImage FillInpainter::inpaint(const RasterImage& image, const BinaryMask& mask,
                                   const std::string&, const std::string&,
                                   const InpaintParams&) {
    simulate_delay(delay_s_);
    if (mask.width != image.width || mask.height != image.height) {
        throw BackendError("fill inpainter: mask/image dimension mismatch");
    }
    // Ring = pad(mask,2) minus mask. Empty ring (all-true mask) -> mid-gray,
    // which is what makes this mock double as a background generator.
    BinaryMask ring = pad(mask, 2);
    std::uint64_t sum[3] = {0, 0, 0};
    std::uint64_t count = 0;
    for (std::size_t p = 0; p < mask.bits.size(); ++p) {
        if (ring.bits[p] && !mask.bits[p]) {
            sum[0] += image.pixels[p * 3];
            sum[1] += image.pixels[p * 3 + 1];
            sum[2] += image.pixels[p * 3 + 2];
            ++count;
        }
    }
    std::uint8_t fill[3] = {128, 128, 128};
    if (count > 0) {
        for (int c = 0; c < 3; ++c) {
            fill[c] = static_cast<std::uint8_t>(
                std::lround(static_cast<double>(sum[c]) / static_cast<double>(count)));
        }
    }
    RasterImage out = image;
    for (std::size_t p = 0; p < mask.bits.size(); ++p) {
        if (mask.bits[p]) {
            out.pixels[p * 3] = fill[0];
            out.pixels[p * 3 + 1] = fill[1];
            out.pixels[p * 3 + 2] = fill[2];
        }
    }
    return out;
}

RasterImage IdentityInpainter::inpaint(const RasterImage& image, const BinaryMask& mask,
                                       const std::string&, const std::string&,
                                       const InpaintParams&) {
    simulate_delay(delay_s_);
    if (mask.width != image.width || mask.height != image.height) {
        throw BackendError("identity inpainter: mask/image dimension mismatch");
    }
    return image;
}

StampInpainter::Palette StampInpainter::palette_for(const std::string& target) {
    // Derived from the target name but always outside the blob-color space,
    // so stamped glyphs never read as the mock detector's animal.
    std::uint64_t h = fnv1a64(target);
    Palette p;
    p.fill[0] = static_cast<std::uint8_t>(72 + (h & 31));
    p.fill[1] = static_cast<std::uint8_t>(96 + ((h >> 5) & 31));
    p.fill[2] = static_cast<std::uint8_t>(112 + ((h >> 10) & 31));
    p.hull[0] = static_cast<std::uint8_t>(24 + ((h >> 15) & 63));
    p.hull[1] = static_cast<std::uint8_t>(40 + ((h >> 21) & 31));
    p.hull[2] = static_cast<std::uint8_t>(160 + ((h >> 26) & 63));
    p.sail[0] = 225;
    p.sail[1] = 225;
    p.sail[2] = 225;
    return p;
}

RasterImage StampInpainter::inpaint(const RasterImage& image, const BinaryMask& mask,
                                    const std::string&, const std::string&,
                                    const InpaintParams&) {
    simulate_delay(delay_s_);
    if (mask.width != image.width || mask.height != image.height) {
        throw BackendError("stamp inpainter: mask/image dimension mismatch");
    }
    // Tight bounds of the masked region; the glyph is drawn in its frame.
    int min_x = mask.width, min_y = mask.height, max_x = -1, max_y = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.get(x, y)) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    RasterImage out = image;
    if (max_x < 0) return out;  // empty mask
    const int bw = max_x - min_x + 1;
    const int bh = max_y - min_y + 1;
    const Palette pal = palette_for(target_);
    for (int y = min_y; y <= max_y; ++y) {
        for (int x = min_x; x <= max_x; ++x) {
            if (!mask.get(x, y)) continue;
            // Glyph frame coordinates in per-mille to keep this integral.
            int fx = (x - min_x) * 1000 / bw;
            int fy = (y - min_y) * 1000 / bh;
            const std::uint8_t* color = pal.fill;
            if (fy >= 550 && fy < 800 && fx >= 150 && fx < 850) {
                color = pal.hull;
            } else if (fy < 550 && fy >= 100) {
                // triangular sail: width grows linearly toward the hull line
                int half = 200 * (fy - 100) / 450;
                if (fx >= 500 - half && fx <= 500 + half) color = pal.sail;
            }
            std::uint8_t* px = out.at(x, y);
            px[0] = color[0];
            px[1] = color[1];
            px[2] = color[2];
        }
    }
    return out;
}

// --- Factory / healthcheck ----------------------------------------------------

std::unique_ptr<Detector> make_detector(const BackendDescriptor& desc) {
    if (desc.kind != BackendKind::detector) {
        throw ConfigError("descriptor kind is not detector");
    }
    if (is_mock_endpoint(desc.endpoint)) {
        if (desc.endpoint == "mock:blob") {
            return std::make_unique<BlobDetector>("blob", desc.simulate_delay_s);
        }
        throw ConfigError("unknown mock detector: " + desc.endpoint);
    }
    if (is_http_endpoint(desc.endpoint)) return std::make_unique<HttpDetector>(desc);
    throw ConfigError("detector endpoint must be mock:* or http(s)://: " + desc.endpoint);
}

std::unique_ptr<Segmenter> make_segmenter(const BackendDescriptor& desc) {
    if (desc.kind != BackendKind::segmenter) {
        throw ConfigError("descriptor kind is not segmenter");
    }
    if (is_mock_endpoint(desc.endpoint)) {
        if (desc.endpoint == "mock:rect") {
            return std::make_unique<RectSegmenter>(desc.simulate_delay_s);
        }
        if (desc.endpoint == "mock:blob") {
            return std::make_unique<BlobSegmenter>(desc.simulate_delay_s);
        }
        throw ConfigError("unknown mock segmenter: " + desc.endpoint);
    }
    if (is_http_endpoint(desc.endpoint)) return std::make_unique<HttpSegmenter>(desc);
    throw ConfigError("segmenter endpoint must be mock:* or http(s)://: " + desc.endpoint);
}

std::unique_ptr<Inpainter> make_inpainter(const BackendDescriptor& desc) {
    if (desc.kind != BackendKind::inpainter) {
        throw ConfigError("descriptor kind is not inpainter");
    }
    if (is_mock_endpoint(desc.endpoint)) {
        if (desc.endpoint == "mock:fill") {
            return std::make_unique<FillInpainter>(desc.simulate_delay_s);
        }
        if (desc.endpoint == "mock:identity") {
            return std::make_unique<IdentityInpainter>(desc.simulate_delay_s);
        }
        if (desc.endpoint.rfind("mock:stamp:", 0) == 0) {
            return std::make_unique<StampInpainter>(desc.endpoint.substr(11),
                                                    desc.simulate_delay_s);
        }
        throw ConfigError("unknown mock inpainter: " + desc.endpoint);
    }
    if (is_http_endpoint(desc.endpoint)) return std::make_unique<HttpInpainter>(desc);
    throw ConfigError("inpainter endpoint must be mock:* or http(s)://: " + desc.endpoint);
}

HealthStatus healthcheck(const BackendDescriptor& desc) {
    if (is_mock_endpoint(desc.endpoint)) {
        HealthStatus st;
        try {
            std::string model;
            switch (desc.kind) {
                case BackendKind::detector: model = make_detector(desc)->model_id(); break;
                case BackendKind::segmenter: model = make_segmenter(desc)->model_id(); break;
                case BackendKind::inpainter: model = make_inpainter(desc)->model_id(); break;
            }
            st.reachable = true;
            st.model = model;
        } catch (const Error& e) {
            st.reachable = false;
            st.cause = e.what();
        }
        return st;
    }
    if (is_http_endpoint(desc.endpoint)) return http_healthcheck(desc);
    return HealthStatus{false, "", "unrecognized endpoint: " + desc.endpoint};
}

}  // namespace perturbex
