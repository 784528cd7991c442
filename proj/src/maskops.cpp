#include "perturbex/maskops.hpp"

#include <algorithm>
#include <cmath>

namespace perturbex {

namespace {

void check_dims(int w, int h) {
    if (w < 1 || h < 1) throw Error("mask dimensions must be >= 1");
}

// Half-sample reflection: ... c b a | a b c ... Folds repeatedly so kernels
// wider than the image stay well-defined.
inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// One separable Gaussian pass along x. Accumulates the symmetric taps as
// w*(left+right) so the result is bit-identical under mirroring.
void gaussian_pass_rows(const std::vector<double>& src, std::vector<double>& dst,
                        int width, int height, const std::vector<double>& kernel) {
    const int h = static_cast<int>(kernel.size() / 2);
    for (int y = 0; y < height; ++y) {
        const double* row = src.data() + static_cast<std::size_t>(y) * width;
        double* out = dst.data() + static_cast<std::size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
            double acc = kernel[h] * row[x];
            for (int k = 1; k <= h; ++k) {
                acc += kernel[h + k] *
                       (row[reflect_index(x - k, width)] + row[reflect_index(x + k, width)]);
            }
            out[x] = acc;
        }
    }
}

void gaussian_pass_cols(const std::vector<double>& src, std::vector<double>& dst,
                        int width, int height, const std::vector<double>& kernel) {
    const int h = static_cast<int>(kernel.size() / 2);
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) {
            double acc = kernel[h] * src[static_cast<std::size_t>(y) * width + x];
            for (int k = 1; k <= h; ++k) {
                int yl = reflect_index(y - k, height);
                int yr = reflect_index(y + k, height);
                acc += kernel[h + k] * (src[static_cast<std::size_t>(yl) * width + x] +
                                        src[static_cast<std::size_t>(yr) * width + x]);
            }
            dst[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
}

// 1D dilation along one axis; separable square-element passes compose
// additively in the radius.
void dilate_pass(const std::vector<std::uint8_t>& src, std::vector<std::uint8_t>& dst,
                 int width, int height, int radius, bool along_x) {
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            std::uint8_t v = 0;
            if (along_x) {
                int lo = std::max(0, x - radius);
                int hi = std::min(width - 1, x + radius);
                for (int i = lo; i <= hi && !v; ++i) {
                    v = src[static_cast<std::size_t>(y) * width + i];
                }
            } else {
                int lo = std::max(0, y - radius);
                int hi = std::min(height - 1, y + radius);
                for (int i = lo; i <= hi && !v; ++i) {
                    v = src[static_cast<std::size_t>(i) * width + x];
                }
            }
            dst[static_cast<std::size_t>(y) * width + x] = v;
        }
    }
}

inline std::uint8_t round_channel(double v) {
    long r = std::lround(v);  // half away from zero
    return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

}  // namespace

BinaryMask bbox_to_mask(const BBox& bbox, int width, int height) {
    check_dims(width, height);
    BinaryMask mask = BinaryMask::filled(width, height, false);
    auto clamped = bbox.clamped(width, height);
    if (!clamped) return mask;  // fully out of bounds -> empty mask
    for (int y = clamped->y; y < clamped->y + clamped->h; ++y) {
        for (int x = clamped->x; x < clamped->x + clamped->w; ++x) {
            mask.set(x, y, true);
        }
    }
    return mask;
}

BinaryMask union_masks(const std::vector<BinaryMask>& masks) {
    if (masks.empty()) throw Error("union of empty mask list");
    BinaryMask out = masks.front();
    for (std::size_t i = 1; i < masks.size(); ++i) {
        const BinaryMask& m = masks[i];
        if (m.width != out.width || m.height != out.height) {
            throw Error("union: mask dimension mismatch");
        }
        for (std::size_t p = 0; p < out.bits.size(); ++p) {
            out.bits[p] |= m.bits[p];
        }
    }
    return out;
}

BinaryMask pad(const BinaryMask& mask, int radius_px) {
    if (radius_px < 0) throw Error("pad: radius must be >= 0");
    if (radius_px == 0) return mask;
    BinaryMask tmp = mask;
    BinaryMask out = mask;
    dilate_pass(mask.bits, tmp.bits, mask.width, mask.height, radius_px, true);
    dilate_pass(tmp.bits, out.bits, mask.width, mask.height, radius_px, false);
    return out;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (sigma <= 0.0) return {1.0};
    const int h = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * h + 1);
    for (int i = -h; i <= h; ++i) {
        k[i + h] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    }
    double sum = k[h];
    for (int i = 1; i <= h; ++i) sum += 2.0 * k[h + i];
    for (auto& v : k) v /= sum;
    return k;
}

SoftMask feather(const BinaryMask& mask, double blur_radius_px) {
    if (blur_radius_px < 0.0) throw Error("feather: radius must be >= 0");
    SoftMask out;
    out.width = mask.width;
    out.height = mask.height;
    out.alpha.resize(mask.bits.size());
    if (blur_radius_px == 0.0) {
        for (std::size_t i = 0; i < mask.bits.size(); ++i) {
            out.alpha[i] = mask.bits[i] ? 1.0 : 0.0;
        }
        return out;
    }
    std::vector<double> field(mask.bits.size());
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        field[i] = mask.bits[i] ? 1.0 : 0.0;
    }
    const std::vector<double> kernel = gaussian_kernel(blur_radius_px);
    std::vector<double> tmp(field.size());
    gaussian_pass_rows(field, tmp, mask.width, mask.height, kernel);
    gaussian_pass_cols(tmp, out.alpha, mask.width, mask.height, kernel);
    // Snap near-endpoint values so fully interior/exterior pixels are exact;
    // compositing relies on alpha == 1 meaning "foreground preserved".
    for (auto& a : out.alpha) {
        if (a > 1.0 - 1e-9) a = 1.0;
        else if (a < 1e-9) a = 0.0;
    }
    return out;
}

BinaryMask threshold(const SoftMask& soft, double t) {
    if (t < 0.0 || t > 1.0) throw Error("threshold: t outside [0,1]");
    BinaryMask out;
    out.width = soft.width;
    out.height = soft.height;
    out.bits.resize(soft.alpha.size());
    for (std::size_t i = 0; i < soft.alpha.size(); ++i) {
        out.bits[i] = soft.alpha[i] >= t ? 1 : 0;
    }
    return out;
}

BinaryMask resize_mask(const BinaryMask& mask, int new_width, int new_height) {
    check_dims(new_width, new_height);
    if (new_width == mask.width && new_height == mask.height) return mask;
    BinaryMask out;
    out.width = new_width;
    out.height = new_height;
    out.bits.resize(static_cast<std::size_t>(new_width) * new_height);
    for (int y = 0; y < new_height; ++y) {
        int sy = static_cast<int>(static_cast<std::int64_t>(y) * mask.height / new_height);
        for (int x = 0; x < new_width; ++x) {
            int sx = static_cast<int>(static_cast<std::int64_t>(x) * mask.width / new_width);
            out.bits[static_cast<std::size_t>(y) * new_width + x] =
                mask.bits[static_cast<std::size_t>(sy) * mask.width + sx];
        }
    }
    return out;
}

namespace {

struct BilinearTap {
    int i0;
    int i1;
    double t;
};

BilinearTap bilinear_tap(int d, int dst_dim, int src_dim) {
    double s = (d + 0.5) * static_cast<double>(src_dim) / dst_dim - 0.5;
    double f = std::floor(s);
    int i0 = static_cast<int>(f);
    double t = s - f;
    int i1 = i0 + 1;
    if (i0 < 0) { i0 = 0; i1 = 0; t = 0.0; }
    if (i1 >= src_dim) { i1 = src_dim - 1; if (i0 > i1) { i0 = i1; } }
    if (i0 == i1) t = 0.0;
    return {i0, i1, t};
}

}  // namespace

SoftMask resize_mask(const SoftMask& mask, int new_width, int new_height) {
    check_dims(new_width, new_height);
    if (new_width == mask.width && new_height == mask.height) return mask;
    SoftMask out;
    out.width = new_width;
    out.height = new_height;
    out.alpha.resize(static_cast<std::size_t>(new_width) * new_height);
    for (int y = 0; y < new_height; ++y) {
        BilinearTap ty = bilinear_tap(y, new_height, mask.height);
        for (int x = 0; x < new_width; ++x) {
            BilinearTap tx = bilinear_tap(x, new_width, mask.width);
            double v00 = mask.get(tx.i0, ty.i0);
            double v10 = mask.get(tx.i1, ty.i0);
            double v01 = mask.get(tx.i0, ty.i1);
            double v11 = mask.get(tx.i1, ty.i1);
            double top = v00 + (v10 - v00) * tx.t;
            double bot = v01 + (v11 - v01) * tx.t;
            out.alpha[static_cast<std::size_t>(y) * new_width + x] = top + (bot - top) * ty.t;
        }
    }
    return out;
}

RasterImage resize_image(const RasterImage& image, int new_width, int new_height) {
    check_dims(new_width, new_height);
    if (new_width == image.width && new_height == image.height) return image;
    RasterImage out;
    out.width = new_width;
    out.height = new_height;
    out.pixels.resize(static_cast<std::size_t>(new_width) * new_height * 3);
    for (int y = 0; y < new_height; ++y) {
        BilinearTap ty = bilinear_tap(y, new_height, image.height);
        for (int x = 0; x < new_width; ++x) {
            BilinearTap tx = bilinear_tap(x, new_width, image.width);
            const std::uint8_t* p00 = image.at(tx.i0, ty.i0);
            const std::uint8_t* p10 = image.at(tx.i1, ty.i0);
            const std::uint8_t* p01 = image.at(tx.i0, ty.i1);
            const std::uint8_t* p11 = image.at(tx.i1, ty.i1);
            std::uint8_t* dst = out.at(x, y);
            for (int c = 0; c < 3; ++c) {
                double top = p00[c] + (p10[c] - p00[c]) * tx.t;
                double bot = p01[c] + (p11[c] - p01[c]) * tx.t;
                dst[c] = round_channel(top + (bot - top) * ty.t);
            }
        }
    }
    return out;
}

RasterImage composite(const RasterImage& foreground, const SoftMask& alpha,
                      const RasterImage& background) {
    if (foreground.width != alpha.width || foreground.height != alpha.height ||
        background.width != alpha.width || background.height != alpha.height) {
        throw Error("composite: dimension mismatch");
    }
    RasterImage out;
    out.width = foreground.width;
    out.height = foreground.height;
    out.pixels.resize(foreground.pixels.size());
    for (std::size_t p = 0; p < alpha.alpha.size(); ++p) {
        double a = alpha.alpha[p];
        for (int c = 0; c < 3; ++c) {
            double fg = foreground.pixels[p * 3 + c];
            double bg = background.pixels[p * 3 + c];
            out.pixels[p * 3 + c] = round_channel(a * fg + (1.0 - a) * bg);
        }
    }
    return out;
}

}  // namespace perturbex
