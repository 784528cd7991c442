#pragma once

#include <vector>

#include "perturbex/core.hpp"

namespace perturbex {

// Mask geometry. All functions are pure and safe for unrestricted
// parallel use.

/// Rasterize a bbox into a mask. Boxes are clamped to the image; a fully
/// out-of-bounds box yields an empty (all-false) mask rather than an error.
BinaryMask bbox_to_mask(const BBox& bbox, int width, int height);

/// Per-pixel OR. All masks must share dimensions; the list must be non-empty.
BinaryMask union_masks(const std::vector<BinaryMask>& masks);

/// Morphological dilation with a square (Chebyshev) structuring element.
/// Square elements compose: pad(pad(m,a),b) == pad(m,a+b). Radius 0 is
/// the identity.
BinaryMask pad(const BinaryMask& mask, int radius_px);

/// Gaussian feathering of a binary mask into a 0..1 alpha field.
/// sigma = blur_radius_px, kernel truncated at ceil(3*sigma) and
/// renormalized, reflect boundary. Radius 0 returns the binary values
/// as alpha. Values within 1e-9 of an endpoint are snapped to exactly
/// 0 or 1 so that fully interior/exterior pixels compare exactly.
SoftMask feather(const BinaryMask& mask, double blur_radius_px);

/// bit = (alpha >= t). Inclusive so t=1.0 keeps fully-opaque pixels.
BinaryMask threshold(const SoftMask& soft, double t);

/// Nearest-neighbor resize; source index = floor(dst * src_dim / dst_dim).
BinaryMask resize_mask(const BinaryMask& mask, int new_width, int new_height);

/// Bilinear resize with pixel-center alignment.
SoftMask resize_mask(const SoftMask& mask, int new_width, int new_height);

/// Bilinear RGB resize (same convention as the soft-mask path).
RasterImage resize_image(const RasterImage& image, int new_width, int new_height);

/// Per channel: out = round(alpha*fg + (1-alpha)*bg), round half away from
/// zero, clamped to [0,255]. All three inputs must share dimensions.
RasterImage composite(const RasterImage& foreground, const SoftMask& alpha,
                      const RasterImage& background);

/// Normalized 1-D Gaussian kernel of half-width ceil(3*sigma); size 2h+1,
/// center at index h. Exposed so tests can build the dense reference.
std::vector<double> gaussian_kernel(double sigma);

}  // namespace perturbex
