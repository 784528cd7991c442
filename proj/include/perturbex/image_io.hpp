#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "perturbex/core.hpp"

namespace perturbex {

// PNG is the canonical on-disk format for images and masks: the pipeline's
// flip/confidence measurements must not be perturbed by lossy compression.
// Masks are stored as 8-bit grayscale (0/255 for binary, 0..255 for soft);
// in-memory math stays in real-valued alpha.

RasterImage read_image(const std::string& path);
void write_image(const RasterImage& image, const std::string& path);

BinaryMask read_binary_mask(const std::string& path);
void write_binary_mask(const BinaryMask& mask, const std::string& path);

SoftMask read_soft_mask(const std::string& path);
void write_soft_mask(const SoftMask& mask, const std::string& path);

// In-memory codecs, used by the wire adapters (base64-PNG payloads).
std::vector<std::uint8_t> encode_png(const RasterImage& image);
RasterImage decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_gray_png(int width, int height,
                                          const std::vector<std::uint8_t>& gray);
void decode_gray_png(const std::vector<std::uint8_t>& bytes, int& width,
                     int& height, std::vector<std::uint8_t>& gray);

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);
BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes);

}  // namespace perturbex
