#include "perturbex/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace perturbex {

namespace {

struct ReadCtx {
    const std::uint8_t* data = nullptr;
    std::size_t size = 0;
    std::size_t pos = 0;
};

void mem_read(png_structp png, png_bytep out, png_size_t n) {
    auto* ctx = static_cast<ReadCtx*>(png_get_io_ptr(png));
    if (ctx->pos + n > ctx->size) png_error(png, "unexpected end of PNG stream");
    std::memcpy(out, ctx->data + ctx->pos, n);
    ctx->pos += n;
}

void mem_write(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void mem_flush(png_structp) {}

void silent_warning(png_structp, png_const_charp) {}

// Decode to 8-bit, either 3 channels (RGB) or 1 (gray). Palette, bit-depth,
// and alpha variants are normalized; alpha is stripped.
void decode_common(const std::vector<std::uint8_t>& bytes, bool want_gray,
                   int& width, int& height, std::vector<std::uint8_t>& out) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw IoError("unreadable file: not a PNG stream");
    }
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, silent_warning);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }

    ReadCtx ctx{bytes.data(), bytes.size(), 0};
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unreadable file: PNG decode error");
    }

    png_set_read_fn(png, &ctx, mem_read);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);
    if (w == 0 || h == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG has zero dimension");
    }

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (want_gray) {
        if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
            color_type == PNG_COLOR_TYPE_PALETTE) {
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
        }
    } else {
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    }
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    const int channels = want_gray ? 1 : 3;
    if (png_get_rowbytes(png, info) != w * static_cast<png_uint_32>(channels)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG layout");
    }

    out.assign(static_cast<std::size_t>(w) * h * channels, 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = out.data() + static_cast<std::size_t>(y) * w * channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    width = static_cast<int>(w);
    height = static_cast<int>(h);
}

std::vector<std::uint8_t> encode_common(int width, int height, int channels,
                                        const std::uint8_t* data) {
    if (width < 1 || height < 1) throw Error("cannot encode image with dimension 0");
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, silent_warning);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }

    std::vector<std::uint8_t> out;
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width * channels);
    }

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode error");
    }

    png_set_write_fn(png, &out, mem_write, mem_flush);
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    fs::path dir = fs::path(path).parent_path();
    if (!dir.empty() && !fs::exists(dir)) {
        throw IoError("directory does not exist: " + dir.string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write: " + path);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
    if (image.pixels.size() != image.pixel_count() * 3) {
        throw Error("RasterImage pixel buffer does not match dimensions");
    }
    return encode_common(image.width, image.height, 3, image.pixels.data());
}

RasterImage decode_png(const std::vector<std::uint8_t>& bytes) {
    RasterImage img;
    decode_common(bytes, false, img.width, img.height, img.pixels);
    return img;
}

std::vector<std::uint8_t> encode_gray_png(int width, int height,
                                          const std::vector<std::uint8_t>& gray) {
    if (gray.size() != static_cast<std::size_t>(width) * height) {
        throw Error("gray buffer does not match dimensions");
    }
    return encode_common(width, height, 1, gray.data());
}

void decode_gray_png(const std::vector<std::uint8_t>& bytes, int& width, int& height,
                     std::vector<std::uint8_t>& gray) {
    decode_common(bytes, true, width, height, gray);
}

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
    std::vector<std::uint8_t> gray(mask.bits.size());
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        gray[i] = mask.bits[i] ? 255 : 0;
    }
    return encode_gray_png(mask.width, mask.height, gray);
}

BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes) {
    BinaryMask mask;
    std::vector<std::uint8_t> gray;
    decode_gray_png(bytes, mask.width, mask.height, gray);
    mask.bits.resize(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        mask.bits[i] = gray[i] >= 128 ? 1 : 0;
    }
    return mask;
}

RasterImage read_image(const std::string& path) {
    return decode_png(read_file_bytes(path));
}

void write_image(const RasterImage& image, const std::string& path) {
    write_file_bytes(path, encode_png(image));
}

BinaryMask read_binary_mask(const std::string& path) {
    return decode_mask_png(read_file_bytes(path));
}

void write_binary_mask(const BinaryMask& mask, const std::string& path) {
    write_file_bytes(path, encode_mask_png(mask));
}

SoftMask read_soft_mask(const std::string& path) {
    SoftMask mask;
    std::vector<std::uint8_t> gray;
    decode_gray_png(read_file_bytes(path), mask.width, mask.height, gray);
    mask.alpha.resize(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        mask.alpha[i] = gray[i] / 255.0;
    }
    return mask;
}

void write_soft_mask(const SoftMask& mask, const std::string& path) {
    std::vector<std::uint8_t> gray(mask.alpha.size());
    for (std::size_t i = 0; i < mask.alpha.size(); ++i) {
        double v = std::clamp(mask.alpha[i], 0.0, 1.0);
        gray[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    write_file_bytes(path, encode_gray_png(mask.width, mask.height, gray));
}

}  // namespace perturbex
