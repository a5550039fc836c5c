#pragma once

// Thin libpng wrappers for the three image kinds the dataset layout uses:
// 8-bit RGB, 16-bit grayscale (depth), and 8-bit palette-indexed label maps.
// Readers are strict about pixel format so a wrong file is an error naming
// the path, never a silently misinterpreted tensor.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <png.h>

#include "latentbridge/common.hpp"

namespace lb {

struct Rgb8Image {
    int64_t height = 0, width = 0;
    std::vector<uint8_t> pixels;  // row-major, interleaved r,g,b
};

struct Gray16Image {
    int64_t height = 0, width = 0;
    std::vector<uint16_t> pixels;  // row-major
};

struct Indexed8Image {
    int64_t height = 0, width = 0;
    std::vector<uint8_t> pixels;  // row-major palette indices
    std::vector<std::array<uint8_t, 3>> palette;
};

namespace detail {

// RAII around the C API; all C++ objects live outside the setjmp region, so
// a libpng longjmp lands back in the caller frame with everything alive.
struct PngFile {
    std::FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;
    bool writing = false;
    ~PngFile() {
        if (png) {
            if (writing)
                png_destroy_write_struct(&png, info ? &info : nullptr);
            else
                png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        }
        if (fp) std::fclose(fp);
    }
};

inline void open_read(PngFile& f, const std::string& path) {
    f.fp = std::fopen(path.c_str(), "rb");
    if (!f.fp) throw DataError("cannot open image '" + path + "' for reading");
    f.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    f.info = f.png ? png_create_info_struct(f.png) : nullptr;
    if (!f.png || !f.info) throw DataError("libpng setup failed for '" + path + "'");
}

inline void open_write(PngFile& f, const std::string& path) {
    f.writing = true;
    f.fp = std::fopen(path.c_str(), "wb");
    if (!f.fp) throw DataError("cannot open image '" + path + "' for writing");
    f.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    f.info = f.png ? png_create_info_struct(f.png) : nullptr;
    if (!f.png || !f.info) throw DataError("libpng setup failed for '" + path + "'");
}

inline std::vector<png_bytep> row_pointers(uint8_t* base, int64_t rows, int64_t row_bytes) {
    std::vector<png_bytep> r(static_cast<size_t>(rows));
    for (int64_t y = 0; y < rows; ++y) r[static_cast<size_t>(y)] = base + y * row_bytes;
    return r;
}

// the PNG byte order for 16-bit samples is big endian
inline int endian_transform() {
    return std::endian::native == std::endian::little ? PNG_TRANSFORM_SWAP_ENDIAN
                                                      : PNG_TRANSFORM_IDENTITY;
}

inline void check_dims(const std::string& path, int64_t h, int64_t w, size_t n, int64_t per_px) {
    if (h < 1 || w < 1 || static_cast<int64_t>(n) != h * w * per_px)
        throw ShapeError("image buffer for '" + path + "' does not match " + std::to_string(h) +
                         "x" + std::to_string(w));
}

}  // namespace detail

inline void write_png_rgb8(const std::string& path, int64_t h, int64_t w,
                           const std::vector<uint8_t>& rgb) {
    detail::check_dims(path, h, w, rgb.size(), 3);
    detail::PngFile f;
    detail::open_write(f, path);
    auto rows = detail::row_pointers(const_cast<uint8_t*>(rgb.data()), h, w * 3);
    if (setjmp(png_jmpbuf(f.png))) throw DataError("failed to write image '" + path + "'");
    png_init_io(f.png, f.fp);
    png_set_IHDR(f.png, f.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_rows(f.png, f.info, rows.data());
    png_write_png(f.png, f.info, PNG_TRANSFORM_IDENTITY, nullptr);
}

inline void write_png_gray16(const std::string& path, int64_t h, int64_t w,
                             const std::vector<uint16_t>& v) {
    detail::check_dims(path, h, w, v.size(), 1);
    detail::PngFile f;
    detail::open_write(f, path);
    auto rows = detail::row_pointers(
        reinterpret_cast<uint8_t*>(const_cast<uint16_t*>(v.data())), h, w * 2);
    if (setjmp(png_jmpbuf(f.png))) throw DataError("failed to write image '" + path + "'");
    png_init_io(f.png, f.fp);
    png_set_IHDR(f.png, f.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_rows(f.png, f.info, rows.data());
    png_write_png(f.png, f.info, detail::endian_transform(), nullptr);
}

inline void write_png_indexed8(const std::string& path, int64_t h, int64_t w,
                               const std::vector<uint8_t>& idx,
                               const std::vector<std::array<uint8_t, 3>>& palette) {
    detail::check_dims(path, h, w, idx.size(), 1);
    if (palette.empty() || palette.size() > 256)
        throw ConfigError("palette for '" + path + "' must hold 1..256 entries");
    std::vector<png_color> plte(palette.size());
    for (size_t i = 0; i < palette.size(); ++i)
        plte[i] = {palette[i][0], palette[i][1], palette[i][2]};
    detail::PngFile f;
    detail::open_write(f, path);
    auto rows = detail::row_pointers(const_cast<uint8_t*>(idx.data()), h, w);
    if (setjmp(png_jmpbuf(f.png))) throw DataError("failed to write image '" + path + "'");
    png_init_io(f.png, f.fp);
    png_set_IHDR(f.png, f.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_PLTE(f.png, f.info, plte.data(), static_cast<int>(plte.size()));
    png_set_rows(f.png, f.info, rows.data());
    png_write_png(f.png, f.info, PNG_TRANSFORM_IDENTITY, nullptr);
}

inline Rgb8Image read_png_rgb8(const std::string& path) {
    detail::PngFile f;
    detail::open_read(f, path);
    if (setjmp(png_jmpbuf(f.png))) throw DataError("failed to decode image '" + path + "'");
    png_init_io(f.png, f.fp);
    png_read_png(f.png, f.info, PNG_TRANSFORM_IDENTITY, nullptr);
    if (png_get_color_type(f.png, f.info) != PNG_COLOR_TYPE_RGB ||
        png_get_bit_depth(f.png, f.info) != 8)
        throw DataError("image '" + path + "' is not 8-bit RGB");
    Rgb8Image img;
    img.height = png_get_image_height(f.png, f.info);
    img.width = png_get_image_width(f.png, f.info);
    img.pixels.resize(static_cast<size_t>(img.height * img.width * 3));
    png_bytepp rows = png_get_rows(f.png, f.info);
    for (int64_t y = 0; y < img.height; ++y)
        std::copy(rows[y], rows[y] + img.width * 3,
                  img.pixels.begin() + static_cast<size_t>(y * img.width * 3));
    return img;
}

inline Gray16Image read_png_gray16(const std::string& path) {
    detail::PngFile f;
    detail::open_read(f, path);
    if (setjmp(png_jmpbuf(f.png))) throw DataError("failed to decode image '" + path + "'");
    png_init_io(f.png, f.fp);
    png_read_png(f.png, f.info, detail::endian_transform(), nullptr);
    if (png_get_color_type(f.png, f.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(f.png, f.info) != 16)
        throw DataError("image '" + path + "' is not 16-bit grayscale");
    Gray16Image img;
    img.height = png_get_image_height(f.png, f.info);
    img.width = png_get_image_width(f.png, f.info);
    img.pixels.resize(static_cast<size_t>(img.height * img.width));
    png_bytepp rows = png_get_rows(f.png, f.info);
    for (int64_t y = 0; y < img.height; ++y) {
        const uint16_t* src = reinterpret_cast<const uint16_t*>(rows[y]);
        std::copy(src, src + img.width, img.pixels.begin() + static_cast<size_t>(y * img.width));
    }
    return img;
}

inline Indexed8Image read_png_indexed8(const std::string& path) {
    detail::PngFile f;
    detail::open_read(f, path);
    if (setjmp(png_jmpbuf(f.png))) throw DataError("failed to decode image '" + path + "'");
    png_init_io(f.png, f.fp);
    // PACKING expands 1/2/4-bit index files to one byte per pixel
    png_read_png(f.png, f.info, PNG_TRANSFORM_PACKING, nullptr);
    if (png_get_color_type(f.png, f.info) != PNG_COLOR_TYPE_PALETTE)
        throw DataError("image '" + path + "' is not palette-indexed");
    Indexed8Image img;
    img.height = png_get_image_height(f.png, f.info);
    img.width = png_get_image_width(f.png, f.info);
    img.pixels.resize(static_cast<size_t>(img.height * img.width));
    png_bytepp rows = png_get_rows(f.png, f.info);
    for (int64_t y = 0; y < img.height; ++y)
        std::copy(rows[y], rows[y] + img.width,
                  img.pixels.begin() + static_cast<size_t>(y * img.width));
    png_colorp plte = nullptr;
    int n = 0;
    if (png_get_PLTE(f.png, f.info, &plte, &n) == PNG_INFO_PLTE)
        for (int i = 0; i < n; ++i) img.palette.push_back({plte[i].red, plte[i].green, plte[i].blue});
    return img;
}

}  // namespace lb
