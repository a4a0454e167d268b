#pragma once

// Image file I/O: 8/16-bit grayscale PNG and PGM in, 8-bit PNG/PGM out.

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "craq/image.hpp"

namespace craq::io {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw Error("cannot open '" + path.string() + "'");
    return f;
}

[[noreturn]] inline void png_error_fn(png_structp, png_const_charp msg) { throw Error(std::string("png: ") + msg); }
inline void png_warning_fn(png_structp, png_const_charp) {}

inline void skip_pnm_space(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

}  // namespace detail

/// Reads PNG of any colour type; colour is reduced to luma, alpha dropped,
/// and samples rescaled to [0,1] from their bit depth.
inline GrayImage read_png(const std::filesystem::path& path) {
    auto file = detail::open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw Error("'" + path.string() + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn,
                                             detail::png_warning_fn);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buf(rowbytes * static_cast<std::size_t>(h));
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + rowbytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());

    GrayImage img(w, h);
    for (int y = 0; y < h; ++y) {
        const unsigned char* row = rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < w; ++x) {
            if (out_depth == 16) {
                const auto v = static_cast<unsigned>(row[2 * x]) | (static_cast<unsigned>(row[2 * x + 1]) << 8);
                img.at(x, y) = v / 65535.0;
            } else {
                img.at(x, y) = row[x] / 255.0;
            }
        }
    }
    return img;
}

/// Writes an 8-bit grayscale PNG; values are clamped to [0,1].
inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
    auto file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn,
                                              detail::png_warning_fn);
    if (!png) throw Error("png: out of memory");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            row[static_cast<std::size_t>(x)] =
                static_cast<unsigned char>(std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255.0));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
}

inline GrayImage to_gray(const BinaryMask& m) {
    GrayImage g(m.width, m.height);
    for (std::size_t i = 0; i < m.size(); ++i) g.data[i] = m.data[i] ? 1.0 : 0.0;
    return g;
}

inline BinaryMask to_mask(const GrayImage& g, double threshold = 0.5) {
    BinaryMask m(g.width, g.height);
    for (std::size_t i = 0; i < g.size(); ++i) m.data[i] = g.data[i] > threshold ? 1 : 0;
    return m;
}

/// Mask as 0/255 PNG.
inline void write_png(const std::filesystem::path& path, const BinaryMask& m) { write_png(path, to_gray(m)); }

/// Binary (P5) or ASCII (P2) PGM, maxval up to 65535.
inline GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") throw Error("'" + path.string() + "' is not a PGM file");
    int w = 0, h = 0, maxval = 0;
    detail::skip_pnm_space(in);
    in >> w;
    detail::skip_pnm_space(in);
    in >> h;
    detail::skip_pnm_space(in);
    in >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw Error("malformed PGM header");
    GrayImage img(w, h);
    if (magic == "P2") {
        for (auto& v : img.data) {
            int s = 0;
            detail::skip_pnm_space(in);
            in >> s;
            v = static_cast<double>(s) / maxval;
        }
    } else {
        in.get();
        const bool wide = maxval > 255;
        for (auto& v : img.data) {
            int s = in.get();
            if (wide) s = (s << 8) | in.get();
            v = static_cast<double>(s) / maxval;
        }
    }
    if (!in) throw Error("truncated PGM data");
    return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "'");
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    for (double v : img.data) out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
}

/// Dispatches on the file signature rather than the extension.
inline GrayImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    char head[2] = {};
    in.read(head, 2);
    if (head[0] == 'P' && (head[1] == '5' || head[1] == '2')) return read_pgm(path);
    return read_png(path);
}

}  // namespace craq::io
