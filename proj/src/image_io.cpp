#include "semsplat/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "semsplat/errors.hpp"

namespace semsplat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

ImageU8 read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open PNG for reading: " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw FormatError("not a PNG file: " + path);
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // Normalize to 8-bit gray or RGB; palette is expanded to color.
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = static_cast<int>(png_get_channels(png, info));

    ImageU8 img(width, height, channels);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = img.data.data() + static_cast<std::size_t>(y) * width * channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw DimensionError("write_png expects 1 or 3 channels");
    }
    if (img.width < 1 || img.height < 1) throw DimensionError("write_png: empty image");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open PNG for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path);
    }

    png_init_io(png, fp.get());
    const int color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_const_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    }
    png_write_rows(png, const_cast<png_bytepp>(const_cast<png_bytep*>(rows.data())),
                   static_cast<png_uint_32>(img.height));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_pfm(const std::string& path, const ImageF& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw DimensionError("write_pfm expects 1 or 3 channels");
    }
    if (img.width < 1 || img.height < 1) throw DimensionError("write_pfm: empty image");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open PFM for writing: " + path);

    out << (img.channels == 3 ? "PF" : "Pf") << "\n"
        << img.width << " " << img.height << "\n"
        << "-1.0\n";

    // PFM rows run bottom-to-top.
    std::vector<float> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                row[static_cast<std::size_t>(x) * img.channels + c] =
                    static_cast<float>(img.at(x, y, c));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("PFM write failed: " + path);
}

ImageF read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PFM for reading: " + path);

    std::string magic;
    in >> magic;
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw FormatError("not a PFM file: " + path);

    int width = 0, height = 0;
    double scale = 0.0;
    in >> width >> height >> scale;
    if (!in || width < 1 || height < 1) throw FormatError("bad PFM header: " + path);
    if (scale >= 0.0) throw FormatError("big-endian PFM not supported: " + path);
    in.get();   // single whitespace after the scale line

    ImageF img(width, height, channels);
    std::vector<float> row(static_cast<std::size_t>(width) * channels);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw IoError("truncated PFM: " + path);
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(x, y, c) = row[static_cast<std::size_t>(x) * channels + c];
            }
        }
    }
    return img;
}

const std::array<std::array<std::uint8_t, 3>, 28>& label_palette() {
    static const std::array<std::array<std::uint8_t, 3>, 28> palette = {{
        {{128, 64, 128}},  {{244, 35, 232}},  {{70, 70, 70}},    {{102, 102, 156}},
        {{190, 153, 153}}, {{153, 153, 153}}, {{250, 170, 30}},  {{220, 220, 0}},
        {{107, 142, 35}},  {{152, 251, 152}}, {{70, 130, 180}},  {{220, 20, 60}},
        {{255, 0, 0}},     {{0, 0, 142}},     {{0, 0, 70}},      {{0, 60, 100}},
        {{0, 80, 100}},    {{0, 0, 230}},     {{119, 11, 32}},   {{255, 204, 54}},
        {{143, 255, 140}}, {{82, 18, 36}},    {{163, 255, 0}},   {{255, 140, 0}},
        {{0, 255, 209}},   {{255, 20, 147}},  {{95, 158, 160}},  {{255, 250, 205}},
    }};
    return palette;
}

ImageU8 colorize_labels(const ImageU8& labels) {
    if (labels.channels != 1) throw DimensionError("colorize_labels expects 1 channel");
    const auto& pal = label_palette();
    ImageU8 out(labels.width, labels.height, 3);
    for (int y = 0; y < labels.height; ++y) {
        for (int x = 0; x < labels.width; ++x) {
            const std::uint8_t v = labels.at(x, y);
            if (v == kIgnoreLabel) continue;   // black
            const auto& rgb = pal[v % pal.size()];
            out.at(x, y, 0) = rgb[0];
            out.at(x, y, 1) = rgb[1];
            out.at(x, y, 2) = rgb[2];
        }
    }
    return out;
}

ImageU8 quantize_to_u8(const ImageF& img) {
    ImageU8 out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

} // namespace semsplat
