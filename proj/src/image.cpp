// SPDX-License-Identifier: Apache-2.0

#include "neutex/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace neutex {

Image Image::create(int width, int height, int channels, double fill) {
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.assign(static_cast<size_t>(width) * static_cast<size_t>(height) *
                        static_cast<size_t>(channels),
                    fill);
    return img;
}

double& Image::at(int x, int y, int c) { return data[index(x, y, c)]; }
double Image::at(int x, int y, int c) const { return data[index(x, y, c)]; }

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw std::runtime_error("write_png: 1 or 3 channels required");
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(image.width) *
                              static_cast<size_t>(image.channels));
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
                row[static_cast<size_t>(x * image.channels + c)] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng failure for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_expand(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = static_cast<int>(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: unsupported channel count in " + path);
    }
    Image img = Image::create(width, height, channels);
    std::vector<png_byte> row(static_cast<size_t>(width) * static_cast<size_t>(channels));
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(x, y, c) = row[static_cast<size_t>(x * channels + c)] / 255.0;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_pfm(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw std::runtime_error("write_pfm: 1 or 3 channels required");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_pfm: cannot open " + path);
    os << (image.channels == 3 ? "PF" : "Pf") << '\n'
       << image.width << ' ' << image.height << '\n'
       << "-1.0" << '\n';
    std::vector<float> row(static_cast<size_t>(image.width) *
                           static_cast<size_t>(image.channels));
    for (int y = image.height - 1; y >= 0; --y) {  // bottom-up
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                row[static_cast<size_t>(x * image.channels + c)] =
                    static_cast<float>(image.at(x, y, c));
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

Image read_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_pfm: cannot open " + path);
    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    is >> magic >> width >> height >> scale;
    is.get();  // newline after scale
    if (magic != "PF" && magic != "Pf") throw std::runtime_error("read_pfm: bad magic in " + path);
    if (scale >= 0) throw std::runtime_error("read_pfm: big-endian PFM not supported: " + path);
    const int channels = magic == "PF" ? 3 : 1;
    Image img = Image::create(width, height, channels);
    std::vector<float> row(static_cast<size_t>(width) * static_cast<size_t>(channels));
    for (int y = height - 1; y >= 0; --y) {
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!is) throw std::runtime_error("read_pfm: truncated data in " + path);
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(x, y, c) = row[static_cast<size_t>(x * channels + c)];
            }
        }
    }
    return img;
}

double mse(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw std::runtime_error("mse: image shape mismatch");
    }
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

}  // namespace neutex
