// SPDX-License-Identifier: Apache-2.0
//
// Minimal raster type plus PNG (8-bit) and PFM (32-bit float) I/O.

#pragma once

#include <string>
#include <vector>

namespace neutex {

// Row-major, values in [0,1] for 8-bit round trips; 1 or 3 channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    static Image create(int width, int height, int channels, double fill = 0.0);
    double& at(int x, int y, int c);
    double at(int x, int y, int c) const;
    size_t index(int x, int y, int c) const {
        return (static_cast<size_t>(y) * static_cast<size_t>(width) +
                static_cast<size_t>(x)) * static_cast<size_t>(channels) +
               static_cast<size_t>(c);
    }
};

// Quantizes to 8 bits with round-half-up; values clamped to [0,1].
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

// Lossless float sidecar (PFM, little-endian, bottom-up rows).
void write_pfm(const std::string& path, const Image& image);
Image read_pfm(const std::string& path);

double mse(const Image& a, const Image& b);

}  // namespace neutex
