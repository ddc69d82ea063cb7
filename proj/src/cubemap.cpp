// SPDX-License-Identifier: Apache-2.0

#include "neutex/cubemap.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace neutex {

const char* const kCubeFaceNames[6] = {"pos_x", "neg_x", "pos_y",
                                       "neg_y", "pos_z", "neg_z"};

namespace {
constexpr double kPi = 3.14159265358979323846;
}

CubemapCoord dir_to_cubemap(const Vec3& u) {
    int axis = 0;
    double best = std::abs(u[0]);
    if (std::abs(u[1]) > best) {
        axis = 1;
        best = std::abs(u[1]);
    }
    if (std::abs(u[2]) > best) {
        axis = 2;
        best = std::abs(u[2]);
    }
    const bool positive = u[static_cast<size_t>(axis)] >= 0.0;
    const double inv = 1.0 / best;
    double a = 0, b = 0;
    switch (axis) {
        case 0: a = u[1]; b = u[2]; break;
        case 1: a = u[0]; b = u[2]; break;
        default: a = u[0]; b = u[1]; break;
    }
    CubemapCoord c;
    c.face = static_cast<CubeFace>(2 * axis + (positive ? 0 : 1));
    c.s = 0.5 * (a * inv + 1.0);
    c.t = 0.5 * (b * inv + 1.0);
    return c;
}

Vec3 cubemap_to_dir(CubeFace face, double s, double t) {
    const int f = static_cast<int>(face);
    const int axis = f / 2;
    const double sign = (f % 2 == 0) ? 1.0 : -1.0;
    const double a = 2.0 * s - 1.0;
    const double b = 2.0 * t - 1.0;
    Vec3 v;
    switch (axis) {
        case 0: v = {sign, a, b}; break;
        case 1: v = {a, sign, b}; break;
        default: v = {a, b, sign}; break;
    }
    return normalized(v);
}

CubemapTexture CubemapTexture::create(int resolution, const Vec3& fill) {
    CubemapTexture cm;
    cm.resolution = resolution;
    for (auto& face : cm.faces) {
        face = Image::create(resolution, resolution, 3);
        for (int y = 0; y < resolution; ++y) {
            for (int x = 0; x < resolution; ++x) {
                for (int c = 0; c < 3; ++c) face.at(x, y, c) = fill[static_cast<size_t>(c)];
            }
        }
    }
    return cm;
}

Vec3 CubemapTexture::texel(CubeFace face, int i, int j) const {
    const Image& img = faces[static_cast<size_t>(face)];
    return {img.at(i, j, 0), img.at(i, j, 1), img.at(i, j, 2)};
}

void CubemapTexture::set_texel(CubeFace face, int i, int j, const Vec3& rgb) {
    Image& img = faces[static_cast<size_t>(face)];
    img.at(i, j, 0) = rgb[0];
    img.at(i, j, 1) = rgb[1];
    img.at(i, j, 2) = rgb[2];
}

Vec3 CubemapTexture::texel_dir(CubeFace face, int i, int j) const {
    return cubemap_to_dir(face, (i + 0.5) / resolution, (j + 0.5) / resolution);
}

Vec3 CubemapTexture::sample_nearest(const Vec3& u) const {
    CubemapCoord c = dir_to_cubemap(u);
    const int i = std::clamp(static_cast<int>(c.s * resolution), 0, resolution - 1);
    const int j = std::clamp(static_cast<int>(c.t * resolution), 0, resolution - 1);
    return texel(c.face, i, j);
}

Vec3 CubemapTexture::sample_bilinear(const Vec3& u) const {
    CubemapCoord c = dir_to_cubemap(u);
    const double fs = c.s * resolution - 0.5;
    const double ft = c.t * resolution - 0.5;
    const int i0 = std::clamp(static_cast<int>(std::floor(fs)), 0, resolution - 1);
    const int j0 = std::clamp(static_cast<int>(std::floor(ft)), 0, resolution - 1);
    const int i1 = std::min(i0 + 1, resolution - 1);
    const int j1 = std::min(j0 + 1, resolution - 1);
    const double wi = std::clamp(fs - i0, 0.0, 1.0);
    const double wj = std::clamp(ft - j0, 0.0, 1.0);
    Vec3 out{0, 0, 0};
    const Vec3 c00 = texel(c.face, i0, j0), c10 = texel(c.face, i1, j0);
    const Vec3 c01 = texel(c.face, i0, j1), c11 = texel(c.face, i1, j1);
    for (size_t k = 0; k < 3; ++k) {
        out[k] = (1 - wi) * (1 - wj) * c00[k] + wi * (1 - wj) * c10[k] +
                 (1 - wi) * wj * c01[k] + wi * wj * c11[k];
    }
    return out;
}

Vec3 equirect_dir(int x, int y, int width, int height) {
    const double lon = ((x + 0.5) / width) * 2.0 * kPi - kPi;
    const double lat = kPi / 2.0 - ((y + 0.5) / height) * kPi;
    return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

Image cubemap_to_equirect(const CubemapTexture& cubemap, int width, int height) {
    Image out = Image::create(width, height, 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            Vec3 rgb = cubemap.sample_bilinear(equirect_dir(x, y, width, height));
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[static_cast<size_t>(c)];
        }
    }
    return out;
}

CubemapTexture equirect_to_cubemap(const Image& equirect, int resolution) {
    CubemapTexture cm = CubemapTexture::create(resolution);
    for (int f = 0; f < 6; ++f) {
        for (int j = 0; j < resolution; ++j) {
            for (int i = 0; i < resolution; ++i) {
                const Vec3 d = cm.texel_dir(static_cast<CubeFace>(f), i, j);
                const double lon = std::atan2(d[1], d[0]);
                const double lat = std::asin(std::clamp(d[2], -1.0, 1.0));
                const double fx = (lon + kPi) / (2.0 * kPi) * equirect.width - 0.5;
                const double fy = (kPi / 2.0 - lat) / kPi * equirect.height - 0.5;
                const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, equirect.width - 1);
                const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, equirect.height - 1);
                const int x1 = std::min(x0 + 1, equirect.width - 1);
                const int y1 = std::min(y0 + 1, equirect.height - 1);
                const double wx = std::clamp(fx - x0, 0.0, 1.0);
                const double wy = std::clamp(fy - y0, 0.0, 1.0);
                Vec3 rgb;
                for (int c = 0; c < 3; ++c) {
                    rgb[static_cast<size_t>(c)] =
                        (1 - wx) * (1 - wy) * equirect.at(x0, y0, c) +
                        wx * (1 - wy) * equirect.at(x1, y0, c) +
                        (1 - wx) * wy * equirect.at(x0, y1, c) +
                        wx * wy * equirect.at(x1, y1, c);
                }
                cm.set_texel(static_cast<CubeFace>(f), i, j, rgb);
            }
        }
    }
    return cm;
}

void save_cubemap(const std::string& directory, const CubemapTexture& cubemap,
                  const std::string& extra_manifest_json) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    for (int f = 0; f < 6; ++f) {
        const Image& face = cubemap.faces[static_cast<size_t>(f)];
        write_png(directory + "/" + kCubeFaceNames[f] + ".png", face);
        write_pfm(directory + "/" + kCubeFaceNames[f] + ".pfm", face);
    }
    // horizontal cross: -X +Z +X -Z in the middle row, +Y above and -Y below
    // the +Z tile
    const int r = cubemap.resolution;
    Image cross = Image::create(4 * r, 3 * r, 3);
    auto blit = [&](CubeFace face, int tile_x, int tile_y) {
        const Image& src = cubemap.faces[static_cast<size_t>(face)];
        for (int y = 0; y < r; ++y) {
            for (int x = 0; x < r; ++x) {
                for (int c = 0; c < 3; ++c) {
                    cross.at(tile_x * r + x, tile_y * r + y, c) = src.at(x, y, c);
                }
            }
        }
    };
    blit(CubeFace::NegX, 0, 1);
    blit(CubeFace::PosZ, 1, 1);
    blit(CubeFace::PosX, 2, 1);
    blit(CubeFace::NegZ, 3, 1);
    blit(CubeFace::PosY, 1, 0);
    blit(CubeFace::NegY, 1, 2);
    write_png(directory + "/cross.png", cross);

    nlohmann::json manifest;
    manifest["resolution"] = cubemap.resolution;
    manifest["face_order"] = {"pos_x", "neg_x", "pos_y", "neg_y", "pos_z", "neg_z"};
    manifest["face_convention"] =
        "dominant axis by max |component|, ties toward earlier face; s,t are "
        "the remaining components in axis order divided by |dominant|, "
        "mapped [-1,1]->[0,1]";
    if (!extra_manifest_json.empty()) {
        manifest["export"] = nlohmann::json::parse(extra_manifest_json);
    }
    std::ofstream os(directory + "/manifest.json");
    os << manifest.dump(2) << '\n';
}

CubemapTexture load_cubemap(const std::string& directory) {
    namespace fs = std::filesystem;
    nlohmann::json manifest;
    {
        std::ifstream is(directory + "/manifest.json");
        if (!is) throw std::runtime_error("load_cubemap: missing manifest in " + directory);
        is >> manifest;
    }
    const int r = manifest.at("resolution").get<int>();
    CubemapTexture cm;
    cm.resolution = r;
    for (int f = 0; f < 6; ++f) {
        const std::string pfm = directory + "/" + kCubeFaceNames[f] + ".pfm";
        const std::string png = directory + "/" + kCubeFaceNames[f] + ".png";
        Image face = fs::exists(pfm) ? read_pfm(pfm) : read_png(png);
        if (face.width != r || face.height != r || face.channels != 3) {
            throw std::runtime_error("load_cubemap: face " + std::string(kCubeFaceNames[f]) +
                                     " has wrong shape in " + directory);
        }
        cm.faces[static_cast<size_t>(f)] = std::move(face);
    }
    return cm;
}

}  // namespace neutex
