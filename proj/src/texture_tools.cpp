// SPDX-License-Identifier: Apache-2.0

#include "neutex/texture_tools.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace neutex {

namespace {

Tensor rows_tensor(std::span<const Vec3> rows) {
    std::vector<double> v(rows.size() * 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t k = 0; k < 3; ++k) v[3 * i + k] = rows[i][k];
    }
    return Tensor::from_vector({static_cast<long>(rows.size()), 3}, std::move(v));
}

Vec3 row_of(const Tensor& t, long i) {
    auto d = t.data();
    return {d[static_cast<size_t>(3 * i)], d[static_cast<size_t>(3 * i) + 1],
            d[static_cast<size_t>(3 * i) + 2]};
}

}  // namespace

EditTexture::EditTexture(CubemapTexture cubemap) : cubemap_(std::move(cubemap)) {
    for (const Image& face : cubemap_->faces) {
        for (double v : face.data) {
            if (!(v >= 0.0)) {
                throw std::runtime_error("EditTexture: modulator values must be >= 0");
            }
        }
    }
}

EditTexture::EditTexture(const Vec3& constant) : constant_(constant) {
    for (double v : constant) {
        if (!(v >= 0.0)) {
            throw std::runtime_error("EditTexture: modulator values must be >= 0");
        }
    }
}

Vec3 EditTexture::modulator(const Vec3& uv) const {
    return cubemap_ ? cubemap_->sample_bilinear(uv) : constant_;
}

Vec3 EditTexture::apply(const Vec3& uv, const Vec3& base) const {
    const Vec3 m = modulator(uv);
    Vec3 out;
    for (size_t k = 0; k < 3; ++k) out[k] = std::clamp(base[k] * m[k], 0.0, 1.0);
    return out;
}

CheckerTexture::CheckerTexture(int n_squares, const Vec3& tone_a, const Vec3& tone_b)
    : n_squares_(n_squares), tone_a_(tone_a), tone_b_(tone_b) {
    if (n_squares < 1) throw std::runtime_error("CheckerTexture: n_squares must be >= 1");
}

Vec3 CheckerTexture::apply(const Vec3& uv, const Vec3&) const {
    const CubemapCoord c = dir_to_cubemap(uv);
    const int si = std::min(static_cast<int>(std::floor(c.s * n_squares_)), n_squares_ - 1);
    const int ti = std::min(static_cast<int>(std::floor(c.t * n_squares_)), n_squares_ - 1);
    return ((si + ti) % 2 == 0) ? tone_a_ : tone_b_;
}

void NeuralField::eval(std::span<const Vec3> x, const Vec3& d, std::span<double> sigma,
                       std::span<Vec3> rgb, std::span<Vec3> uv) const {
    const long n = static_cast<long>(x.size());
    if (n == 0) return;
    Tensor X = rows_tensor(x);
    Tensor S = fields_->eval_density(X);
    Tensor U = fields_->eval_uv(X);
    for (long i = 0; i < n; ++i) sigma[static_cast<size_t>(i)] = S.data()[static_cast<size_t>(i)];
    if (!uv.empty()) {
        for (long i = 0; i < n; ++i) uv[static_cast<size_t>(i)] = row_of(U, i);
    }
    const bool need_base = override_ == nullptr || override_->needs_base();
    if (need_base) {
        std::vector<Vec3> drows(static_cast<size_t>(n), d);
        Tensor D = rows_tensor(drows);
        Tensor C = fields_->eval_texture(U, D);
        for (long i = 0; i < n; ++i) {
            const Vec3 base = row_of(C, i);
            rgb[static_cast<size_t>(i)] = override_ ? override_->apply(row_of(U, i), base) : base;
        }
    } else {
        for (long i = 0; i < n; ++i) {
            rgb[static_cast<size_t>(i)] = override_->apply(row_of(U, i), {0, 0, 0});
        }
    }
}

CubemapTexture export_texture(const FieldSet& fields, int resolution,
                              const std::vector<Vec3>& view_dirs) {
    if (resolution < 1) throw std::runtime_error("export_texture: resolution must be >= 1");
    if (view_dirs.empty()) throw std::runtime_error("export_texture: view direction set is empty");
    CubemapTexture cm = CubemapTexture::create(resolution);
    const long n = static_cast<long>(resolution) * resolution;
    for (int f = 0; f < 6; ++f) {
        std::vector<Vec3> texel_dirs(static_cast<size_t>(n));
        for (int j = 0; j < resolution; ++j) {
            for (int i = 0; i < resolution; ++i) {
                texel_dirs[static_cast<size_t>(j) * resolution + i] =
                    cm.texel_dir(static_cast<CubeFace>(f), i, j);
            }
        }
        Tensor U = rows_tensor(texel_dirs);
        std::vector<double> best(static_cast<size_t>(3 * n), 0.0);
        for (const Vec3& d_raw : view_dirs) {
            std::vector<Vec3> drows(static_cast<size_t>(n), normalized(d_raw));
            Tensor C = fields.eval_texture(U, rows_tensor(drows));
            auto c = C.data();
            for (size_t k = 0; k < best.size(); ++k) best[k] = std::max(best[k], c[k]);
        }
        for (int j = 0; j < resolution; ++j) {
            for (int i = 0; i < resolution; ++i) {
                const size_t row = static_cast<size_t>(j) * resolution + i;
                cm.set_texel(static_cast<CubeFace>(f), i, j,
                             {best[3 * row], best[3 * row + 1], best[3 * row + 2]});
            }
        }
    }
    return cm;
}

long surface_vertex_count(int grid_n) {
    const long m = grid_n + 1;
    return 6 * m * m - 12 * m + 8;
}

SurfaceMesh extract_surface(const FieldSet& fields, int grid_n) {
    if (grid_n < 1) throw std::runtime_error("extract_surface: grid_n must be >= 1");
    // Grid corners live on the integer cube lattice scaled by 2 so corners
    // shared between faces land on identical keys and deduplicate.
    std::map<std::array<long, 3>, int> index_of;
    std::vector<std::array<long, 3>> keys;
    const long n = grid_n;
    auto corner_key = [&](CubeFace face, long i, long j) {
        const int f = static_cast<int>(face);
        const int axis = f / 2;
        const long dom = (f % 2 == 0) ? 2 * n : 0;  // -1 -> 0, +1 -> 2n
        const long a = 2 * i, b = 2 * j;
        std::array<long, 3> key{};
        switch (axis) {
            case 0: key = {dom, a, b}; break;
            case 1: key = {a, dom, b}; break;
            default: key = {a, b, dom}; break;
        }
        return key;
    };
    for (int f = 0; f < 6; ++f) {
        for (long j = 0; j <= n; ++j) {
            for (long i = 0; i <= n; ++i) {
                auto key = corner_key(static_cast<CubeFace>(f), i, j);
                if (index_of.emplace(key, 0).second) keys.push_back(key);
            }
        }
    }
    // canonical ordering: sorted lattice key, independent of traversal order
    std::sort(keys.begin(), keys.end());
    for (size_t v = 0; v < keys.size(); ++v) index_of[keys[v]] = static_cast<int>(v);

    SurfaceMesh mesh;
    {
        std::vector<Vec3> us(keys.size());
        for (size_t v = 0; v < keys.size(); ++v) {
            const auto& key = keys[v];
            us[v] = normalized({key[0] / static_cast<double>(n) - 1.0,
                                key[1] / static_cast<double>(n) - 1.0,
                                key[2] / static_cast<double>(n) - 1.0});
        }
        Tensor X = fields.eval_uv_inv(rows_tensor(us));
        mesh.vertices.resize(keys.size());
        for (size_t v = 0; v < keys.size(); ++v) {
            mesh.vertices[v] = row_of(X, static_cast<long>(v));
        }
    }
    for (int f = 0; f < 6; ++f) {
        for (long j = 0; j < n; ++j) {
            for (long i = 0; i < n; ++i) {
                const auto face = static_cast<CubeFace>(f);
                mesh.quads.push_back({index_of.at(corner_key(face, i, j)),
                                      index_of.at(corner_key(face, i + 1, j)),
                                      index_of.at(corner_key(face, i + 1, j + 1)),
                                      index_of.at(corner_key(face, i, j + 1))});
            }
        }
    }
    return mesh;
}

void write_obj(const std::string& path, const SurfaceMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_obj: cannot open " + path);
    os.precision(17);
    for (const Vec3& v : mesh.vertices) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    for (const auto& q : mesh.quads) {
        os << "f " << q[0] + 1 << ' ' << q[1] + 1 << ' ' << q[2] + 1 << ' ' << q[3] + 1 << '\n';
    }
}

double uv_coverage_metric(const FieldSet& fields, const std::vector<Vec3>& surface_samples) {
    if (surface_samples.empty()) {
        throw std::runtime_error("uv_coverage_metric: empty sample set");
    }
    const int r = kCoverageResolution;
    std::vector<char> hit(static_cast<size_t>(6) * r * r, 0);
    Tensor U = fields.eval_uv(rows_tensor(surface_samples));
    for (long i = 0; i < static_cast<long>(surface_samples.size()); ++i) {
        const CubemapCoord c = dir_to_cubemap(row_of(U, i));
        const int si = std::clamp(static_cast<int>(c.s * r), 0, r - 1);
        const int ti = std::clamp(static_cast<int>(c.t * r), 0, r - 1);
        hit[(static_cast<size_t>(c.face) * r + static_cast<size_t>(ti)) * r +
            static_cast<size_t>(si)] = 1;
    }
    long covered = 0;
    for (char h : hit) covered += h;
    return static_cast<double>(covered) / static_cast<double>(hit.size());
}

}  // namespace neutex
