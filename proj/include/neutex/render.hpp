// SPDX-License-Identifier: Apache-2.0
//
// Differentiable-formula compositing (shared with the synthetic oracle) and
// the inference rendering paths over any radiance field.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "neutex/camera.hpp"
#include "neutex/image.hpp"
#include "neutex/vec.hpp"

namespace neutex {

// sigma*delta is clamped here before exponentiation so opaque segments keep
// a usable gradient instead of underflowing to exactly zero.
inline constexpr double kSigmaDeltaClamp = 80.0;

// Read-only radiance field: density sigma and radiance c at sample points
// along one viewing direction. `uv` may be empty; when provided it receives
// the per-sample texture coordinate (unit 3-vector).
class RadianceField {
  public:
    virtual ~RadianceField() = default;
    virtual void eval(std::span<const Vec3> x, const Vec3& d,
                      std::span<double> sigma, std::span<Vec3> rgb,
                      std::span<Vec3> uv) const = 0;
    virtual bool has_uv() const { return false; }
};

struct CompositeResult {
    Vec3 color{0, 0, 0};
    std::vector<double> transmittance;  // T_i, i = 1..N (T_1 = 1)
    std::vector<double> weight;         // w_i = T_i (1 - exp(-sigma_i delta_i))
    double final_transmittance = 1.0;   // T_{N+1}, after the last segment
};

// T_i = exp(-sum_{j<i} sigma_j delta_j); I = sum w_i c_i. Throws on negative
// sigma or non-positive delta.
CompositeResult composite(std::span<const double> sigma,
                          std::span<const Vec3> rgb,
                          std::span<const double> delta);

struct PixelRender {
    bool hit = false;
    Vec3 color{0, 0, 0};
    double final_transmittance = 1.0;
    std::vector<double> weight;
    std::vector<Vec3> positions;
    std::vector<Vec3> uv;  // filled when requested and the field supports it
};

struct RenderOptions {
    int n_samples = 256;
    bool jitter = false;
    uint64_t seed = 0;
    int threads = 1;
    int chunk_size = 4096;  // pixels per work unit; never affects output bits
    bool want_uv = false;
};

PixelRender render_pixel(const RadianceField& field, const Camera& camera,
                         int px, int py, const RenderOptions& options);

// Per-pixel attribution of the dominant (top-weight) sample, used for edit
// locality checks and UV-coverage diagnostics.
struct PixelAttribution {
    bool hit = false;
    double opacity = 0.0;   // 1 - T_{N+1}
    double top_weight = 0.0;
    Vec3 uv{0, 0, 1};
    Vec3 position{0, 0, 0};
};

struct RenderResult {
    Image color;           // RGB
    Image transmittance;   // grayscale T_{N+1}
    std::vector<PixelAttribution> attribution;  // filled when want_uv is set
};

RenderResult render_image(const RadianceField& field, const Camera& camera,
                          const RenderOptions& options);

}  // namespace neutex
