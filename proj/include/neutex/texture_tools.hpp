// SPDX-License-Identifier: Apache-2.0
//
// Texture extraction, editing, diagnostics, and surface unprojection over a
// trained field set.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "neutex/cubemap.hpp"
#include "neutex/fields.hpp"
#include "neutex/render.hpp"

namespace neutex {

// Hook replacing or modulating the texture lookup during rendering. When
// needs_base() is false the underlying texture network is never evaluated.
class TextureOverride {
  public:
    virtual ~TextureOverride() = default;
    virtual Vec3 apply(const Vec3& uv, const Vec3& base) const = 0;
    virtual bool needs_base() const = 0;
};

// Multiplicative edit: c' = clamp(base * edit(u), 0, 1). The modulator is a
// cubemap (bilinear) or a constant; values must be >= 0.
class EditTexture final : public TextureOverride {
  public:
    explicit EditTexture(CubemapTexture cubemap);
    explicit EditTexture(const Vec3& constant);
    Vec3 modulator(const Vec3& uv) const;
    Vec3 apply(const Vec3& uv, const Vec3& base) const override;
    bool needs_base() const override { return true; }

  private:
    std::optional<CubemapTexture> cubemap_;
    Vec3 constant_{1, 1, 1};
};

// Full texture replacement by a stored cubemap (bilinear lookup).
class ReplacementTexture final : public TextureOverride {
  public:
    explicit ReplacementTexture(CubemapTexture cubemap) : cubemap_(std::move(cubemap)) {}
    Vec3 apply(const Vec3& uv, const Vec3&) const override {
        return cubemap_.sample_bilinear(uv);
    }
    bool needs_base() const override { return false; }

  private:
    CubemapTexture cubemap_;
};

// Full texture replacement with a two-tone checker over each cubemap face:
// parity = floor(s*n) + floor(t*n) mod 2.
class CheckerTexture final : public TextureOverride {
  public:
    explicit CheckerTexture(int n_squares, const Vec3& tone_a = {0.9, 0.9, 0.9},
                            const Vec3& tone_b = {0.1, 0.1, 0.1});
    Vec3 apply(const Vec3& uv, const Vec3& base) const override;
    bool needs_base() const override { return false; }
    int squares() const { return n_squares_; }

  private:
    int n_squares_;
    Vec3 tone_a_, tone_b_;
};

// RadianceField view of a FieldSet for inference rendering, with an optional
// texture override.
class NeuralField final : public RadianceField {
  public:
    explicit NeuralField(const FieldSet& fields,
                         const TextureOverride* override_hook = nullptr)
        : fields_(&fields), override_(override_hook) {}
    void eval(std::span<const Vec3> x, const Vec3& d, std::span<double> sigma,
              std::span<Vec3> rgb, std::span<Vec3> uv) const override;
    bool has_uv() const override { return true; }

  private:
    const FieldSet* fields_;
    const TextureOverride* override_;
};

// Per-texel componentwise maximum of the texture network across the given
// view directions (a singleton view set reproduces the direct evaluation).
CubemapTexture export_texture(const FieldSet& fields, int resolution,
                              const std::vector<Vec3>& view_dirs);

struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> quads;
};

// Unprojects a per-face regular cubemap grid of UV points through the
// inverse mapping. Grid corners shared between faces are deduplicated on the
// integer cube lattice and ordered canonically (sorted lattice key), so the
// vertex count is 6*(n+1)^2 - 12*(n+1) + 8 for grid_n = n.
SurfaceMesh extract_surface(const FieldSet& fields, int grid_n);
long surface_vertex_count(int grid_n);
void write_obj(const std::string& path, const SurfaceMesh& mesh);

// Fraction of cubemap texels (diagnostic resolution 64) receiving at least
// one sample mapped through the texture mapping network.
inline constexpr int kCoverageResolution = 64;
double uv_coverage_metric(const FieldSet& fields, const std::vector<Vec3>& surface_samples);

}  // namespace neutex
