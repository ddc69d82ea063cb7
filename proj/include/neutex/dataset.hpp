// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion and the synthetic shell scene with its analytic oracle.
//
// Directory layout:
//   root/images/%04d.png   RGB views
//   root/masks/%04d.png    binary foreground masks (strictly 0 or 255)
//   root/cameras.json      {"views":[{fx,fy,cx,cy,width,height,
//                            world_from_camera:[12 row-major numbers]}...],
//                           "bounding_box":{"min":[...],"max":[...]}?}
//   root/points.ply        optional initialization point cloud (ASCII)
//   root/oracle_truth/     synthetic-only: exact surface point cloud
//
// Scene normalization maps the bounding box (given, or derived from the
// cameras' common look-at point) isotropically into 0.9*[-1,1]^3:
// x_norm = scale * (x_raw - center).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neutex/camera.hpp"
#include "neutex/image.hpp"
#include "neutex/render.hpp"

namespace neutex {

struct Normalization {
    double scale = 1.0;
    Vec3 center{0, 0, 0};
    Vec3 apply(const Vec3& p) const { return scale * (p - center); }
};

struct SceneDataset {
    std::vector<Image> images;  // RGB in [0,1]
    std::vector<Image> masks;   // grayscale, strictly {0,1}
    std::vector<Camera> cameras;  // already normalized
    Normalization normalization;
    std::vector<Vec3> point_cloud;  // normalized coordinates

    size_t view_count() const { return images.size(); }
};

SceneDataset load_dataset(const std::string& root);

std::vector<Vec3> load_point_cloud(const std::string& path);
void write_point_cloud(const std::string& path, const std::vector<Vec3>& points);

// Voxel-grid downsample; the grid size is searched so the result lands in
// [min_points, max_points] (throws if the input is too small).
std::vector<Vec3> downsample_point_cloud(const std::vector<Vec3>& points,
                                         size_t min_points, size_t max_points);

// ---------------------------------------------------------------------------
// synthetic shell scene (the desk-scale oracle)
// ---------------------------------------------------------------------------

struct ShellScene {
    double radius = 0.5;   // shell radius
    double width = 0.05;   // gaussian shell thickness
    double sigma0 = 50.0;  // peak density
    bool view_tint = false;

    double density(const Vec3& x) const;
    Vec3 uv(const Vec3& x) const;  // x / |x|
    Vec3 texture(const Vec3& u, const Vec3& d) const;  // smooth pattern in [0,1]
};

// RadianceField view of the analytic scene; the independent oracle for the
// renderer and texture tools.
class AnalyticField final : public RadianceField {
  public:
    explicit AnalyticField(const ShellScene& scene) : scene_(scene) {}
    void eval(std::span<const Vec3> x, const Vec3& d, std::span<double> sigma,
              std::span<Vec3> rgb, std::span<Vec3> uv) const override;
    bool has_uv() const override { return true; }
    const ShellScene& scene() const { return scene_; }

  private:
    ShellScene scene_;
};

struct SynthConfig {
    ShellScene shell;
    int n_views = 30;
    int resolution = 64;
    double camera_distance = 2.5;
    double fov_deg = 30.0;
    int quadrature_samples = 4096;
    int point_cloud_size = 20000;
    double point_cloud_noise = 0.01;
    uint64_t seed = 1;
};

Camera make_orbit_camera(const Vec3& position, int width, int height, double fov_deg);
std::vector<Camera> synth_camera_rig(const SynthConfig& config);

// Midpoint-quadrature oracle render of one pixel (Eqs. shared with
// composite()); returns color and opacity 1 - T.
std::pair<Vec3, double> oracle_render(const ShellScene& scene, const Camera& camera,
                                      int px, int py, int n_quad);

// Writes the full dataset layout plus oracle_truth/ and returns it in memory.
SceneDataset generate_synthetic(const SynthConfig& config, const std::string& out_dir,
                                int threads = 1);

}  // namespace neutex
