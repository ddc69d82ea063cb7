// SPDX-License-Identifier: Apache-2.0
//
// Calibrated pinhole cameras and ray generation against the unit box.
// Convention: camera looks down +z in camera space, x right, y down;
// `world_from_camera` is a rigid transform (row-major 3x3 rotation R and
// translation t) with world point = R * cam point + t.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "neutex/vec.hpp"

namespace neutex {

class Rng;

struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;  // pixels
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
    Vec3 translation{0, 0, 0};
    int width = 0, height = 0;

    // Throws if the rotation is not orthonormal with det +1 (to 1e-6) or the
    // intrinsics are out of range.
    void validate() const;

    Vec3 position() const { return translation; }
    Vec3 camera_to_world_dir(const Vec3& d) const;
    Vec3 world_to_camera_point(const Vec3& p) const;
    // Projects a world point to pixel coordinates; z <= 0 behind camera.
    std::array<double, 3> project(const Vec3& p) const;  // (px, py, depth)
};

struct Ray {
    Vec3 origin{0, 0, 0};
    Vec3 direction{0, 0, 1};  // unit
    double t_near = 0, t_far = 0;
    bool hit = false;  // false: missed the unit box
};

// Intersects o + t*d with [-1,1]^3; entry clamped to t >= 0.
void intersect_unit_box(Ray& ray);

// Unprojects through the pixel center (plus sub-pixel jitter when `jitter`),
// normalizes the direction in world space, and runs the slab test.
Ray generate_ray(const Camera& camera, int px, int py, bool jitter, Rng& rng);

struct RaySamples {
    std::vector<double> t;      // sample parameters, strictly increasing
    std::vector<double> delta;  // segment lengths, last one = t_far - t_n
};

// Stratified sampling: [t_near, t_far] split into n equal bins, one uniform
// sample per bin (bin midpoints when `jitter` is off).
RaySamples sample_stratified(const Ray& ray, int n, bool jitter, Rng& rng);

}  // namespace neutex
