// SPDX-License-Identifier: Apache-2.0

#include "neutex/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "neutex/rng.hpp"

namespace neutex {

void Camera::validate() const {
    if (fx <= 0 || fy <= 0) throw std::runtime_error("camera: fx/fy must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height) {
        throw std::runtime_error("camera: principal point outside image");
    }
    const auto& r = rotation;
    auto rowdot = [&](int a, int b) {
        return r[static_cast<size_t>(3 * a)] * r[static_cast<size_t>(3 * b)] +
               r[static_cast<size_t>(3 * a + 1)] * r[static_cast<size_t>(3 * b + 1)] +
               r[static_cast<size_t>(3 * a + 2)] * r[static_cast<size_t>(3 * b + 2)];
    };
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            double expect = (a == b) ? 1.0 : 0.0;
            if (std::abs(rowdot(a, b) - expect) > 1e-6) {
                throw std::runtime_error("camera: rotation is not orthonormal");
            }
        }
    }
    const double det =
        r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
        r[2] * (r[3] * r[7] - r[4] * r[6]);
    if (std::abs(det - 1.0) > 1e-6) {
        throw std::runtime_error("camera: rotation determinant is not +1");
    }
}

Vec3 Camera::camera_to_world_dir(const Vec3& d) const {
    const auto& r = rotation;
    return {r[0] * d[0] + r[1] * d[1] + r[2] * d[2],
            r[3] * d[0] + r[4] * d[1] + r[5] * d[2],
            r[6] * d[0] + r[7] * d[1] + r[8] * d[2]};
}

Vec3 Camera::world_to_camera_point(const Vec3& p) const {
    const Vec3 q = p - translation;
    const auto& r = rotation;  // inverse of a rotation is its transpose
    return {r[0] * q[0] + r[3] * q[1] + r[6] * q[2],
            r[1] * q[0] + r[4] * q[1] + r[7] * q[2],
            r[2] * q[0] + r[5] * q[1] + r[8] * q[2]};
}

std::array<double, 3> Camera::project(const Vec3& p) const {
    const Vec3 c = world_to_camera_point(p);
    return {fx * c[0] / c[2] + cx, fy * c[1] / c[2] + cy, c[2]};
}

void intersect_unit_box(Ray& ray) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[static_cast<size_t>(a)];
        const double d = ray.direction[static_cast<size_t>(a)];
        if (d == 0.0) {
            if (o < -1.0 || o > 1.0) {
                ray.hit = false;
                return;
            }
            continue;
        }
        double ta = (-1.0 - o) / d;
        double tb = (1.0 - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    ray.t_near = t0;
    ray.t_far = t1;
    ray.hit = t0 < t1;
}

Ray generate_ray(const Camera& camera, int px, int py, bool jitter, Rng& rng) {
    if (px < 0 || px >= camera.width || py < 0 || py >= camera.height) {
        throw std::runtime_error("generate_ray: pixel outside image bounds");
    }
    double sx = px + 0.5, sy = py + 0.5;
    if (jitter) {
        sx = px + rng.uniform();
        sy = py + rng.uniform();
    }
    const Vec3 cam_dir = {(sx - camera.cx) / camera.fx, (sy - camera.cy) / camera.fy, 1.0};
    Ray ray;
    ray.origin = camera.position();
    ray.direction = normalized(camera.camera_to_world_dir(cam_dir));
    intersect_unit_box(ray);
    return ray;
}

RaySamples sample_stratified(const Ray& ray, int n, bool jitter, Rng& rng) {
    if (!ray.hit) throw std::runtime_error("sample_stratified: ray missed the box");
    if (n < 2) throw std::runtime_error("sample_stratified: need at least 2 samples");
    RaySamples out;
    out.t.resize(static_cast<size_t>(n));
    out.delta.resize(static_cast<size_t>(n));
    const double span = ray.t_far - ray.t_near;
    const double bin = span / n;
    for (int i = 0; i < n; ++i) {
        const double u = jitter ? rng.uniform() : 0.5;
        out.t[static_cast<size_t>(i)] = ray.t_near + (i + u) * bin;
    }
    for (int i = 0; i + 1 < n; ++i) {
        out.delta[static_cast<size_t>(i)] =
            out.t[static_cast<size_t>(i + 1)] - out.t[static_cast<size_t>(i)];
    }
    out.delta[static_cast<size_t>(n - 1)] = ray.t_far - out.t[static_cast<size_t>(n - 1)];
    return out;
}

}  // namespace neutex
