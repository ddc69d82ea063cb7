// SPDX-License-Identifier: Apache-2.0

#include "neutex/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <tuple>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "neutex/rng.hpp"

namespace neutex {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBoxMargin = 0.9;  // bbox maps into 0.9*[-1,1]^3

std::string view_name(size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu.png", i);
    return buf;
}

Camera camera_from_json(const nlohmann::json& j, const std::string& what) {
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    auto m = j.at("world_from_camera").get<std::vector<double>>();
    if (m.size() != 12) {
        throw std::runtime_error(what + ": world_from_camera must hold 12 numbers");
    }
    // row-major 3x4: [R | t]
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            cam.rotation[static_cast<size_t>(3 * r + c)] = m[static_cast<size_t>(4 * r + c)];
        }
        cam.translation[static_cast<size_t>(r)] = m[static_cast<size_t>(4 * r + 3)];
    }
    try {
        cam.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(what + ": " + e.what());
    }
    return cam;
}

nlohmann::json camera_to_json(const Camera& cam) {
    std::vector<double> m(12);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            m[static_cast<size_t>(4 * r + c)] = cam.rotation[static_cast<size_t>(3 * r + c)];
        }
        m[static_cast<size_t>(4 * r + 3)] = cam.translation[static_cast<size_t>(r)];
    }
    return {{"fx", cam.fx},     {"fy", cam.fy},         {"cx", cam.cx},
            {"cy", cam.cy},     {"width", cam.width},   {"height", cam.height},
            {"world_from_camera", m}};
}

// Least-squares point closest to all optical axes; fallback scene center
// when no bounding box is provided.
Vec3 common_lookat(const std::vector<Camera>& cameras) {
    // solve sum_i (I - d_i d_i^T) p = sum_i (I - d_i d_i^T) o_i
    double A[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    Vec3 b{0, 0, 0};
    for (const Camera& cam : cameras) {
        const Vec3 d = normalized(cam.camera_to_world_dir({0, 0, 1}));
        const Vec3 o = cam.position();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                const double m = (r == c ? 1.0 : 0.0) - d[static_cast<size_t>(r)] * d[static_cast<size_t>(c)];
                A[3 * r + c] += m;
            }
            b[static_cast<size_t>(r)] +=
                ((r == 0 ? 1.0 : 0.0) - d[static_cast<size_t>(r)] * d[0]) * o[0] +
                ((r == 1 ? 1.0 : 0.0) - d[static_cast<size_t>(r)] * d[1]) * o[1] +
                ((r == 2 ? 1.0 : 0.0) - d[static_cast<size_t>(r)] * d[2]) * o[2];
        }
    }
    // 3x3 solve by Cramer's rule
    auto det3 = [](const double m[9]) {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    };
    const double d0 = det3(A);
    if (std::abs(d0) < 1e-12) return {0, 0, 0};
    Vec3 p;
    for (int c = 0; c < 3; ++c) {
        double M[9];
        std::copy(A, A + 9, M);
        for (int r = 0; r < 3; ++r) M[3 * r + c] = b[static_cast<size_t>(r)];
        p[static_cast<size_t>(c)] = det3(M) / d0;
    }
    return p;
}

}  // namespace

SceneDataset load_dataset(const std::string& root) {
    if (!fs::exists(root + "/cameras.json")) {
        throw std::runtime_error("load_dataset: missing " + root + "/cameras.json");
    }
    nlohmann::json meta;
    {
        std::ifstream is(root + "/cameras.json");
        is >> meta;
    }
    SceneDataset ds;
    const auto& views = meta.at("views");
    for (size_t i = 0; i < views.size(); ++i) {
        ds.cameras.push_back(camera_from_json(views[i], root + "/cameras.json view " + std::to_string(i)));
    }

    for (size_t i = 0; i < ds.cameras.size(); ++i) {
        const std::string img_path = root + "/images/" + view_name(i);
        const std::string mask_path = root + "/masks/" + view_name(i);
        if (!fs::exists(img_path)) throw std::runtime_error("load_dataset: missing " + img_path);
        if (!fs::exists(mask_path)) throw std::runtime_error("load_dataset: missing " + mask_path);
        Image img = read_png(img_path);
        Image mask = read_png(mask_path);
        if (img.channels == 1) {
            Image rgb = Image::create(img.width, img.height, 3);
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = img.at(x, y, 0);
                }
            }
            img = std::move(rgb);
        }
        if (mask.channels != 1) {
            Image gray = Image::create(mask.width, mask.height, 1);
            for (int y = 0; y < mask.height; ++y) {
                for (int x = 0; x < mask.width; ++x) gray.at(x, y, 0) = mask.at(x, y, 0);
            }
            mask = std::move(gray);
        }
        if (img.width != ds.cameras[i].width || img.height != ds.cameras[i].height) {
            throw std::runtime_error("load_dataset: image size mismatch for " + img_path);
        }
        if (mask.width != img.width || mask.height != img.height) {
            throw std::runtime_error("load_dataset: mask size mismatch for " + mask_path);
        }
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x) {
                const double v = mask.at(x, y, 0);
                if (v != 0.0 && v != 1.0) {
                    throw std::runtime_error("load_dataset: non-binary mask value " +
                                             std::to_string(v) + " at pixel (" +
                                             std::to_string(x) + "," + std::to_string(y) +
                                             ") in " + mask_path);
                }
            }
        }
        ds.images.push_back(std::move(img));
        ds.masks.push_back(std::move(mask));
    }

    // normalization
    Vec3 bb_min, bb_max;
    if (meta.contains("bounding_box")) {
        auto lo = meta["bounding_box"].at("min").get<std::vector<double>>();
        auto hi = meta["bounding_box"].at("max").get<std::vector<double>>();
        bb_min = {lo[0], lo[1], lo[2]};
        bb_max = {hi[0], hi[1], hi[2]};
    } else {
        const Vec3 center = common_lookat(ds.cameras);
        double dist = 0.0;
        for (const Camera& cam : ds.cameras) dist += norm(cam.position() - center);
        dist /= static_cast<double>(ds.cameras.size());
        const double half = 0.4 * dist;
        bb_min = center - Vec3{half, half, half};
        bb_max = center + Vec3{half, half, half};
    }
    const Vec3 center = 0.5 * (bb_min + bb_max);
    const Vec3 half = 0.5 * (bb_max - bb_min);
    const double extent = std::max({half[0], half[1], half[2]});
    ds.normalization.scale = kBoxMargin / extent;
    ds.normalization.center = center;
    for (Camera& cam : ds.cameras) {
        cam.translation = ds.normalization.apply(cam.translation);
        const Vec3 p = cam.position();
        if (std::abs(p[0]) <= 1.0 && std::abs(p[1]) <= 1.0 && std::abs(p[2]) <= 1.0) {
            throw std::runtime_error("load_dataset: camera inside the unit box after normalization");
        }
    }

    if (fs::exists(root + "/points.ply")) {
        auto raw = load_point_cloud(root + "/points.ply");
        ds.point_cloud.reserve(raw.size());
        for (const Vec3& p : raw) ds.point_cloud.push_back(ds.normalization.apply(p));
    }
    return ds;
}

std::vector<Vec3> load_point_cloud(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_point_cloud: cannot open " + path);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(is, line)) {
            throw std::runtime_error("load_point_cloud: unexpected end of file at line " +
                                     std::to_string(line_no) + " in " + path);
        }
        ++line_no;
    };
    next_line();
    if (line != "ply") throw std::runtime_error("load_point_cloud: line 1: not a PLY file: " + path);
    next_line();
    if (line.rfind("format ascii", 0) != 0) {
        throw std::runtime_error("load_point_cloud: line 2: only ASCII PLY supported: " + path);
    }
    size_t n_vertices = 0;
    std::vector<std::string> properties;
    for (;;) {
        next_line();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "element") {
            std::string kind;
            ls >> kind >> n_vertices;
            if (kind != "vertex") {
                throw std::runtime_error("load_point_cloud: line " + std::to_string(line_no) +
                                         ": unsupported element '" + kind + "'");
            }
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            properties.push_back(name);
        } else if (tok == "end_header") {
            break;
        } else {
            throw std::runtime_error("load_point_cloud: line " + std::to_string(line_no) +
                                     ": unexpected header token '" + tok + "'");
        }
    }
    auto find_prop = [&](const std::string& name) {
        auto it = std::find(properties.begin(), properties.end(), name);
        if (it == properties.end()) {
            throw std::runtime_error("load_point_cloud: missing property '" + name + "' in " + path);
        }
        return static_cast<size_t>(it - properties.begin());
    };
    const size_t ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");
    if (n_vertices == 0) throw std::runtime_error("load_point_cloud: empty point cloud: " + path);
    std::vector<Vec3> points;
    points.reserve(n_vertices);
    for (size_t i = 0; i < n_vertices; ++i) {
        next_line();
        std::istringstream ls(line);
        std::vector<double> vals(properties.size());
        for (double& v : vals) {
            if (!(ls >> v)) {
                throw std::runtime_error("load_point_cloud: line " + std::to_string(line_no) +
                                         ": malformed vertex row");
            }
        }
        points.push_back({vals[ix], vals[iy], vals[iz]});
    }
    return points;
}

void write_point_cloud(const std::string& path, const std::vector<Vec3>& points) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_point_cloud: cannot open " + path);
    os << "ply\nformat ascii 1.0\nelement vertex " << points.size()
       << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    os.precision(17);
    for (const Vec3& p : points) os << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
}

std::vector<Vec3> downsample_point_cloud(const std::vector<Vec3>& points,
                                         size_t min_points, size_t max_points) {
    if (points.size() <= max_points) {
        if (points.size() < min_points) {
            throw std::runtime_error("downsample_point_cloud: only " +
                                     std::to_string(points.size()) + " points, need >= " +
                                     std::to_string(min_points));
        }
        return points;
    }
    auto count_for = [&](double cell) {
        std::map<std::tuple<long, long, long>, std::pair<Vec3, size_t>> grid;
        for (const Vec3& p : points) {
            auto key = std::make_tuple(static_cast<long>(std::floor(p[0] / cell)),
                                       static_cast<long>(std::floor(p[1] / cell)),
                                       static_cast<long>(std::floor(p[2] / cell)));
            auto& slot = grid[key];
            slot.first = slot.first + p;
            slot.second += 1;
        }
        std::vector<Vec3> out;
        out.reserve(grid.size());
        for (const auto& [key, slot] : grid) {
            out.push_back((1.0 / static_cast<double>(slot.second)) * slot.first);
        }
        return out;
    };
    double lo = 1e-4, hi = 1.0;
    std::vector<Vec3> best;
    for (int iter = 0; iter < 40; ++iter) {
        const double cell = 0.5 * (lo + hi);
        auto sampled = count_for(cell);
        if (sampled.size() > max_points) {
            lo = cell;
        } else if (sampled.size() < min_points) {
            hi = cell;
        } else {
            return sampled;
        }
        best = std::move(sampled);
    }
    return best;  // closest found; bounds are configurable
}

// ---------------------------------------------------------------------------
// synthetic scene
// ---------------------------------------------------------------------------

double ShellScene::density(const Vec3& x) const {
    const double r = norm(x);
    const double dr = r - radius;
    return sigma0 * std::exp(-dr * dr / (2.0 * width * width));
}

Vec3 ShellScene::uv(const Vec3& x) const {
    const double r = norm(x);
    if (r == 0.0) return {0, 0, 1};
    return {x[0] / r, x[1] / r, x[2] / r};
}

Vec3 ShellScene::texture(const Vec3& u, const Vec3& d) const {
    // smooth low-frequency pattern over the sphere, optionally view-tinted
    Vec3 c = {0.5 + 0.33 * std::sin(2.0 * u[0] + 1.0 * u[1]),
              0.5 + 0.33 * std::sin(2.0 * u[1] + 1.0 * u[2] + 2.0),
              0.5 + 0.33 * std::sin(2.0 * u[2] + 1.0 * u[0] + 4.0)};
    if (view_tint) {
        const double glance = 0.5 * (1.0 + dot(u, {-d[0], -d[1], -d[2]}));
        for (double& v : c) v = std::clamp(v * (0.85 + 0.15 * glance), 0.0, 1.0);
    }
    return c;
}

void AnalyticField::eval(std::span<const Vec3> x, const Vec3& d,
                         std::span<double> sigma, std::span<Vec3> rgb,
                         std::span<Vec3> uv) const {
    for (size_t i = 0; i < x.size(); ++i) {
        sigma[i] = scene_.density(x[i]);
        const Vec3 u = scene_.uv(x[i]);
        rgb[i] = scene_.texture(u, d);
        if (!uv.empty()) uv[i] = u;
    }
}

Camera make_orbit_camera(const Vec3& position, int width, int height, double fov_deg) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * fov_deg * kPi / 180.0);
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.translation = position;
    const Vec3 forward = normalized({-position[0], -position[1], -position[2]});
    Vec3 down_guess = {0, 0, -1};
    if (std::abs(dot(forward, {0, 0, 1})) > 0.999) down_guess = {0, -1, 0};
    const Vec3 right = normalized(cross(down_guess, forward));
    const Vec3 down = cross(forward, right);
    for (int r = 0; r < 3; ++r) {
        cam.rotation[static_cast<size_t>(3 * r)] = right[static_cast<size_t>(r)];
        cam.rotation[static_cast<size_t>(3 * r + 1)] = down[static_cast<size_t>(r)];
        cam.rotation[static_cast<size_t>(3 * r + 2)] = forward[static_cast<size_t>(r)];
    }
    cam.validate();
    return cam;
}

std::vector<Camera> synth_camera_rig(const SynthConfig& config) {
    std::vector<Camera> cams;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < config.n_views; ++i) {
        // Fibonacci sphere, poles excluded
        const double z = 1.0 - 2.0 * (i + 0.5) / config.n_views;
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        const Vec3 dir = {rxy * std::cos(phi), rxy * std::sin(phi), z};
        cams.push_back(make_orbit_camera(config.camera_distance * dir,
                                         config.resolution, config.resolution,
                                         config.fov_deg));
    }
    return cams;
}

std::pair<Vec3, double> oracle_render(const ShellScene& scene, const Camera& camera,
                                      int px, int py, int n_quad) {
    AnalyticField field(scene);
    RenderOptions options;
    options.n_samples = n_quad;
    options.jitter = false;
    PixelRender pr = render_pixel(field, camera, px, py, options);
    return {pr.color, 1.0 - pr.final_transmittance};
}

SceneDataset generate_synthetic(const SynthConfig& config, const std::string& out_dir,
                                int threads) {
    fs::create_directories(out_dir + "/images");
    fs::create_directories(out_dir + "/masks");
    fs::create_directories(out_dir + "/oracle_truth");

    SceneDataset ds;
    ds.cameras = synth_camera_rig(config);
    AnalyticField field(config.shell);
    RenderOptions options;
    options.n_samples = config.quadrature_samples;
    options.jitter = false;
    options.threads = threads;

    nlohmann::json views = nlohmann::json::array();
    for (size_t i = 0; i < ds.cameras.size(); ++i) {
        RenderResult rr = render_image(field, ds.cameras[i], options);
        Image mask = Image::create(rr.color.width, rr.color.height, 1);
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x) {
                mask.at(x, y, 0) = (1.0 - rr.transmittance.at(x, y, 0)) > 0.5 ? 1.0 : 0.0;
            }
        }
        write_png(out_dir + "/images/" + view_name(i), rr.color);
        write_png(out_dir + "/masks/" + view_name(i), mask);
        views.push_back(camera_to_json(ds.cameras[i]));
        ds.images.push_back(std::move(rr.color));
        ds.masks.push_back(std::move(mask));
    }
    nlohmann::json meta;
    meta["views"] = views;
    // scene is generated directly in normalized coordinates
    meta["bounding_box"] = {{"min", {-kBoxMargin, -kBoxMargin, -kBoxMargin}},
                            {"max", {kBoxMargin, kBoxMargin, kBoxMargin}}};
    {
        std::ofstream os(out_dir + "/cameras.json");
        os << meta.dump(2) << '\n';
    }

    // MVS-like initialization cloud: shell surface points with noise
    Rng rng = Rng::stream(config.seed, 0xC10D);
    std::vector<Vec3> noisy, exact;
    noisy.reserve(static_cast<size_t>(config.point_cloud_size));
    exact.reserve(static_cast<size_t>(config.point_cloud_size));
    for (int i = 0; i < config.point_cloud_size; ++i) {
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 u = {rxy * std::cos(phi), rxy * std::sin(phi), z};
        exact.push_back(config.shell.radius * u);
        noisy.push_back(config.shell.radius * u +
                        Vec3{config.point_cloud_noise * rng.normal(),
                             config.point_cloud_noise * rng.normal(),
                             config.point_cloud_noise * rng.normal()});
    }
    write_point_cloud(out_dir + "/points.ply", noisy);
    write_point_cloud(out_dir + "/oracle_truth/surface_points.ply", exact);
    ds.point_cloud = std::move(noisy);
    ds.normalization = Normalization{};
    return ds;
}

}  // namespace neutex
