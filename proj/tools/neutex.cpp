// SPDX-License-Identifier: Apache-2.0
//
// neutex <synth|train|render|extract|eval> [--config FILE] [overrides...]
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical abort.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "neutex/checkpoint.hpp"
#include "neutex/config.hpp"
#include "neutex/cubemap.hpp"
#include "neutex/dataset.hpp"
#include "neutex/losses.hpp"
#include "neutex/metrics.hpp"
#include "neutex/render.hpp"
#include "neutex/texture_tools.hpp"
#include "neutex/train.hpp"

namespace fs = std::filesystem;
using namespace neutex;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

Vec3 parse_vec3(const std::string& text, const char* what) {
    Vec3 v{};
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',') {
        throw ConfigError(std::string(what) + ": expected x,y,z but got '" + text + "'");
    }
    return v;
}

void write_resolved_config(const RunConfig& config, const std::string& config_file) {
    fs::create_directories(config.out);
    std::ofstream os(config.out + "/config.json");
    os << config.to_json().dump(2) << '\n';
    if (!config_file.empty()) {
        fs::copy_file(config_file, config.out + "/config_source.json",
                      fs::copy_options::overwrite_existing);
    }
}

std::unique_ptr<TextureOverride> make_override(const std::string& spec) {
    if (spec.rfind("checker:", 0) == 0) {
        const int n = std::stoi(spec.substr(8));
        return std::make_unique<CheckerTexture>(n);
    }
    return std::make_unique<ReplacementTexture>(load_cubemap(spec));
}

std::vector<Camera> orbit_cameras(int frames, int width, int height, double distance,
                                  double fov_deg, double elevation_deg) {
    std::vector<Camera> cams;
    cams.reserve(static_cast<size_t>(frames));
    const double el = elevation_deg * 3.14159265358979323846 / 180.0;
    for (int k = 0; k < frames; ++k) {
        const double az = 2.0 * 3.14159265358979323846 * k / frames;
        const Vec3 pos = distance * Vec3{std::cos(az) * std::cos(el),
                                         std::sin(az) * std::cos(el), std::sin(el)};
        cams.push_back(make_orbit_camera(pos, width, height, fov_deg));
    }
    return cams;
}

void write_view_outputs(const std::string& out_dir, const std::string& stem,
                        const RenderResult& result) {
    write_png(out_dir + "/" + stem + ".png", result.color);
    write_pfm(out_dir + "/" + stem + ".pfm", result.color);
    write_png(out_dir + "/" + stem + "_trans.png", result.transmittance);
}

int run_synth(const std::string& out, int views, int resolution, uint64_t seed,
              int threads, bool force) {
    if (fs::exists(out) && !fs::is_empty(out) && !force) {
        std::fprintf(stderr, "synth: output directory %s is not empty (use --force)\n",
                     out.c_str());
        return kExitData;
    }
    SynthConfig config;
    config.n_views = views;
    config.resolution = resolution;
    config.seed = seed;
    SceneDataset dataset = generate_synthetic(config, out, threads);
    std::printf("synth: %zu views at %dx%d -> %s\n", dataset.view_count(), resolution,
                resolution, out.c_str());
    return 0;
}

int run_train(const RunConfig& config, const std::string& config_file) {
    validate_config(config);
    if (config.dataset.empty()) throw ConfigError("train: --dataset is required");
    if (config.out.empty()) throw ConfigError("train: --out is required");
    write_resolved_config(config, config_file);
    SceneDataset dataset = load_dataset(config.dataset);
    FieldSet fields(config.fields);
    TrainOptions options = config.train;
    options.seed = config.seed;
    options.threads = config.threads;
    options.out_dir = config.out;
    TrainResult result = train(dataset, fields, config.schedule, config.weights, options);
    if (result.aborted_nan) return kExitNumeric;
    std::printf("train: finished at step %ld; last checkpoint %s\n", result.final_step,
                result.last_checkpoint.c_str());
    return 0;
}

int run_render(const std::string& checkpoint_path, const std::string& dataset_path,
               const std::vector<int>& views, int orbit, int width, int height,
               double distance, double fov, const std::string& out, int n_samples,
               uint64_t seed, int threads, const std::string& override_spec,
               const std::string& edit_spec, const std::string& attribution_path) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (!override_spec.empty() && !edit_spec.empty()) {
        throw ConfigError("render: --texture-override and --edit are mutually exclusive");
    }
    std::unique_ptr<TextureOverride> override_hook;
    if (!override_spec.empty()) {
        override_hook = make_override(override_spec);
    } else if (!edit_spec.empty()) {
        if (edit_spec.find(',') != std::string::npos) {
            override_hook = std::make_unique<EditTexture>(parse_vec3(edit_spec, "--edit"));
        } else {
            override_hook = std::make_unique<EditTexture>(load_cubemap(edit_spec));
        }
    }
    NeuralField field(*ckpt.fields, override_hook.get());

    std::vector<Camera> cameras;
    std::vector<std::string> stems;
    if (!dataset_path.empty()) {
        SceneDataset dataset = load_dataset(dataset_path);
        std::vector<int> selected = views;
        if (selected.empty()) {
            for (size_t i = 0; i < dataset.view_count(); ++i) selected.push_back(static_cast<int>(i));
        }
        for (int v : selected) {
            if (v < 0 || v >= static_cast<int>(dataset.view_count())) {
                throw std::runtime_error("render: view index " + std::to_string(v) +
                                         " out of range");
            }
            cameras.push_back(dataset.cameras[static_cast<size_t>(v)]);
            char stem[32];
            std::snprintf(stem, sizeof(stem), "render_%04d", v);
            stems.emplace_back(stem);
        }
    } else {
        cameras = orbit_cameras(orbit, width, height, distance, fov, 20.0);
        for (int k = 0; k < orbit; ++k) {
            char stem[32];
            std::snprintf(stem, sizeof(stem), "frame_%04d", k);
            stems.emplace_back(stem);
        }
    }

    fs::create_directories(out);
    RenderOptions options;
    options.n_samples = n_samples;
    options.seed = seed;
    options.threads = threads;
    options.want_uv = !attribution_path.empty();
    nlohmann::json attribution = nlohmann::json::array();
    for (size_t i = 0; i < cameras.size(); ++i) {
        RenderResult result = render_image(field, cameras[i], options);
        write_view_outputs(out, stems[i], result);
        if (options.want_uv) {
            nlohmann::json view;
            view["stem"] = stems[i];
            nlohmann::json pixels = nlohmann::json::array();
            for (const PixelAttribution& a : result.attribution) {
                pixels.push_back({{"hit", a.hit},
                                  {"opacity", a.opacity},
                                  {"top_weight", a.top_weight},
                                  {"uv", {a.uv[0], a.uv[1], a.uv[2]}}});
            }
            view["pixels"] = std::move(pixels);
            attribution.push_back(std::move(view));
        }
    }
    if (options.want_uv) {
        std::ofstream os(attribution_path);
        os << attribution.dump() << '\n';
    }
    std::printf("render: wrote %zu views to %s\n", cameras.size(), out.c_str());
    return 0;
}

int run_extract(const std::string& checkpoint_path, const std::string& out, int resolution,
                int grid_n, const std::string& single_view, const std::string& dataset_path,
                const std::string& samples_path) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    std::vector<Vec3> view_dirs;
    if (!single_view.empty()) {
        view_dirs.push_back(normalized(parse_vec3(single_view, "--single-view")));
    } else if (!dataset_path.empty()) {
        SceneDataset dataset = load_dataset(dataset_path);
        for (const Camera& cam : dataset.cameras) {
            view_dirs.push_back(normalized({-cam.position()[0], -cam.position()[1],
                                            -cam.position()[2]}));
        }
    } else {
        view_dirs = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    }
    fs::create_directories(out);
    CubemapTexture texture = export_texture(*ckpt.fields, resolution, view_dirs);
    nlohmann::json extra;
    extra["view_dirs"] = view_dirs.size();
    extra["checkpoint"] = checkpoint_path;
    save_cubemap(out + "/texture", texture, extra.dump());
    write_png(out + "/texture/equirect.png", cubemap_to_equirect(texture, 4 * resolution,
                                                                 2 * resolution));
    SurfaceMesh mesh = extract_surface(*ckpt.fields, grid_n);
    write_obj(out + "/surface.obj", mesh);
    nlohmann::json report;
    report["vertices"] = mesh.vertices.size();
    report["quads"] = mesh.quads.size();
    if (!samples_path.empty()) {
        std::vector<Vec3> samples = load_point_cloud(samples_path);
        const double coverage = uv_coverage_metric(*ckpt.fields, samples);
        report["uv_coverage"] = coverage;
        std::printf("extract: uv coverage %.4f\n", coverage);
    }
    std::ofstream os(out + "/extract_report.json");
    os << report.dump(2) << '\n';
    std::printf("extract: texture + surface written to %s\n", out.c_str());
    return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& dataset_path,
             const std::vector<int>& heldout, const std::string& out, int n_samples,
             uint64_t seed, int threads, bool masked) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    SceneDataset dataset = load_dataset(dataset_path);
    if (heldout.empty()) throw ConfigError("eval: --heldout is required");
    for (int v : heldout) {
        if (v < 0 || v >= static_cast<int>(dataset.view_count())) {
            throw std::runtime_error("eval: held-out index " + std::to_string(v) +
                                     " out of range (dataset has " +
                                     std::to_string(dataset.view_count()) + " views)");
        }
    }
    fs::create_directories(out);
    NeuralField field(*ckpt.fields);
    RenderOptions options;
    options.n_samples = n_samples;
    options.seed = seed;
    options.threads = threads;
    std::vector<EvalReport::View> rows;
    for (int v : heldout) {
        const Camera& cam = dataset.cameras[static_cast<size_t>(v)];
        RenderResult result = render_image(field, cam, options);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "eval_%04d", v);
        write_view_outputs(out, stem, result);
        const Image& gt = dataset.images[static_cast<size_t>(v)];
        const Image* mask = masked ? &dataset.masks[static_cast<size_t>(v)] : nullptr;
        EvalReport::View row;
        row.id = std::to_string(v);
        row.psnr = psnr(result.color, gt);
        row.ssim = ssim(result.color, gt, mask);
        rows.push_back(row);
    }
    EvalReport report = EvalReport::build(std::move(rows), masked);
    {
        std::ofstream os(out + "/report.json");
        os << report.to_json() << '\n';
    }
    {
        std::ofstream os(out + "/report.csv");
        os << report.to_csv();
    }
    std::printf("eval: mean PSNR %.3f dB, mean SSIM %.4f over %zu views\n", report.mean_psnr,
                report.mean_ssim, report.views.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NeuTex-style volumetric renderer with a disentangled neural texture"};
    app.require_subcommand(1);

    std::function<int()> action;

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate the synthetic shell dataset");
    {
        auto out = std::make_shared<std::string>();
        auto views = std::make_shared<int>(30);
        auto resolution = std::make_shared<int>(64);
        auto seed = std::make_shared<uint64_t>(1);
        auto threads = std::make_shared<int>(1);
        auto force = std::make_shared<bool>(false);
        synth->add_option("--out", *out, "Output dataset directory")->required();
        synth->add_option("--views", *views, "Number of views");
        synth->add_option("--resolution", *resolution, "Image resolution");
        synth->add_option("--seed", *seed, "RNG seed");
        synth->add_option("--threads", *threads, "Worker threads");
        synth->add_flag("--force", *force, "Allow writing into a non-empty directory");
        synth->callback([=, &action] {
            action = [=] { return run_synth(*out, *views, *resolution, *seed, *threads, *force); };
        });
    }

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Train the field networks");
    {
        auto config_file = std::make_shared<std::string>();
        auto preset = std::make_shared<std::string>();
        auto dataset = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto seed = std::make_shared<uint64_t>(1);
        auto threads = std::make_shared<int>(1);
        auto resume = std::make_shared<std::string>();
        auto no_init = std::make_shared<bool>(false);
        auto no_uv_inv = std::make_shared<bool>(false);
        auto mask_weight = std::make_shared<double>(-1.0);
        auto cycle_weight = std::make_shared<double>(-1.0);
        auto heldout = std::make_shared<std::vector<int>>();
        auto* opt_seed = train_cmd->add_option("--seed", *seed, "RNG seed");
        auto* opt_threads = train_cmd->add_option("--threads", *threads, "Worker threads");
        train_cmd->add_option("--config", *config_file, "Config JSON file");
        train_cmd->add_option("--preset", *preset, "Config preset: paper or desk");
        train_cmd->add_option("--dataset", *dataset, "Dataset directory");
        train_cmd->add_option("--out", *out, "Run output directory");
        train_cmd->add_option("--resume", *resume, "Checkpoint to resume from");
        train_cmd->add_flag("--no-init-pointcloud", *no_init,
                            "Skip Chamfer initialization (phase 1 uses the main loss)");
        train_cmd->add_flag("--no-train-uv-inv", *no_uv_inv,
                            "Freeze the inverse mapping network (ablation)");
        train_cmd->add_option("--mask-weight", *mask_weight, "Mask loss weight a2");
        train_cmd->add_option("--cycle-weight", *cycle_weight, "Cycle loss weight a1");
        auto* opt_heldout = train_cmd->add_option(
            "--heldout", *heldout, "View indices excluded from training batches");
        train_cmd->callback([=, &action] {
            action = [=] {
                RunConfig config = config_file->empty()
                                       ? preset_config(preset->empty() ? "desk" : *preset)
                                       : load_run_config(*config_file);
                if (!preset->empty() && !config_file->empty()) {
                    RunConfig base = preset_config(*preset);
                    nlohmann::json file_json;
                    std::ifstream is(*config_file);
                    is >> file_json;
                    file_json.erase("preset");
                    apply_config_json(base, file_json);
                    config = base;
                }
                if (!dataset->empty()) config.dataset = *dataset;
                if (!out->empty()) config.out = *out;
                if (opt_seed->count()) config.seed = *seed;
                if (opt_threads->count()) config.threads = *threads;
                if (*mask_weight >= 0.0) config.weights.a2 = *mask_weight;
                if (*cycle_weight >= 0.0) config.weights.a1 = *cycle_weight;
                if (*no_init) config.train.use_init_pointcloud = false;
                if (*no_uv_inv) config.train.train_uv_inv = false;
                if (opt_heldout->count()) config.train.heldout = *heldout;
                config.train.resume = *resume;
                return run_train(config, *config_file);
            };
        });
    }

    // ---- render ----
    auto* render_cmd = app.add_subcommand("render", "Render views from a checkpoint");
    {
        auto checkpoint = std::make_shared<std::string>();
        auto dataset = std::make_shared<std::string>();
        auto views = std::make_shared<std::vector<int>>();
        auto orbit = std::make_shared<int>(0);
        auto width = std::make_shared<int>(64);
        auto height = std::make_shared<int>(64);
        auto distance = std::make_shared<double>(2.5);
        auto fov = std::make_shared<double>(30.0);
        auto out = std::make_shared<std::string>();
        auto n_samples = std::make_shared<int>(64);
        auto seed = std::make_shared<uint64_t>(0);
        auto threads = std::make_shared<int>(1);
        auto override_spec = std::make_shared<std::string>();
        auto edit_spec = std::make_shared<std::string>();
        auto attribution = std::make_shared<std::string>();
        render_cmd->add_option("--checkpoint", *checkpoint, "Checkpoint file")->required();
        render_cmd->add_option("--out", *out, "Output directory")->required();
        render_cmd->add_option("--dataset", *dataset, "Render this dataset's cameras");
        render_cmd->add_option("--views", *views, "View indices (default: all)");
        render_cmd->add_option("--orbit", *orbit, "Render N novel orbit frames instead");
        render_cmd->add_option("--width", *width, "Orbit frame width");
        render_cmd->add_option("--height", *height, "Orbit frame height");
        render_cmd->add_option("--distance", *distance, "Orbit camera distance");
        render_cmd->add_option("--fov", *fov, "Orbit vertical field of view (degrees)");
        render_cmd->add_option("--n-samples", *n_samples, "Samples per ray");
        render_cmd->add_option("--seed", *seed, "RNG seed");
        render_cmd->add_option("--threads", *threads, "Worker threads");
        render_cmd->add_option("--texture-override", *override_spec,
                               "Texture replacement: cubemap directory or checker:N");
        render_cmd->add_option("--edit", *edit_spec,
                               "Multiplicative texture edit: cubemap directory or r,g,b");
        render_cmd->add_option("--attribution", *attribution,
                               "Write per-pixel UV attribution JSON to this path");
        render_cmd->callback([=, &action] {
            action = [=] {
                if (dataset->empty() && *orbit <= 0) {
                    throw ConfigError("render: provide --dataset or --orbit N");
                }
                return run_render(*checkpoint, *dataset, *views, *orbit, *width, *height,
                                  *distance, *fov, *out, *n_samples, *seed, *threads,
                                  *override_spec, *edit_spec, *attribution);
            };
        });
    }

    // ---- extract ----
    auto* extract_cmd = app.add_subcommand("extract", "Export texture, surface, and coverage");
    {
        auto checkpoint = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto resolution = std::make_shared<int>(128);
        auto grid = std::make_shared<int>(64);
        auto single_view = std::make_shared<std::string>();
        auto dataset = std::make_shared<std::string>();
        auto samples = std::make_shared<std::string>();
        extract_cmd->add_option("--checkpoint", *checkpoint, "Checkpoint file")->required();
        extract_cmd->add_option("--out", *out, "Output directory")->required();
        extract_cmd->add_option("--resolution", *resolution, "Cubemap face resolution");
        extract_cmd->add_option("--grid", *grid, "Surface grid subdivisions per face");
        extract_cmd->add_option("--single-view", *single_view,
                                "Evaluate the texture for one view direction x,y,z");
        extract_cmd->add_option("--dataset", *dataset,
                                "Use this dataset's camera directions for the max-blend");
        extract_cmd->add_option("--samples", *samples,
                                "PLY of surface samples for the UV coverage metric");
        extract_cmd->callback([=, &action] {
            action = [=] {
                return run_extract(*checkpoint, *out, *resolution, *grid, *single_view,
                                   *dataset, *samples);
            };
        });
    }

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate held-out views");
    {
        auto checkpoint = std::make_shared<std::string>();
        auto dataset = std::make_shared<std::string>();
        auto heldout = std::make_shared<std::vector<int>>();
        auto out = std::make_shared<std::string>();
        auto n_samples = std::make_shared<int>(64);
        auto seed = std::make_shared<uint64_t>(0);
        auto threads = std::make_shared<int>(1);
        auto masked = std::make_shared<bool>(false);
        eval_cmd->add_option("--checkpoint", *checkpoint, "Checkpoint file")->required();
        eval_cmd->add_option("--dataset", *dataset, "Dataset directory")->required();
        eval_cmd->add_option("--heldout", *heldout, "Held-out view indices")->required();
        eval_cmd->add_option("--out", *out, "Output directory")->required();
        eval_cmd->add_option("--n-samples", *n_samples, "Samples per ray");
        eval_cmd->add_option("--seed", *seed, "RNG seed");
        eval_cmd->add_option("--threads", *threads, "Worker threads");
        eval_cmd->add_flag("--masked", *masked, "Restrict SSIM to foreground windows");
        eval_cmd->callback([=, &action] {
            action = [=] {
                return run_eval(*checkpoint, *dataset, *heldout, *out, *n_samples, *seed,
                                *threads, *masked);
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        return action();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
}
