// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>

#include "neutex/cubemap.hpp"
#include "neutex/rng.hpp"
#include "neutex/texture_tools.hpp"

using namespace neutex;

namespace {
FieldConfig tiny_config() {
    FieldConfig config;
    config.enc = {2, 2, 1};
    config.density = {2, 8, -1};
    config.uv = {2, 8, -1};
    config.uv_inv = {2, 8, -1};
    config.texture = {2, 8, -1};
    config.init_seed = 21;
    return config;
}

Vec3 random_dir(Rng& rng) {
    while (true) {
        Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double n = norm(v);
        if (n > 1e-3) return normalized(v);
    }
}
}  // namespace

TEST_CASE("cubemap coordinates round trip on random directions") {
    Rng rng(1);
    for (int rep = 0; rep < 500; ++rep) {
        const Vec3 u = random_dir(rng);
        CubemapCoord c = dir_to_cubemap(u);
        CHECK(c.s >= 0.0);
        CHECK(c.s <= 1.0);
        CHECK(c.t >= 0.0);
        CHECK(c.t <= 1.0);
        const Vec3 back = cubemap_to_dir(c.face, c.s, c.t);
        CHECK(std::abs(norm(back) - 1.0) < 1e-12);
        for (int k = 0; k < 3; ++k) {
            CHECK(back[static_cast<size_t>(k)] ==
                  doctest::Approx(u[static_cast<size_t>(k)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("cubemap face selection follows the dominant axis") {
    CHECK(dir_to_cubemap({1, 0, 0}).face == CubeFace::PosX);
    CHECK(dir_to_cubemap({-1, 0, 0}).face == CubeFace::NegX);
    CHECK(dir_to_cubemap({0, 1, 0}).face == CubeFace::PosY);
    CHECK(dir_to_cubemap({0, -1, 0}).face == CubeFace::NegY);
    CHECK(dir_to_cubemap({0, 0, 1}).face == CubeFace::PosZ);
    CHECK(dir_to_cubemap({0, 0, -1}).face == CubeFace::NegZ);
    // ties resolve toward the earlier face in +X,-X,+Y,-Y,+Z,-Z order
    const Vec3 tie = normalized(Vec3{1, 1, 1});
    CHECK(dir_to_cubemap(tie).face == CubeFace::PosX);
    // +Z face: s tracks +x, t tracks +y
    CubemapCoord c = dir_to_cubemap(normalized(Vec3{0.5, 0.25, 1.0}));
    CHECK(c.face == CubeFace::PosZ);
    CHECK(c.s == doctest::Approx(0.75));
    CHECK(c.t == doctest::Approx(0.625));
}

TEST_CASE("texel directions land back on their texel") {
    CubemapTexture cubemap = CubemapTexture::create(8);
    for (int f = 0; f < 6; ++f) {
        for (int j = 0; j < 8; ++j) {
            for (int i = 0; i < 8; ++i) {
                const Vec3 dir = cubemap.texel_dir(static_cast<CubeFace>(f), i, j);
                CubemapCoord c = dir_to_cubemap(dir);
                CHECK(static_cast<int>(c.face) == f);
                CHECK(static_cast<int>(c.s * 8) == i);
                CHECK(static_cast<int>(c.t * 8) == j);
            }
        }
    }
}

TEST_CASE("nearest sampling reads the stored texel") {
    CubemapTexture cubemap = CubemapTexture::create(4, {0.2, 0.2, 0.2});
    cubemap.set_texel(CubeFace::PosY, 1, 2, {0.9, 0.1, 0.5});
    const Vec3 dir = cubemap.texel_dir(CubeFace::PosY, 1, 2);
    const Vec3 got = cubemap.sample_nearest(dir);
    CHECK(got[0] == 0.9);
    CHECK(got[1] == 0.1);
    CHECK(got[2] == 0.5);
    // a texel center is a fixed point of bilinear sampling too
    const Vec3 bi = cubemap.sample_bilinear(dir);
    CHECK(bi[0] == doctest::Approx(0.9));
}

TEST_CASE("bilinear sampling of a constant cubemap is constant") {
    CubemapTexture cubemap = CubemapTexture::create(4, {0.25, 0.5, 0.75});
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec3 got = cubemap.sample_bilinear(random_dir(rng));
        CHECK(got[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(got[1] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(got[2] == doctest::Approx(0.75).epsilon(1e-12));
    }
}

TEST_CASE("checker texture parity matches the face formula") {
    CheckerTexture checker(4);
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        const Vec3 u = random_dir(rng);
        CubemapCoord c = dir_to_cubemap(u);
        const int parity = (static_cast<int>(std::floor(c.s * 4)) +
                            static_cast<int>(std::floor(c.t * 4))) % 2;
        const Vec3 got = checker.apply(u, {0, 0, 0});
        CHECK(got[0] == (parity == 0 ? 0.9 : 0.1));
    }
    CHECK_FALSE(checker.needs_base());
}

TEST_CASE("edit texture modulates and clamps") {
    EditTexture identity(Vec3{1, 1, 1});
    const Vec3 base{0.3, 0.6, 0.9};
    const Vec3 kept = identity.apply({0, 0, 1}, base);
    CHECK(kept[0] == base[0]);
    CHECK(kept[1] == base[1]);
    CHECK(kept[2] == base[2]);
    CHECK(identity.needs_base());

    EditTexture brighten(Vec3{2, 2, 2});
    const Vec3 bright = brighten.apply({0, 0, 1}, base);
    CHECK(bright[0] == doctest::Approx(0.6));
    CHECK(bright[2] == 1.0);  // clamped

    CHECK_THROWS_AS(EditTexture(Vec3{-0.1, 1, 1}), std::runtime_error);

    CubemapTexture map = CubemapTexture::create(2, {0.5, 0.5, 0.5});
    EditTexture dim(map);
    const Vec3 dimmed = dim.apply({1, 0, 0}, base);
    CHECK(dimmed[0] == doctest::Approx(0.15));
}

TEST_CASE("replacement texture ignores the base") {
    CubemapTexture map = CubemapTexture::create(2, {0.1, 0.2, 0.3});
    ReplacementTexture repl(map);
    CHECK_FALSE(repl.needs_base());
    const Vec3 got = repl.apply({0, 1, 0}, {0.9, 0.9, 0.9});
    CHECK(got[0] == doctest::Approx(0.1));
    CHECK(got[2] == doctest::Approx(0.3));
}

TEST_CASE("exported texture with one view equals the direct evaluation") {
    FieldSet fields(tiny_config());
    const Vec3 view = normalized(Vec3{0.3, -0.2, 0.9});
    CubemapTexture tex = export_texture(fields, 4, {view});
    for (int f = 0; f < 6; ++f) {
        for (int j = 0; j < 4; ++j) {
            for (int i = 0; i < 4; ++i) {
                const Vec3 u = tex.texel_dir(static_cast<CubeFace>(f), i, j);
                const auto direct = fields.texture_at(UVPoint{{u[0], u[1], u[2]}},
                                                      {view[0], view[1], view[2]});
                const Vec3 stored = tex.texel(static_cast<CubeFace>(f), i, j);
                for (int k = 0; k < 3; ++k) {
                    CHECK(stored[static_cast<size_t>(k)] ==
                          doctest::Approx(direct[static_cast<size_t>(k)]).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("multi-view export takes the componentwise maximum") {
    FieldSet fields(tiny_config());
    const Vec3 a = normalized(Vec3{1, 0.1, 0});
    const Vec3 b = normalized(Vec3{-0.2, 0.9, 0.1});
    CubemapTexture ta = export_texture(fields, 2, {a});
    CubemapTexture tb = export_texture(fields, 2, {b});
    CubemapTexture both = export_texture(fields, 2, {a, b});
    for (int f = 0; f < 6; ++f) {
        for (int j = 0; j < 2; ++j) {
            for (int i = 0; i < 2; ++i) {
                const Vec3 va = ta.texel(static_cast<CubeFace>(f), i, j);
                const Vec3 vb = tb.texel(static_cast<CubeFace>(f), i, j);
                const Vec3 vm = both.texel(static_cast<CubeFace>(f), i, j);
                for (int k = 0; k < 3; ++k) {
                    CHECK(vm[static_cast<size_t>(k)] ==
                          std::max(va[static_cast<size_t>(k)], vb[static_cast<size_t>(k)]));
                }
            }
        }
    }
}

TEST_CASE("surface extraction dedupes shared corners") {
    CHECK(surface_vertex_count(1) == 8);
    CHECK(surface_vertex_count(4) == 6 * 25 - 12 * 5 + 8);
    FieldSet fields(tiny_config());
    SurfaceMesh mesh = extract_surface(fields, 4);
    CHECK(static_cast<long>(mesh.vertices.size()) == surface_vertex_count(4));
    CHECK(mesh.quads.size() == 6u * 4u * 4u);
    std::set<int> used;
    for (const auto& quad : mesh.quads) {
        for (int v : quad) {
            CHECK(v >= 0);
            CHECK(v < static_cast<int>(mesh.vertices.size()));
            used.insert(v);
        }
    }
    CHECK(used.size() == mesh.vertices.size());  // every vertex referenced
    // canonical ordering: two extractions agree exactly
    SurfaceMesh again = extract_surface(fields, 4);
    REQUIRE(again.vertices.size() == mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        CHECK(mesh.vertices[i] == again.vertices[i]);
    }
}

TEST_CASE("obj writer emits the mesh") {
    SurfaceMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    mesh.quads = {{0, 1, 2, 3}};
    const std::string path = "/tmp/neutex_test_mesh.obj";
    write_obj(path, mesh);
    std::ifstream in(path);
    std::string line;
    int v = 0, f = 0;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0) ++v;
        if (line.rfind("f ", 0) == 0) ++f;
    }
    CHECK(v == 4);
    CHECK(f == 1);
}

TEST_CASE("cubemap save and load round trip exactly via PFM") {
    Rng rng(4);
    CubemapTexture cubemap = CubemapTexture::create(4);
    for (int f = 0; f < 6; ++f) {
        for (int j = 0; j < 4; ++j) {
            for (int i = 0; i < 4; ++i) {
                cubemap.set_texel(static_cast<CubeFace>(f), i, j,
                                  {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
            }
        }
    }
    const std::string dir = "/tmp/neutex_test_cubemap";
    std::filesystem::remove_all(dir);
    save_cubemap(dir, cubemap);
    CubemapTexture back = load_cubemap(dir);
    REQUIRE(back.resolution == 4);
    for (int f = 0; f < 6; ++f) {
        for (size_t k = 0; k < cubemap.faces[static_cast<size_t>(f)].data.size(); ++k) {
            // PFM stores 32-bit floats
            CHECK(back.faces[static_cast<size_t>(f)].data[k] ==
                  doctest::Approx(cubemap.faces[static_cast<size_t>(f)].data[k])
                      .epsilon(1e-6));
        }
    }
}

TEST_CASE("equirect projection round trips a smooth cubemap") {
    // smooth function of direction so resampling error stays small
    CubemapTexture cubemap = CubemapTexture::create(32);
    for (int f = 0; f < 6; ++f) {
        for (int j = 0; j < 32; ++j) {
            for (int i = 0; i < 32; ++i) {
                const Vec3 d = cubemap.texel_dir(static_cast<CubeFace>(f), i, j);
                cubemap.set_texel(static_cast<CubeFace>(f), i, j,
                                  {0.5 + 0.4 * d[0], 0.5 + 0.4 * d[1], 0.5 + 0.4 * d[2]});
            }
        }
    }
    Image equirect = cubemap_to_equirect(cubemap, 128, 64);
    CubemapTexture back = equirect_to_cubemap(equirect, 32);
    double err = 0;
    long count = 0;
    for (int f = 0; f < 6; ++f) {
        for (size_t k = 0; k < back.faces[static_cast<size_t>(f)].data.size(); ++k) {
            err += std::abs(back.faces[static_cast<size_t>(f)].data[k] -
                            cubemap.faces[static_cast<size_t>(f)].data[k]);
            ++count;
        }
    }
    CHECK(err / static_cast<double>(count) < 0.02);
}

TEST_CASE("coverage metric spans empty to full") {
    FieldSet fields(tiny_config());
    CHECK_THROWS_AS(uv_coverage_metric(fields, {}), std::runtime_error);
    Rng rng(5);
    std::vector<Vec3> dense;
    for (int i = 0; i < 5000; ++i) {
        dense.push_back({rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                         rng.uniform(-0.6, 0.6)});
    }
    const double cov = uv_coverage_metric(fields, dense);
    CHECK(cov > 0.0);
    CHECK(cov <= 1.0);
    // a single sample covers exactly one texel of the 64x64x6 grid
    const double one = uv_coverage_metric(fields, {{0.1, 0.1, 0.1}});
    CHECK(one == doctest::Approx(1.0 / (6.0 * 64 * 64)));
}

TEST_CASE("neural field override path replaces colors but not geometry") {
    FieldSet fields(tiny_config());
    CheckerTexture checker(2);
    NeuralField plain(fields);
    NeuralField overridden(fields, &checker);
    std::vector<Vec3> x{{0.1, 0.2, 0.3}, {-0.2, 0.1, 0.05}};
    const Vec3 d = normalized(Vec3{0, 0.2, 1});
    std::vector<double> sa(2), sb(2);
    std::vector<Vec3> ca(2), cb(2), ua(2), ub(2);
    plain.eval(x, d, sa, ca, ua);
    overridden.eval(x, d, sb, cb, ub);
    for (int i = 0; i < 2; ++i) {
        CHECK(sa[static_cast<size_t>(i)] == sb[static_cast<size_t>(i)]);
        CHECK(ua[static_cast<size_t>(i)] == ub[static_cast<size_t>(i)]);
        const Vec3 expected = checker.apply(ub[static_cast<size_t>(i)], {0, 0, 0});
        CHECK(cb[static_cast<size_t>(i)][0] == expected[0]);
    }
}
