// SPDX-License-Identifier: Apache-2.0
//
// Cubemap realization of the spherical texture domain.
//
// Face convention (fixed, also recorded in export manifests): faces are
// ordered +X,-X,+Y,-Y,+Z,-Z; the dominant axis is the component of largest
// magnitude (ties resolved toward the earlier face). On each face, s and t
// are the two remaining components in axis order (y,z for X faces; x,z for
// Y faces; x,y for Z faces), divided by |dominant| and mapped from [-1,1]
// to [0,1]. The +Z face therefore has s increasing with +x and t with +y.

#pragma once

#include <array>
#include <string>

#include "neutex/image.hpp"
#include "neutex/vec.hpp"

namespace neutex {

enum class CubeFace : int { PosX = 0, NegX, PosY, NegY, PosZ, NegZ };

struct CubemapCoord {
    CubeFace face;
    double s, t;  // in [0,1]
};

CubemapCoord dir_to_cubemap(const Vec3& u);
Vec3 cubemap_to_dir(CubeFace face, double s, double t);  // unit vector

struct CubemapTexture {
    int resolution = 0;
    std::array<Image, 6> faces;  // RGB in [0,1]

    static CubemapTexture create(int resolution, const Vec3& fill = {0, 0, 0});
    Vec3 sample_nearest(const Vec3& u) const;
    Vec3 sample_bilinear(const Vec3& u) const;
    Vec3 texel(CubeFace face, int i, int j) const;
    void set_texel(CubeFace face, int i, int j, const Vec3& rgb);
    // direction through the texel center
    Vec3 texel_dir(CubeFace face, int i, int j) const;
};

Image cubemap_to_equirect(const CubemapTexture& cubemap, int width, int height);
CubemapTexture equirect_to_cubemap(const Image& equirect, int resolution);

// direction for an equirect pixel center; longitude wraps along x, +Z at the
// top row
Vec3 equirect_dir(int x, int y, int width, int height);

// Six face PNGs + horizontal-cross composite + PFM sidecars + manifest.
void save_cubemap(const std::string& directory, const CubemapTexture& cubemap,
                  const std::string& extra_manifest_json = "");
CubemapTexture load_cubemap(const std::string& directory);

extern const char* const kCubeFaceNames[6];

}  // namespace neutex
