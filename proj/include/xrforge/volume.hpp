// volume.hpp - CT volume type and intensity/grid preconditioning.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "xrforge/errors.hpp"
#include "xrforge/grid.hpp"

namespace xrforge {

/// 3D Hounsfield-Unit scalar field with voxel spacing (mm), the world
/// position of voxel (0,0,0) (mm), and the superior-inferior axis tag.
struct CtVolume {
    Grid3D<float> data;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    // Voxel axis pointing along the patient's superior-inferior direction,
    // and whether increasing index along it moves toward superior.
    int si_axis = 2;
    bool superior_high = true;

    int nx() const { return data.nx(); }
    int ny() const { return data.ny(); }
    int nz() const { return data.nz(); }
    std::array<int, 3> dims() const { return data.dims(); }

    double min_spacing() const {
        return std::min({spacing[0], spacing[1], spacing[2]});
    }

    /// World extent along each axis, counting voxels as unit cells.
    std::array<double, 3> extent_mm() const {
        return {data.nx() * spacing[0], data.ny() * spacing[1], data.nz() * spacing[2]};
    }

    void validate() const {
        if (spacing[0] <= 0 || spacing[1] <= 0 || spacing[2] <= 0)
            throw parameter_error("CtVolume: spacing must be positive");
        for (float v : data.raw())
            if (!std::isfinite(v)) throw data_error("CtVolume: non-finite HU value");
    }
};

/// Clamp every voxel to [lo, hi].
inline CtVolume clip_hu(const CtVolume& v, double lo, double hi) {
    if (lo >= hi) throw parameter_error("clip_hu: lo must be < hi");
    CtVolume out = v;
    const auto flo = static_cast<float>(lo);
    const auto fhi = static_cast<float>(hi);
    for (float& x : out.data.raw()) x = std::clamp(x, flo, fhi);
    return out;
}

/// Trilinear sample at fractional voxel coordinates, clamped to the grid.
template <typename T>
inline double sample_trilinear(const Grid3D<T>& g, double fx, double fy, double fz) {
    const auto clampf = [](double v, int n) { return std::clamp(v, 0.0, static_cast<double>(n - 1)); };
    fx = clampf(fx, g.nx());
    fy = clampf(fy, g.ny());
    fz = clampf(fz, g.nz());
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy), z0 = static_cast<int>(fz);
    const int x1 = std::min(x0 + 1, g.nx() - 1);
    const int y1 = std::min(y0 + 1, g.ny() - 1);
    const int z1 = std::min(z0 + 1, g.nz() - 1);
    const double tx = fx - x0, ty = fy - y0, tz = fz - z0;
    const double c00 = g.at(x0, y0, z0) * (1 - tx) + g.at(x1, y0, z0) * tx;
    const double c10 = g.at(x0, y1, z0) * (1 - tx) + g.at(x1, y1, z0) * tx;
    const double c01 = g.at(x0, y0, z1) * (1 - tx) + g.at(x1, y0, z1) * tx;
    const double c11 = g.at(x0, y1, z1) * (1 - tx) + g.at(x1, y1, z1) * tx;
    const double c0 = c00 * (1 - ty) + c10 * ty;
    const double c1 = c01 * (1 - ty) + c11 * ty;
    return c0 * (1 - tz) + c1 * tz;
}

/// Trilinear resample onto a new spacing. Identical target spacing returns
/// the input voxel data bit-exactly; otherwise the world extent is kept
/// within one voxel by rounding the new grid size.
inline CtVolume resample(const CtVolume& v, const std::array<double, 3>& target) {
    for (double s : target)
        if (s <= 0) throw parameter_error("resample: spacing must be positive");
    if (target == v.spacing) return v;

    std::array<int, 3> nd{};
    const auto dims = v.dims();
    for (int a = 0; a < 3; ++a) {
        const double span = (dims[a] - 1) * v.spacing[a];
        nd[a] = std::max(1, static_cast<int>(std::lround(span / target[a])) + 1);
    }
    CtVolume out;
    out.spacing = target;
    out.origin = v.origin;
    out.si_axis = v.si_axis;
    out.superior_high = v.superior_high;
    out.data = Grid3D<float>(nd[0], nd[1], nd[2]);
    for (int z = 0; z < nd[2]; ++z) {
        const double fz = z * target[2] / v.spacing[2];
        for (int y = 0; y < nd[1]; ++y) {
            const double fy = y * target[1] / v.spacing[1];
            for (int x = 0; x < nd[0]; ++x) {
                const double fx = x * target[0] / v.spacing[0];
                out.data.at(x, y, z) = static_cast<float>(sample_trilinear(v.data, fx, fy, fz));
            }
        }
    }
    return out;
}

namespace detail {

template <typename T>
inline Grid3D<T> permute_flip(const Grid3D<T>& g, const std::array<int, 3>& perm, bool flip_new_z) {
    const std::array<int, 3> od = g.dims();
    const std::array<int, 3> nd{od[perm[0]], od[perm[1]], od[perm[2]]};
    Grid3D<T> out(nd[0], nd[1], nd[2]);
    std::array<int, 3> src{};
    for (int z = 0; z < nd[2]; ++z) {
        const int zz = flip_new_z ? nd[2] - 1 - z : z;
        for (int y = 0; y < nd[1]; ++y)
            for (int x = 0; x < nd[0]; ++x) {
                src[perm[0]] = x;
                src[perm[1]] = y;
                src[perm[2]] = zz;
                out.at(x, y, z) = g.at(src[0], src[1], src[2]);
            }
    }
    return out;
}

} // namespace detail

/// Reorder axes so the superior-inferior axis is axis 2 with superior at
/// the high index. No-op when already canonical.
inline CtVolume canonicalize_orientation(const CtVolume& v) {
    if (v.si_axis == 2 && v.superior_high) return v;
    std::array<int, 3> perm{};
    switch (v.si_axis) {
    case 0: perm = {1, 2, 0}; break;
    case 1: perm = {0, 2, 1}; break;
    case 2: perm = {0, 1, 2}; break;
    default: throw config_error("canonicalize_orientation: bad si_axis");
    }
    const bool flip = !v.superior_high;
    CtVolume out;
    out.data = detail::permute_flip(v.data, perm, flip);
    out.spacing = {v.spacing[perm[0]], v.spacing[perm[1]], v.spacing[perm[2]]};
    out.origin = {v.origin[perm[0]], v.origin[perm[1]], v.origin[perm[2]]};
    out.si_axis = 2;
    out.superior_high = true;
    return out;
}

} // namespace xrforge
