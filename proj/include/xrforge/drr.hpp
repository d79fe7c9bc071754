// drr.hpp - cone-beam DRR rendering and co-registered mask projection.
//
// Geometry convention: the volume sits with its center at the world
// origin, canonical orientation (z = superior). The source-detector pair
// rotates about z by the view angle; 0 deg is anteroposterior, 90 deg
// left lateral, 180 deg posteroanterior. The source lies at distance
// SDD-ODD from the volume center and the detector center at ODD beyond
// it, so the source-detector distance is exactly SDD.
//
// Rays integrate mu(x) = max(HU + 1000, 0) by fixed-step trapezoidal
// sampling with trilinear interpolation, clipped to the voxel-center
// hull. Masks run through the identical sampler, thresholded on
// accumulated path length, which makes image/mask alignment exact by
// construction.
#pragma once

#include <algorithm>
#include <array>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "xrforge/errors.hpp"
#include "xrforge/labels.hpp"
#include "xrforge/plan.hpp"
#include "xrforge/volume.hpp"

namespace xrforge {

struct ProjectionGeometry {
    double sdd = 1183.0; // source-detector distance, mm
    double odd = 167.0;  // object(center)-detector distance, mm
    double view_angle_deg = 0.0;
    int det_nx = 512;
    int det_ny = 512;
    double pixel_pitch = 0.0; // mm; <=0 requests auto-fit from the volume

    double delta() const { return sdd - odd; }

    void validate() const {
        if (!(sdd > odd && odd > 0.0))
            throw geometry_error("ProjectionGeometry: requires sdd > odd > 0");
        if (!(view_angle_deg >= 0.0 && view_angle_deg <= 180.0))
            throw geometry_error("ProjectionGeometry: view angle outside [0, 180]");
        if (det_nx < 1 || det_ny < 1)
            throw geometry_error("ProjectionGeometry: detector dimensions must be positive");
    }
};

inline std::vector<double> default_view_angles() {
    return {0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5, 180.0};
}

/// Geometry randomization: scale the source distance, shift the detector.
inline ProjectionGeometry perturb_geometry(const ProjectionGeometry& g,
                                           const GeometryPlan& plan) {
    ProjectionGeometry out = g;
    out.sdd = g.sdd * plan.sdd_scale;
    out.odd = g.odd + plan.odd_offset_mm;
    if (!(out.sdd > out.odd))
        throw geometry_error("perturb_geometry: sdd' <= odd' after perturbation");
    out.validate();
    return out;
}

/// Detector pitch that fits the magnified volume with a 5% margin. The
/// in-plane footprint is bounded by the axial diagonal (worst case under
/// rotation about z); the vertical extent by the z span.
inline double auto_pixel_pitch(const CtVolume& v, const ProjectionGeometry& g) {
    const auto e = v.extent_mm();
    const double max_extent = std::max(std::hypot(e[0], e[1]), e[2]);
    const double magnification = g.sdd / (g.sdd - g.odd);
    return 1.05 * magnification * max_extent / static_cast<double>(g.det_nx);
}

namespace drr_detail {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};
inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double norm(Vec3 a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

/// Precomputed ray-casting frame shared by image and mask projection.
struct Caster {
    Vec3 source;
    Vec3 det_center;
    Vec3 u_dir, v_dir;
    double pitch = 0;
    int det_nx = 0, det_ny = 0;
    Vec3 half; // voxel-center hull half-extent, mm
    std::array<double, 3> spacing{};
    std::array<int, 3> dims{};
    double step = 0;

    static Caster make(const CtVolume& vol, const ProjectionGeometry& g) {
        g.validate();
        vol.validate();
        Caster c;
        const double th = g.view_angle_deg * 3.141592653589793238 / 180.0;
        const Vec3 axis{std::cos(th), std::sin(th), 0.0};
        c.u_dir = {-std::sin(th), std::cos(th), 0.0};
        c.v_dir = {0.0, 0.0, -1.0}; // image row 0 = superior
        c.source = -(g.sdd - g.odd) * axis;
        c.det_center = g.odd * axis;
        c.pitch = g.pixel_pitch > 0.0 ? g.pixel_pitch : auto_pixel_pitch(vol, g);
        c.det_nx = g.det_nx;
        c.det_ny = g.det_ny;
        // Clip to the voxel-center hull: trilinear sampling is only defined
        // there, and the (p + half)/spacing voxel mapping is exact on it.
        c.half = {(vol.data.nx() - 1) * vol.spacing[0] * 0.5,
                  (vol.data.ny() - 1) * vol.spacing[1] * 0.5,
                  (vol.data.nz() - 1) * vol.spacing[2] * 0.5};
        c.spacing = vol.spacing;
        c.dims = {vol.data.nx(), vol.data.ny(), vol.data.nz()};
        c.step = 0.5 * vol.min_spacing();
        const bool src_inside = std::abs(c.source.x) <= c.half.x &&
                                std::abs(c.source.y) <= c.half.y &&
                                std::abs(c.source.z) <= c.half.z;
        if (src_inside) throw geometry_error("project: source lies inside the volume");
        return c;
    }

    Vec3 pixel_center(int i, int j) const {
        const double du = (i - (det_nx - 1) * 0.5) * pitch;
        const double dv = (j - (det_ny - 1) * 0.5) * pitch;
        return det_center + du * u_dir + dv * v_dir;
    }

    /// Slab-clip a ray against the hull; false when it misses.
    bool clip(Vec3 o, Vec3 d, double& t0, double& t1) const {
        t0 = 0.0;
        t1 = std::numeric_limits<double>::infinity();
        const double ov[3] = {o.x, o.y, o.z};
        const double dv[3] = {d.x, d.y, d.z};
        const double hv[3] = {half.x, half.y, half.z};
        for (int a = 0; a < 3; ++a) {
            if (std::abs(dv[a]) < 1e-15) {
                if (std::abs(ov[a]) > hv[a]) return false;
                continue;
            }
            double ta = (-hv[a] - ov[a]) / dv[a];
            double tb = (hv[a] - ov[a]) / dv[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        return t1 > t0;
    }

    /// Trapezoidal line integral of `field(world_point)` along pixel (i,j)'s ray.
    template <typename Field>
    double integrate(int i, int j, Field&& field) const {
        const Vec3 pix = pixel_center(i, j);
        Vec3 d = pix - source;
        const double len = norm(d);
        d = (1.0 / len) * d;
        double t0, t1;
        if (!clip(source, d, t0, t1)) return 0.0;
        const double span = t1 - t0;
        const int n = std::max(2, static_cast<int>(std::ceil(span / step)) + 1);
        const double h = span / (n - 1);
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            const Vec3 p = source + (t0 + k * h) * d;
            const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
            acc += w * field(p);
        }
        return acc * h;
    }

    /// World point -> fractional voxel coordinates.
    std::array<double, 3> to_voxel(Vec3 p) const {
        return {(p.x + half.x) / spacing[0], (p.y + half.y) / spacing[1],
                (p.z + half.z) / spacing[2]};
    }
};

} // namespace drr_detail

/// Render the raw line-integral image. Rays are independent; rows are
/// distributed over `threads` workers and written by pixel index, so the
/// result is bit-identical for any thread count.
inline Grid2D<float> project(const CtVolume& v, const ProjectionGeometry& g,
                             int threads = 1) {
    const auto caster = drr_detail::Caster::make(v, g);
    Grid2D<float> img(g.det_nx, g.det_ny, 0.0f);
    const Grid3D<float>& data = v.data;

    auto mu_at = [&](drr_detail::Vec3 p) {
        const auto f = caster.to_voxel(p);
        const double h = sample_trilinear(data, f[0], f[1], f[2]);
        return std::max(h + 1000.0, 0.0);
    };

    auto render_rows = [&](int j_begin, int j_stride) {
        for (int j = j_begin; j < g.det_ny; j += j_stride)
            for (int i = 0; i < g.det_nx; ++i)
                img.at(i, j) = static_cast<float>(caster.integrate(i, j, mu_at));
    };

    if (threads <= 1) {
        render_rows(0, 1);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(render_rows, t, threads);
        for (auto& th : pool) th.join();
    }
    return img;
}

/// Project one binary mask with the identical sampler as `project`.
/// A pixel is set when the accumulated path length through the mask
/// reaches tau (default: half the minimum voxel spacing).
inline Mask2D project_mask(const CtVolume& v, const Mask3D& mask,
                           const ProjectionGeometry& g, int threads = 1,
                           double tau = -1.0) {
    const auto caster = drr_detail::Caster::make(v, g);
    if (tau < 0.0) tau = 0.5 * v.min_spacing();
    Mask2D out(g.det_nx, g.det_ny, 0);

    auto occupancy = [&](drr_detail::Vec3 p) {
        const auto f = caster.to_voxel(p);
        return sample_trilinear(mask, f[0], f[1], f[2]);
    };

    auto render_rows = [&](int j_begin, int j_stride) {
        for (int j = j_begin; j < g.det_ny; j += j_stride)
            for (int i = 0; i < g.det_nx; ++i)
                out.at(i, j) = caster.integrate(i, j, occupancy) >= tau ? 1 : 0;
    };

    if (threads <= 1) {
        render_rows(0, 1);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(render_rows, t, threads);
        for (auto& th : pool) th.join();
    }
    return out;
}

/// Project every present class mask; absent classes stay empty grids.
inline std::vector<Mask2D> project_masks(const CtVolume& v, const LabelSet& labels,
                                         const ProjectionGeometry& g, int threads = 1) {
    std::vector<Mask2D> out(static_cast<std::size_t>(labels.num_classes()));
    for (int id = 0; id < labels.num_classes(); ++id)
        if (labels.has_class(id))
            out[static_cast<std::size_t>(id)] = project_mask(v, labels.mask(id), g, threads);
    return out;
}

/// Min-max rescale to [0,1]; a constant image maps to all zeros.
inline Grid2D<float> normalize01(const Grid2D<float>& img) {
    float lo = img.raw()[0], hi = img.raw()[0];
    for (float v : img.raw()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Grid2D<float> out(img.nx(), img.ny(), 0.0f);
    if (hi > lo) {
        const float range = hi - lo;
        for (std::size_t i = 0; i < img.size(); ++i)
            out.raw()[i] = (img.raw()[i] - lo) / range;
    }
    return out;
}

/// Quantize a [0,1] image to 8 bits, round-half-to-even.
inline Grid2D<std::uint8_t> quantize_u8(const Grid2D<float>& img01) {
    Grid2D<std::uint8_t> out(img01.nx(), img01.ny(), 0);
    for (std::size_t i = 0; i < img01.size(); ++i) {
        const double v = std::clamp(static_cast<double>(img01.raw()[i]), 0.0, 1.0);
        out.raw()[i] = static_cast<std::uint8_t>(std::nearbyint(255.0 * v));
    }
    return out;
}

/// Min-max normalize straight to 8 bits; constant image maps to zeros.
inline Grid2D<std::uint8_t> normalize_u8(const Grid2D<float>& img) {
    return quantize_u8(normalize01(img));
}

/// One rendered view: raw integrals, quantized image, per-class 2D masks,
/// and the per-class availability flags carried over from the labels.
struct DrrSample {
    Grid2D<float> image_raw;
    Grid2D<std::uint8_t> image_u8;
    std::vector<Mask2D> class_masks_2d;
    std::vector<bool> availability;
    double view_angle = 0.0;
    std::string plan_id;
};

inline DrrSample render_sample(const CtVolume& v, const LabelSet& labels,
                               ProjectionGeometry g, double angle_deg,
                               const std::string& plan_id = {}, int threads = 1) {
    g.view_angle_deg = angle_deg;
    if (g.pixel_pitch <= 0.0) g.pixel_pitch = auto_pixel_pitch(v, g);
    DrrSample s;
    s.image_raw = project(v, g, threads);
    s.image_u8 = normalize_u8(s.image_raw);
    s.class_masks_2d = project_masks(v, labels, g, threads);
    s.availability = labels.reliability();
    s.view_angle = angle_deg;
    s.plan_id = plan_id;
    return s;
}

} // namespace xrforge
