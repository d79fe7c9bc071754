// msdr3d.hpp - pre-projection (3D) randomization stages.
//
// Every stage is a pure function of (volume, labels, plan): the plan holds
// all sampled values, so application is deterministic and thread-safe.
// Label masks are never modified, and voxels outside the labeled ROI are
// left bit-identical (implants excepted, which by design add unlabeled
// material).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "xrforge/connected.hpp"
#include "xrforge/errors.hpp"
#include "xrforge/labels.hpp"
#include "xrforge/plan.hpp"
#include "xrforge/rng.hpp"
#include "xrforge/volume.hpp"

namespace xrforge {

namespace msdr_detail {

inline void scale_masked(CtVolume& v, const Mask3D& m, double s) {
    if (m.empty()) return;
    for (std::size_t i = 0; i < v.data.size(); ++i)
        if (m.raw()[i]) v.data[i] = static_cast<float>(v.data[i] * s);
}

} // namespace msdr_detail

/// Anti-correlated bone/soft contrast scaling. The high-assigned family
/// gets s1 from the upper interval, the other family s2 from the lower.
/// Voxels in both families (annotation bleed) take the bone factor.
inline CtVolume apply_bone_soft_contrast(const CtVolume& v, const LabelSet& labels,
                                         const RandomizationPlan& plan) {
    CtVolume out = v;
    if (!plan.bone_soft) return out;
    const auto& bs = *plan.bone_soft;
    const double s_bone = bs.high == HighFamily::bone ? bs.s1 : bs.s2;
    const double s_soft = bs.high == HighFamily::bone ? bs.s2 : bs.s1;
    const Mask3D bone = labels.bone_union();
    const Mask3D soft = labels.soft_union();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const bool in_bone = !bone.empty() && bone.raw()[i];
        const bool in_soft = !soft.empty() && soft.raw()[i];
        if (in_bone)
            out.data[i] = static_cast<float>(out.data[i] * s_bone);
        else if (in_soft)
            out.data[i] = static_cast<float>(out.data[i] * s_soft);
    }
    return out;
}

/// Per-bone-component scaling over vertebrae and ribs. A voxel claimed by
/// several masks is scaled exactly once, by the lowest class id.
inline CtVolume apply_component_scaling(const CtVolume& v, const LabelSet& labels,
                                        const RandomizationPlan& plan) {
    CtVolume out = v;
    if (!plan.component_scales) return out;
    std::vector<std::uint8_t> claimed(out.data.size(), 0);
    // std::map iterates in ascending id order, which is the canonical order.
    for (const auto& [id, s] : plan.component_scales->scales) {
        if (!labels.has_class(id)) continue;
        const Mask3D& m = labels.mask(id);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            if (!m.raw()[i] || claimed[i]) continue;
            claimed[i] = 1;
            out.data[i] = static_cast<float>(out.data[i] * s);
        }
    }
    return out;
}

/// Vertical HU gradient per bone group. z_hat runs 0 at the group's most
/// superior occupied slice to 1 at its most inferior; a group occupying a
/// single slice takes the superior factor.
inline CtVolume apply_vertical_gradient(const CtVolume& v, const LabelSet& labels,
                                        const RandomizationPlan& plan) {
    CtVolume out = v;
    const int nx = out.data.nx(), ny = out.data.ny(), nz = out.data.nz();

    auto apply_group = [&](const Mask3D& m, const GradientPlan& g) {
        if (m.empty()) return;
        int z_lo = nz, z_hi = -1;
        for (int z = 0; z < nz; ++z) {
            const std::size_t base = static_cast<std::size_t>(z) * nx * ny;
            for (std::size_t i = base; i < base + static_cast<std::size_t>(nx) * ny; ++i) {
                if (m.raw()[i]) {
                    z_lo = std::min(z_lo, z);
                    z_hi = std::max(z_hi, z);
                    break;
                }
            }
        }
        if (z_hi < z_lo) return; // group mask empty
        for (int z = z_lo; z <= z_hi; ++z) {
            // Canonical orientation puts superior at high z, so z_hat=0 there.
            const double z_hat =
                z_hi == z_lo ? 0.0
                             : static_cast<double>(z_hi - z) / static_cast<double>(z_hi - z_lo);
            const double f = g.factor(z_hat);
            const std::size_t base = static_cast<std::size_t>(z) * nx * ny;
            for (std::size_t i = base; i < base + static_cast<std::size_t>(nx) * ny; ++i)
                if (m.raw()[i]) out.data[i] = static_cast<float>(out.data[i] * f);
        }
    };

    if (plan.grad_spine) apply_group(labels.vertebra_union(), *plan.grad_spine);
    if (plan.grad_ribs_left) apply_group(labels.rib_left_union(), *plan.grad_ribs_left);
    if (plan.grad_ribs_right) apply_group(labels.rib_right_union(), *plan.grad_ribs_right);
    return out;
}

/// Normalized erosion depth of each mask voxel: 0 on the surface layer,
/// 1 on the last layer to survive iterative 6-connected erosion.
/// Normalization is per 26-connected component, so small and large
/// structures each span the full range. A component consumed in a single
/// round is all-surface (depth 0).
inline Grid3D<float> morphological_depth(const Mask3D& mask) {
    if (mask.empty() || count_voxels(mask) == 0)
        throw parameter_error("morphological_depth: empty mask");
    const int nx = mask.nx(), ny = mask.ny(), nz = mask.nz();
    Grid3D<float> depth(nx, ny, nz, 0.0f);
    std::vector<std::int32_t> round(mask.size(), 0);
    std::vector<std::uint8_t> cur(mask.raw().begin(), mask.raw().end());

    auto alive = [&](int x, int y, int z) {
        if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return false;
        return cur[static_cast<std::size_t>(x) +
                   static_cast<std::size_t>(nx) *
                       (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * z)] != 0;
    };

    std::vector<std::size_t> peel;
    std::int32_t r = 0;
    std::size_t remaining = count_voxels(mask);
    while (remaining > 0) {
        ++r;
        peel.clear();
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const std::size_t i = mask.index(x, y, z);
                    if (!cur[i]) continue;
                    const bool boundary = !alive(x - 1, y, z) || !alive(x + 1, y, z) ||
                                          !alive(x, y - 1, z) || !alive(x, y + 1, z) ||
                                          !alive(x, y, z - 1) || !alive(x, y, z + 1);
                    if (boundary) peel.push_back(i);
                }
        for (std::size_t i : peel) {
            cur[i] = 0;
            round[i] = r;
        }
        remaining -= peel.size();
    }

    const Components3D comps = label_components_3d(mask, 26);
    std::vector<std::int32_t> max_round(comps.sizes.size(), 1);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask.raw()[i]) {
            const auto c = static_cast<std::size_t>(comps.labels.raw()[i] - 1);
            max_round[c] = std::max(max_round[c], round[i]);
        }
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask.raw()[i]) continue;
        const auto c = static_cast<std::size_t>(comps.labels.raw()[i] - 1);
        depth.raw()[i] = max_round[c] > 1 ? static_cast<float>(round[i] - 1) /
                                                static_cast<float>(max_round[c] - 1)
                                          : 0.0f;
    }
    return depth;
}

/// Surface-to-core HU modulation across all bone voxels.
inline CtVolume apply_intra_bone(const CtVolume& v, const LabelSet& labels,
                                 const RandomizationPlan& plan) {
    CtVolume out = v;
    if (!plan.intra_bone) return out;
    const Mask3D bone = labels.bone_union();
    if (bone.empty() || count_voxels(bone) == 0) return out;
    const Grid3D<float> depth = morphological_depth(bone);
    const auto& ib = *plan.intra_bone;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (bone.raw()[i])
            out.data[i] = static_cast<float>(out.data[i] * ib.factor(depth.raw()[i]));
    return out;
}

/// Soft-tissue contrast: either a plain scale on the soft union, or a
/// contrast reversal applied only within the physiologic soft range
/// [-900, -2] HU.
inline CtVolume apply_soft_tissue(const CtVolume& v, const LabelSet& labels,
                                  const RandomizationPlan& plan,
                                  const MsdrParams& params = MsdrParams{}) {
    CtVolume out = v;
    if (plan.soft_tissue.mode == SoftTissueMode::none) return out;
    const Mask3D soft = labels.soft_union();
    if (soft.empty()) return out;
    if (plan.soft_tissue.mode == SoftTissueMode::scale) {
        msdr_detail::scale_masked(out, soft, plan.soft_tissue.value);
    } else {
        const double k = 1.5 + plan.soft_tissue.value;
        const double lo = params.soft.invert_hu.lo, hi = params.soft.invert_hu.hi;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            if (!soft.raw()[i]) continue;
            const double h = out.data[i];
            if (h >= lo && h <= hi) out.data[i] = static_cast<float>(-k * h);
        }
    }
    return out;
}

/// Voxel-wise additive Gaussian noise on the labeled ROI. Noise values
/// are indexed by voxel, so the result is independent of iteration order
/// and identical across runs.
inline CtVolume add_gaussian_noise(const CtVolume& v, const LabelSet& labels,
                                   const RandomizationPlan& plan) {
    CtVolume out = v;
    if (!plan.noise_sigma) return out;
    const Mask3D roi = labels.roi_union();
    if (roi.empty()) return out;
    RandomStream rs(stream_key(plan.global_seed, plan.volume_id, "noise"));
    const double sigma = *plan.noise_sigma;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (roi.raw()[i])
            out.data[i] = static_cast<float>(out.data[i] + sigma * rs.gaussian_at(i));
    return out;
}

struct ImplantReport {
    std::vector<int> skipped; // object indices that never landed inside the volume
};

/// Rasterize high-density cylinders or ellipsoids into the volume. Poses
/// live in the bounding box of the labeled ROI dilated by a margin; an
/// object that misses the volume entirely is re-posed a bounded number of
/// times from its own retry stream, then skipped and recorded. Label
/// masks are untouched: implants are deliberately unlabeled material.
inline CtVolume implant_objects(const CtVolume& v, const LabelSet& labels,
                                const RandomizationPlan& plan,
                                const MsdrParams& params = MsdrParams{},
                                ImplantReport* report = nullptr) {
    CtVolume out = v;
    if (!plan.implants) return out;
    const int nx = out.data.nx(), ny = out.data.ny(), nz = out.data.nz();
    const double sx = out.spacing[0], sy = out.spacing[1], sz = out.spacing[2];

    // ROI bounding box in volume-local mm, dilated; falls back to the full
    // volume when no labels are present.
    std::array<double, 3> lo{0.0, 0.0, 0.0};
    std::array<double, 3> hi{(nx - 1) * sx, (ny - 1) * sy, (nz - 1) * sz};
    const Mask3D roi = labels.roi_union();
    if (!roi.empty() && count_voxels(roi) > 0) {
        std::array<int, 3> ilo{nx, ny, nz}, ihi{-1, -1, -1};
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x)
                    if (roi.at(x, y, z)) {
                        ilo = {std::min(ilo[0], x), std::min(ilo[1], y), std::min(ilo[2], z)};
                        ihi = {std::max(ihi[0], x), std::max(ihi[1], y), std::max(ihi[2], z)};
                    }
        const double d = params.implants.roi_dilate_mm;
        lo = {ilo[0] * sx - d, ilo[1] * sy - d, ilo[2] * sz - d};
        hi = {ihi[0] * sx + d, ihi[1] * sy + d, ihi[2] * sz + d};
    }

    auto rasterize = [&](const ImplantObject& obj, const std::array<double, 3>& center,
                         bool write) -> std::size_t {
        // Conservative index window around the object.
        const double reach = std::max(obj.radius_mm, obj.length_mm * 0.5);
        const int x0 = std::max(0, static_cast<int>(std::floor((center[0] - reach) / sx)));
        const int x1 = std::min(nx - 1, static_cast<int>(std::ceil((center[0] + reach) / sx)));
        const int y0 = std::max(0, static_cast<int>(std::floor((center[1] - reach) / sy)));
        const int y1 = std::min(ny - 1, static_cast<int>(std::ceil((center[1] + reach) / sy)));
        const int z0 = std::max(0, static_cast<int>(std::floor((center[2] - reach) / sz)));
        const int z1 = std::min(nz - 1, static_cast<int>(std::ceil((center[2] + reach) / sz)));
        std::size_t hits = 0;
        const double half_len = obj.length_mm * 0.5;
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double px = x * sx - center[0];
                    const double py = y * sy - center[1];
                    const double pz = z * sz - center[2];
                    const double axial =
                        px * obj.axis[0] + py * obj.axis[1] + pz * obj.axis[2];
                    const double rx = px - axial * obj.axis[0];
                    const double ry = py - axial * obj.axis[1];
                    const double rz = pz - axial * obj.axis[2];
                    const double rad2 = rx * rx + ry * ry + rz * rz;
                    bool inside;
                    if (obj.shape == ImplantObject::Shape::cylinder) {
                        inside = std::abs(axial) <= half_len &&
                                 rad2 <= obj.radius_mm * obj.radius_mm;
                    } else {
                        const double a = axial / half_len;
                        inside = a * a + rad2 / (obj.radius_mm * obj.radius_mm) <= 1.0;
                    }
                    if (inside) {
                        ++hits;
                        if (write) out.data.at(x, y, z) = static_cast<float>(obj.hu);
                    }
                }
        return hits;
    };

    for (std::size_t oi = 0; oi < plan.implants->objects.size(); ++oi) {
        ImplantObject obj = plan.implants->objects[oi];
        auto center_from_frac = [&](const std::array<double, 3>& f) {
            return std::array<double, 3>{lo[0] + f[0] * (hi[0] - lo[0]),
                                         lo[1] + f[1] * (hi[1] - lo[1]),
                                         lo[2] + f[2] * (hi[2] - lo[2])};
        };
        std::array<double, 3> center = center_from_frac(obj.center_frac);
        bool placed = rasterize(obj, center, false) > 0;
        if (!placed) {
            RandomStream retry(stream_key(plan.global_seed, plan.volume_id,
                                          "implant_retry:" + std::to_string(oi)));
            for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
                std::array<double, 3> f{retry.next_uniform(), retry.next_uniform(),
                                        retry.next_uniform()};
                obj.axis = plan_detail::sample_unit_vector(retry);
                center = center_from_frac(f);
                placed = rasterize(obj, center, false) > 0;
            }
        }
        if (placed)
            rasterize(obj, center, true);
        else if (report)
            report->skipped.push_back(static_cast<int>(oi));
    }
    return out;
}

/// Full 3D stage pipeline in fixed order. Inactive stages are no-ops;
/// labels pass through untouched.
inline CtVolume apply_all_3d(const CtVolume& v, const LabelSet& labels,
                             const RandomizationPlan& plan,
                             const MsdrParams& params = MsdrParams{},
                             ImplantReport* report = nullptr) {
    CtVolume out = apply_bone_soft_contrast(v, labels, plan);
    out = apply_component_scaling(out, labels, plan);
    out = apply_vertical_gradient(out, labels, plan);
    out = apply_intra_bone(out, labels, plan);
    out = apply_soft_tissue(out, labels, plan, params);
    out = add_gaussian_noise(out, labels, plan);
    out = implant_objects(out, labels, plan, params, report);
    return out;
}

} // namespace xrforge
