// phantoms.hpp - synthetic volumes with exact geometry for tests, demos,
// and toy datasets. Everything here is analytic: sizes and positions are
// chosen so oracles (chord lengths, widths, centroids) have closed forms.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "xrforge/labels.hpp"
#include "xrforge/nifti.hpp"
#include "xrforge/taxonomy.hpp"
#include "xrforge/volume.hpp"

namespace xrforge {

inline CtVolume constant_volume(std::array<int, 3> dims, float hu,
                                std::array<double, 3> spacing = {1.0, 1.0, 1.0}) {
    CtVolume v;
    v.data = Grid3D<float>(dims[0], dims[1], dims[2], hu);
    v.spacing = spacing;
    return v;
}

struct SpherePhantom {
    CtVolume volume;
    LabelSet labels;
    std::array<double, 3> center_vox{}; // sphere center, voxel coordinates
    double radius_mm = 0.0;
};

/// Air box with a single soft sphere labeled as heart. `center_frac`
/// places the center as a fraction of the voxel-center hull, so the
/// sphere can sit off-axis to exercise the geometry.
inline SpherePhantom sphere_in_box(std::array<int, 3> dims,
                                   std::array<double, 3> spacing = {1.0, 1.0, 1.0},
                                   double radius_frac = 0.22,
                                   std::array<double, 3> center_frac = {0.5, 0.5, 0.5},
                                   float box_hu = -1000.0f, float sphere_hu = -100.0f) {
    SpherePhantom p;
    p.volume = constant_volume(dims, box_hu, spacing);
    // Hull extent, not edge extent: center_frac 0.5 must land exactly on
    // the world origin so symmetric projections mirror cleanly.
    const std::array<double, 3> ext{(dims[0] - 1) * spacing[0], (dims[1] - 1) * spacing[1],
                                    (dims[2] - 1) * spacing[2]};
    const double min_ext = std::min({ext[0], ext[1], ext[2]});
    p.radius_mm = radius_frac * min_ext;
    const std::array<double, 3> c_mm{center_frac[0] * ext[0], center_frac[1] * ext[1],
                                     center_frac[2] * ext[2]};
    p.center_vox = {c_mm[0] / spacing[0], c_mm[1] / spacing[1], c_mm[2] / spacing[2]};

    Mask3D sphere(dims[0], dims[1], dims[2], 0);
    const double r2 = p.radius_mm * p.radius_mm;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const double dx = x * spacing[0] - c_mm[0];
                const double dy = y * spacing[1] - c_mm[1];
                const double dz = z * spacing[2] - c_mm[2];
                if (dx * dx + dy * dy + dz * dz <= r2) {
                    sphere.at(x, y, z) = 1;
                    p.volume.data.at(x, y, z) = sphere_hu;
                }
            }
    const auto& tax = default_taxonomy();
    p.labels = LabelSet(dims, tax);
    const int heart = *tax.find("heart");
    p.labels.set_mask(heart, std::move(sphere));
    p.labels.set_reliable(heart, true);
    return p;
}

enum class StackVariant {
    clean,        // disjoint slabs, one per z band
    overlap_pair, // two adjacent vertebrae 60% co-located
    triple_slice  // three vertebrae side by side in the same z band
};

/// Vertebra-stack label phantom for the consistency checks.
inline LabelSet vertebra_stack(std::array<int, 3> dims, StackVariant variant,
                               int n_vertebrae = 5) {
    const auto& tax = default_taxonomy();
    LabelSet labels(dims, tax);
    const auto verts = tax.vertebra_ids();
    n_vertebrae = std::min<int>(n_vertebrae, static_cast<int>(verts.size()));

    const int cx = dims[0] / 2, cy = dims[1] / 2;
    const int half = std::max(1, dims[0] / 10);
    const int band = dims[2] / (n_vertebrae + 1);
    const int slab = std::max(1, band / 2);

    auto fill_box = [&](Mask3D& m, int x0, int x1, int y0, int y1, int z0, int z1) {
        for (int z = std::max(0, z0); z <= std::min(dims[2] - 1, z1); ++z)
            for (int y = std::max(0, y0); y <= std::min(dims[1] - 1, y1); ++y)
                for (int x = std::max(0, x0); x <= std::min(dims[0] - 1, x1); ++x)
                    m.at(x, y, z) = 1;
    };

    if (variant == StackVariant::triple_slice) {
        // Three vertebrae share every z level of one band: anatomically
        // impossible, each mask still disjoint in x.
        const int z0 = dims[2] / 2 - slab / 2, z1 = z0 + slab;
        const int w = std::max(1, dims[0] / 8);
        for (int k = 0; k < 3; ++k) {
            Mask3D m(dims[0], dims[1], dims[2], 0);
            const int x0 = (k + 1) * dims[0] / 5;
            fill_box(m, x0, x0 + w, cy - half, cy + half, z0, z1);
            labels.set_mask(verts[static_cast<std::size_t>(k)], std::move(m));
        }
        return labels;
    }

    for (int k = 0; k < n_vertebrae; ++k) {
        Mask3D m(dims[0], dims[1], dims[2], 0);
        const int z0 = (k + 1) * band - slab / 2;
        fill_box(m, cx - half, cx + half, cy - half, cy + half, z0, z0 + slab - 1);
        labels.set_mask(verts[static_cast<std::size_t>(k)], std::move(m));
    }

    if (variant == StackVariant::overlap_pair && n_vertebrae >= 2) {
        // Slide the second vertebra down so ~60% of its slab coincides
        // with the first one's.
        const int z_shifted = band - slab / 2 + (slab * 2) / 5;
        Mask3D m(dims[0], dims[1], dims[2], 0);
        fill_box(m, cx - half, cx + half, cy - half, cy + half, z_shifted,
                 z_shifted + slab - 1);
        labels.set_mask(verts[1], std::move(m));
    }
    return labels;
}

struct ToyAnatomy {
    CtVolume volume;
    LabelSet labels;
};

/// Small chest-like phantom: soft body cylinder, two lungs, a heart, a
/// vertebra stack, and one rib pair. Labeled structures are kept strictly
/// disjoint (first claim wins) so the phantom round-trips through an
/// indexed label file unchanged. `variant` perturbs sizes so multi-volume
/// toy datasets are not identical; `qc_failure` arranges three vertebrae
/// side by side in one axial band.
inline ToyAnatomy make_toy_anatomy(std::array<int, 3> dims,
                                   std::array<double, 3> spacing = {4.0, 4.0, 4.0},
                                   int variant = 0, bool qc_failure = false) {
    const auto& tax = default_taxonomy();
    ToyAnatomy t;
    t.volume = constant_volume(dims, -1000.0f, spacing);
    t.labels = LabelSet(dims, tax);
    Mask3D claimed(dims[0], dims[1], dims[2], 0);

    const double cx = (dims[0] - 1) * 0.5, cy = (dims[1] - 1) * 0.5;
    const double rx = dims[0] * (0.38 + 0.01 * (variant % 3));
    const double ry = dims[1] * (0.30 + 0.01 * ((variant + 1) % 3));
    const int z_lo = dims[2] / 10, z_hi = dims[2] - 1 - dims[2] / 10;

    // Unlabeled soft body: HU only, claims nothing.
    for (int z = z_lo; z <= z_hi; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const double ex = (x - cx) / rx, ey = (y - cy) / ry;
                if (ex * ex + ey * ey <= 1.0) t.volume.data.at(x, y, z) = 20.0f;
            }

    auto claim_ellipsoid = [&](Mask3D& m, std::array<double, 3> c, std::array<double, 3> r,
                               float hu) {
        for (int z = 0; z < dims[2]; ++z)
            for (int y = 0; y < dims[1]; ++y)
                for (int x = 0; x < dims[0]; ++x) {
                    if (claimed.at(x, y, z)) continue;
                    const double ex = (x - c[0]) / r[0];
                    const double ey = (y - c[1]) / r[1];
                    const double ez = (z - c[2]) / r[2];
                    if (ex * ex + ey * ey + ez * ez <= 1.0) {
                        m.at(x, y, z) = 1;
                        claimed.at(x, y, z) = 1;
                        t.volume.data.at(x, y, z) = hu;
                    }
                }
    };
    auto claim_box = [&](Mask3D& m, int x0, int x1, int y0, int y1, int z0, int z1,
                         float hu) {
        for (int z = std::max(0, z0); z <= std::min(dims[2] - 1, z1); ++z)
            for (int y = std::max(0, y0); y <= std::min(dims[1] - 1, y1); ++y)
                for (int x = std::max(0, x0); x <= std::min(dims[0] - 1, x1); ++x) {
                    if (claimed.at(x, y, z)) continue;
                    m.at(x, y, z) = 1;
                    claimed.at(x, y, z) = 1;
                    t.volume.data.at(x, y, z) = hu;
                }
    };
    auto install = [&](int class_id, Mask3D m) {
        t.labels.set_mask(class_id, std::move(m));
        t.labels.set_reliable(class_id, true);
    };

    // Lungs: two ellipsoids, one shared class.
    const double cz = (dims[2] - 1) * 0.55;
    const double lung_r = dims[0] * (0.13 + 0.005 * (variant % 2));
    const double lung_rz = dims[2] * 0.28;
    {
        Mask3D lungs(dims[0], dims[1], dims[2], 0);
        claim_ellipsoid(lungs, {cx - dims[0] * 0.19, cy, cz}, {lung_r, lung_r * 1.15, lung_rz},
                        -800.0f);
        claim_ellipsoid(lungs, {cx + dims[0] * 0.19, cy, cz}, {lung_r, lung_r * 1.15, lung_rz},
                        -800.0f);
        install(*tax.find("lung"), std::move(lungs));
    }

    // Heart between and slightly below the lungs.
    {
        const double heart_r = dims[0] * (0.085 + 0.005 * (variant % 2));
        Mask3D heart(dims[0], dims[1], dims[2], 0);
        claim_ellipsoid(heart, {cx - dims[0] * 0.03, cy + dims[1] * 0.05, cz * 0.9},
                        {heart_r * 1.2, heart_r, heart_r * 1.4}, 40.0f);
        install(*tax.find("heart"), std::move(heart));
    }

    // Vertebra stack along the posterior midline, or an impossible
    // side-by-side triple for the QC-failure variant.
    const auto verts = tax.vertebra_ids();
    const double vy = cy + dims[1] * 0.22;
    const int vhalf = std::max(1, dims[0] / 16);
    if (qc_failure) {
        const int z0 = dims[2] / 2, slab = std::max(2, dims[2] / 12);
        for (int k = 0; k < 3; ++k) {
            Mask3D m(dims[0], dims[1], dims[2], 0);
            const int x0 = static_cast<int>(cx) + (k - 1) * 3 * vhalf;
            claim_box(m, x0 - vhalf, x0 + vhalf, static_cast<int>(vy) - vhalf,
                      static_cast<int>(vy) + vhalf, z0, z0 + slab - 1, 700.0f);
            install(verts[static_cast<std::size_t>(k)], std::move(m));
        }
    } else {
        const int n_vert = 5;
        const int band = (z_hi - z_lo) / (n_vert + 1);
        const int slab = std::max(2, (band * 2) / 3);
        for (int k = 0; k < n_vert; ++k) {
            Mask3D m(dims[0], dims[1], dims[2], 0);
            const int z0 = z_lo + (k + 1) * band - slab / 2;
            claim_box(m, static_cast<int>(cx) - vhalf, static_cast<int>(cx) + vhalf,
                      static_cast<int>(vy) - vhalf, static_cast<int>(vy) + vhalf, z0,
                      z0 + slab - 1, 700.0f);
            install(verts[static_cast<std::size_t>(k)], std::move(m));
        }
    }

    // One rib slab per side, clear of the spine.
    auto add_rib = [&](const char* name, double side) {
        Mask3D m(dims[0], dims[1], dims[2], 0);
        const int x0 = static_cast<int>(cx + side * dims[0] * 0.31);
        const int zr0 = static_cast<int>(cz);
        claim_box(m, x0 - 1, x0 + 1, static_cast<int>(cy) - vhalf,
                  static_cast<int>(cy) + vhalf, zr0, zr0 + std::max(1, dims[2] / 20), 500.0f);
        install(*tax.find(name), std::move(m));
    };
    add_rib("rib_left_4", -1.0);
    add_rib("rib_right_4", +1.0);

    return t;
}

/// Write `count` toy volumes (plus an optional QC-failing one) as an
/// indexed-label dataset: ct/<id>.nii.gz, labels/<id>.nii.gz, and a
/// class_map.json. Returns the volume ids in order.
inline std::vector<std::string> write_toy_dataset(
    const std::string& dir, int count, std::array<int, 3> dims,
    std::array<double, 3> spacing = {4.0, 4.0, 4.0}, bool include_qc_failure = false) {
    namespace fs = std::filesystem;
    const auto& tax = default_taxonomy();
    fs::create_directories(fs::path(dir) / "ct");
    fs::create_directories(fs::path(dir) / "labels");

    std::vector<std::string> ids;
    nlohmann::json class_map = nlohmann::json::object();
    const int total = count + (include_qc_failure ? 1 : 0);
    for (int i = 0; i < total; ++i) {
        const bool bad = include_qc_failure && i == total - 1;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "vol%03d", i);
        const std::string id(buf);
        ids.push_back(id);

        const ToyAnatomy t = make_toy_anatomy(dims, spacing, i, bad);
        save_nifti((fs::path(dir) / "ct" / (id + ".nii.gz")).string(), t.volume);

        Grid3D<std::uint16_t> indexed(dims[0], dims[1], dims[2], 0);
        for (int cid = 0; cid < t.labels.num_classes(); ++cid) {
            if (!t.labels.has_class(cid)) continue;
            const Mask3D& m = t.labels.mask(cid);
            const auto value = static_cast<std::uint16_t>(cid + 1);
            for (std::size_t v = 0; v < m.size(); ++v)
                if (m[v]) indexed[v] = value;
            class_map[tax.classes()[static_cast<std::size_t>(cid)].name] = cid + 1;
        }
        save_nifti_labels((fs::path(dir) / "labels" / (id + ".nii.gz")).string(), indexed,
                          t.volume);
    }

    std::ofstream cm(fs::path(dir) / "class_map.json");
    cm << class_map.dump(2) << "\n";
    return ids;
}

} // namespace xrforge
