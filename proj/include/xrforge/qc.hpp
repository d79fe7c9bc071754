// qc.hpp - label quality control.
//
// Stage 1 rejects volumes whose vertebra annotations are anatomically
// impossible (gross inter-class overlap, too many vertebrae crossing one
// axial slice). Stage 2 operates on projected 2D masks: stray fragments
// far smaller than the main body are removed, and a mask that still has
// multiple comparable components (or none at all) is flagged unreliable.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xrforge/connected.hpp"
#include "xrforge/labels.hpp"

namespace xrforge {

enum class QcReason { adjacent_overlap, impossible_slice_count };

inline const char* qc_reason_name(QcReason r) {
    switch (r) {
    case QcReason::adjacent_overlap: return "adjacent_overlap";
    case QcReason::impossible_slice_count: return "impossible_slice_count";
    }
    return "unknown";
}

struct QcFinding {
    QcReason reason;
    std::string detail; // human-readable: which pair / which slice
};

struct QcVerdict {
    bool accepted = true;
    std::vector<QcFinding> findings;
    std::vector<int> offending_slices;
};

/// Per-class outcome of 2D cleanup across all curated views.
struct ClassReliability {
    int class_id = -1;
    bool reliable = true;
    int removed_component_count = 0;
    double largest_fraction_second = 0.0; // worst second/largest ratio seen
};

/// Stage 1: vertebra plausibility checks on the 3D labels.
///
/// - Adjacent vertebra pair overlapping by more than `tau_overlap` of the
///   smaller mask is rejected (labels bleeding into each other).
/// - Any axial slice intersecting three or more distinct vertebrae is
///   rejected (a physical impossibility for axis-aligned chest CT).
///
/// Only vertebra classes participate; absent classes are skipped.
inline QcVerdict check_vertebra_consistency(const LabelSet& labels,
                                            double tau_overlap = 0.05) {
    QcVerdict verdict;
    const auto& tax = labels.taxonomy();
    const auto verts = tax.vertebra_ids();
    const auto dims = labels.dims();
    const std::size_t nx = static_cast<std::size_t>(dims[0]);
    const std::size_t ny = static_cast<std::size_t>(dims[1]);
    const std::size_t nz = static_cast<std::size_t>(dims[2]);

    // Pairwise overlap between consecutive vertebrae.
    for (std::size_t i = 0; i + 1 < verts.size(); ++i) {
        const int a = verts[i], b = verts[i + 1];
        if (!labels.has_class(a) || !labels.has_class(b)) continue;
        const Mask3D& ma = labels.mask(a);
        const Mask3D& mb = labels.mask(b);
        std::size_t na = 0, nb = 0, both = 0;
        for (std::size_t v = 0; v < ma.size(); ++v) {
            const bool ia = ma.raw()[v] != 0, ib = mb.raw()[v] != 0;
            na += ia;
            nb += ib;
            both += ia && ib;
        }
        const std::size_t smaller = std::min(na, nb);
        if (smaller == 0) continue;
        const double frac = static_cast<double>(both) / static_cast<double>(smaller);
        if (frac > tau_overlap) {
            verdict.accepted = false;
            verdict.findings.push_back(
                {QcReason::adjacent_overlap,
                 tax.classes()[a].name + "/" + tax.classes()[b].name + " overlap " +
                     std::to_string(frac)});
        }
    }

    // Count distinct vertebrae touching each axial slice.
    std::vector<int> per_slice(nz, 0);
    for (int id : verts) {
        if (!labels.has_class(id)) continue;
        const Mask3D& m = labels.mask(id);
        for (std::size_t z = 0; z < nz; ++z) {
            bool touched = false;
            const std::size_t base = z * nx * ny;
            for (std::size_t v = base; v < base + nx * ny && !touched; ++v)
                touched = m.raw()[v] != 0;
            per_slice[z] += touched;
        }
    }
    for (std::size_t z = 0; z < nz; ++z) {
        if (per_slice[z] >= 3) {
            verdict.accepted = false;
            verdict.findings.push_back({QcReason::impossible_slice_count,
                                        "slice " + std::to_string(z) + " crosses " +
                                            std::to_string(per_slice[z]) + " vertebrae"});
            verdict.offending_slices.push_back(static_cast<int>(z));
        }
    }
    return verdict;
}

struct CleanResult {
    Mask2D mask;
    bool reliable = true;
    int components_before = 0;
    int components_after = 0;
    double largest_fraction_second = 0.0; // surviving second/largest size ratio
};

/// Stage 2: 2D component cleanup on a projected mask.
///
/// Components (8-connected) smaller than `min_frac` of the largest are
/// erased. The mask is reliable only if exactly one component survives;
/// an empty mask is unreliable by definition.
inline CleanResult clean_components_2d(const Mask2D& mask, double min_frac = 0.10) {
    CleanResult out;
    out.mask = mask;
    const Components2D comps = label_components_2d(mask);
    out.components_before = static_cast<int>(comps.sizes.size());
    if (comps.sizes.empty()) {
        out.reliable = false;
        out.components_after = 0;
        return out;
    }
    const std::size_t largest = *std::max_element(comps.sizes.begin(), comps.sizes.end());
    const double cutoff = min_frac * static_cast<double>(largest);
    std::vector<char> keep(comps.sizes.size(), 0);
    std::vector<std::size_t> kept_sizes;
    for (std::size_t c = 0; c < comps.sizes.size(); ++c) {
        keep[c] = static_cast<double>(comps.sizes[c]) >= cutoff;
        if (keep[c]) kept_sizes.push_back(comps.sizes[c]);
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const std::int32_t lbl = comps.labels.raw()[i];
        out.mask.raw()[i] = (lbl > 0 && keep[static_cast<std::size_t>(lbl - 1)]) ? 1 : 0;
    }
    std::sort(kept_sizes.begin(), kept_sizes.end(), std::greater<>());
    out.components_after = static_cast<int>(kept_sizes.size());
    out.reliable = kept_sizes.size() == 1;
    out.largest_fraction_second =
        kept_sizes.size() > 1
            ? static_cast<double>(kept_sizes[1]) / static_cast<double>(largest)
            : 0.0;
    return out;
}

} // namespace xrforge
