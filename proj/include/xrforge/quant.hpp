// quant.hpp - anatomical measurements from projected 2D masks.
//
// Cardiothoracic ratio: horizontal cardiac extent left/right of the
// thoracic midline over the maximal internal thoracic width, all in
// pixels. Pixels are treated as unit squares, so a structure spanning k
// columns measures k wide; the midline is the horizontal centroid of the
// lung union (recorded in the result for auditability).
//
// Spine curvature: perpendicular (total-least-squares) line fit through
// the vertebral centroids; the score is the mean perpendicular distance,
// graded against thresholds normalized by image height.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xrforge/errors.hpp"
#include "xrforge/grid.hpp"
#include "xrforge/labels.hpp"
#include "xrforge/taxonomy.hpp"

namespace xrforge {

struct CtrMeasurement {
    double mrd = 0.0; // max cardiac extent right of midline, px
    double mld = 0.0; // max cardiac extent left of midline, px
    double id = 0.0;  // maximal internal thoracic width, px
    double ratio = 0.0;
    double midline_x = 0.0;
};

inline CtrMeasurement compute_ctr(const Mask2D& heart_mask, const Mask2D& lung_mask) {
    if (!heart_mask.dims_match(lung_mask))
        throw shape_error("compute_ctr: mask dimensions differ");
    if (count_pixels(heart_mask) == 0 || count_pixels(lung_mask) == 0)
        throw measurement_error("compute_ctr: empty heart or lung mask");

    const int nx = lung_mask.nx(), ny = lung_mask.ny();

    // Midline: horizontal centroid of the thoracic (lung union) region.
    double sum_x = 0.0;
    std::size_t n_lung = 0;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            if (lung_mask.at(x, y)) {
                sum_x += x;
                ++n_lung;
            }
    const double midline = sum_x / static_cast<double>(n_lung);

    // Internal diameter: widest per-row lung extent, inclusive of both
    // boundary pixels.
    double id = 0.0;
    for (int y = 0; y < ny; ++y) {
        int lo = nx, hi = -1;
        for (int x = 0; x < nx; ++x)
            if (lung_mask.at(x, y)) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        if (hi >= lo) id = std::max(id, static_cast<double>(hi - lo + 1));
    }
    if (id <= 0.0) throw measurement_error("compute_ctr: degenerate thoracic width");

    // Cardiac extents measured to pixel outer edges, so a heart spanning k
    // columns contributes k in total.
    double mrd = 0.0, mld = 0.0;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            if (heart_mask.at(x, y)) {
                mrd = std::max(mrd, (x + 0.5) - midline);
                mld = std::max(mld, midline - (x - 0.5));
            }
    mrd = std::max(mrd, 0.0);
    mld = std::max(mld, 0.0);

    CtrMeasurement m;
    m.mrd = mrd;
    m.mld = mld;
    m.id = id;
    m.ratio = (mrd + mld) / id;
    m.midline_x = midline;
    return m;
}

enum class Severity { low, moderate, high };

inline const char* severity_name(Severity s) {
    switch (s) {
    case Severity::low: return "low";
    case Severity::moderate: return "moderate";
    case Severity::high: return "high";
    }
    return "unknown";
}

struct SpcaThresholds {
    double moderate = 0.01; // score/image_height at which low ends
    double high = 0.025;    // and moderate ends
};

struct SpcaMeasurement {
    std::vector<std::array<double, 2>> centroids; // (x, y) per present vertebra
    std::array<double, 2> line_point{0.0, 0.0};
    std::array<double, 2> line_dir{0.0, 1.0};
    double score = 0.0; // mean perpendicular distance, px
    Severity severity = Severity::low;
};

namespace quant_detail {

inline std::array<double, 2> centroid(const Mask2D& m) {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < m.ny(); ++y)
        for (int x = 0; x < m.nx(); ++x)
            if (m.at(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
    return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

} // namespace quant_detail

/// Fit a line to the vertebral centroids by perpendicular regression and
/// score the mean centroid displacement. `class_masks` is indexed by
/// taxonomy class id; only nonempty vertebra masks participate.
inline SpcaMeasurement compute_spca(const std::vector<Mask2D>& class_masks,
                                    const Taxonomy& tax = default_taxonomy(),
                                    const SpcaThresholds& thr = SpcaThresholds{}) {
    SpcaMeasurement out;
    int image_height = 0;
    for (int id : tax.vertebra_ids()) {
        if (id < 0 || static_cast<std::size_t>(id) >= class_masks.size()) continue;
        const Mask2D& m = class_masks[static_cast<std::size_t>(id)];
        if (m.empty() || count_pixels(m) == 0) continue;
        out.centroids.push_back(quant_detail::centroid(m));
        image_height = m.ny();
    }
    if (out.centroids.size() < 3)
        throw insufficient_data_error("compute_spca: fewer than 3 vertebra centroids");

    const double n = static_cast<double>(out.centroids.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : out.centroids) {
        mx += p[0];
        my += p[1];
    }
    mx /= n;
    my /= n;

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : out.centroids) {
        const double dx = p[0] - mx, dy = p[1] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }

    // Principal direction of the 2x2 scatter matrix (largest eigenvalue).
    const double half_tr = 0.5 * (sxx + syy);
    const double det_root = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
    const double lambda = half_tr + det_root;
    double dx = sxy, dy = lambda - sxx;
    if (std::abs(dx) < 1e-30 && std::abs(dy) < 1e-30) {
        dx = lambda - syy;
        dy = sxy;
    }
    const double dn = std::hypot(dx, dy);
    if (dn < 1e-30) {
        // Isotropic or single-point scatter: default to a vertical line.
        dx = 0.0;
        dy = 1.0;
    } else {
        dx /= dn;
        dy /= dn;
    }

    out.line_point = {mx, my};
    out.line_dir = {dx, dy};
    const double nxv = -dy, nyv = dx; // unit normal
    double acc = 0.0;
    for (const auto& p : out.centroids)
        acc += std::abs((p[0] - mx) * nxv + (p[1] - my) * nyv);
    out.score = acc / n;

    const double norm_score =
        image_height > 0 ? out.score / static_cast<double>(image_height) : 0.0;
    out.severity = norm_score < thr.moderate
                       ? Severity::low
                       : (norm_score < thr.high ? Severity::moderate : Severity::high);
    return out;
}

} // namespace xrforge
