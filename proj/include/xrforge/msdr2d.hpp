// msdr2d.hpp - detector-level (post-projection) randomizations.
//
// Both ops act on a [0,1] float image and never touch masks. Tone mapping
// is a piecewise-linear curve through (0,0), a sampled control knot, and
// (1,1); polarity inversion reflects intensities about the image's own
// range and re-normalizes.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "xrforge/drr.hpp"
#include "xrforge/grid.hpp"
#include "xrforge/plan.hpp"

namespace xrforge {

/// Piecewise-linear tone curve through the sorted anchors
/// {(0,0), (knot), (1,1)}. Inputs outside the anchor span follow the
/// nearest segment extended linearly; outputs clamp to [0,1].
inline Grid2D<float> tone_map(const Grid2D<float>& img, const ToneMapParams& p) {
    struct Anchor {
        double x, y;
    };
    std::array<Anchor, 3> a{{{0.0, 0.0}, {p.knot_x, p.knot_y}, {1.0, 1.0}}};
    std::sort(a.begin(), a.end(), [](const Anchor& l, const Anchor& r) {
        return l.x != r.x ? l.x < r.x : l.y < r.y;
    });

    auto segment_eval = [](const Anchor& l, const Anchor& r, double x) {
        if (r.x == l.x) return l.y; // degenerate knot on an endpoint
        const double t = (x - l.x) / (r.x - l.x);
        return l.y + t * (r.y - l.y);
    };
    auto curve = [&](double x) {
        double y;
        if (x <= a[1].x)
            y = segment_eval(a[0], a[1], x);
        else
            y = segment_eval(a[1], a[2], x);
        return std::clamp(y, 0.0, 1.0);
    };

    Grid2D<float> out(img.nx(), img.ny(), 0.0f);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.raw()[i] = static_cast<float>(curve(img.raw()[i]));
    return out;
}

/// Reflect intensities about the image's own range with a small stability
/// offset, then re-normalize to [0,1].
inline Grid2D<float> invert_polarity_2d(const Grid2D<float>& img, double eps) {
    float lo = img.raw()[0], hi = img.raw()[0];
    for (float v : img.raw()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Grid2D<float> out(img.nx(), img.ny(), 0.0f);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.raw()[i] = static_cast<float>(static_cast<double>(lo) + hi - img.raw()[i] + eps);
    return normalize01(out);
}

/// Detector randomization pipeline for one view: tone curve, then
/// polarity inversion, each gated by the per-view plan.
inline Grid2D<float> apply_all_2d(const Grid2D<float>& img, const ToneMapParams& p) {
    Grid2D<float> out = img;
    if (p.active) out = tone_map(out, p);
    if (p.polarity_active) out = invert_polarity_2d(out, p.epsilon);
    return out;
}

} // namespace xrforge
