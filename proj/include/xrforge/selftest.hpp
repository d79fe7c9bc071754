// selftest.hpp - embedded smoke checks for the CLI.
//
// Fast, dependency-free sanity suites a deployment can run before trusting
// a build: loss-kernel oracles, projector phantom checks, and plan-sampling
// statistics. These are intentionally lighter than the full test suite.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "xrforge/car.hpp"
#include "xrforge/drr.hpp"
#include "xrforge/phantoms.hpp"
#include "xrforge/plan.hpp"

namespace xrforge {

struct SelftestSuite {
    std::string name;
    bool passed = false;
    std::string detail;
    double elapsed_ms = 0.0;
};

namespace selftest_detail {

inline bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline SelftestSuite run_car_suite() {
    SelftestSuite s;
    s.name = "car_kernels";

    // Hand-computable dice: pred {1,0}, gt {1,1} -> 1 - (2*1+1)/(1+2+1) = 0.25
    Grid2D<float> pred(2, 1, 0.0f), gt(2, 1, 1.0f);
    pred.at(0, 0) = 1.0f;
    const double dice = dice_loss(pred, gt);
    if (!near(dice, 0.25, 1e-12)) {
        s.detail = "dice_loss: expected 0.25, got " + std::to_string(dice);
        return s;
    }

    LatentBatch a(1, 3), b(1, 3);
    a.vectors = {1.0, 0.0, 0.0};
    b.vectors = {0.0, 1.0, 0.0};
    const double ortho = cosine_dist_loss(a, b);
    if (!near(ortho, 1.0, 1e-12)) {
        s.detail = "cosine_dist_loss: expected 1 for orthogonal, got " + std::to_string(ortho);
        return s;
    }

    const double total = total_loss(0.5, 0.1, 0.2, LossWeights{});
    if (total != 0.5 + 4.0 * 0.1 + 2.0 * 0.2) {
        s.detail = "total_loss: expected 1.3, got " + std::to_string(total);
        return s;
    }
    s.passed = true;
    s.detail = "dice, cosine, weighted total all exact";
    return s;
}

inline SelftestSuite run_projector_suite() {
    SelftestSuite s;
    s.name = "projector";

    // HU 0 -> mu = 1000/mm after the +1000 shift
    const CtVolume cube = constant_volume({32, 32, 32}, 0.0f, {2.0, 2.0, 2.0});
    ProjectionGeometry g;
    g.view_angle_deg = 0.0;
    g.det_nx = g.det_ny = 65;
    g.pixel_pitch = auto_pixel_pitch(cube, g);
    const Grid2D<float> img = project(cube, g);

    // The central ray crosses the voxel-center hull head on: chord = 62mm.
    const double center = img.at(g.det_nx / 2, g.det_ny / 2);
    const double expected = 62.0 * 1000.0;
    if (std::fabs(center - expected) > 0.01 * expected) {
        s.detail = "central chord: expected ~" + std::to_string(expected) + ", got " +
                   std::to_string(center);
        return s;
    }

    // Doubling attenuation must exactly double every raw pixel.
    const CtVolume cube2 = constant_volume({32, 32, 32}, 1000.0f, {2.0, 2.0, 2.0});
    const Grid2D<float> img2 = project(cube2, g);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (std::fabs(static_cast<double>(img2[i]) - 2.0 * img[i]) >
            1e-6 * std::max(1.0, 2.0 * std::fabs(img[i]))) {
            s.detail = "linearity violated at pixel " + std::to_string(i);
            return s;
        }
    }
    s.passed = true;
    s.detail = "cube chord within 1%, attenuation linear";
    return s;
}

inline SelftestSuite run_plan_suite() {
    SelftestSuite s;
    s.name = "plan_distribution";
    const MsdrParams params;
    const int n = 2000;
    int bone_soft = 0, noise = 0;
    for (int i = 0; i < n; ++i) {
        const RandomizationPlan p =
            sample_plan(params, 7u, "vol" + std::to_string(i));
        if (p.bone_soft) {
            ++bone_soft;
            if (!params.bone_soft.s_high.contains(p.bone_soft->s1) ||
                !params.bone_soft.s_low.contains(p.bone_soft->s2)) {
                s.detail = "bone_soft factor out of range";
                return s;
            }
        }
        if (p.noise_sigma) {
            ++noise;
            if (!params.noise.sigma.contains(*p.noise_sigma)) {
                s.detail = "noise sigma out of range";
                return s;
            }
        }
    }
    const double f_bs = static_cast<double>(bone_soft) / n;
    const double f_n = static_cast<double>(noise) / n;
    if (std::fabs(f_bs - params.bone_soft.p) > 0.04 ||
        std::fabs(f_n - params.noise.p) > 0.04) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "activation rates off: bone_soft %.3f, noise %.3f",
                      f_bs, f_n);
        s.detail = buf;
        return s;
    }
    s.passed = true;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "rates bone_soft %.3f noise %.3f, all draws in range",
                  f_bs, f_n);
    s.detail = buf;
    return s;
}

} // namespace selftest_detail

inline std::vector<SelftestSuite> run_selftest() {
    using clock = std::chrono::steady_clock;
    std::vector<SelftestSuite> suites;
    for (auto* fn : {selftest_detail::run_car_suite, selftest_detail::run_projector_suite,
                     selftest_detail::run_plan_suite}) {
        const auto t0 = clock::now();
        SelftestSuite s = fn();
        s.elapsed_ms =
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        suites.push_back(std::move(s));
    }
    return suites;
}

} // namespace xrforge
