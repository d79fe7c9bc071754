// car.hpp - numerical kernels for partial-label training objectives.
//
// Framework-free reference implementations: plain arrays in, scalars out,
// all accumulation in double. Gradient semantics (detached targets,
// constant composed channels) are documented contracts for callers that
// wrap these in an autodiff framework; nothing here tracks gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xrforge/errors.hpp"
#include "xrforge/grid.hpp"

namespace xrforge {

/// [B,C,H,W] probability maps, row-major, W fastest.
struct BatchMaps {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<float> values;

    BatchMaps() = default;
    BatchMaps(int b_, int c_, int h_, int w_, float fill = 0.0f)
        : b(b_), c(c_), h(h_), w(w_) {
        if (b_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw parameter_error("BatchMaps: all dimensions must be >= 1");
        values.assign(static_cast<std::size_t>(b_) * c_ * h_ * w_, fill);
    }

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t index(int bi, int ci, int hi, int wi) const {
        return ((static_cast<std::size_t>(bi) * c + ci) * h + hi) * w + wi;
    }
    float& at(int bi, int ci, int hi, int wi) { return values[index(bi, ci, hi, wi)]; }
    float at(int bi, int ci, int hi, int wi) const { return values[index(bi, ci, hi, wi)]; }
    const float* channel(int bi, int ci) const {
        return values.data() + (static_cast<std::size_t>(bi) * c + ci) * plane();
    }
    float* channel(int bi, int ci) {
        return values.data() + (static_cast<std::size_t>(bi) * c + ci) * plane();
    }
    bool same_shape(const BatchMaps& o) const {
        return b == o.b && c == o.c && h == o.h && w == o.w;
    }
};

/// [B,C] per-sample class availability: 1 = annotated.
struct AvailabilityMask {
    int b = 0, c = 0;
    std::vector<std::uint8_t> entries;

    AvailabilityMask() = default;
    AvailabilityMask(int b_, int c_, std::uint8_t fill = 0) : b(b_), c(c_) {
        if (b_ < 1 || c_ < 1)
            throw parameter_error("AvailabilityMask: dimensions must be >= 1");
        entries.assign(static_cast<std::size_t>(b_) * c_, fill);
    }
    std::uint8_t& at(int bi, int ci) { return entries[static_cast<std::size_t>(bi) * c + ci]; }
    std::uint8_t at(int bi, int ci) const {
        return entries[static_cast<std::size_t>(bi) * c + ci];
    }
};

/// [B,D] latent vectors.
struct LatentBatch {
    int b = 0, d = 0;
    std::vector<double> vectors;

    LatentBatch() = default;
    LatentBatch(int b_, int d_, double fill = 0.0) : b(b_), d(d_) {
        if (b_ < 1 || d_ < 1) throw parameter_error("LatentBatch: dimensions must be >= 1");
        vectors.assign(static_cast<std::size_t>(b_) * d_, fill);
    }
    double& at(int bi, int di) { return vectors[static_cast<std::size_t>(bi) * d + di]; }
    double at(int bi, int di) const { return vectors[static_cast<std::size_t>(bi) * d + di]; }
};

struct LossWeights {
    double lambda_dist = 4.0;
    double lambda_recon = 2.0;
};

namespace car_detail {

inline double dice_loss_raw(const float* pred, const float* gt, std::size_t n,
                            double smooth) {
    double inter = 0.0, sp = 0.0, sg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        inter += static_cast<double>(pred[i]) * gt[i];
        sp += pred[i];
        sg += gt[i];
    }
    return 1.0 - (2.0 * inter + smooth) / (sp + sg + smooth);
}

} // namespace car_detail

/// Soft Dice loss with smoothing s: 1 - (2*sum(p*g)+s)/(sum p + sum g + s).
/// Two empty masks score 0 by the smoothing convention.
inline double dice_loss(const Grid2D<float>& pred, const Grid2D<float>& gt,
                        double smooth = 1.0) {
    if (!pred.dims_match(gt)) throw shape_error("dice_loss: shape mismatch");
    return car_detail::dice_loss_raw(pred.raw().data(), gt.raw().data(), pred.size(), smooth);
}

/// Dice loss averaged over the annotated (b,c) channels only.
inline double masked_seg_loss(const BatchMaps& pred, const BatchMaps& gt,
                              const AvailabilityMask& m, double smooth = 1.0) {
    if (!pred.same_shape(gt)) throw shape_error("masked_seg_loss: pred/gt shape mismatch");
    if (m.b != pred.b || m.c != pred.c)
        throw shape_error("masked_seg_loss: availability shape mismatch");
    double total = 0.0;
    std::size_t count = 0;
    for (int bi = 0; bi < pred.b; ++bi)
        for (int ci = 0; ci < pred.c; ++ci) {
            if (!m.at(bi, ci)) continue;
            total += car_detail::dice_loss_raw(pred.channel(bi, ci), gt.channel(bi, ci),
                                               pred.plane(), smooth);
            ++count;
        }
    if (count == 0)
        throw numeric_error("masked_seg_loss: no available annotations in batch");
    return total / static_cast<double>(count);
}

/// Reliable target: ground truth where annotated, prediction elsewhere.
/// Channels copied from pred are constants w.r.t. optimization; callers
/// integrating with autodiff must detach them.
inline BatchMaps compose_reliable_target(const BatchMaps& pred, const BatchMaps& gt,
                                         const AvailabilityMask& m) {
    if (!pred.same_shape(gt))
        throw shape_error("compose_reliable_target: pred/gt shape mismatch");
    if (m.b != pred.b || m.c != pred.c)
        throw shape_error("compose_reliable_target: availability shape mismatch");
    BatchMaps out = pred;
    for (int bi = 0; bi < pred.b; ++bi)
        for (int ci = 0; ci < pred.c; ++ci)
            if (m.at(bi, ci)) {
                const float* src = gt.channel(bi, ci);
                float* dst = out.channel(bi, ci);
                std::copy(src, src + pred.plane(), dst);
            }
    return out;
}

/// Mean cosine distance over the batch, in [0,2]. Near-zero-norm vectors
/// indicate a collapsed embedding and raise rather than clamp.
inline double cosine_dist_loss(const LatentBatch& z_pred, const LatentBatch& z_tgt) {
    if (z_pred.b != z_tgt.b || z_pred.d != z_tgt.d)
        throw shape_error("cosine_dist_loss: shape mismatch");
    double total = 0.0;
    for (int bi = 0; bi < z_pred.b; ++bi) {
        double dot = 0.0, np = 0.0, nt = 0.0;
        for (int di = 0; di < z_pred.d; ++di) {
            const double a = z_pred.at(bi, di), b = z_tgt.at(bi, di);
            dot += a * b;
            np += a * a;
            nt += b * b;
        }
        np = std::sqrt(np);
        nt = std::sqrt(nt);
        if (np < 1e-12 || nt < 1e-12)
            throw numeric_error("cosine_dist_loss: zero-norm latent vector");
        total += 1.0 - dot / (np * nt);
    }
    return total / z_pred.b;
}

/// Sum of the two reconstruction MSEs (prediction branch + target branch).
inline double recon_loss(const BatchMaps& recon_pred, const BatchMaps& pred_const,
                         const BatchMaps& recon_tgt, const BatchMaps& tgt_const) {
    if (!recon_pred.same_shape(pred_const) || !recon_tgt.same_shape(tgt_const))
        throw shape_error("recon_loss: shape mismatch");
    auto mse = [](const BatchMaps& a, const BatchMaps& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            const double d = static_cast<double>(a.values[i]) - b.values[i];
            acc += d * d;
        }
        return acc / static_cast<double>(a.values.size());
    };
    return mse(recon_pred, pred_const) + mse(recon_tgt, tgt_const);
}

inline double total_loss(double seg, double dist, double recon,
                         const LossWeights& w = LossWeights{}) {
    return seg + w.lambda_dist * dist + w.lambda_recon * recon;
}

/// Stack the conditioning image in front of the map channels:
/// [B,1,H,W] + [B,C,H,W] -> [B,1+C,H,W].
inline BatchMaps concat_condition(const BatchMaps& x, const BatchMaps& y) {
    if (x.c != 1) throw shape_error("concat_condition: image must have one channel");
    if (x.b != y.b || x.h != y.h || x.w != y.w)
        throw shape_error("concat_condition: spatial dimensions mismatch");
    BatchMaps out(x.b, 1 + y.c, x.h, x.w);
    for (int bi = 0; bi < x.b; ++bi) {
        std::copy(x.channel(bi, 0), x.channel(bi, 0) + x.plane(), out.channel(bi, 0));
        for (int ci = 0; ci < y.c; ++ci)
            std::copy(y.channel(bi, ci), y.channel(bi, ci) + y.plane(),
                      out.channel(bi, 1 + ci));
    }
    return out;
}

} // namespace xrforge
