// plan.hpp - randomization parameter spaces and deterministic plan sampling.
//
// A RandomizationPlan is a pure function of (global seed, volume id): all
// stochastic choices for one volume are sampled up front, in a fixed field
// order, from one counter-based stream. Applying a plan is then fully
// deterministic regardless of scheduling.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "xrforge/rng.hpp"
#include "xrforge/taxonomy.hpp"

namespace xrforge {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Probabilities and sampling ranges for every randomization family.
/// Defaults reproduce the published configuration; `enabled` toggles
/// support family-level ablations.
struct MsdrParams {
    struct BoneSoft {
        bool enabled = true;
        double p = 0.4;
        Interval s_high{1.0, 1.7};
        Interval s_low{0.3, 1.0};
    } bone_soft;

    struct Component {
        bool enabled = true;
        double p = 0.3;
        Interval scale{0.3, 1.7};
    } component;

    struct Vertical {
        bool enabled = true;
        double p = 0.4; // per group: spine, left ribs, right ribs
        Interval s_head{0.9, 1.5};
        Interval s_foot{0.6, 0.9};
        Interval alpha{0.5, 1.5};
    } vertical;

    struct IntraBone {
        bool enabled = true;
        double p = 0.7;
        Interval s_surf{0.9, 1.5};
        Interval s_core{0.6, 1.1};
        Interval alpha{0.5, 1.5};
    } intra;

    struct SoftTissue {
        bool enabled = true;
        double p_scale = 0.6;
        double p_invert = 0.3;
        Interval scale{0.3, 1.7};
        Interval delta{-0.1, 0.1};
        Interval invert_hu{-900.0, -2.0}; // valid soft-tissue range for inversion
    } soft;

    struct Noise {
        bool enabled = true;
        double p = 0.3;
        Interval sigma{10.0, 50.0};
    } noise;

    struct Implants {
        bool enabled = true;
        double p = 0.2;
        int max_count = 3;
        Interval radius{5.0, 20.0};
        Interval length{10.0, 60.0};
        Interval hu{1800.0, 2000.0};
        double roi_dilate_mm = 20.0;
    } implants;

    struct Geometry {
        bool enabled = true;
        double p_sdd = 0.4;
        Interval sdd_scale{0.9, 1.1};
        double p_odd = 0.4;
        Interval odd_offset{-30.0, 30.0};
    } geometry;

    struct Tone {
        bool enabled = true;
        double p = 0.7;
        Interval knot_x{-0.2, 0.4};
        Interval knot_y{-0.2, 0.4};
    } tone;

    struct Polarity {
        bool enabled = true;
        double p = 0.3;
        double epsilon = 1e-6;
    } polarity;
};

enum class HighFamily { bone, soft };

struct BoneSoftPlan {
    double s1 = 1.0; // high-interval factor
    double s2 = 1.0; // low-interval factor
    HighFamily high = HighFamily::bone;
};

struct ComponentScalePlan {
    std::map<int, double> scales; // class id -> s_k, for all component bones
};

struct GradientPlan {
    double s_head = 1.0;
    double s_foot = 1.0;
    double alpha = 1.0;
    /// S(z) = S_foot + (1-z)^alpha * (S_head - S_foot), z in [0,1].
    double factor(double z_hat) const {
        return s_foot + std::pow(1.0 - z_hat, alpha) * (s_head - s_foot);
    }
};

struct IntraBonePlan {
    double s_surf = 1.0;
    double s_core = 1.0;
    double alpha = 1.0;
    double factor(double depth) const {
        return s_surf + std::pow(depth, alpha) * (s_core - s_surf);
    }
};

enum class SoftTissueMode { none, scale, invert };

struct SoftTissuePlan {
    SoftTissueMode mode = SoftTissueMode::none;
    double value = 0.0; // scale factor s, or inversion drift delta
};

struct ImplantObject {
    enum class Shape { cylinder, ellipsoid };
    Shape shape = Shape::cylinder;
    double radius_mm = 0.0;
    double length_mm = 0.0;
    double hu = 1900.0;
    std::array<double, 3> center_frac{0.5, 0.5, 0.5}; // within the dilated ROI box
    std::array<double, 3> axis{0.0, 0.0, 1.0};        // unit direction
};

struct ImplantPlan {
    std::vector<ImplantObject> objects;
};

struct GeometryPlan {
    double sdd_scale = 1.0;
    double odd_offset_mm = 0.0;
};

/// Detector-level (post-projection) randomization for one view.
struct ToneMapParams {
    bool active = false;
    double knot_x = 0.0;
    double knot_y = 0.0;
    bool polarity_active = false;
    double epsilon = 1e-6;
};

struct RandomizationPlan {
    std::optional<BoneSoftPlan> bone_soft;
    std::optional<ComponentScalePlan> component_scales;
    std::optional<GradientPlan> grad_spine;
    std::optional<GradientPlan> grad_ribs_left;
    std::optional<GradientPlan> grad_ribs_right;
    std::optional<IntraBonePlan> intra_bone;
    SoftTissuePlan soft_tissue;
    std::optional<double> noise_sigma;
    std::optional<ImplantPlan> implants;
    GeometryPlan geometry;

    // Seed material, recorded for reproducibility.
    std::uint64_t global_seed = 0;
    std::string volume_id;

    bool any_3d_active() const {
        return bone_soft || component_scales || grad_spine || grad_ribs_left ||
               grad_ribs_right || intra_bone || soft_tissue.mode != SoftTissueMode::none ||
               noise_sigma || implants;
    }
};

namespace plan_detail {

inline std::array<double, 3> sample_unit_vector(RandomStream& rs) {
    const double cz = 2.0 * rs.next_uniform() - 1.0;
    const double phi = 6.283185307179586477 * rs.next_uniform();
    const double r = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    return {r * std::cos(phi), r * std::sin(phi), cz};
}

} // namespace plan_detail

/// Sample the full pre-projection plan for one volume. Identical inputs
/// give bit-identical plans.
inline RandomizationPlan sample_plan(const MsdrParams& params, std::uint64_t global_seed,
                                     const std::string& volume_id,
                                     const Taxonomy& tax = default_taxonomy()) {
    RandomStream rs(stream_key(global_seed, volume_id, "plan3d"));
    RandomizationPlan plan;
    plan.global_seed = global_seed;
    plan.volume_id = volume_id;

    const auto& P = params;
    if (P.bone_soft.enabled && rs.next_uniform() < P.bone_soft.p) {
        BoneSoftPlan b;
        b.high = rs.next_uniform() < 0.5 ? HighFamily::bone : HighFamily::soft;
        b.s1 = rs.next_uniform(P.bone_soft.s_high.lo, P.bone_soft.s_high.hi);
        b.s2 = rs.next_uniform(P.bone_soft.s_low.lo, P.bone_soft.s_low.hi);
        plan.bone_soft = b;
    }

    if (P.component.enabled && rs.next_uniform() < P.component.p) {
        ComponentScalePlan c;
        for (int id : tax.component_bone_ids())
            c.scales[id] = rs.next_uniform(P.component.scale.lo, P.component.scale.hi);
        plan.component_scales = std::move(c);
    }

    auto sample_gradient = [&]() -> std::optional<GradientPlan> {
        if (!(P.vertical.enabled && rs.next_uniform() < P.vertical.p)) return std::nullopt;
        GradientPlan g;
        g.s_head = rs.next_uniform(P.vertical.s_head.lo, P.vertical.s_head.hi);
        g.s_foot = rs.next_uniform(P.vertical.s_foot.lo, P.vertical.s_foot.hi);
        g.alpha = rs.next_uniform(P.vertical.alpha.lo, P.vertical.alpha.hi);
        return g;
    };
    plan.grad_spine = sample_gradient();
    plan.grad_ribs_left = sample_gradient();
    plan.grad_ribs_right = sample_gradient();

    if (P.intra.enabled && rs.next_uniform() < P.intra.p) {
        IntraBonePlan ib;
        ib.s_surf = rs.next_uniform(P.intra.s_surf.lo, P.intra.s_surf.hi);
        ib.s_core = rs.next_uniform(P.intra.s_core.lo, P.intra.s_core.hi);
        ib.alpha = rs.next_uniform(P.intra.alpha.lo, P.intra.alpha.hi);
        plan.intra_bone = ib;
    }

    if (P.soft.enabled) {
        const double u = rs.next_uniform();
        if (u < P.soft.p_scale) {
            plan.soft_tissue = {SoftTissueMode::scale,
                                rs.next_uniform(P.soft.scale.lo, P.soft.scale.hi)};
        } else if (u < P.soft.p_scale + P.soft.p_invert) {
            plan.soft_tissue = {SoftTissueMode::invert,
                                rs.next_uniform(P.soft.delta.lo, P.soft.delta.hi)};
        }
    }

    if (P.noise.enabled && rs.next_uniform() < P.noise.p)
        plan.noise_sigma = rs.next_uniform(P.noise.sigma.lo, P.noise.sigma.hi);

    if (P.implants.enabled && rs.next_uniform() < P.implants.p) {
        ImplantPlan ip;
        const int n = rs.next_int(1, P.implants.max_count);
        for (int i = 0; i < n; ++i) {
            ImplantObject obj;
            obj.shape = rs.next_uniform() < 0.5 ? ImplantObject::Shape::cylinder
                                                : ImplantObject::Shape::ellipsoid;
            obj.radius_mm = rs.next_uniform(P.implants.radius.lo, P.implants.radius.hi);
            obj.length_mm = rs.next_uniform(P.implants.length.lo, P.implants.length.hi);
            obj.hu = rs.next_uniform(P.implants.hu.lo, P.implants.hu.hi);
            for (auto& c : obj.center_frac) c = rs.next_uniform();
            obj.axis = plan_detail::sample_unit_vector(rs);
            ip.objects.push_back(obj);
        }
        plan.implants = std::move(ip);
    }

    if (P.geometry.enabled && rs.next_uniform() < P.geometry.p_sdd)
        plan.geometry.sdd_scale = rs.next_uniform(P.geometry.sdd_scale.lo, P.geometry.sdd_scale.hi);
    if (P.geometry.enabled && rs.next_uniform() < P.geometry.p_odd)
        plan.geometry.odd_offset_mm =
            rs.next_uniform(P.geometry.odd_offset.lo, P.geometry.odd_offset.hi);

    return plan;
}

/// Sample detector-level randomization for one rendered view. Keyed off
/// the volume's stream plus the view index, so adding views never
/// perturbs existing ones.
inline ToneMapParams sample_plan_2d(const MsdrParams& params, std::uint64_t global_seed,
                                    const std::string& volume_id, int view_index) {
    RandomStream rs(
        stream_key(global_seed, volume_id, "plan2d:" + std::to_string(view_index)));
    ToneMapParams t;
    t.epsilon = params.polarity.epsilon;
    if (params.tone.enabled && rs.next_uniform() < params.tone.p) {
        t.active = true;
        t.knot_x = rs.next_uniform(params.tone.knot_x.lo, params.tone.knot_x.hi);
        t.knot_y = rs.next_uniform(params.tone.knot_y.lo, params.tone.knot_y.hi);
    }
    if (params.polarity.enabled && rs.next_uniform() < params.polarity.p)
        t.polarity_active = true;
    return t;
}

// ---- JSON (de)serialization for audit and replay ----

inline void to_json(nlohmann::json& j, const Interval& v) { j = {v.lo, v.hi}; }
inline void from_json(const nlohmann::json& j, Interval& v) {
    v.lo = j.at(0).get<double>();
    v.hi = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const BoneSoftPlan& v) {
    j = {{"s1", v.s1}, {"s2", v.s2}, {"high", v.high == HighFamily::bone ? "bone" : "soft"}};
}
inline void from_json(const nlohmann::json& j, BoneSoftPlan& v) {
    v.s1 = j.at("s1").get<double>();
    v.s2 = j.at("s2").get<double>();
    v.high = j.at("high").get<std::string>() == "bone" ? HighFamily::bone : HighFamily::soft;
}

inline void to_json(nlohmann::json& j, const GradientPlan& v) {
    j = {{"s_head", v.s_head}, {"s_foot", v.s_foot}, {"alpha", v.alpha}};
}
inline void from_json(const nlohmann::json& j, GradientPlan& v) {
    v.s_head = j.at("s_head").get<double>();
    v.s_foot = j.at("s_foot").get<double>();
    v.alpha = j.at("alpha").get<double>();
}

inline void to_json(nlohmann::json& j, const IntraBonePlan& v) {
    j = {{"s_surf", v.s_surf}, {"s_core", v.s_core}, {"alpha", v.alpha}};
}
inline void from_json(const nlohmann::json& j, IntraBonePlan& v) {
    v.s_surf = j.at("s_surf").get<double>();
    v.s_core = j.at("s_core").get<double>();
    v.alpha = j.at("alpha").get<double>();
}

inline void to_json(nlohmann::json& j, const ImplantObject& v) {
    j = {{"shape", v.shape == ImplantObject::Shape::cylinder ? "cylinder" : "ellipsoid"},
         {"radius_mm", v.radius_mm},
         {"length_mm", v.length_mm},
         {"hu", v.hu},
         {"center_frac", v.center_frac},
         {"axis", v.axis}};
}
inline void from_json(const nlohmann::json& j, ImplantObject& v) {
    v.shape = j.at("shape").get<std::string>() == "cylinder" ? ImplantObject::Shape::cylinder
                                                             : ImplantObject::Shape::ellipsoid;
    v.radius_mm = j.at("radius_mm").get<double>();
    v.length_mm = j.at("length_mm").get<double>();
    v.hu = j.at("hu").get<double>();
    v.center_frac = j.at("center_frac").get<std::array<double, 3>>();
    v.axis = j.at("axis").get<std::array<double, 3>>();
}

inline void to_json(nlohmann::json& j, const ToneMapParams& v) {
    j = {{"tone_active", v.active},
         {"knot_x", v.knot_x},
         {"knot_y", v.knot_y},
         {"polarity_active", v.polarity_active},
         {"epsilon", v.epsilon}};
}
inline void from_json(const nlohmann::json& j, ToneMapParams& v) {
    v.active = j.at("tone_active").get<bool>();
    v.knot_x = j.at("knot_x").get<double>();
    v.knot_y = j.at("knot_y").get<double>();
    v.polarity_active = j.at("polarity_active").get<bool>();
    v.epsilon = j.at("epsilon").get<double>();
}

inline void to_json(nlohmann::json& j, const RandomizationPlan& p) {
    j = nlohmann::json::object();
    j["seed"] = p.global_seed;
    j["volume_id"] = p.volume_id;
    if (p.bone_soft) j["bone_soft"] = *p.bone_soft;
    if (p.component_scales) {
        auto& m = j["component_scales"] = nlohmann::json::object();
        for (const auto& [id, s] : p.component_scales->scales) m[std::to_string(id)] = s;
    }
    if (p.grad_spine) j["grad_spine"] = *p.grad_spine;
    if (p.grad_ribs_left) j["grad_ribs_left"] = *p.grad_ribs_left;
    if (p.grad_ribs_right) j["grad_ribs_right"] = *p.grad_ribs_right;
    if (p.intra_bone) j["intra_bone"] = *p.intra_bone;
    switch (p.soft_tissue.mode) {
    case SoftTissueMode::none: break;
    case SoftTissueMode::scale: j["soft_tissue"] = {{"mode", "scale"}, {"s", p.soft_tissue.value}}; break;
    case SoftTissueMode::invert: j["soft_tissue"] = {{"mode", "invert"}, {"delta", p.soft_tissue.value}}; break;
    }
    if (p.noise_sigma) j["noise_sigma"] = *p.noise_sigma;
    if (p.implants) j["implants"] = p.implants->objects;
    j["geometry"] = {{"sdd_scale", p.geometry.sdd_scale}, {"odd_offset_mm", p.geometry.odd_offset_mm}};
}

inline void from_json(const nlohmann::json& j, RandomizationPlan& p) {
    p = RandomizationPlan{};
    p.global_seed = j.at("seed").get<std::uint64_t>();
    p.volume_id = j.at("volume_id").get<std::string>();
    if (j.contains("bone_soft")) p.bone_soft = j["bone_soft"].get<BoneSoftPlan>();
    if (j.contains("component_scales")) {
        ComponentScalePlan c;
        for (auto it = j["component_scales"].begin(); it != j["component_scales"].end(); ++it)
            c.scales[std::stoi(it.key())] = it.value().get<double>();
        p.component_scales = std::move(c);
    }
    if (j.contains("grad_spine")) p.grad_spine = j["grad_spine"].get<GradientPlan>();
    if (j.contains("grad_ribs_left")) p.grad_ribs_left = j["grad_ribs_left"].get<GradientPlan>();
    if (j.contains("grad_ribs_right")) p.grad_ribs_right = j["grad_ribs_right"].get<GradientPlan>();
    if (j.contains("intra_bone")) p.intra_bone = j["intra_bone"].get<IntraBonePlan>();
    if (j.contains("soft_tissue")) {
        const auto& s = j["soft_tissue"];
        if (s.at("mode").get<std::string>() == "scale")
            p.soft_tissue = {SoftTissueMode::scale, s.at("s").get<double>()};
        else
            p.soft_tissue = {SoftTissueMode::invert, s.at("delta").get<double>()};
    }
    if (j.contains("noise_sigma")) p.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("implants")) {
        ImplantPlan ip;
        for (const auto& o : j["implants"]) ip.objects.push_back(o.get<ImplantObject>());
        p.implants = std::move(ip);
    }
    p.geometry.sdd_scale = j.at("geometry").at("sdd_scale").get<double>();
    p.geometry.odd_offset_mm = j.at("geometry").at("odd_offset_mm").get<double>();
}

/// Stable digest of a plan's JSON form, for provenance records.
inline std::string plan_digest(const RandomizationPlan& p) {
    const std::string s = nlohmann::json(p).dump();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(s)));
    return buf;
}

} // namespace xrforge
