// config.hpp - batch configuration: JSON file plus programmatic overrides.
//
// Every randomization probability and range is a named key with the
// published defaults, so family-level ablations are plain config edits.
// Keys are optional; absent keys keep defaults. Unknown keys are
// rejected at the top level to catch typos.
#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "xrforge/drr.hpp"
#include "xrforge/errors.hpp"
#include "xrforge/plan.hpp"
#include "xrforge/quant.hpp"

namespace xrforge {

struct QcConfig {
    double tau_overlap = 0.05;
    double min_frac = 0.10;
};

struct ForgeConfig {
    std::string ct_dir;
    std::string label_dir;
    std::string class_map_path;
    std::string output_dir = "forge_out";
    std::uint64_t seed = 0;
    std::vector<double> angles = default_view_angles();
    int variations_per_volume = 1;
    int workers = 0; // 0 = resolve from FORGE_WORKERS, else 1
    bool dump_plans = false;
    QcConfig qc;
    ProjectionGeometry geometry;
    std::map<std::string, nlohmann::json> geometry_overrides;
    MsdrParams msdr;
    SpcaThresholds spca;

    void validate() const {
        if (variations_per_volume < 1)
            throw config_error("config: variations_per_volume must be >= 1");
        if (angles.empty()) throw config_error("config: angles must be nonempty");
        for (double a : angles)
            if (!(a >= 0.0 && a <= 180.0))
                throw config_error("config: view angles must lie in [0, 180]");
        auto prob = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0))
                throw config_error(std::string("config: probability out of [0,1]: ") + name);
        };
        prob(msdr.bone_soft.p, "bone_soft.p");
        prob(msdr.component.p, "component.p");
        prob(msdr.vertical.p, "vertical.p");
        prob(msdr.intra.p, "intra_bone.p");
        prob(msdr.soft.p_scale, "soft_tissue.p_scale");
        prob(msdr.soft.p_invert, "soft_tissue.p_invert");
        if (msdr.soft.p_scale + msdr.soft.p_invert > 1.0 + 1e-12)
            throw config_error("config: soft_tissue branch probabilities exceed 1");
        prob(msdr.noise.p, "noise.p");
        prob(msdr.implants.p, "implants.p");
        prob(msdr.geometry.p_sdd, "geometry.p_sdd");
        prob(msdr.geometry.p_odd, "geometry.p_odd");
        prob(msdr.tone.p, "tone.p");
        prob(msdr.polarity.p, "polarity.p");
        if (!(qc.min_frac > 0.0 && qc.min_frac < 1.0))
            throw config_error("config: qc.min_frac must lie in (0,1)");
        if (!(qc.tau_overlap >= 0.0 && qc.tau_overlap <= 1.0))
            throw config_error("config: qc.tau_overlap must lie in [0,1]");
        if (msdr.implants.max_count < 1)
            throw config_error("config: implants.max_count must be >= 1");
    }

    /// Base geometry with any per-volume override fields applied.
    ProjectionGeometry geometry_for(const std::string& volume_id) const {
        ProjectionGeometry g = geometry;
        auto it = geometry_overrides.find(volume_id);
        if (it == geometry_overrides.end()) return g;
        const nlohmann::json& o = it->second;
        g.sdd = o.value("sdd", g.sdd);
        g.odd = o.value("odd", g.odd);
        g.det_nx = o.value("detector_nx", g.det_nx);
        g.det_ny = o.value("detector_ny", g.det_ny);
        g.pixel_pitch = o.value("pixel_pitch", g.pixel_pitch);
        return g;
    }
};

namespace config_detail {

inline void read_interval(const nlohmann::json& j, const char* key, Interval& v) {
    if (j.contains(key)) v = j.at(key).get<Interval>();
}

inline void merge_msdr(const nlohmann::json& j, MsdrParams& m) {
    using config_detail::read_interval;
    if (j.contains("bone_soft")) {
        const auto& s = j["bone_soft"];
        m.bone_soft.enabled = s.value("enabled", m.bone_soft.enabled);
        m.bone_soft.p = s.value("p", m.bone_soft.p);
        read_interval(s, "s_high", m.bone_soft.s_high);
        read_interval(s, "s_low", m.bone_soft.s_low);
    }
    if (j.contains("component")) {
        const auto& s = j["component"];
        m.component.enabled = s.value("enabled", m.component.enabled);
        m.component.p = s.value("p", m.component.p);
        read_interval(s, "scale", m.component.scale);
    }
    if (j.contains("vertical")) {
        const auto& s = j["vertical"];
        m.vertical.enabled = s.value("enabled", m.vertical.enabled);
        m.vertical.p = s.value("p", m.vertical.p);
        read_interval(s, "s_head", m.vertical.s_head);
        read_interval(s, "s_foot", m.vertical.s_foot);
        read_interval(s, "alpha", m.vertical.alpha);
    }
    if (j.contains("intra_bone")) {
        const auto& s = j["intra_bone"];
        m.intra.enabled = s.value("enabled", m.intra.enabled);
        m.intra.p = s.value("p", m.intra.p);
        read_interval(s, "s_surf", m.intra.s_surf);
        read_interval(s, "s_core", m.intra.s_core);
        read_interval(s, "alpha", m.intra.alpha);
    }
    if (j.contains("soft_tissue")) {
        const auto& s = j["soft_tissue"];
        m.soft.enabled = s.value("enabled", m.soft.enabled);
        m.soft.p_scale = s.value("p_scale", m.soft.p_scale);
        m.soft.p_invert = s.value("p_invert", m.soft.p_invert);
        read_interval(s, "scale", m.soft.scale);
        read_interval(s, "delta", m.soft.delta);
        read_interval(s, "invert_hu", m.soft.invert_hu);
    }
    if (j.contains("noise")) {
        const auto& s = j["noise"];
        m.noise.enabled = s.value("enabled", m.noise.enabled);
        m.noise.p = s.value("p", m.noise.p);
        read_interval(s, "sigma", m.noise.sigma);
    }
    if (j.contains("implants")) {
        const auto& s = j["implants"];
        m.implants.enabled = s.value("enabled", m.implants.enabled);
        m.implants.p = s.value("p", m.implants.p);
        m.implants.max_count = s.value("max_count", m.implants.max_count);
        read_interval(s, "radius", m.implants.radius);
        read_interval(s, "length", m.implants.length);
        read_interval(s, "hu", m.implants.hu);
        m.implants.roi_dilate_mm = s.value("roi_dilate_mm", m.implants.roi_dilate_mm);
    }
    if (j.contains("geometry")) {
        const auto& s = j["geometry"];
        m.geometry.enabled = s.value("enabled", m.geometry.enabled);
        m.geometry.p_sdd = s.value("p_sdd", m.geometry.p_sdd);
        m.geometry.p_odd = s.value("p_odd", m.geometry.p_odd);
        read_interval(s, "sdd_scale", m.geometry.sdd_scale);
        read_interval(s, "odd_offset", m.geometry.odd_offset);
    }
    if (j.contains("tone")) {
        const auto& s = j["tone"];
        m.tone.enabled = s.value("enabled", m.tone.enabled);
        m.tone.p = s.value("p", m.tone.p);
        read_interval(s, "knot_x", m.tone.knot_x);
        read_interval(s, "knot_y", m.tone.knot_y);
    }
    if (j.contains("polarity")) {
        const auto& s = j["polarity"];
        m.polarity.enabled = s.value("enabled", m.polarity.enabled);
        m.polarity.p = s.value("p", m.polarity.p);
        m.polarity.epsilon = s.value("epsilon", m.polarity.epsilon);
    }
}

} // namespace config_detail

inline ForgeConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{
        "ct_dir",          "label_dir", "class_map", "output_dir",
        "seed",            "angles",    "variations_per_volume",
        "workers",         "dump_plans", "qc",       "geometry",
        "geometry_overrides", "msdr",   "quant"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw config_error("config: unknown key '" + it.key() + "'");

    ForgeConfig c;
    c.ct_dir = j.value("ct_dir", c.ct_dir);
    c.label_dir = j.value("label_dir", c.label_dir);
    c.class_map_path = j.value("class_map", c.class_map_path);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("angles")) c.angles = j["angles"].get<std::vector<double>>();
    c.variations_per_volume = j.value("variations_per_volume", c.variations_per_volume);
    c.workers = j.value("workers", c.workers);
    c.dump_plans = j.value("dump_plans", c.dump_plans);
    if (j.contains("qc")) {
        c.qc.tau_overlap = j["qc"].value("tau_overlap", c.qc.tau_overlap);
        c.qc.min_frac = j["qc"].value("min_frac", c.qc.min_frac);
    }
    if (j.contains("geometry")) {
        const auto& g = j["geometry"];
        c.geometry.sdd = g.value("sdd", c.geometry.sdd);
        c.geometry.odd = g.value("odd", c.geometry.odd);
        c.geometry.det_nx = g.value("detector_nx", c.geometry.det_nx);
        c.geometry.det_ny = g.value("detector_ny", c.geometry.det_ny);
        c.geometry.pixel_pitch = g.value("pixel_pitch", c.geometry.pixel_pitch);
    }
    if (j.contains("geometry_overrides"))
        for (auto it = j["geometry_overrides"].begin(); it != j["geometry_overrides"].end(); ++it)
            c.geometry_overrides[it.key()] = it.value();
    if (j.contains("msdr")) config_detail::merge_msdr(j["msdr"], c.msdr);
    if (j.contains("quant")) {
        c.spca.moderate = j["quant"].value("severity_moderate", c.spca.moderate);
        c.spca.high = j["quant"].value("severity_high", c.spca.high);
    }
    c.validate();
    return c;
}

inline ForgeConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config: parse failure in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

/// Worker count: explicit config value, else FORGE_WORKERS, else 1.
inline int resolve_workers(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("FORGE_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

} // namespace xrforge
