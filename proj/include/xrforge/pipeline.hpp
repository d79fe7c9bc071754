// pipeline.hpp - batch orchestration: curation, generation, measurement.
//
// Determinism contract: every output byte is a function of (config, seed).
// All randomness is pre-sampled into per-volume plans keyed by stable
// string ids, tasks own disjoint output directories, results are ordered
// by task index (never completion time), and manifests are written last
// via tmp+rename.
#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "xrforge/config.hpp"
#include "xrforge/drr.hpp"
#include "xrforge/errors.hpp"
#include "xrforge/labels_io.hpp"
#include "xrforge/manifest.hpp"
#include "xrforge/msdr2d.hpp"
#include "xrforge/msdr3d.hpp"
#include "xrforge/phantoms.hpp"
#include "xrforge/plan.hpp"
#include "xrforge/png.hpp"
#include "xrforge/qc.hpp"
#include "xrforge/quant.hpp"

namespace xrforge {

// ---- packed 2D mask container ----
//
// masks.bin: 20-byte header (magic "XRFM", u32 version, u32 nx, u32 ny,
// u32 class_count) followed by nx*ny little-endian u64 words; bit c of
// word (x + nx*y) marks class c at that pixel. The root class_map.json
// names the bit indices.

struct PackedMasks {
    int nx = 0, ny = 0;
    int n_classes = 0;
    std::vector<std::uint64_t> bits;

    Mask2D extract(int class_id) const {
        Mask2D m(nx, ny, 0);
        const std::uint64_t bit = 1ull << class_id;
        for (std::size_t i = 0; i < bits.size(); ++i) m[i] = (bits[i] & bit) ? 1 : 0;
        return m;
    }
    bool any(int class_id) const {
        const std::uint64_t bit = 1ull << class_id;
        for (std::uint64_t w : bits)
            if (w & bit) return true;
        return false;
    }
};

inline PackedMasks pack_masks(const std::vector<Mask2D>& class_masks, int nx, int ny) {
    if (class_masks.size() > 64)
        throw parameter_error("pack_masks: more than 64 classes cannot be packed");
    PackedMasks p;
    p.nx = nx;
    p.ny = ny;
    p.n_classes = static_cast<int>(class_masks.size());
    p.bits.assign(static_cast<std::size_t>(nx) * ny, 0);
    for (std::size_t c = 0; c < class_masks.size(); ++c) {
        const Mask2D& m = class_masks[c];
        if (m.empty()) continue;
        if (m.nx() != nx || m.ny() != ny)
            throw shape_error("pack_masks: mask dimensions mismatch");
        const std::uint64_t bit = 1ull << c;
        for (std::size_t i = 0; i < p.bits.size(); ++i)
            if (m[i]) p.bits[i] |= bit;
    }
    return p;
}

inline void save_masks_packed(const std::string& path, const PackedMasks& p) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot open for write: " + path);
    const char magic[4] = {'X', 'R', 'F', 'M'};
    const std::uint32_t header[4] = {1u, static_cast<std::uint32_t>(p.nx),
                                     static_cast<std::uint32_t>(p.ny),
                                     static_cast<std::uint32_t>(p.n_classes)};
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(p.bits.data()),
              static_cast<std::streamsize>(p.bits.size() * sizeof(std::uint64_t)));
    if (!out) throw format_error("write failure: " + path);
}

inline PackedMasks load_masks_packed(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open: " + path);
    char magic[4];
    std::uint32_t header[4];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || std::string(magic, 4) != "XRFM" || header[0] != 1)
        throw format_error("not a packed mask file: " + path);
    PackedMasks p;
    p.nx = static_cast<int>(header[1]);
    p.ny = static_cast<int>(header[2]);
    p.n_classes = static_cast<int>(header[3]);
    if (p.nx < 1 || p.ny < 1 || p.n_classes < 1 || p.n_classes > 64)
        throw format_error("bad packed mask header: " + path);
    p.bits.resize(static_cast<std::size_t>(p.nx) * p.ny);
    in.read(reinterpret_cast<char*>(p.bits.data()),
            static_cast<std::streamsize>(p.bits.size() * sizeof(std::uint64_t)));
    if (!in) throw format_error("truncated packed mask file: " + path);
    return p;
}

// ---- shared plumbing ----

namespace pipeline_detail {

/// Atomic-counter task pool. fn(i) runs exactly once per index; with one
/// worker everything runs inline on the caller.
template <typename Fn>
void run_tasks(int n_tasks, int workers, Fn&& fn) {
    if (n_tasks <= 0) return;
    if (workers <= 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_tasks) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min(workers, n_tasks);
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

inline std::string angle_dir_name(double angle) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05.1f", angle);
    return buf;
}

inline std::string variation_dir_name(int v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%03d", v);
    return buf;
}

struct VolumeEntry {
    std::string id;
    std::string ct_path;
    std::string label_path; // file (indexed) or directory (per-class)
    bool label_is_dir = false;
};

/// Pair CT files with their labels; ids sorted for stable ordering.
inline std::vector<VolumeEntry> discover_volumes(const std::string& ct_dir,
                                                 const std::string& label_dir) {
    namespace fs = std::filesystem;
    std::vector<VolumeEntry> out;
    if (ct_dir.empty() || !fs::is_directory(ct_dir)) return out;
    std::map<std::string, fs::path> cts;
    for (const auto& e : fs::directory_iterator(ct_dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        if (name.find(".nii") == std::string::npos) continue;
        cts[labels_detail::strip_nii(name)] = e.path();
    }
    for (const auto& [id, ct_path] : cts) {
        VolumeEntry v;
        v.id = id;
        v.ct_path = ct_path.string();
        const fs::path base = fs::path(label_dir);
        if (fs::is_regular_file(base / (id + ".nii.gz")))
            v.label_path = (base / (id + ".nii.gz")).string();
        else if (fs::is_regular_file(base / (id + ".nii")))
            v.label_path = (base / (id + ".nii")).string();
        else if (fs::is_directory(base / id)) {
            v.label_path = (base / id).string();
            v.label_is_dir = true;
        }
        out.push_back(std::move(v));
    }
    return out;
}

struct LoadedVolume {
    CtVolume volume;
    LabelSet labels;
};

inline LoadedVolume load_volume_pair(const VolumeEntry& e,
                                     const std::optional<ClassMap>& class_map) {
    const NiftiVolume nv = load_nifti(e.ct_path);
    CtVolume v = nv.volume;
    v.validate();
    if (e.label_path.empty())
        throw data_error("no labels found for volume " + e.id);
    LabelSet raw = e.label_is_dir
                       ? load_labels_dir(e.label_path, v.dims())
                       : [&] {
                             if (!class_map)
                                 throw config_error(
                                     "indexed labels require a class_map for volume " + e.id);
                             return load_labels_indexed(e.label_path, *class_map, v.dims());
                         }();
    LoadedVolume out;
    out.labels = raw.canonicalized(v.si_axis, v.superior_high);
    out.volume = canonicalize_orientation(v);
    return out;
}

} // namespace pipeline_detail

// ---- curation (Stage 1 + Stage 2 across views) ----

/// Curate one loaded volume: vertebra consistency first, then per-class
/// component cleanup on every configured view; any flagged view makes the
/// class unreliable for the whole CT.
inline CurationRecord curate_volume(const std::string& volume_id, const CtVolume& v,
                                    const LabelSet& labels, const ForgeConfig& cfg) {
    CurationRecord rec;
    rec.volume_id = volume_id;

    const QcVerdict verdict = check_vertebra_consistency(labels, cfg.qc.tau_overlap);
    if (!verdict.accepted) {
        rec.accepted = false;
        for (const auto& f : verdict.findings)
            rec.reasons.push_back(std::string(qc_reason_name(f.reason)) + ": " + f.detail);
        return rec;
    }
    rec.accepted = true;

    ProjectionGeometry g = cfg.geometry_for(volume_id);
    if (g.pixel_pitch <= 0.0) g.pixel_pitch = auto_pixel_pitch(v, g);
    for (int id = 0; id < labels.num_classes(); ++id)
        if (labels.has_class(id)) rec.per_class_reliability[id] = true;

    for (double angle : cfg.angles) {
        g.view_angle_deg = angle;
        for (auto& [id, reliable] : rec.per_class_reliability) {
            if (!reliable) continue; // already condemned at an earlier view
            const Mask2D projected = project_mask(v, labels.mask(id), g);
            const CleanResult cleaned = clean_components_2d(projected, cfg.qc.min_frac);
            if (!cleaned.reliable) reliable = false;
        }
    }
    return rec;
}

struct QcResult {
    std::vector<CurationRecord> records;
    std::string manifest_path;
    int failures = 0; // volumes that could not be processed at all
};

/// Stage 1 + Stage 2 over a directory pair; manifest written atomically.
inline QcResult run_qc(const ForgeConfig& cfg) {
    namespace fs = std::filesystem;
    const auto volumes = pipeline_detail::discover_volumes(cfg.ct_dir, cfg.label_dir);
    std::optional<ClassMap> class_map;
    if (!cfg.class_map_path.empty()) class_map = load_class_map(cfg.class_map_path);

    QcResult result;
    result.records.resize(volumes.size());
    const int workers = resolve_workers(cfg.workers);
    pipeline_detail::run_tasks(static_cast<int>(volumes.size()), workers, [&](int i) {
        const auto& entry = volumes[static_cast<std::size_t>(i)];
        auto& rec = result.records[static_cast<std::size_t>(i)];
        try {
            const auto loaded = pipeline_detail::load_volume_pair(entry, class_map);
            rec = curate_volume(entry.id, loaded.volume, loaded.labels, cfg);
        } catch (const std::exception& e) {
            rec.volume_id = entry.id;
            rec.accepted = false;
            rec.error = e.what();
        }
    });
    for (const auto& r : result.records)
        if (!r.error.empty()) ++result.failures;

    fs::create_directories(cfg.output_dir);
    std::vector<nlohmann::json> lines;
    for (const auto& r : result.records) lines.emplace_back(r);
    result.manifest_path = (fs::path(cfg.output_dir) / "curation.jsonl").string();
    write_jsonl_atomic(result.manifest_path, lines);
    return result;
}

// ---- generation ----

struct GenerateResult {
    std::vector<SampleRecord> records;
    std::string manifest_path;
    int failures = 0;
};

namespace pipeline_detail {

/// Render and write every view of one (volume, variation) task.
inline std::vector<SampleRecord> generate_task(const ForgeConfig& cfg,
                                               const VolumeEntry& entry,
                                               const std::optional<ClassMap>& class_map,
                                               const CurationRecord& curation,
                                               int variation) {
    namespace fs = std::filesystem;
    std::vector<SampleRecord> records;

    auto loaded = load_volume_pair(entry, class_map);
    CtVolume& v = loaded.volume;
    LabelSet& labels = loaded.labels;
    for (const auto& [id, reliable] : curation.per_class_reliability)
        labels.set_reliable(id, reliable && labels.has_class(id));

    const std::string var_key = entry.id + "#" + std::to_string(variation);
    const RandomizationPlan plan = sample_plan(cfg.msdr, cfg.seed, var_key);
    const std::string digest = plan_digest(plan);

    ImplantReport implant_report;
    const CtVolume randomized = apply_all_3d(v, labels, plan, cfg.msdr, &implant_report);
    ProjectionGeometry base = cfg.geometry_for(entry.id);
    if (base.pixel_pitch <= 0.0) base.pixel_pitch = auto_pixel_pitch(v, base);
    const ProjectionGeometry geom = perturb_geometry(base, plan.geometry);

    std::vector<int> available;
    for (int id = 0; id < labels.num_classes(); ++id)
        if (labels.has_class(id) && labels.reliable(id)) available.push_back(id);

    const fs::path var_dir =
        fs::path(cfg.output_dir) / entry.id / variation_dir_name(variation);

    for (std::size_t ai = 0; ai < cfg.angles.size(); ++ai) {
        const double angle = cfg.angles[ai];
        SampleRecord rec;
        rec.volume_id = entry.id;
        rec.variation_index = variation;
        rec.view_angle = angle;
        rec.plan_digest = digest;
        rec.available_classes = available;
        const std::string angle_name = angle_dir_name(angle);
        rec.sample_id = entry.id + "/" + variation_dir_name(variation) + "/" + angle_name;
        try {
            ProjectionGeometry g = geom;
            g.view_angle_deg = angle;
            Grid2D<float> raw = project(randomized, g);
            std::vector<Mask2D> masks = project_masks(randomized, labels, g);
            for (auto& m : masks) {
                if (m.empty() || count_pixels(m) == 0) continue;
                m = clean_components_2d(m, cfg.qc.min_frac).mask;
            }

            const ToneMapParams t2d =
                sample_plan_2d(cfg.msdr, cfg.seed, var_key, static_cast<int>(ai));
            const Grid2D<float> final01 = apply_all_2d(normalize01(raw), t2d);
            const Grid2D<std::uint8_t> img_u8 = quantize_u8(final01);

            const fs::path dir = var_dir / angle_name;
            fs::create_directories(dir);
            const std::string img_path = (dir / "image.png").string();
            const std::string mask_path = (dir / "masks.bin").string();
            const std::string plan_path = (dir / "plan.json").string();

            save_png_gray8(img_path, img_u8);
            save_masks_packed(mask_path, pack_masks(masks, g.det_nx, g.det_ny));

            nlohmann::json pj;
            pj["plan_3d"] = plan;
            pj["plan_2d"] = t2d;
            pj["geometry"] = {{"sdd", g.sdd},
                              {"odd", g.odd},
                              {"view_angle", angle},
                              {"detector_nx", g.det_nx},
                              {"detector_ny", g.det_ny},
                              {"pixel_pitch", g.pixel_pitch}};
            pj["available_classes"] = available;
            if (!implant_report.skipped.empty())
                pj["skipped_implants"] = implant_report.skipped;
            {
                std::ofstream pf(plan_path, std::ios::binary | std::ios::trunc);
                pf << pj.dump(2) << "\n";
                if (!pf) throw format_error("write failure: " + plan_path);
            }

            const fs::path rel_base =
                fs::path(entry.id) / variation_dir_name(variation) / angle_name;
            rec.files[(rel_base / "image.png").string()] = file_crc32(img_path);
            rec.files[(rel_base / "masks.bin").string()] = file_crc32(mask_path);
            rec.files[(rel_base / "plan.json").string()] = file_crc32(plan_path);
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace pipeline_detail

/// Full generation pass over every retained volume and variation.
inline GenerateResult run_generate(const ForgeConfig& cfg,
                                   const std::vector<CurationRecord>& curation) {
    namespace fs = std::filesystem;
    const auto volumes = pipeline_detail::discover_volumes(cfg.ct_dir, cfg.label_dir);
    std::optional<ClassMap> class_map;
    if (!cfg.class_map_path.empty()) class_map = load_class_map(cfg.class_map_path);

    std::map<std::string, const CurationRecord*> by_id;
    for (const auto& r : curation)
        if (r.accepted) by_id[r.volume_id] = &r;

    struct Task {
        const pipeline_detail::VolumeEntry* entry;
        const CurationRecord* curation;
        int variation;
    };
    std::vector<Task> tasks;
    for (const auto& v : volumes) {
        auto it = by_id.find(v.id);
        if (it == by_id.end()) continue;
        for (int var = 0; var < cfg.variations_per_volume; ++var)
            tasks.push_back({&v, it->second, var});
    }

    std::vector<std::vector<SampleRecord>> per_task(tasks.size());
    const int workers = resolve_workers(cfg.workers);
    pipeline_detail::run_tasks(static_cast<int>(tasks.size()), workers, [&](int i) {
        const Task& t = tasks[static_cast<std::size_t>(i)];
        try {
            per_task[static_cast<std::size_t>(i)] = pipeline_detail::generate_task(
                cfg, *t.entry, class_map, *t.curation, t.variation);
        } catch (const std::exception& e) {
            SampleRecord rec;
            rec.volume_id = t.entry->id;
            rec.variation_index = t.variation;
            rec.sample_id =
                t.entry->id + "/" + pipeline_detail::variation_dir_name(t.variation);
            rec.error = e.what();
            per_task[static_cast<std::size_t>(i)] = {std::move(rec)};
        }
    });

    GenerateResult result;
    for (auto& batch : per_task)
        for (auto& r : batch) {
            if (!r.error.empty()) ++result.failures;
            result.records.push_back(std::move(r));
        }

    // Structured log lines, emitted in task order after the pool drains so
    // the stream is deterministic regardless of scheduling.
    for (const auto& r : result.records) {
        nlohmann::json line = {{"sample", r.sample_id},
                               {"plan", r.plan_digest},
                               {"status", r.error.empty() ? "ok" : "error"}};
        if (!r.error.empty()) line["error"] = r.error;
        std::fprintf(stderr, "%s\n", line.dump().c_str());
    }
    if (cfg.dump_plans) {
        // Plans are pure functions of (seed, volume_id#variation); re-sample
        // rather than thread them out of the worker tasks.
        for (const Task& t : tasks) {
            const std::string key = t.entry->id + "#" + std::to_string(t.variation);
            nlohmann::json line = {{"variation", key},
                                   {"plan", sample_plan(cfg.msdr, cfg.seed, key)}};
            std::fprintf(stderr, "%s\n", line.dump().c_str());
        }
    }

    fs::create_directories(cfg.output_dir);

    // Self-describing class map: class name -> packed bit index.
    {
        const auto& tax = default_taxonomy();
        nlohmann::json cm = nlohmann::json::object();
        for (const auto& c : tax.classes()) cm[c.name] = c.id;
        std::ofstream out(fs::path(cfg.output_dir) / "class_map.json",
                          std::ios::binary | std::ios::trunc);
        out << cm.dump(2) << "\n";
    }

    std::vector<nlohmann::json> lines;
    for (const auto& r : result.records) lines.emplace_back(r);
    {
        std::map<std::string, int> per_view;
        std::map<std::string, int> per_class;
        int ok = 0;
        for (const auto& r : result.records) {
            if (!r.error.empty()) continue;
            ++ok;
            ++per_view[pipeline_detail::angle_dir_name(r.view_angle)];
            for (int id : r.available_classes) ++per_class[std::to_string(id)];
        }
        nlohmann::json summary;
        summary["summary"] = {{"samples", ok},
                              {"failures", result.failures},
                              {"per_view", per_view},
                              {"per_class_available", per_class}};
        lines.push_back(std::move(summary));
    }
    result.manifest_path = (fs::path(cfg.output_dir) / "manifest.jsonl").string();
    write_jsonl_atomic(result.manifest_path, lines);
    return result;
}

// ---- measurement ----

struct QuantRecord {
    std::string path;
    std::optional<CtrMeasurement> ctr;
    std::optional<SpcaMeasurement> spca;
    std::string ctr_error;
    std::string spca_error;
};

inline void to_json(nlohmann::json& j, const QuantRecord& r) {
    j = nlohmann::json::object();
    j["masks"] = r.path;
    if (r.ctr) {
        j["ctr"] = {{"ratio", r.ctr->ratio}, {"mrd", r.ctr->mrd},   {"mld", r.ctr->mld},
                    {"id", r.ctr->id},       {"midline_x", r.ctr->midline_x}};
    } else {
        j["ctr_error"] = r.ctr_error;
    }
    if (r.spca) {
        j["spca"] = {{"score", r.spca->score},
                     {"severity", severity_name(r.spca->severity)},
                     {"centroids", r.spca->centroids}};
    } else {
        j["spca_error"] = r.spca_error;
    }
}

/// CTR + spine-curvature measurements for every packed mask file under
/// `mask_dir`, in sorted path order.
inline std::vector<QuantRecord> run_quant(const ForgeConfig& cfg,
                                          const std::string& mask_dir) {
    namespace fs = std::filesystem;
    const auto& tax = default_taxonomy();

    std::vector<std::string> files;
    if (fs::is_directory(mask_dir))
        for (const auto& e : fs::recursive_directory_iterator(mask_dir))
            if (e.is_regular_file() && e.path().filename() == "masks.bin")
                files.push_back(e.path().string());
    std::sort(files.begin(), files.end());

    std::vector<QuantRecord> records;
    records.reserve(files.size());
    for (const auto& path : files) {
        QuantRecord rec;
        rec.path = path;
        try {
            const PackedMasks pm = load_masks_packed(path);

            std::vector<int> lung_ids = tax.ids_in_group(AnatomyGroup::lung_lobe);
            lung_ids.push_back(*tax.find("lung"));
            Mask2D lungs(pm.nx, pm.ny, 0);
            for (int id : lung_ids) {
                if (id >= pm.n_classes) continue;
                const Mask2D m = pm.extract(id);
                for (std::size_t i = 0; i < m.size(); ++i)
                    if (m[i]) lungs[i] = 1;
            }
            const Mask2D heart = pm.extract(*tax.find("heart"));
            try {
                rec.ctr = compute_ctr(heart, lungs);
            } catch (const std::exception& e) {
                rec.ctr_error = e.what();
            }

            std::vector<Mask2D> class_masks(static_cast<std::size_t>(tax.size()));
            for (int id : tax.vertebra_ids())
                if (id < pm.n_classes && pm.any(id))
                    class_masks[static_cast<std::size_t>(id)] = pm.extract(id);
            try {
                rec.spca = compute_spca(class_masks, tax, cfg.spca);
            } catch (const std::exception& e) {
                rec.spca_error = e.what();
            }
        } catch (const std::exception& e) {
            rec.ctr_error = e.what();
            rec.spca_error = e.what();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace xrforge
