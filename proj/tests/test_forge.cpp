#include "catch2/catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "json.hpp"

#include "xrforge/config.hpp"
#include "xrforge/phantoms.hpp"
#include "xrforge/pipeline.hpp"

using namespace xrforge;
namespace fs = std::filesystem;

namespace {

struct ToySet {
    fs::path root;
    ForgeConfig cfg;

    explicit ToySet(const std::string& tag, int volumes = 2, bool qc_failure = true) {
        root = fs::temp_directory_path() / ("xrforge_e2e_" + tag);
        fs::remove_all(root);
        write_toy_dataset((root / "in").string(), volumes, {40, 40, 40}, {4.5, 4.5, 4.5},
                          qc_failure);
        cfg.ct_dir = (root / "in" / "ct").string();
        cfg.label_dir = (root / "in" / "labels").string();
        cfg.class_map_path = (root / "in" / "class_map.json").string();
        cfg.output_dir = (root / "out").string();
        cfg.seed = 99;
        cfg.angles = {0.0, 90.0, 180.0};
        cfg.variations_per_volume = 2;
        cfg.geometry.det_nx = cfg.geometry.det_ny = 96;
        cfg.workers = 1;
    }
    ~ToySet() { fs::remove_all(root); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> tree_crcs(const fs::path& dir) {
    std::map<std::string, std::string> crcs;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            crcs[fs::relative(e.path(), dir).string()] = file_crc32(e.path().string());
    return crcs;
}

} // namespace

TEST_CASE("qc retains clean volumes and rejects the crafted failure") {
    ToySet t("qc");
    const QcResult res = run_qc(t.cfg);
    REQUIRE(res.records.size() == 3);
    REQUIRE(res.failures == 0);
    int retained = 0;
    for (const auto& r : res.records) {
        if (r.accepted) ++retained;
        REQUIRE(r.error.empty());
    }
    REQUIRE(retained == 2);
    REQUIRE_FALSE(res.records.back().accepted); // qc-failure volume is last by id
    REQUIRE(fs::is_regular_file(res.manifest_path));

    // rerun: byte-identical manifest
    const std::string first = slurp(res.manifest_path);
    const QcResult res2 = run_qc(t.cfg);
    REQUIRE(slurp(res2.manifest_path) == first);
}

TEST_CASE("qc on an empty input dir writes an empty manifest") {
    const fs::path root = fs::temp_directory_path() / "xrforge_e2e_empty";
    fs::remove_all(root);
    fs::create_directories(root / "ct");
    ForgeConfig cfg;
    cfg.ct_dir = (root / "ct").string();
    cfg.label_dir = (root / "labels").string();
    cfg.output_dir = (root / "out").string();
    const QcResult res = run_qc(cfg);
    REQUIRE(res.records.empty());
    REQUIRE(res.failures == 0);
    REQUIRE(fs::is_regular_file(res.manifest_path));
    REQUIRE(slurp(res.manifest_path).empty());
    fs::remove_all(root);
}

TEST_CASE("generate writes the full layout with verified checksums") {
    ToySet t("gen");
    const QcResult qc = run_qc(t.cfg);
    const GenerateResult gen = run_generate(t.cfg, qc.records);

    // 2 retained volumes x 2 variations x 3 angles
    REQUIRE(gen.records.size() == 12);
    REQUIRE(gen.failures == 0);

    std::set<std::string> sample_ids;
    for (const auto& r : gen.records) {
        REQUIRE(r.error.empty());
        REQUIRE(sample_ids.insert(r.sample_id).second); // unique
        REQUIRE_FALSE(r.plan_digest.empty());
        REQUIRE(r.files.size() == 3);
        for (const auto& [rel, crc] : r.files) {
            const fs::path full = fs::path(t.cfg.output_dir) / rel;
            REQUIRE(fs::is_regular_file(full));
            REQUIRE(file_crc32(full.string()) == crc);
        }
    }
    REQUIRE(fs::is_regular_file(fs::path(t.cfg.output_dir) / "manifest.jsonl"));
    REQUIRE(fs::is_regular_file(fs::path(t.cfg.output_dir) / "class_map.json"));

    // angle directories use the fixed-width naming
    REQUIRE(fs::is_directory(fs::path(t.cfg.output_dir) / "vol000" / "000" / "000.0"));
    REQUIRE(fs::is_directory(fs::path(t.cfg.output_dir) / "vol000" / "001" / "090.0"));
    REQUIRE(fs::is_directory(fs::path(t.cfg.output_dir) / "vol001" / "000" / "180.0"));

    // manifest ends with a summary line counting ok samples
    const std::string manifest = slurp(fs::path(t.cfg.output_dir) / "manifest.jsonl");
    const auto last_line_start = manifest.rfind('\n', manifest.size() - 2);
    const nlohmann::json summary =
        nlohmann::json::parse(manifest.substr(last_line_start + 1));
    REQUIRE(summary.contains("summary"));
    REQUIRE(summary["summary"]["samples"] == 12);
}

TEST_CASE("packed masks round-trip and mark the expected classes") {
    ToySet t("masks");
    const QcResult qc = run_qc(t.cfg);
    const GenerateResult gen = run_generate(t.cfg, qc.records);
    REQUIRE(gen.failures == 0);

    const PackedMasks pm = load_masks_packed(
        (fs::path(t.cfg.output_dir) / "vol000" / "000" / "000.0" / "masks.bin").string());
    REQUIRE(pm.nx == 96);
    REQUIRE(pm.ny == 96);
    const auto& tax = default_taxonomy();
    REQUIRE(pm.n_classes == tax.size());
    REQUIRE(pm.any(*tax.find("heart")));
    REQUIRE(pm.any(*tax.find("lung")));
    REQUIRE(pm.any(tax.vertebra_ids()[0]));
    REQUIRE_FALSE(pm.any(*tax.find("sternum"))); // not in the toy anatomy

    // pack/extract round-trip on the loaded data
    std::vector<Mask2D> masks(static_cast<std::size_t>(pm.n_classes));
    for (int c = 0; c < pm.n_classes; ++c) masks[static_cast<std::size_t>(c)] = pm.extract(c);
    const PackedMasks again = pack_masks(masks, pm.nx, pm.ny);
    REQUIRE(again.bits == pm.bits);
}

TEST_CASE("two-component lung class is written but flagged unavailable") {
    ToySet t("avail");
    const QcResult qc = run_qc(t.cfg);
    const int lung = *default_taxonomy().find("lung");
    for (const auto& r : qc.records) {
        if (!r.accepted) continue;
        REQUIRE(r.per_class_reliability.count(lung) == 1);
        REQUIRE_FALSE(r.per_class_reliability.at(lung)); // two blobs, one class
    }
    const GenerateResult gen = run_generate(t.cfg, qc.records);
    for (const auto& r : gen.records) {
        REQUIRE(r.error.empty());
        for (int id : r.available_classes) REQUIRE(id != lung);
    }
    // the mask itself is still on disk for downstream measurement
    const PackedMasks pm = load_masks_packed(
        (fs::path(t.cfg.output_dir) / "vol000" / "000" / "000.0" / "masks.bin").string());
    REQUIRE(pm.any(lung));
}

TEST_CASE("identical configs produce byte-identical output trees") {
    ToySet t("det1");
    const QcResult qc = run_qc(t.cfg);
    REQUIRE(run_generate(t.cfg, qc.records).failures == 0);
    const auto first = tree_crcs(t.cfg.output_dir);

    fs::remove_all(t.cfg.output_dir);
    const QcResult qc2 = run_qc(t.cfg);
    REQUIRE(run_generate(t.cfg, qc2.records).failures == 0);
    REQUIRE(tree_crcs(t.cfg.output_dir) == first);
}

TEST_CASE("worker count does not change a single output byte") {
    ToySet t("det2");
    const QcResult qc = run_qc(t.cfg);
    t.cfg.workers = 1;
    REQUIRE(run_generate(t.cfg, qc.records).failures == 0);
    const auto serial = tree_crcs(t.cfg.output_dir);

    fs::remove_all(t.cfg.output_dir);
    t.cfg.workers = 5;
    const QcResult qc5 = run_qc(t.cfg);
    REQUIRE(run_generate(t.cfg, qc5.records).failures == 0);
    REQUIRE(tree_crcs(t.cfg.output_dir) == serial);
}

TEST_CASE("curation manifest round-trips through disk") {
    ToySet t("cur");
    const QcResult qc = run_qc(t.cfg);
    const auto loaded = load_curation_manifest(qc.manifest_path);
    REQUIRE(loaded.size() == qc.records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        REQUIRE(loaded[i].volume_id == qc.records[i].volume_id);
        REQUIRE(loaded[i].accepted == qc.records[i].accepted);
        REQUIRE(loaded[i].per_class_reliability == qc.records[i].per_class_reliability);
    }
}

TEST_CASE("quant measures every generated mask set") {
    ToySet t("quant");
    t.cfg.variations_per_volume = 1;
    t.cfg.angles = {0.0};
    const QcResult qc = run_qc(t.cfg);
    const GenerateResult gen = run_generate(t.cfg, qc.records);
    REQUIRE(gen.failures == 0);
    const auto records = run_quant(t.cfg, t.cfg.output_dir);
    REQUIRE(records.size() == 2);
    for (const auto& r : records) {
        REQUIRE(r.ctr.has_value());
        REQUIRE(r.ctr->ratio > 0.2);
        REQUIRE(r.ctr->ratio < 0.9);
        REQUIRE(r.spca.has_value());
        REQUIRE(r.spca->severity == Severity::low); // straight toy spine
    }
}

TEST_CASE("quant records an error for mask sets without a heart") {
    const fs::path root = fs::temp_directory_path() / "xrforge_e2e_noheart";
    fs::remove_all(root);
    fs::create_directories(root / "s");
    const auto& tax = default_taxonomy();
    std::vector<Mask2D> masks(static_cast<std::size_t>(tax.size()));
    Mask2D lung(32, 32, 0);
    for (int y = 8; y < 24; ++y)
        for (int x = 4; x < 28; ++x) lung.at(x, y) = 1;
    masks[static_cast<std::size_t>(*tax.find("lung"))] = lung;
    save_masks_packed((root / "s" / "masks.bin").string(), pack_masks(masks, 32, 32));

    ForgeConfig cfg;
    const auto records = run_quant(cfg, root.string());
    REQUIRE(records.size() == 1);
    REQUIRE_FALSE(records[0].ctr.has_value());
    REQUIRE_FALSE(records[0].ctr_error.empty());
    fs::remove_all(root);
}

TEST_CASE("quant on an empty directory is an empty report") {
    const fs::path root = fs::temp_directory_path() / "xrforge_e2e_emptyq";
    fs::remove_all(root);
    fs::create_directories(root);
    ForgeConfig cfg;
    REQUIRE(run_quant(cfg, root.string()).empty());
    fs::remove_all(root);
}

TEST_CASE("config json: defaults, overrides, and unknown keys") {
    const nlohmann::json j = {
        {"ct_dir", "a"},
        {"label_dir", "b"},
        {"seed", 7},
        {"angles", {0.0, 45.0}},
        {"qc", {{"tau_overlap", 0.08}, {"min_frac", 0.2}}},
        {"msdr", {{"noise", {{"p", 0.9}, {"sigma", {1.0, 2.0}}}}}},
        {"geometry", {{"detector_nx", 64}, {"detector_ny", 48}}},
    };
    const ForgeConfig c = config_from_json(j);
    REQUIRE(c.seed == 7);
    REQUIRE(c.angles == std::vector<double>{0.0, 45.0});
    REQUIRE(c.qc.tau_overlap == 0.08);
    REQUIRE(c.msdr.noise.p == 0.9);
    REQUIRE(c.msdr.noise.sigma.lo == 1.0);
    REQUIRE(c.msdr.bone_soft.p == 0.4); // untouched family keeps defaults
    REQUIRE(c.geometry.det_nx == 64);
    REQUIRE(c.geometry.det_ny == 48);

    nlohmann::json bad = j;
    bad["typo_key"] = 1;
    REQUIRE_THROWS_AS(config_from_json(bad), config_error);

    nlohmann::json badp = j;
    badp["msdr"]["noise"]["p"] = 1.5;
    REQUIRE_THROWS_AS(config_from_json(badp), config_error);
}

TEST_CASE("per-volume geometry overrides apply by id") {
    nlohmann::json j;
    j["geometry"] = {{"detector_nx", 128}};
    j["geometry_overrides"] = {{"vol007", {{"detector_nx", 256}, {"sdd", 1500.0}}}};
    const ForgeConfig c = config_from_json(j);
    REQUIRE(c.geometry_for("vol000").det_nx == 128);
    REQUIRE(c.geometry_for("vol007").det_nx == 256);
    REQUIRE(c.geometry_for("vol007").sdd == 1500.0);
    REQUIRE(c.geometry_for("vol007").odd == c.geometry.odd);
}

TEST_CASE("angles outside [0,180] fail validation") {
    ForgeConfig c;
    c.angles = {0.0, 190.0};
    REQUIRE_THROWS_AS(c.validate(), config_error);
    c.angles = {};
    REQUIRE_THROWS_AS(c.validate(), config_error);
}
