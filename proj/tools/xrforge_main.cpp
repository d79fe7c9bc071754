// xrforge: curate CT label sets, forge randomized radiograph datasets,
// and measure anatomy on the results.
//
// Exit codes: 0 success, 1 partial failure (some volumes or samples failed),
// 2 usage or configuration error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "xrforge/config.hpp"
#include "xrforge/manifest.hpp"
#include "xrforge/pipeline.hpp"
#include "xrforge/selftest.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::vector<double> angles;
    std::uint64_t seed = 0;
    int workers = -1;
    bool dump_plans = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--out", f.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", f.seed, "global seed (overrides config)");
    cmd->add_option("--workers", f.workers, "worker thread count (overrides config)");
    cmd->add_option("--angles", f.angles, "view angles in degrees (overrides config)");
}

xrforge::ForgeConfig resolve_config(const CLI::App* cmd, const CommonFlags& f) {
    xrforge::ForgeConfig cfg;
    if (!f.config_path.empty()) cfg = xrforge::load_config(f.config_path);
    if (cmd->count("--out")) cfg.output_dir = f.out_dir;
    if (cmd->count("--seed")) cfg.seed = f.seed;
    if (cmd->count("--workers")) cfg.workers = f.workers;
    if (cmd->count("--angles")) cfg.angles = f.angles;
    if (const auto* opt = cmd->get_option_no_throw("--dump-plans"); opt && opt->count())
        cfg.dump_plans = f.dump_plans;
    cfg.validate();
    return cfg;
}

int cmd_qc(const xrforge::ForgeConfig& cfg) {
    const xrforge::QcResult res = xrforge::run_qc(cfg);
    int retained = 0;
    for (const auto& r : res.records)
        if (r.accepted) ++retained;
    if (res.records.empty())
        std::fprintf(stderr, "{\"warning\":\"no input volumes found\"}\n");
    std::printf("qc: %zu volumes, %d retained, %d errors -> %s\n", res.records.size(),
                retained, res.failures, res.manifest_path.c_str());
    return res.failures > 0 ? 1 : 0;
}

int cmd_generate(const xrforge::ForgeConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path curation_path = fs::path(cfg.output_dir) / "curation.jsonl";
    std::vector<xrforge::CurationRecord> curation;
    int qc_failures = 0;
    if (fs::is_regular_file(curation_path)) {
        curation = xrforge::load_curation_manifest(curation_path.string());
    } else {
        const xrforge::QcResult qc = xrforge::run_qc(cfg);
        curation = qc.records;
        qc_failures = qc.failures;
    }
    const xrforge::GenerateResult res = xrforge::run_generate(cfg, curation);
    int ok = 0;
    for (const auto& r : res.records)
        if (r.error.empty()) ++ok;
    std::printf("generate: %d samples written, %d failed -> %s\n", ok, res.failures,
                res.manifest_path.c_str());
    return (res.failures > 0 || qc_failures > 0) ? 1 : 0;
}

int cmd_quant(const xrforge::ForgeConfig& cfg, const std::string& mask_dir) {
    const std::string dir = mask_dir.empty() ? cfg.output_dir : mask_dir;
    const auto records = xrforge::run_quant(cfg, dir);
    std::vector<nlohmann::json> lines;
    int errors = 0;
    for (const auto& r : records) {
        lines.emplace_back(r);
        if (!r.ctr_error.empty() || !r.spca_error.empty()) ++errors;
    }
    const std::string report =
        (std::filesystem::path(dir) / "quant.jsonl").string();
    xrforge::write_jsonl_atomic(report, lines);
    std::printf("quant: %zu mask sets measured, %d with errors -> %s\n", records.size(),
                errors, report.c_str());
    return errors > 0 ? 1 : 0;
}

int cmd_selftest() {
    const auto suites = xrforge::run_selftest();
    bool all_ok = true;
    for (const auto& s : suites) {
        std::printf("[%s] %-17s %8.1f ms  %s\n", s.passed ? "PASS" : "FAIL",
                    s.name.c_str(), s.elapsed_ms, s.detail.c_str());
        all_ok = all_ok && s.passed;
    }
    return all_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"xrforge: synthetic radiograph dataset forge"};
    app.require_subcommand(1);

    CommonFlags qc_flags, gen_flags, quant_flags;
    std::string quant_masks;

    CLI::App* qc = app.add_subcommand("qc", "curate volumes and write curation.jsonl");
    add_common(qc, qc_flags);

    CLI::App* gen =
        app.add_subcommand("generate", "render randomized dataset for retained volumes");
    add_common(gen, gen_flags);
    gen->add_flag("--dump-plans", gen_flags.dump_plans,
                  "log every sampled plan to stderr");

    CLI::App* quant =
        app.add_subcommand("quant", "measure CTR and spine curvature on packed masks");
    add_common(quant, quant_flags);
    quant->add_option("--masks", quant_masks,
                      "directory to scan for masks.bin (default: output dir)");

    CLI::App* selftest = app.add_subcommand("selftest", "run embedded sanity suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // help exits clean, any parse problem is usage
    }

    try {
        if (qc->parsed()) return cmd_qc(resolve_config(qc, qc_flags));
        if (gen->parsed()) return cmd_generate(resolve_config(gen, gen_flags));
        if (quant->parsed()) return cmd_quant(resolve_config(quant, quant_flags), quant_masks);
        if (selftest->parsed()) return cmd_selftest();
    } catch (const xrforge::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
