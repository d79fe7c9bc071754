// manifest.hpp - curation and dataset manifests as JSON lines, written
// atomically (tmp + rename) so a killed run never leaves a manifest
// naming files that were not fully written.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <zlib.h>

#include "json.hpp"

#include "xrforge/errors.hpp"

namespace xrforge {

/// CRC32 (zlib polynomial) of a whole file, hex-encoded.
inline std::string file_crc32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("crc32: cannot open " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf),
                    static_cast<uInt>(in.gcount()));
        if (in.gcount() < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    char out[9];
    std::snprintf(out, sizeof(out), "%08lx", static_cast<unsigned long>(crc));
    return out;
}

/// Stage 1 + Stage 2 outcome for one volume.
struct CurationRecord {
    std::string volume_id;
    bool accepted = false;
    std::vector<std::string> reasons;
    std::map<int, bool> per_class_reliability; // class id -> reliable
    std::string error; // nonempty when the volume failed to load/process
};

inline void to_json(nlohmann::json& j, const CurationRecord& r) {
    j = nlohmann::json::object();
    j["volume_id"] = r.volume_id;
    j["accepted"] = r.accepted;
    j["reasons"] = r.reasons;
    auto& rel = j["per_class_reliability"] = nlohmann::json::object();
    for (const auto& [id, ok] : r.per_class_reliability) rel[std::to_string(id)] = ok;
    if (!r.error.empty()) j["error"] = r.error;
}

inline void from_json(const nlohmann::json& j, CurationRecord& r) {
    r = CurationRecord{};
    r.volume_id = j.at("volume_id").get<std::string>();
    r.accepted = j.at("accepted").get<bool>();
    if (j.contains("reasons")) r.reasons = j["reasons"].get<std::vector<std::string>>();
    if (j.contains("per_class_reliability"))
        for (auto it = j["per_class_reliability"].begin();
             it != j["per_class_reliability"].end(); ++it)
            r.per_class_reliability[std::stoi(it.key())] = it.value().get<bool>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
}

/// One rendered sample in the dataset manifest.
struct SampleRecord {
    std::string sample_id; // volume/variation/angle
    std::string volume_id;
    int variation_index = 0;
    double view_angle = 0.0;
    std::string plan_digest;
    std::vector<int> available_classes;
    std::map<std::string, std::string> files; // relative path -> crc32
    std::string error;
};

inline void to_json(nlohmann::json& j, const SampleRecord& r) {
    j = nlohmann::json::object();
    j["sample_id"] = r.sample_id;
    j["volume_id"] = r.volume_id;
    j["variation"] = r.variation_index;
    j["view_angle"] = r.view_angle;
    j["plan"] = r.plan_digest;
    j["available_classes"] = r.available_classes;
    auto& f = j["files"] = nlohmann::json::object();
    for (const auto& [path, crc] : r.files) f[path] = crc;
    if (!r.error.empty()) j["error"] = r.error;
}

inline void from_json(const nlohmann::json& j, SampleRecord& r) {
    r = SampleRecord{};
    r.sample_id = j.at("sample_id").get<std::string>();
    r.volume_id = j.at("volume_id").get<std::string>();
    r.variation_index = j.at("variation").get<int>();
    r.view_angle = j.at("view_angle").get<double>();
    r.plan_digest = j.value("plan", std::string{});
    if (j.contains("available_classes"))
        r.available_classes = j["available_classes"].get<std::vector<int>>();
    if (j.contains("files"))
        for (auto it = j["files"].begin(); it != j["files"].end(); ++it)
            r.files[it.key()] = it.value().get<std::string>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
}

/// Write JSON lines atomically: stream to <path>.tmp, then rename.
inline void write_jsonl_atomic(const std::string& path,
                               const std::vector<nlohmann::json>& lines) {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw format_error("manifest: cannot open " + tmp);
        for (const auto& j : lines) out << j.dump() << "\n";
        if (!out) throw format_error("manifest: write failure on " + tmp);
    }
    fs::rename(tmp, path);
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("manifest: cannot open " + path);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw format_error("manifest: bad line in " + path + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<CurationRecord> load_curation_manifest(const std::string& path) {
    std::vector<CurationRecord> out;
    for (const auto& j : read_jsonl(path)) {
        if (j.contains("summary")) continue;
        out.push_back(j.get<CurationRecord>());
    }
    return out;
}

} // namespace xrforge
