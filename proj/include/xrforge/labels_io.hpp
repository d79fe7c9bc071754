// labels_io.hpp - load CT volumes and label masks from disk.
//
// Labels come in two layouts, normalized to per-class binary masks:
//   * one integer label volume plus a JSON class map {name -> file value},
//   * a directory of per-class binary volumes named <class_name>.nii[.gz].
#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "json.hpp"

#include "xrforge/errors.hpp"
#include "xrforge/labels.hpp"
#include "xrforge/nifti.hpp"
#include "xrforge/taxonomy.hpp"
#include "xrforge/volume.hpp"

namespace xrforge {

/// Load a CT volume; header spacing/origin pass through untouched.
inline CtVolume load_ct(const std::string& path) {
    CtVolume v = load_nifti(path).volume;
    v.validate();
    return v;
}

using ClassMap = std::map<std::string, int>;

/// Read a {class name -> integer id} sidecar.
inline ClassMap load_class_map(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open class map: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error("class map " + path + ": " + e.what());
    }
    if (!j.is_object()) throw format_error("class map must be a JSON object: " + path);
    ClassMap out;
    for (auto it = j.begin(); it != j.end(); ++it)
        out[it.key()] = it.value().get<int>();
    return out;
}

namespace labels_detail {

inline Mask3D to_mask(const Grid3D<float>& g) {
    Mask3D m(g.nx(), g.ny(), g.nz(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = g[i] != 0.0f ? 1 : 0;
    return m;
}

inline std::string strip_nii(std::string name) {
    for (const char* suf : {".nii.gz", ".nii"}) {
        const std::string s(suf);
        if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0)
            return name.substr(0, name.size() - s.size());
    }
    return name;
}

} // namespace labels_detail

/// Load labels from an integer volume + class map.
inline LabelSet load_labels_indexed(const std::string& path, const ClassMap& class_map,
                                    std::array<int, 3> expected_dims,
                                    const Taxonomy& tax = default_taxonomy()) {
    const CtVolume lv = load_nifti(path).volume;
    if (lv.dims() != expected_dims)
        throw shape_error("label volume " + path + " does not match CT dimensions");

    // file value -> taxonomy id
    std::map<int, int> value_to_class;
    for (const auto& [name, value] : class_map) {
        const auto id = tax.find(name);
        if (!id) throw taxonomy_error("class map entry not in taxonomy: " + name);
        value_to_class[value] = *id;
    }

    LabelSet out(expected_dims, tax);
    std::map<int, Mask3D> building;
    for (std::size_t i = 0; i < lv.data.size(); ++i) {
        const int value = static_cast<int>(lv.data[i]);
        if (value == 0) continue;
        auto it = value_to_class.find(value);
        if (it == value_to_class.end())
            throw taxonomy_error(path + ": label value " + std::to_string(value) +
                                 " missing from class map");
        auto [bit, inserted] = building.try_emplace(
            it->second, Mask3D(expected_dims[0], expected_dims[1], expected_dims[2], 0));
        bit->second[i] = 1;
    }
    for (auto& [id, mask] : building) {
        out.set_mask(id, std::move(mask));
        out.set_reliable(id, true);
    }
    return out;
}

/// Load labels from a directory of per-class mask volumes.
inline LabelSet load_labels_dir(const std::string& dir, std::array<int, 3> expected_dims,
                                const Taxonomy& tax = default_taxonomy()) {
    namespace fs = std::filesystem;
    LabelSet out(expected_dims, tax);
    std::map<std::string, fs::path> files; // sorted for reproducible error order
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string fname = e.path().filename().string();
        if (fname.find(".nii") == std::string::npos) continue;
        files[labels_detail::strip_nii(fname)] = e.path();
    }
    for (const auto& [name, path] : files) {
        const auto id = tax.find(name);
        if (!id) throw taxonomy_error("label file not in taxonomy: " + name);
        const CtVolume mv = load_nifti(path.string()).volume;
        if (mv.dims() != expected_dims)
            throw shape_error("label mask " + path.string() + " does not match CT dimensions");
        Mask3D m = labels_detail::to_mask(mv.data);
        if (count_voxels(m) == 0) continue;
        out.set_mask(*id, std::move(m));
        out.set_reliable(*id, true);
    }
    return out;
}

/// Dispatch on path kind: directory -> per-class files, file -> indexed volume.
inline LabelSet load_labels(const std::string& path, const ClassMap& class_map,
                            std::array<int, 3> expected_dims,
                            const Taxonomy& tax = default_taxonomy()) {
    if (std::filesystem::is_directory(path))
        return load_labels_dir(path, expected_dims, tax);
    return load_labels_indexed(path, class_map, expected_dims, tax);
}

} // namespace xrforge
