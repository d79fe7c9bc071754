// taxonomy.hpp - the 54-class chest anatomy taxonomy and its family groups.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xrforge/errors.hpp"

namespace xrforge {

enum class AnatomyGroup {
    vertebrae,
    rib_left,
    rib_right,
    clavicle,
    humerus,
    sternum,
    heart_chamber,
    great_vessel,
    lung_lobe,
    whole_organ,
};

inline bool is_bone_group(AnatomyGroup g) {
    switch (g) {
    case AnatomyGroup::vertebrae:
    case AnatomyGroup::rib_left:
    case AnatomyGroup::rib_right:
    case AnatomyGroup::clavicle:
    case AnatomyGroup::humerus:
    case AnatomyGroup::sternum:
        return true;
    default:
        return false;
    }
}

inline bool is_soft_group(AnatomyGroup g) { return !is_bone_group(g); }

inline std::string_view group_name(AnatomyGroup g) {
    switch (g) {
    case AnatomyGroup::vertebrae: return "vertebrae";
    case AnatomyGroup::rib_left: return "rib_left";
    case AnatomyGroup::rib_right: return "rib_right";
    case AnatomyGroup::clavicle: return "clavicle";
    case AnatomyGroup::humerus: return "humerus";
    case AnatomyGroup::sternum: return "sternum";
    case AnatomyGroup::heart_chamber: return "heart_chamber";
    case AnatomyGroup::great_vessel: return "great_vessel";
    case AnatomyGroup::lung_lobe: return "lung_lobe";
    case AnatomyGroup::whole_organ: return "whole_organ";
    }
    return "?";
}

struct AnatomyClass {
    int id = -1;
    std::string name;
    AnatomyGroup group = AnatomyGroup::whole_organ;
};

inline constexpr int kNumClasses = 54;

/// Canonical class table. Bone classes take the low ids so that the
/// "lowest id wins" rule for overlapping bone masks is well defined.
class Taxonomy {
public:
    Taxonomy() {
        auto add = [this](std::string name, AnatomyGroup g) {
            const int id = static_cast<int>(classes_.size());
            classes_.push_back({id, std::move(name), g});
        };
        // 0..10: thoracic vertebrae T2-T12
        for (int t = 2; t <= 12; ++t)
            add("vertebra_t" + std::to_string(t), AnatomyGroup::vertebrae);
        // 11..22 / 23..34: ribs 1-12 left then right
        for (int r = 1; r <= 12; ++r)
            add("rib_left_" + std::to_string(r), AnatomyGroup::rib_left);
        for (int r = 1; r <= 12; ++r)
            add("rib_right_" + std::to_string(r), AnatomyGroup::rib_right);
        // 35..39: shoulder girdle and sternum
        add("clavicle_left", AnatomyGroup::clavicle);
        add("clavicle_right", AnatomyGroup::clavicle);
        add("humerus_left", AnatomyGroup::humerus);
        add("humerus_right", AnatomyGroup::humerus);
        add("sternum", AnatomyGroup::sternum);
        // 40..45: heart
        add("heart", AnatomyGroup::whole_organ);
        add("heart_atrium_left", AnatomyGroup::heart_chamber);
        add("heart_atrium_right", AnatomyGroup::heart_chamber);
        add("heart_myocardium", AnatomyGroup::heart_chamber);
        add("heart_ventricle_left", AnatomyGroup::heart_chamber);
        add("heart_ventricle_right", AnatomyGroup::heart_chamber);
        // 46..47: great vessels
        add("aorta", AnatomyGroup::great_vessel);
        add("pulmonary_artery", AnatomyGroup::great_vessel);
        // 48..53: lungs
        add("lung", AnatomyGroup::whole_organ);
        add("lung_upper_lobe_left", AnatomyGroup::lung_lobe);
        add("lung_lower_lobe_left", AnatomyGroup::lung_lobe);
        add("lung_upper_lobe_right", AnatomyGroup::lung_lobe);
        add("lung_middle_lobe_right", AnatomyGroup::lung_lobe);
        add("lung_lower_lobe_right", AnatomyGroup::lung_lobe);
    }

    int size() const { return static_cast<int>(classes_.size()); }
    const std::vector<AnatomyClass>& classes() const { return classes_; }

    const AnatomyClass& at(int id) const {
        if (id < 0 || id >= size())
            throw taxonomy_error("class id out of range: " + std::to_string(id));
        return classes_[static_cast<std::size_t>(id)];
    }

    std::optional<int> find(std::string_view name) const {
        for (const auto& c : classes_)
            if (c.name == name) return c.id;
        return std::nullopt;
    }

    std::vector<int> ids_in_group(AnatomyGroup g) const {
        std::vector<int> out;
        for (const auto& c : classes_)
            if (c.group == g) out.push_back(c.id);
        return out;
    }

    /// Vertebrae T2..T12 in superior-to-inferior order.
    std::vector<int> vertebra_ids() const { return ids_in_group(AnatomyGroup::vertebrae); }

    /// Individually scalable bone components: vertebrae + left ribs + right ribs.
    std::vector<int> component_bone_ids() const {
        std::vector<int> out = ids_in_group(AnatomyGroup::vertebrae);
        for (int id : ids_in_group(AnatomyGroup::rib_left)) out.push_back(id);
        for (int id : ids_in_group(AnatomyGroup::rib_right)) out.push_back(id);
        return out;
    }

    std::vector<int> bone_ids() const {
        std::vector<int> out;
        for (const auto& c : classes_)
            if (is_bone_group(c.group)) out.push_back(c.id);
        return out;
    }

    std::vector<int> soft_ids() const {
        std::vector<int> out;
        for (const auto& c : classes_)
            if (is_soft_group(c.group)) out.push_back(c.id);
        return out;
    }

private:
    std::vector<AnatomyClass> classes_;
};

/// Shared immutable default taxonomy.
inline const Taxonomy& default_taxonomy() {
    static const Taxonomy t;
    return t;
}

} // namespace xrforge
