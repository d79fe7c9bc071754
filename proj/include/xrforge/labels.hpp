// labels.hpp - per-class binary label masks paired with a CT volume.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "xrforge/errors.hpp"
#include "xrforge/grid.hpp"
#include "xrforge/taxonomy.hpp"
#include "xrforge/volume.hpp"

namespace xrforge {

/// One binary 3D mask per taxonomy class plus per-class reliability flags.
/// Absent classes keep an empty grid. Family unions are always recomputed
/// from the per-class masks.
class LabelSet {
public:
    LabelSet() : taxonomy_(&default_taxonomy()) {}

    explicit LabelSet(std::array<int, 3> dims, const Taxonomy& tax = default_taxonomy())
        : taxonomy_(&tax), dims_(dims) {
        masks_.resize(static_cast<std::size_t>(tax.size()));
        reliable_.assign(static_cast<std::size_t>(tax.size()), false);
    }

    const Taxonomy& taxonomy() const { return *taxonomy_; }
    std::array<int, 3> dims() const { return dims_; }
    int num_classes() const { return taxonomy_->size(); }

    bool has_class(int id) const { return !masks_[check(id)].empty(); }

    const Mask3D& mask(int id) const { return masks_[check(id)]; }

    void set_mask(int id, Mask3D m) {
        const auto i = check(id);
        if (!m.empty() && m.dims() != dims_)
            throw shape_error("LabelSet: mask dimensions do not match volume");
        masks_[i] = std::move(m);
    }

    bool reliable(int id) const { return reliable_[check(id)]; }
    void set_reliable(int id, bool r) { reliable_[check(id)] = r; }

    std::vector<bool> reliability() const {
        return {reliable_.begin(), reliable_.end()};
    }

    std::vector<int> present_ids() const {
        std::vector<int> out;
        for (int id = 0; id < num_classes(); ++id)
            if (has_class(id)) out.push_back(id);
        return out;
    }

    /// Union over a list of classes; empty grid when none are present.
    Mask3D union_of(const std::vector<int>& ids) const {
        Mask3D out;
        for (int id : ids) {
            if (!has_class(id)) continue;
            const Mask3D& m = mask(id);
            if (out.empty()) out = Mask3D(dims_[0], dims_[1], dims_[2], 0);
            for (std::size_t i = 0; i < m.size(); ++i)
                if (m[i]) out[i] = 1;
        }
        return out;
    }

    Mask3D soft_union() const { return union_of(taxonomy_->soft_ids()); }
    Mask3D bone_union() const { return union_of(taxonomy_->bone_ids()); }
    Mask3D vertebra_union() const { return union_of(taxonomy_->vertebra_ids()); }
    Mask3D rib_left_union() const { return union_of(taxonomy_->ids_in_group(AnatomyGroup::rib_left)); }
    Mask3D rib_right_union() const { return union_of(taxonomy_->ids_in_group(AnatomyGroup::rib_right)); }

    /// M_ROI = soft union + bone union.
    Mask3D roi_union() const {
        std::vector<int> all;
        for (const auto& c : taxonomy_->classes()) all.push_back(c.id);
        return union_of(all);
    }

    /// Reorder every mask to match a canonicalized volume orientation.
    LabelSet canonicalized(int si_axis, bool superior_high) const {
        if (si_axis == 2 && superior_high) return *this;
        std::array<int, 3> perm{};
        switch (si_axis) {
        case 0: perm = {1, 2, 0}; break;
        case 1: perm = {0, 2, 1}; break;
        case 2: perm = {0, 1, 2}; break;
        default: throw config_error("LabelSet: bad si_axis");
        }
        LabelSet out({dims_[perm[0]], dims_[perm[1]], dims_[perm[2]]}, *taxonomy_);
        for (int id = 0; id < num_classes(); ++id) {
            if (has_class(id))
                out.set_mask(id, detail::permute_flip(mask(id), perm, !superior_high));
            out.set_reliable(id, reliable(id));
        }
        return out;
    }

    friend bool operator==(const LabelSet& a, const LabelSet& b) {
        return a.dims_ == b.dims_ && a.masks_ == b.masks_ && a.reliable_ == b.reliable_;
    }

private:
    std::size_t check(int id) const {
        if (id < 0 || id >= num_classes())
            throw taxonomy_error("LabelSet: class id out of range");
        return static_cast<std::size_t>(id);
    }

    const Taxonomy* taxonomy_;
    std::array<int, 3> dims_{0, 0, 0};
    std::vector<Mask3D> masks_;
    std::vector<std::uint8_t> reliable_;
};

inline std::size_t count_voxels(const Mask3D& m) {
    std::size_t n = 0;
    for (auto v : m.raw()) n += (v != 0);
    return n;
}

inline std::size_t count_pixels(const Mask2D& m) {
    std::size_t n = 0;
    for (auto v : m.raw()) n += (v != 0);
    return n;
}

} // namespace xrforge
