// connected.hpp - connected-component labeling for 2D and 3D binary masks.
#pragma once

#include <cstdint>
#include <vector>

#include "xrforge/grid.hpp"

namespace xrforge {

struct Components2D {
    Grid2D<std::int32_t> labels; // 0 = background, components numbered from 1
    std::vector<std::size_t> sizes; // sizes[k-1] = pixel count of component k
    int count() const { return static_cast<int>(sizes.size()); }
};

/// Label 8-connected components of a 2D mask (flood fill).
inline Components2D label_components_2d(const Mask2D& mask) {
    Components2D out;
    out.labels = Grid2D<std::int32_t>(mask.nx(), mask.ny(), 0);
    std::vector<std::size_t> stack;
    std::int32_t next = 0;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || out.labels[start]) continue;
        ++next;
        std::size_t sz = 0;
        stack.push_back(start);
        out.labels[start] = next;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++sz;
            const int x = static_cast<int>(i % mask.nx());
            const int y = static_cast<int>(i / mask.nx());
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (!mask.in_bounds(nx, ny)) continue;
                    const std::size_t j = mask.index(nx, ny);
                    if (mask[j] && !out.labels[j]) {
                        out.labels[j] = next;
                        stack.push_back(j);
                    }
                }
        }
        out.sizes.push_back(sz);
    }
    return out;
}

struct Components3D {
    Grid3D<std::int32_t> labels;
    std::vector<std::size_t> sizes;
    int count() const { return static_cast<int>(sizes.size()); }
};

/// Label connected components of a 3D mask. connectivity: 6 or 26.
inline Components3D label_components_3d(const Mask3D& mask, int connectivity = 26) {
    Components3D out;
    out.labels = Grid3D<std::int32_t>(mask.nx(), mask.ny(), mask.nz(), 0);
    std::vector<std::size_t> stack;
    std::int32_t next = 0;
    const std::size_t plane = static_cast<std::size_t>(mask.nx()) * mask.ny();
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || out.labels[start]) continue;
        ++next;
        std::size_t sz = 0;
        stack.push_back(start);
        out.labels[start] = next;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++sz;
            const int z = static_cast<int>(i / plane);
            const int y = static_cast<int>((i % plane) / mask.nx());
            const int x = static_cast<int>(i % mask.nx());
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0 && dz == 0) continue;
                        if (connectivity == 6 && (dx != 0) + (dy != 0) + (dz != 0) > 1) continue;
                        const int nx = x + dx, ny = y + dy, nz = z + dz;
                        if (!mask.in_bounds(nx, ny, nz)) continue;
                        const std::size_t j = mask.index(nx, ny, nz);
                        if (mask[j] && !out.labels[j]) {
                            out.labels[j] = next;
                            stack.push_back(j);
                        }
                    }
        }
        out.sizes.push_back(sz);
    }
    return out;
}

} // namespace xrforge
