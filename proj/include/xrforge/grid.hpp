// grid.hpp - dense 2D/3D grid containers with x-fastest storage.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "xrforge/errors.hpp"

namespace xrforge {

/// Dense 3D grid, linearized x-fastest: index = x + nx*(y + ny*z).
template <typename T>
class Grid3D {
public:
    Grid3D() = default;
    Grid3D(int nx, int ny, int nz, T fill = T{})
        : nx_(nx), ny_(ny), nz_(nz),
          data_(static_cast<std::size_t>(nx) * ny * nz, fill) {
        if (nx < 1 || ny < 1 || nz < 1)
            throw parameter_error("Grid3D: dimensions must be >= 1");
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    std::array<int, 3> dims() const { return {nx_, ny_, nz_}; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx_) *
                   (static_cast<std::size_t>(y) +
                    static_cast<std::size_t>(ny_) * static_cast<std::size_t>(z));
    }

    T& at(int x, int y, int z) { return data_[index(x, y, z)]; }
    const T& at(int x, int y, int z) const { return data_[index(x, y, z)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx_ && y >= 0 && y < ny_ && z >= 0 && z < nz_;
    }

    std::vector<T>& raw() { return data_; }
    const std::vector<T>& raw() const { return data_; }

    bool dims_match(const Grid3D& other) const {
        return nx_ == other.nx_ && ny_ == other.ny_ && nz_ == other.nz_;
    }

    friend bool operator==(const Grid3D& a, const Grid3D& b) {
        return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.nz_ == b.nz_ && a.data_ == b.data_;
    }

private:
    int nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<T> data_;
};

/// Dense 2D grid, linearized x-fastest: index = x + nx*y.
template <typename T>
class Grid2D {
public:
    Grid2D() = default;
    Grid2D(int nx, int ny, T fill = T{})
        : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * ny, fill) {
        if (nx < 1 || ny < 1)
            throw parameter_error("Grid2D: dimensions must be >= 1");
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx_) * static_cast<std::size_t>(y);
    }

    T& at(int x, int y) { return data_[index(x, y)]; }
    const T& at(int x, int y) const { return data_[index(x, y)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < nx_ && y >= 0 && y < ny_;
    }

    std::vector<T>& raw() { return data_; }
    const std::vector<T>& raw() const { return data_; }

    bool dims_match(const Grid2D& other) const {
        return nx_ == other.nx_ && ny_ == other.ny_;
    }

    friend bool operator==(const Grid2D& a, const Grid2D& b) {
        return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.data_ == b.data_;
    }

private:
    int nx_ = 0, ny_ = 0;
    std::vector<T> data_;
};

using Mask3D = Grid3D<std::uint8_t>;
using Mask2D = Grid2D<std::uint8_t>;

} // namespace xrforge
