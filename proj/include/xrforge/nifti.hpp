// nifti.hpp - minimal NIfTI-1 single-file reader/writer (.nii / .nii.gz).
//
// Supports the scalar datatypes emitted by common CT tooling, byte-swapped
// files, scl_slope/scl_inter rescaling, and derives the superior-inferior
// axis from the sform/qform rotation when one is present.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "xrforge/errors.hpp"
#include "xrforge/volume.hpp"

namespace xrforge {

namespace nifti_detail {

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;   // 348
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

enum DataType : std::int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
    DT_UINT32 = 768,
};

template <typename T>
void bswap(T& v) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
        std::swap(p[i], p[sizeof(T) - 1 - i]);
}

inline void swap_header(Nifti1Header& h) {
    bswap(h.sizeof_hdr);
    for (auto& d : h.dim) bswap(d);
    bswap(h.datatype);
    bswap(h.bitpix);
    for (auto& p : h.pixdim) bswap(p);
    bswap(h.vox_offset);
    bswap(h.scl_slope);
    bswap(h.scl_inter);
    bswap(h.qform_code);
    bswap(h.sform_code);
    bswap(h.quatern_b);
    bswap(h.quatern_c);
    bswap(h.quatern_d);
    bswap(h.qoffset_x);
    bswap(h.qoffset_y);
    bswap(h.qoffset_z);
    for (auto& v : h.srow_x) bswap(v);
    for (auto& v : h.srow_y) bswap(v);
    for (auto& v : h.srow_z) bswap(v);
}

/// RAII gz handle; zlib reads plain files transparently too.
class GzReader {
public:
    explicit GzReader(const std::string& path) : f_(gzopen(path.c_str(), "rb")) {
        if (!f_) throw format_error("cannot open file: " + path);
    }
    ~GzReader() {
        if (f_) gzclose(f_);
    }
    GzReader(const GzReader&) = delete;
    GzReader& operator=(const GzReader&) = delete;

    void read_exact(void* dst, std::size_t n, const std::string& what) {
        std::size_t done = 0;
        auto* p = static_cast<unsigned char*>(dst);
        while (done < n) {
            const unsigned chunk =
                static_cast<unsigned>(std::min<std::size_t>(n - done, 1u << 30));
            const int got = gzread(f_, p + done, chunk);
            if (got <= 0) throw format_error("truncated file while reading " + what);
            done += static_cast<std::size_t>(got);
        }
    }

private:
    gzFile f_;
};

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// World-z direction row of the voxel-to-world rotation, or nullopt.
inline bool orientation_row(const Nifti1Header& h, std::array<double, 3>& row_z) {
    if (h.sform_code > 0) {
        row_z = {h.srow_z[0], h.srow_z[1], h.srow_z[2]};
        return true;
    }
    if (h.qform_code > 0) {
        const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        double a2 = 1.0 - (b * b + c * c + d * d);
        const double a = a2 > 0 ? std::sqrt(a2) : 0.0;
        const double qfac = (h.pixdim[0] < 0) ? -1.0 : 1.0;
        row_z = {2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b,
                 (a * a + d * d - b * b - c * c) * qfac};
        return true;
    }
    return false;
}

} // namespace nifti_detail

struct NiftiVolume {
    CtVolume volume;
    bool orientation_from_header = false;
};

/// Load a NIfTI-1 single-file volume (.nii or .nii.gz), rescaled to float.
inline NiftiVolume load_nifti(const std::string& path) {
    using namespace nifti_detail;
    GzReader in(path);

    Nifti1Header h{};
    in.read_exact(&h, sizeof(h), "header");
    bool swapped = false;
    if (h.sizeof_hdr != 348) {
        swap_header(h);
        swapped = true;
        if (h.sizeof_hdr != 348)
            throw format_error(path + ": not a NIfTI-1 file (bad sizeof_hdr)");
    }
    if (std::strncmp(h.magic, "n+1", 3) != 0)
        throw format_error(path + ": unsupported NIfTI magic (need single-file n+1)");
    if (h.dim[0] < 3 || h.dim[1] < 1 || h.dim[2] < 1 || h.dim[3] < 1)
        throw format_error(path + ": expected a 3D volume");
    for (int a = 4; a <= h.dim[0] && a < 8; ++a)
        if (h.dim[a] > 1) throw format_error(path + ": higher-dimensional volumes unsupported");

    const int nx = h.dim[1], ny = h.dim[2], nz = h.dim[3];
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;

    // Skip any header extension up to vox_offset.
    const long offset = static_cast<long>(h.vox_offset);
    if (offset < 348) throw format_error(path + ": bad vox_offset");
    if (offset > 348) {
        std::vector<char> skip(static_cast<std::size_t>(offset) - 348);
        in.read_exact(skip.data(), skip.size(), "header extension");
    }

    NiftiVolume out;
    out.volume.data = Grid3D<float>(nx, ny, nz);
    auto& dst = out.volume.data.raw();

    auto load_as = [&](auto tag) {
        using T = decltype(tag);
        std::vector<T> buf(n);
        in.read_exact(buf.data(), n * sizeof(T), "voxel data");
        if (swapped && sizeof(T) > 1)
            for (auto& v : buf) bswap(v);
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(buf[i]);
    };

    switch (h.datatype) {
    case DT_UINT8: load_as(std::uint8_t{}); break;
    case DT_INT8: load_as(std::int8_t{}); break;
    case DT_INT16: load_as(std::int16_t{}); break;
    case DT_UINT16: load_as(std::uint16_t{}); break;
    case DT_INT32: load_as(std::int32_t{}); break;
    case DT_UINT32: load_as(std::uint32_t{}); break;
    case DT_FLOAT32: load_as(float{}); break;
    case DT_FLOAT64: load_as(double{}); break;
    default:
        throw format_error(path + ": unsupported NIfTI datatype " + std::to_string(h.datatype));
    }

    if (h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f))
        for (auto& v : dst) v = v * h.scl_slope + h.scl_inter;

    for (int a = 0; a < 3; ++a) {
        const double s = std::abs(static_cast<double>(h.pixdim[a + 1]));
        out.volume.spacing[a] = s > 0 ? s : 1.0;
    }
    out.volume.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    if (h.sform_code > 0)
        out.volume.origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};

    std::array<double, 3> row_z{};
    if (orientation_row(h, row_z)) {
        int best = 2;
        double mag = -1.0;
        for (int a = 0; a < 3; ++a)
            if (std::abs(row_z[a]) > mag) {
                mag = std::abs(row_z[a]);
                best = a;
            }
        out.volume.si_axis = best;
        out.volume.superior_high = row_z[best] >= 0;
        out.orientation_from_header = true;
    } else {
        out.volume.si_axis = 2;
        out.volume.superior_high = true;
        out.orientation_from_header = false;
    }

    for (float v : dst)
        if (!std::isfinite(v)) throw data_error(path + ": non-finite voxel value");
    return out;
}

namespace nifti_detail {

inline Nifti1Header make_header(const CtVolume& v, std::int16_t datatype, std::int16_t bitpix) {
    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.dim[0] = 3;
    h.dim[1] = static_cast<std::int16_t>(v.nx());
    h.dim[2] = static_cast<std::int16_t>(v.ny());
    h.dim[3] = static_cast<std::int16_t>(v.nz());
    for (int a = 4; a < 8; ++a) h.dim[a] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(v.spacing[a]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.sform_code = 1;
    h.qform_code = 0;
    // Axis-aligned sform mapping the SI voxel axis to world z.
    float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    int world_of_voxel[3]; // voxel axis -> world axis
    int next_world = 0;
    for (int a = 0; a < 3; ++a) {
        if (a == v.si_axis) {
            world_of_voxel[a] = 2;
        } else {
            world_of_voxel[a] = next_world++;
        }
    }
    for (int a = 0; a < 3; ++a) {
        const int w = world_of_voxel[a];
        const double sign = (a == v.si_axis && !v.superior_high) ? -1.0 : 1.0;
        rows[w][a] = static_cast<float>(sign * v.spacing[a]);
    }
    h.srow_x[3] = static_cast<float>(v.origin[0]);
    h.srow_y[3] = static_cast<float>(v.origin[1]);
    h.srow_z[3] = static_cast<float>(v.origin[2]);
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

class GzWriter {
public:
    GzWriter(const std::string& path, bool gz) : gz_(gz) {
        if (gz_) {
            f_ = gzopen(path.c_str(), "wb6");
            if (!f_) throw format_error("cannot open for write: " + path);
        } else {
            os_.open(path, std::ios::binary);
            if (!os_) throw format_error("cannot open for write: " + path);
        }
    }
    ~GzWriter() {
        if (gz_ && f_) gzclose(f_);
    }

    void write(const void* src, std::size_t n) {
        if (gz_) {
            if (gzwrite(f_, src, static_cast<unsigned>(n)) != static_cast<int>(n))
                throw format_error("gzwrite failed");
        } else {
            os_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
            if (!os_) throw format_error("write failed");
        }
    }

private:
    bool gz_;
    gzFile f_ = nullptr;
    std::ofstream os_;
};

template <typename T>
void save_nifti_impl(const std::string& path, const CtVolume& v, const std::vector<T>& data,
                     std::int16_t datatype) {
    Nifti1Header h = make_header(v, datatype, static_cast<std::int16_t>(8 * sizeof(T)));
    GzWriter out(path, ends_with(path, ".gz"));
    out.write(&h, sizeof(h));
    const char pad[4] = {0, 0, 0, 0};
    out.write(pad, 4); // extension flag, data starts at 352
    out.write(data.data(), data.size() * sizeof(T));
}

} // namespace nifti_detail

/// Write a float32 NIfTI-1 volume (.nii, or .nii.gz when the path ends .gz).
inline void save_nifti(const std::string& path, const CtVolume& v) {
    nifti_detail::save_nifti_impl(path, v, v.data.raw(), nifti_detail::DT_FLOAT32);
}

/// Write an integer label volume as uint16 using the CT's grid metadata.
inline void save_nifti_labels(const std::string& path, const Grid3D<std::uint16_t>& labels,
                              const CtVolume& like) {
    CtVolume meta = like;
    meta.data = Grid3D<float>(labels.nx(), labels.ny(), labels.nz());
    nifti_detail::save_nifti_impl(path, meta, labels.raw(), nifti_detail::DT_UINT16);
}

/// Write a binary mask as uint8 using the CT's grid metadata.
inline void save_nifti_mask(const std::string& path, const Mask3D& mask, const CtVolume& like) {
    CtVolume meta = like;
    meta.data = Grid3D<float>(mask.nx(), mask.ny(), mask.nz());
    nifti_detail::save_nifti_impl(path, meta, mask.raw(), nifti_detail::DT_UINT8);
}

} // namespace xrforge
