#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "xrforge/nifti.hpp"
#include "xrforge/phantoms.hpp"
#include "xrforge/png.hpp"
#include "xrforge/volume.hpp"

using namespace xrforge;

namespace {

// Trilinear interpolation reproduces any function that is affine in each
// coordinate, so a planar field is an exact oracle.
double plane(double x, double y, double z) { return 2.0 + 0.5 * x - 1.25 * y + 3.0 * z; }

CtVolume plane_volume(std::array<int, 3> dims) {
    CtVolume v = constant_volume(dims, 0.0f, {1.0, 2.0, 0.5});
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x)
                v.data.at(x, y, z) = static_cast<float>(plane(x, y, z));
    return v;
}

} // namespace

TEST_CASE("trilinear interpolation is exact on planar fields") {
    const CtVolume v = plane_volume({6, 5, 4});
    for (double fx : {0.0, 0.5, 1.75, 4.999})
        for (double fy : {0.0, 1.5, 3.25})
            for (double fz : {0.0, 0.5, 2.9}) {
                const double got = sample_trilinear(v.data, fx, fy, fz);
                REQUIRE_THAT(got, Catch::Matchers::WithinAbs(plane(fx, fy, fz), 1e-4));
            }
}

TEST_CASE("trilinear at integer coordinates returns the voxel") {
    const CtVolume v = plane_volume({4, 4, 4});
    REQUIRE(sample_trilinear(v.data, 2.0, 3.0, 1.0) ==
            Catch::Approx(v.data.at(2, 3, 1)).margin(1e-6));
}

TEST_CASE("clip_hu clamps to the window") {
    CtVolume v = constant_volume({2, 2, 2}, 0.0f);
    v.data.at(0, 0, 0) = -2000.0f;
    v.data.at(1, 1, 1) = 4000.0f;
    const CtVolume c = clip_hu(v, -1000.0, 2000.0);
    REQUIRE(c.data.at(0, 0, 0) == -1000.0f);
    REQUIRE(c.data.at(1, 1, 1) == 2000.0f);
    REQUIRE(c.data.at(1, 0, 0) == 0.0f);
}

TEST_CASE("resample preserves constant fields and world extent") {
    const CtVolume v = constant_volume({8, 8, 8}, 123.0f, {2.0, 2.0, 2.0});
    const CtVolume r = resample(v, {1.0, 1.0, 1.0});
    for (float f : r.data.raw()) REQUIRE(f == Catch::Approx(123.0f).margin(1e-4));
    // world extent preserved within one voxel of the target grid
    for (int a = 0; a < 3; ++a) {
        const double before = v.dims()[a] * v.spacing[a];
        const double after = r.dims()[a] * r.spacing[a];
        REQUIRE(std::fabs(before - after) <= 1.0 + 1e-9);
    }
}

TEST_CASE("resample onto the same spacing is identity") {
    CtVolume v = constant_volume({5, 4, 3}, 0.0f, {1.5, 1.5, 1.5});
    for (std::size_t i = 0; i < v.data.size(); ++i)
        v.data[i] = static_cast<float>(i % 17);
    const CtVolume r = resample(v, v.spacing);
    REQUIRE(r.dims() == v.dims());
    for (std::size_t i = 0; i < v.data.size(); ++i)
        REQUIRE(r.data[i] == Catch::Approx(v.data[i]).margin(1e-5));
}

TEST_CASE("canonicalize_orientation is identity on canonical volumes") {
    const CtVolume v = plane_volume({4, 5, 6});
    const CtVolume c = canonicalize_orientation(v);
    REQUIRE(c.dims() == v.dims());
    REQUIRE(c.data.raw() == v.data.raw());
}

TEST_CASE("canonicalize_orientation flips an inverted z axis") {
    CtVolume v = plane_volume({3, 3, 4});
    v.superior_high = false;
    const CtVolume c = canonicalize_orientation(v);
    REQUIRE(c.superior_high);
    REQUIRE(c.si_axis == 2);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x)
                REQUIRE(c.data.at(x, y, z) == v.data.at(x, y, 3 - z));
}

TEST_CASE("canonicalize_orientation moves a foreign SI axis to z") {
    CtVolume v = plane_volume({3, 4, 5});
    v.si_axis = 0; // superior runs along x
    const CtVolume c = canonicalize_orientation(v);
    REQUIRE(c.si_axis == 2);
    REQUIRE(c.dims()[2] == 3);
    // volume of data preserved
    REQUIRE(c.data.size() == v.data.size());
}

TEST_CASE("nifti round-trip preserves voxels, spacing, and gz variant") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "xrforge_nifti_rt";
    fs::create_directories(dir);
    CtVolume v = plane_volume({7, 6, 5});
    v.spacing = {0.7, 1.1, 2.3};

    for (const char* name : {"a.nii", "a.nii.gz"}) {
        const std::string path = (dir / name).string();
        save_nifti(path, v);
        const CtVolume r = load_nifti(path).volume;
        REQUIRE(r.dims() == v.dims());
        for (int a = 0; a < 3; ++a)
            REQUIRE(r.spacing[a] == Catch::Approx(v.spacing[a]).margin(1e-5));
        for (std::size_t i = 0; i < v.data.size(); ++i)
            REQUIRE(r.data[i] == Catch::Approx(v.data[i]).margin(1e-4));
    }
    fs::remove_all(dir);
}

TEST_CASE("png writer emits a decodable signature and correct dimensions") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "xrforge_png";
    fs::create_directories(dir);
    Grid2D<std::uint8_t> img(37, 21, 0);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint8_t>(i);
    const std::string path = (dir / "g.png").string();
    save_png_gray8(path, img);

    std::ifstream in(path, std::ios::binary);
    unsigned char head[26];
    in.read(reinterpret_cast<char*>(head), sizeof(head));
    REQUIRE(in.good());
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    REQUIRE(std::memcmp(head, sig, 8) == 0);
    const auto be32 = [&](int off) {
        return (head[off] << 24) | (head[off + 1] << 16) | (head[off + 2] << 8) |
               head[off + 3];
    };
    REQUIRE(std::string(reinterpret_cast<char*>(head + 12), 4) == "IHDR");
    REQUIRE(be32(16) == 37);
    REQUIRE(be32(20) == 21);
    REQUIRE(head[24] == 8); // bit depth
    REQUIRE(head[25] == 0); // grayscale
    fs::remove_all(dir);
}

TEST_CASE("validate rejects nonpositive spacing") {
    CtVolume v = constant_volume({2, 2, 2}, 0.0f);
    v.spacing[1] = 0.0;
    REQUIRE_THROWS_AS(v.validate(), parameter_error);
}
