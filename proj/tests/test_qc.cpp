#include "catch2/catch_amalgamated.hpp"

#include "xrforge/phantoms.hpp"
#include "xrforge/qc.hpp"

using namespace xrforge;

namespace {

Mask2D blob_mask(int nx, int ny, std::initializer_list<std::array<int, 4>> rects) {
    Mask2D m(nx, ny, 0);
    for (const auto& r : rects)
        for (int y = r[1]; y < r[1] + r[3]; ++y)
            for (int x = r[0]; x < r[0] + r[2]; ++x) m.at(x, y) = 1;
    return m;
}

} // namespace

TEST_CASE("clean stack passes vertebra consistency") {
    const LabelSet labels = vertebra_stack({32, 32, 64}, StackVariant::clean);
    const QcVerdict v = check_vertebra_consistency(labels);
    REQUIRE(v.accepted);
    REQUIRE(v.findings.empty());
}

TEST_CASE("60 percent adjacent overlap is rejected") {
    const LabelSet labels = vertebra_stack({32, 32, 64}, StackVariant::overlap_pair);
    const QcVerdict v = check_vertebra_consistency(labels);
    REQUIRE_FALSE(v.accepted);
    bool overlap_found = false;
    for (const auto& f : v.findings)
        if (f.reason == QcReason::adjacent_overlap) overlap_found = true;
    REQUIRE(overlap_found);
}

TEST_CASE("three vertebrae in one axial slice are rejected") {
    const LabelSet labels = vertebra_stack({48, 32, 64}, StackVariant::triple_slice);
    const QcVerdict v = check_vertebra_consistency(labels);
    REQUIRE_FALSE(v.accepted);
    bool impossible = false;
    for (const auto& f : v.findings)
        if (f.reason == QcReason::impossible_slice_count) impossible = true;
    REQUIRE(impossible);
    REQUIRE_FALSE(v.offending_slices.empty());
}

TEST_CASE("two vertebrae sharing a slice is anatomically fine") {
    // an adjacent pair may legitimately straddle the same axial slice as
    // long as the voxel overlap stays under threshold
    const auto& tax = default_taxonomy();
    LabelSet labels({16, 16, 20}, tax);
    const auto verts = tax.vertebra_ids();
    Mask3D a(16, 16, 20, 0), b(16, 16, 20, 0);
    for (int z = 2; z <= 8; ++z) a.at(4, 4, z) = 1;
    for (int z = 8; z <= 14; ++z) b.at(10, 10, z) = 1; // same slice 8, zero overlap
    labels.set_mask(verts[0], std::move(a));
    labels.set_mask(verts[1], std::move(b));
    const QcVerdict v = check_vertebra_consistency(labels);
    REQUIRE(v.accepted);
}

TEST_CASE("overlap threshold is strict: exactly tau passes, above fails") {
    const auto& tax = default_taxonomy();
    const auto verts = tax.vertebra_ids();
    // smaller mask: 20 voxels; overlap 1 voxel = 0.05 exactly
    auto build = [&](int overlap_vox) {
        LabelSet labels({8, 8, 40}, tax);
        Mask3D a(8, 8, 40, 0), b(8, 8, 40, 0);
        for (int z = 0; z < 20; ++z) a.at(2, 2, z) = 1;
        for (int z = 20 - overlap_vox; z < 40 - overlap_vox; ++z) b.at(2, 2, z) = 1;
        labels.set_mask(verts[3], std::move(a));
        labels.set_mask(verts[4], std::move(b));
        return labels;
    };
    REQUIRE(check_vertebra_consistency(build(1), 0.05).accepted);        // == tau
    REQUIRE_FALSE(check_vertebra_consistency(build(2), 0.05).accepted);  // > tau
}

TEST_CASE("nonadjacent vertebra overlap is not checked") {
    const auto& tax = default_taxonomy();
    const auto verts = tax.vertebra_ids();
    LabelSet labels({8, 8, 16}, tax);
    Mask3D a(8, 8, 16, 0), c(8, 8, 16, 0);
    for (int z = 4; z < 10; ++z) {
        a.at(3, 3, z) = 1;
        c.at(3, 3, z) = 1; // t2 and t4 fully co-located: nonsense, but not this check's job
    }
    labels.set_mask(verts[0], std::move(a));
    labels.set_mask(verts[2], std::move(c));
    const QcVerdict v = check_vertebra_consistency(labels);
    for (const auto& f : v.findings) REQUIRE(f.reason != QcReason::adjacent_overlap);
}

TEST_CASE("component cleanup: dominant blob survives, debris is erased") {
    // sizes 1000, 50, 5: both small ones fall under 0.10 * 1000
    const Mask2D m = blob_mask(100, 60, {{0, 0, 50, 20},   // 1000
                                         {60, 30, 10, 5},  // 50
                                         {90, 55, 5, 1}}); // 5
    const CleanResult r = clean_components_2d(m, 0.10);
    REQUIRE(r.components_before == 3);
    REQUIRE(r.components_after == 1);
    REQUIRE(r.reliable);
    REQUIRE(count_pixels(r.mask) == 1000);
    REQUIRE(r.largest_fraction_second == 0.0);
}

TEST_CASE("component cleanup: two comparable blobs flag unreliable") {
    const Mask2D m = blob_mask(100, 60, {{0, 0, 50, 20},    // 1000
                                         {60, 30, 30, 30}});// 900
    const CleanResult r = clean_components_2d(m, 0.10);
    REQUIRE(r.components_after == 2);
    REQUIRE_FALSE(r.reliable);
    REQUIRE_THAT(r.largest_fraction_second, Catch::Matchers::WithinAbs(0.9, 1e-12));
    REQUIRE(count_pixels(r.mask) == 1900); // nothing erased
}

TEST_CASE("component cleanup threshold is inclusive") {
    // 100 == 0.10 * 1000 must be kept
    const Mask2D m = blob_mask(100, 60, {{0, 0, 50, 20}, {60, 30, 10, 10}});
    const CleanResult r = clean_components_2d(m, 0.10);
    REQUIRE(r.components_after == 2);
    REQUIRE_FALSE(r.reliable);
}

TEST_CASE("empty projected mask is unreliable by definition") {
    const Mask2D m(32, 32, 0);
    const CleanResult r = clean_components_2d(m);
    REQUIRE_FALSE(r.reliable);
    REQUIRE(r.components_before == 0);
    REQUIRE(r.components_after == 0);
}

TEST_CASE("single component is reliable and untouched") {
    const Mask2D m = blob_mask(40, 40, {{5, 5, 20, 20}});
    const CleanResult r = clean_components_2d(m);
    REQUIRE(r.reliable);
    REQUIRE(r.mask.raw() == m.raw());
}

TEST_CASE("cleanup uses 8-connectivity") {
    // two pixels touching diagonally form one component
    Mask2D m(4, 4, 0);
    m.at(1, 1) = 1;
    m.at(2, 2) = 1;
    const CleanResult r = clean_components_2d(m);
    REQUIRE(r.components_before == 1);
    REQUIRE(r.reliable);
}
