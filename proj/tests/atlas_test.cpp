#include <cmath>
#include <string>

#include "doctest.h"
#include "dtb/atlas.hpp"
#include "dtb/error.hpp"
#include "fixtures.hpp"

using namespace dtb;

namespace {

std::string one_region_json() {
    return R"({"species":"human","spacing_mm":1,"regions":[{"label":1,"name":"A","functional":true,"voxels":[{"id":0,"pos":[0,0,0]}]}]})";
}

Atlas aal_shaped(int voxels_per_region) {
    std::vector<RegionSpec> specs;
    VoxelId next = 0;
    for (int label = 1; label <= kAalRegionCount; ++label) {
        RegionSpec s{label, std::string(aal_region_name(label)), aal_default_functional(label), {}};
        for (int i = 0; i < voxels_per_region; ++i) s.voxels.push_back({next++, Vec3{double(label), double(i), 0.0}});
        specs.push_back(std::move(s));
    }
    return Atlas::build(Species::human(), 1.0, std::move(specs));
}

}  // namespace

TEST_SUITE("atlas") {
    TEST_CASE("single region file gives its voxel as the centroid") {
        Atlas a = parse_atlas(one_region_json());
        REQUIRE(a.regions().size() == 1);
        CHECK(a.regions()[0].centroid_mm == Vec3{0, 0, 0});
        CHECK(a.voxel(0).region_label == 1);
    }

    TEST_CASE("116-region table yields 92 functional regions") {
        Atlas a = aal_shaped(2);
        CHECK(a.regions().size() == 116);
        CHECK(functional_regions(a).size() == 92);
        for (int label = 1; label <= kAalRegionCount; ++label) CHECK_FALSE(aal_region_name(label).empty());
        CHECK(aal_region_name(0).empty());
        CHECK(aal_region_name(117).empty());
    }

    TEST_CASE("AAL name table matches the labels used in the case studies") {
        Atlas a = aal_shaped(1);
        CHECK(region_by_label(a, 35).name == "Hippocampus_L");
        CHECK(region_by_label(a, 36).name == "Hippocampus_R");
        CHECK(region_by_label(a, 16).name == "Frontal_Inf_Orb_R");
        CHECK(region_by_label(a, 23).name == "Frontal_Sup_Medial_L");
        CHECK(region_by_label(a, 65).name == "Precuneus_L");
        CHECK(region_by_label(a, 59).name == "Parietal_Inf_L");
        CHECK(region_by_label(a, 39).name == "Amygdala_L");
        CHECK_FALSE(region_by_label(a, 93).functional);
        CHECK(region_by_label(a, 92).functional);
    }

    TEST_CASE("unknown label is not found") {
        Atlas a = aal_shaped(1);
        CHECK_THROWS_AS(region_by_label(a, 999), NotFoundError);
        CHECK_THROWS_AS(a.voxel(100000), NotFoundError);
    }

    TEST_CASE("voxel listed under two regions is rejected") {
        const std::string text =
            R"({"species":"human","spacing_mm":1,"regions":[)"
            R"({"label":1,"name":"A","functional":true,"voxels":[{"id":7,"pos":[0,0,0]}]},)"
            R"({"label":2,"name":"B","functional":true,"voxels":[{"id":7,"pos":[1,0,0]}]}]})";
        CHECK_THROWS_AS(parse_atlas(text), FormatError);
    }

    TEST_CASE("duplicate labels, empty region list and unknown keys are rejected") {
        CHECK_THROWS_AS(parse_atlas(R"({"species":"human","spacing_mm":1,"regions":[]})"), FormatError);
        CHECK_THROWS_AS(parse_atlas(R"({"species":"human","spacing_mm":1,"regions":[)"
                                    R"({"label":1,"name":"A","functional":true,"voxels":[{"id":0,"pos":[0,0,0]}]},)"
                                    R"({"label":1,"name":"B","functional":true,"voxels":[{"id":1,"pos":[0,0,0]}]}]})"),
                        FormatError);
        CHECK_THROWS_AS(parse_atlas(R"({"species":"human","spacing_mm":1,"colour":"red","regions":[]})"), FormatError);
        CHECK_THROWS_AS(parse_atlas("{not json"), FormatError);
    }

    TEST_CASE("sphere radius follows the cube root of the voxel count") {
        Region one;
        one.voxel_ids = {0};
        CHECK(region_sphere_radius(one, 2.0) == doctest::Approx(2.0));
        Region eight;
        eight.voxel_ids.resize(8);
        CHECK(region_sphere_radius(eight, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
        Region a, b;
        a.voxel_ids.resize(626);
        b.voxel_ids.resize(596);
        CHECK(region_sphere_radius(a, 1.0) > region_sphere_radius(b, 1.0));
        const double ratio = std::pow(region_sphere_radius(a, 1.5), 3) / std::pow(region_sphere_radius(b, 1.5), 3);
        CHECK(std::abs(ratio - 626.0 / 596.0) < 1e-9 * (626.0 / 596.0));
        CHECK_THROWS_AS(region_sphere_radius(a, 0.0), std::invalid_argument);
    }

    TEST_CASE("functional_regions edge cases") {
        std::vector<RegionSpec> all_on{{1, "A", true, {{0, {}}}}, {2, "B", true, {{1, {}}}}};
        CHECK(functional_regions(Atlas::build(Species::human(), 1.0, all_on)).size() == 2);
        std::vector<RegionSpec> all_off{{1, "A", false, {{0, {}}}}};
        CHECK(functional_regions(Atlas::build(Species::human(), 1.0, all_off)).empty());
    }

    TEST_CASE("partition and centroid invariants hold on F1") {
        const Atlas& a = testing::f1().atlas;
        std::size_t total = 0;
        for (const Region& r : a.regions()) {
            total += r.voxel_ids.size();
            Vec3 sum;
            for (VoxelId id : r.voxel_ids) sum += a.voxel(id).position_mm;
            const Vec3 mean = sum / static_cast<double>(r.voxel_ids.size());
            CHECK(distance(mean, r.centroid_mm) <= 1e-9 * std::max(1.0, norm(mean)));
        }
        CHECK(total == a.voxel_count());
    }

    TEST_CASE("serialize and parse round-trip to an equal atlas") {
        const Atlas& a = testing::f1().atlas;
        CHECK(parse_atlas(serialize_atlas(a)) == a);
        Atlas other = parse_atlas(R"({"species":"marmoset","spacing_mm":0.5,"regions":[{"label":4,"name":"X","functional":false,"voxels":[{"id":3,"pos":[1.25,-2,3]}]}]})");
        CHECK(other.species().to_string() == "marmoset");
        CHECK(parse_atlas(serialize_atlas(other)) == other);
    }
}
