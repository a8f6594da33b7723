#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "dtb/connectome.hpp"
#include "dtb/error.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace dtb;

namespace {

ConnectivityMatrix distinct_matrix(std::size_t n, std::uint64_t seed) {
    std::vector<MatrixEntry> entries;
    std::vector<double> weights(n);
    std::iota(weights.begin(), weights.end(), 1.0);
    std::shuffle(weights.begin(), weights.end(), std::mt19937_64(seed));
    for (std::size_t i = 0; i < n; ++i) entries.push_back({static_cast<VoxelId>(i), static_cast<VoxelId>(i + 1), weights[i]});
    return ConnectivityMatrix::build(n + 1, std::move(entries));
}

std::set<std::pair<VoxelId, VoxelId>> keys(const EdgeSet& e) {
    std::set<std::pair<VoxelId, VoxelId>> out;
    for (const Edge& x : e.edges) out.insert({x.src, x.dst});
    return out;
}

Atlas three_voxels(int regions) {
    std::vector<RegionSpec> specs;
    if (regions == 1) {
        specs.push_back({1, "A", true, {{0, {}}, {1, {1, 0, 0}}, {2, {2, 0, 0}}}});
    } else {
        specs.push_back({1, "A", true, {{0, {}}, {1, {1, 0, 0}}}});
        specs.push_back({2, "B", true, {{2, {2, 0, 0}}}});
    }
    return Atlas::build(Species::human(), 1.0, std::move(specs));
}

}  // namespace

TEST_SUITE("connectome") {
    TEST_CASE("DTI loading validates entries") {
        Atlas atlas = three_voxels(1);
        auto m = parse_dti("3,2\n0,1,2\n1,2,6\n", atlas);
        CHECK(m.size() == 2);
        CHECK_FALSE(m.normalized());
        CHECK_THROWS_AS(parse_dti("3,1\n1,1,1\n", atlas), FormatError);
        CHECK_THROWS_AS(parse_dti("3,1\n0,1,-1\n", atlas), FormatError);
        CHECK_THROWS_AS(parse_dti("3,1\n0,9,1\n", atlas), FormatError);
        CHECK_THROWS_AS(parse_dti("3,2\n0,1,1\n0,1,2\n", atlas), FormatError);
        CHECK_THROWS_AS(parse_dti("3,2\n0,1,1\n", atlas), FormatError);
    }

    TEST_CASE("F1 DTI entry count matches the manifest") {
        const auto& f = testing::f1();
        CHECK(f.dti.size() == f.spec.dti_edge_count);
        CHECK(nlohmann::json::parse(f.manifest_json()).at("dti_edge_count").get<std::size_t>() == 20000);
    }

    TEST_CASE("global normalization") {
        auto m = ConnectivityMatrix::build(3, {{0, 1, 2.0}, {1, 2, 6.0}});
        auto n = global_normalize(m);
        CHECK(n.normalized());
        CHECK(n.entries()[0].weight == 0.25);
        CHECK(n.entries()[1].weight == 0.75);
        CHECK(global_normalize(ConnectivityMatrix::build(2, {{0, 1, 3.5}})).entries()[0].weight == 1.0);
        CHECK_THROWS_AS(global_normalize(ConnectivityMatrix::build(2, {{0, 1, 0.0}})), DegenerateInputError);

        const auto& f = testing::f1();
        auto nf = global_normalize(f.dti);
        CHECK(std::abs(nf.total_weight() - 1.0) <= 1e-9);
        std::vector<std::size_t> before(f.dti.size()), after(f.dti.size());
        std::iota(before.begin(), before.end(), 0);
        std::iota(after.begin(), after.end(), 0);
        std::stable_sort(before.begin(), before.end(), [&](auto a, auto b) { return f.dti.entries()[a].weight < f.dti.entries()[b].weight; });
        std::stable_sort(after.begin(), after.end(), [&](auto a, auto b) { return nf.entries()[a].weight < nf.entries()[b].weight; });
        CHECK(before == after);
    }

    TEST_CASE("top fraction") {
        auto m = distinct_matrix(10, 3);
        auto one = top_fraction(m, 0.1);
        REQUIRE(one.size() == 1);
        CHECK(one.edges[0].weight == 10.0);
        CHECK(one.edges[0].rank_pct == 1.0);
        CHECK(top_fraction(m, 1.0).size() == 10);
        CHECK(top_fraction_count(380360, 0.1) == 38036);
        CHECK(top_fraction_count(10, 0.25) == 3);

        const auto& f = testing::f1();
        auto small = keys(top_fraction(f.dti, 0.05));
        auto large = keys(top_fraction(f.dti, 0.2));
        CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
    }

    TEST_CASE("rank percentiles") {
        auto m = ConnectivityMatrix::build(5, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 2.0}, {3, 4, 5.0}});
        auto r = rank_percentiles(m);
        CHECK(r == std::vector<double>{0.25, 0.75, 0.75, 1.0});
    }

    TEST_CASE("threshold filter keeps the stated top share") {
        auto edges = all_edges(distinct_matrix(100, 11));
        CHECK(threshold_filter(edges, 0.8).size() == 20);
        CHECK(threshold_filter(edges, 0.0).size() == 100);
        auto top = threshold_filter(edges, 1.0);
        REQUIRE(top.size() == 1);
        CHECK(top.edges[0].weight == 100.0);

        auto tied = all_edges(ConnectivityMatrix::build(4, {{0, 1, 3.0}, {1, 2, 3.0}, {2, 3, 1.0}}));
        CHECK(threshold_filter(tied, 1.0).size() == 2);

        std::mt19937_64 gen(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 50; ++i) {
            const double a = u(gen), b = u(gen);
            CHECK(keys(threshold_filter(threshold_filter(edges, a), b)) == keys(threshold_filter(edges, std::max(a, b))));
            const double share = double(threshold_filter(edges, a).size()) / 100.0;
            CHECK(std::abs(share - (1.0 - a)) <= 0.01 + 1e-12);
        }

        auto absolute = threshold_filter(edges, 95.0, ThresholdMode::absolute_weight);
        CHECK(absolute.size() == 6);
    }

    TEST_CASE("region adjacency") {
        Atlas two = three_voxels(2);
        auto adj = region_adjacency(ConnectivityMatrix::build(3, {{1, 2, 0.3}}), two);
        CHECK(adj.entries.size() == 1);
        CHECK(adj.at(1, 2) == 0.3);
        CHECK(adj.at(2, 1) == 0.0);
        CHECK(region_adjacency(ConnectivityMatrix::build(3, {{0, 1, 0.3}}), two).entries.empty());

        const auto& f = testing::f1();
        auto fast = region_adjacency(f.dti, f.atlas);
        auto slow = oracle::adjacency(f.dti, f.atlas);
        REQUIRE(fast.entries.size() == slow.size());
        double sum = 0.0;
        for (const auto& [k, w] : slow) {
            CHECK(fast.at(k.first, k.second) == doctest::Approx(w).epsilon(1e-12));
            sum += w;
        }
        const double total = f.dti.total_weight();
        CHECK(std::abs(sum + intra_region_weight(f.dti, f.atlas) - total) <= 1e-9 * total);
    }

    TEST_CASE("edges from regions") {
        const auto& f = testing::f1();
        auto edges = all_edges(f.dti);
        std::set<RegionLabel> all;
        for (const Region& r : f.atlas.regions()) all.insert(r.label);
        CHECK(edges_from_regions(edges, f.atlas, all).size() == edges.size());
        CHECK(edges_from_regions(edges, f.atlas, {}).empty());
        CHECK_THROWS_AS(edges_from_regions(edges, f.atlas, {999}), NotFoundError);

        const std::set<RegionLabel> dmn{23, 24, 35, 36, 65, 66};
        std::set<std::pair<VoxelId, VoxelId>> expected;
        for (const Edge& e : edges.edges) {
            if (dmn.contains(oracle::label_of(f.atlas, e.src))) expected.insert({e.src, e.dst});
        }
        CHECK(!expected.empty());
        CHECK(keys(edges_from_regions(edges, f.atlas, dmn)) == expected);
    }

    TEST_CASE("direction gradient") {
        auto two = direction_gradient({}, 2);
        CHECK(two[0] == ColorRGBA{0, 1, 0, 1});
        CHECK(two[1] == ColorRGBA{1, 0.5, 0, 1});
        auto three = direction_gradient({}, 3);
        CHECK(three[1] == ColorRGBA{0.5, 0.75, 0, 1});
        auto forward = direction_gradient(Edge{1, 2, 1.0, 1.0}, 5);
        auto backward = direction_gradient(Edge{2, 1, 1.0, 1.0}, 5);
        std::reverse(backward.begin(), backward.end());
        CHECK(forward.front() == ColorRGBA{0, 1, 0, 1});
        CHECK(backward.front() == ColorRGBA{1, 0.5, 0, 1});
        CHECK_THROWS_AS(direction_gradient({}, 1), std::invalid_argument);
    }

    TEST_CASE("symmetrize sums both directions") {
        auto s = symmetrize(ConnectivityMatrix::build(3, {{0, 1, 1.0}, {1, 0, 2.0}, {1, 2, 4.0}}));
        CHECK(s.size() == 4);
        CHECK(std::abs(s.total_weight() - 14.0) < 1e-12);
    }

    TEST_CASE("DTI round-trips through CSV and binary") {
        const auto& f = testing::f1();
        CHECK(parse_dti(serialize_dti(f.dti, DtiEncoding::csv), f.atlas) == f.dti);
        auto bin = parse_dti(serialize_dti(f.dti, DtiEncoding::binary), f.atlas);
        REQUIRE(bin.size() == f.dti.size());
        for (std::size_t i = 0; i < bin.size(); ++i) {
            CHECK(bin.entries()[i].src == f.dti.entries()[i].src);
            CHECK(bin.entries()[i].weight == doctest::Approx(f.dti.entries()[i].weight).epsilon(1e-6));
        }
    }
}
