// Acceptance run: one PASS/FAIL line per criterion, each timed against its limit.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/fdeb.hpp"
#include "dtb/io.hpp"
#include "dtb/parallel.hpp"
#include "dtb/scene.hpp"
#include "dtb/signal.hpp"
#include "dtb/slicer.hpp"
#include "dtb/store.hpp"
#include "dtb/synthgen.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dtb;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool ok = false;
    std::string detail;
};

int failures = 0;

void criterion(const char* name, double limit_s, const std::function<Verdict()>& body) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs < limit_s;
    const bool pass = v.ok && in_time;
    if (!pass) ++failures;
    std::printf("%s  %-28s %s  [%.3f s, limit %.0f s%s]\n", pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs, limit_s,
                in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const Fixture& human() {
    static const Fixture fixture = gen_fixture(human_preset(42));
    return fixture;
}

const Fixture& macaque() {
    static const Fixture fixture = gen_fixture(macaque_preset(42));
    return fixture;
}

bool distinct_weights(const ConnectivityMatrix& m) {
    std::vector<double> w;
    for (const auto& e : m.entries()) w.push_back(e.weight);
    std::sort(w.begin(), w.end());
    return std::adjacent_find(w.begin(), w.end()) == w.end();
}

double max_chord_deviation(const Polyline& l) {
    const Vec3 a = l.points.front(), b = l.points.back();
    const Vec3 dir = (b - a) / norm(b - a);
    double worst = 0.0;
    for (const Vec3& p : l.points) {
        const Vec3 rel = p - a;
        worst = std::max(worst, norm(rel - dir * dot(rel, dir)));
    }
    return worst;
}

bool color_close(const ColorRGBA& c, const ColorRGBA& e) {
    return std::abs(c.r - e.r) <= 1e-12 && std::abs(c.g - e.g) <= 1e-12 && std::abs(c.b - e.b) <= 1e-12 &&
           std::abs(c.a - e.a) <= 1e-12;
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) out[e.path().filename().string()] = read_text_file(e.path());
    return out;
}

}  // namespace

int main() {
    const auto t_gen = Clock::now();
    const Fixture& f1 = testing::f1();
    human();
    macaque();
    std::printf("fixtures generated in %.2f s (F1: %zu voxels, human: %zu voxels / %zu DTI entries, macaque: %zu voxels)\n",
                std::chrono::duration<double>(Clock::now() - t_gen).count(), f1.atlas.voxel_count(),
                human().atlas.voxel_count(), human().dti.size(), macaque().atlas.voxel_count());

    criterion("top-fraction count", 5, [] {
        const auto& m = human().dti;
        const std::size_t n = top_fraction(m, 0.1).size();
        return Verdict{m.size() == 380360 && n == 38036, fmt("%zu of %zu entries selected (expected 38036)", n, m.size())};
    });

    criterion("threshold semantics", 1, [&] {
        std::vector<std::pair<std::string, const ConnectivityMatrix*>> sets{
            {"F1", &f1.dti}, {"human", &human().dti}, {"macaque", &macaque().dti}};
        std::string detail;
        bool ok = true;
        for (const auto& [name, m] : sets) {
            if (!distinct_weights(*m)) {
                ok = false;
                detail += name + ": tied weights; ";
                continue;
            }
            const auto edges = all_edges(*m);
            const std::size_t kept = threshold_filter(edges, 0.8).size();
            const std::size_t expected = static_cast<std::size_t>(std::llround(0.2 * double(edges.size())));
            ok = ok && kept == expected;
            detail += fmt("%s %zu/%zu", name.c_str(), kept, edges.size()) + "; ";
        }
        return Verdict{ok, detail + "tau = 0.8 keeps 20%"};
    });

    criterion("normalization conservation", 1, [&] {
        bool ok = true;
        double worst = 0.0;
        for (const Fixture* f : {&f1, &human(), &macaque()}) {
            const auto n = global_normalize(f->dti);
            double sum = 0.0;
            for (const auto& e : n.entries()) sum += e.weight;
            worst = std::max(worst, std::abs(sum - 1.0));
            std::vector<std::size_t> a(n.size()), b(n.size());
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = b[i] = i;
            std::stable_sort(a.begin(), a.end(), [&](auto x, auto y) { return f->dti.entries()[x].weight < f->dti.entries()[y].weight; });
            std::stable_sort(b.begin(), b.end(), [&](auto x, auto y) { return n.entries()[x].weight < n.entries()[y].weight; });
            ok = ok && a == b;
        }
        return Verdict{ok && worst <= 1e-9, fmt("max |sum - 1| = %.3g over 3 fixtures, ranking preserved: %s", worst, ok ? "yes" : "no")};
    });

    criterion("FDEB invariant suite", 30, [] {
        std::string detail;
        bool ok = true;

        auto edges = testing::random_edges(500, 101);
        auto one = bundle(edges, {}, {1, false});
        auto four = bundle(edges, {}, {4, true});
        bool pinned = true;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            pinned = pinned && one[i].points.front() == edges[i].points.front() && one[i].points.back() == edges[i].points.back();
        }
        const bool deterministic = one == four;
        ok = ok && pinned && deterministic;
        detail += fmt("pinning %s, 1 vs 4 threads %s", pinned ? "exact" : "BROKEN", deterministic ? "identical" : "DIFFER");

        const Polyline lone{{{3, -7, 11}, {58, 20, -4}}, 1};
        const auto lone_out = bundle(std::vector<Polyline>{lone});
        const double len = distance(lone.points[0], lone.points[1]);
        const double dev = max_chord_deviation(lone_out[0]) / len;
        ok = ok && dev < 1e-9;
        detail += fmt(", lone deviation %.2g x length", dev);

        auto pair = bundle(std::vector<Polyline>{lone, lone});
        const bool twins = pair[0] == pair[1] && max_chord_deviation(pair[0]) / len < 1e-9;
        ok = ok && twins;
        detail += twins ? ", identical pair symmetric" : ", identical pair DIFFERS";

        auto grid = testing::parallel_grid();
        std::vector<Polyline> mixed = testing::random_edges(50, 7);
        mixed.insert(mixed.end(), grid.begin(), grid.end());
        std::vector<Polyline> mirrored;
        for (const auto& e : mixed) {
            mirrored.push_back({{Vec3{-e.points[0].x, e.points[0].y, e.points[0].z}, Vec3{-e.points[1].x, e.points[1].y, e.points[1].z}}, 1});
        }
        auto a = bundle(mixed), b = bundle(mirrored);
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (std::size_t k = 0; k < a[i].points.size(); ++k) {
                const Vec3 p = a[i].points[k];
                worst = std::max(worst, distance(Vec3{-p.x, p.y, p.z}, b[i].points[k]));
            }
        }
        ok = ok && worst < 1e-6;
        detail += fmt(", mirror error %.2g", worst);
        return Verdict{ok, detail};
    });

    criterion("FDEB ink reduction", 10, [] {
        auto grid = testing::parallel_grid();
        const double before = testing::mean_pairwise_interior_distance(testing::straight(grid, 64));
        const double after = testing::mean_pairwise_interior_distance(bundle(grid));
        const double reduction = 1.0 - after / before;
        return Verdict{reduction >= 0.5, fmt("mean interior distance %.3f -> %.3f (%.1f%% reduction, need >= 50%%)", before, after, 100 * reduction)};
    });

    criterion("FDEB desk-scale performance", 120, [] {
        const auto& h = human();
        const auto edges = top_fraction(h.dti, 5000.0 / double(h.dti.size()));
        const unsigned workers = resolve_thread_count(0);
        const auto lines = bundle(edges, h.atlas, {}, {workers, true});
        bool ok = lines.size() == 5000;
        for (const auto& l : lines) ok = ok && l.intervals() == 64;
        return Verdict{ok, fmt("%zu edges x %zu intervals on %u worker(s)", lines.size(), lines.empty() ? 0 : lines[0].intervals(), workers)};
    });

    criterion("lag recovery", 5, [&] {
        const auto r = compare_sets(f1.biological, f1.dtb, f1.atlas);
        std::set<RegionLabel> all;
        for (const Region& reg : f1.atlas.regions()) all.insert(reg.label);
        const int oracle_lag = oracle::lag_scan(oracle::pooled_series(f1.atlas, f1.biological, all),
                                                oracle::pooled_series(f1.atlas, f1.dtb, all));
        return Verdict{r.lag == 3 && oracle_lag == 3 && r.pearson_r > 0.95,
                       fmt("lag %d (oracle %d, planted 3), pearson r %.4f (need > 0.95)", r.lag, oracle_lag, r.pearson_r)};
    });

    criterion("peak time", 1, [&] {
        const auto regions = functional_regions(f1.atlas);
        const std::size_t t = peak_time(f1.biological, regions);
        std::set<RegionLabel> labels;
        for (const Region& r : regions) labels.insert(r.label);
        const std::size_t expected = oracle::argmax_first(oracle::pooled_series(f1.atlas, f1.biological, labels));
        return Verdict{t == 119 && expected == 119, fmt("peak at %zu (oracle %zu, planted 119)", t, expected)};
    });

    criterion("colour-map exactness", 1, [] {
        bool ok = color_close(encode_region_color(0.0), {0, 1, 0, 0}) && color_close(encode_region_color(0.5), {1, 1, 0, 1}) &&
                  color_close(encode_region_color(1.0), {1, 0, 0, 1}) && color_close(encode_region_color(0.25), {0.5, 1, 0, 1});
        const auto v0 = encode_voxel_color(0.0), v1 = encode_voxel_color(1.0), vq = encode_voxel_color(0.25);
        ok = ok && color_close(v0.rgba, {0, 0, 0, 0}) && v0.emissive == 0.0 && color_close(v1.rgba, {1, 1, 1, 1}) &&
             v1.emissive == 1.0 && color_close(vq.rgba, {0.25, 0.25, 0.25, 0.25}) && std::abs(vq.emissive - 0.25) <= 1e-12;
        const auto g2 = direction_gradient({}, 2), g3 = direction_gradient({}, 3);
        ok = ok && color_close(g2[0], {0, 1, 0, 1}) && color_close(g2[1], {1, 0.5, 0, 1}) && color_close(g3[1], {0.5, 0.75, 0, 1});
        std::mt19937_64 gen(2024);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        int violations = 0;
        for (int i = 0; i < 1000; ++i) {
            double a = u(gen), b = u(gen);
            if (a > b) std::swap(a, b);
            const auto ra = encode_region_color(a), rb = encode_region_color(b);
            if (ra.a > rb.a || ra.r > rb.r) ++violations;
            if (encode_voxel_color(a).emissive > encode_voxel_color(b).emissive) ++violations;
            if (encode_voxel_color(a).rgba.a > encode_voxel_color(b).rgba.a) ++violations;
        }
        return Verdict{ok && violations == 0, fmt("breakpoints %s, %d monotonicity violations in 1000 draws", ok ? "exact" : "OFF", violations)};
    });

    criterion("slice oracle equivalence", 5, [&] {
        std::mt19937_64 gen(99);
        int planes = 0, mismatches = 0;
        for (SliceAxis axis : {SliceAxis::sagittal, SliceAxis::coronal, SliceAxis::horizontal}) {
            const int k = plane_axis_map(axis);
            std::uniform_real_distribution<double> u(f1.atlas.min_corner()[k], f1.atlas.max_corner()[k]);
            for (int i = 0; i < 10; ++i, ++planes) {
                const double coord = u(gen);
                const auto plane = SlicePlane::through(f1.atlas, axis, coord);
                if (voxels_in_slab(f1.atlas, plane) != oracle::slab(f1.atlas, k, coord, plane.thickness_mm)) ++mismatches;
                const auto r = raster(f1.atlas, f1.biological, plane, 0);
                const auto b = oracle::bin(f1.atlas, f1.biological, k, coord, plane.thickness_mm, 0);
                if (r.width != b.width || r.height != b.height) {
                    ++mismatches;
                    continue;
                }
                for (std::size_t c = 0; c < b.cells.size(); ++c) {
                    if (r.cells[c].has_value() != b.cells[c].has_value() ||
                        (b.cells[c] && std::abs(*r.cells[c] - *b.cells[c]) > 1e-12 * std::max(1.0, std::abs(*b.cells[c])))) {
                        ++mismatches;
                        break;
                    }
                }
            }
        }
        return Verdict{mismatches == 0, fmt("%d planes, %d mismatching slabs/rasters", planes, mismatches)};
    });

    criterion("round-trips", 10, [&] {
        bool ok = parse_atlas(serialize_atlas(f1.atlas)) == f1.atlas;
        ok = ok && parse_bold(serialize_bold(f1.biological, BoldEncoding::csv), f1.atlas, SignalSource::biological) == f1.biological;
        ok = ok && parse_dti(serialize_dti(f1.dti, DtiEncoding::csv), f1.atlas) == f1.dti;

        double worst_f32 = 0.0;
        const auto bold_bin = parse_bold(serialize_bold(f1.dtb, BoldEncoding::binary), f1.atlas, SignalSource::dtb);
        for (std::size_t i = 0; i < bold_bin.values().size(); ++i) {
            const double ref = f1.dtb.values()[i];
            worst_f32 = std::max(worst_f32, std::abs(bold_bin.values()[i] - ref) / std::max(1.0, std::abs(ref)));
        }
        const auto dti_bin = parse_dti(serialize_dti(f1.dti, DtiEncoding::binary), f1.atlas);
        for (std::size_t i = 0; i < dti_bin.size(); ++i) {
            const double ref = f1.dti.entries()[i].weight;
            worst_f32 = std::max(worst_f32, std::abs(dti_bin.entries()[i].weight - ref) / std::max(1.0, std::abs(ref)));
            ok = ok && dti_bin.entries()[i].src == f1.dti.entries()[i].src && dti_bin.entries()[i].dst == f1.dti.entries()[i].dst;
        }
        ok = ok && worst_f32 <= 1e-6;

        const auto edges = top_fraction(f1.dti, 0.005);
        BundleParams params;
        params.n_cycles = 3;
        const auto doc = make_bundle_document(edges, bundle(edges, f1.atlas, params), params);
        const auto back = parse_bundles(serialize_bundles(doc));
        double worst_pt = 0.0;
        ok = ok && back.edges.size() == doc.edges.size();
        for (std::size_t i = 0; ok && i < doc.edges.size(); ++i) {
            for (std::size_t k = 0; k < doc.edges[i].line.points.size(); ++k)
                worst_pt = std::max(worst_pt, distance(doc.edges[i].line.points[k], back.edges[i].line.points[k]));
        }
        ok = ok && worst_pt <= 1e-6 && serialize_bundles(back) == serialize_bundles(doc);

        testing::TempDir dir("accept-synth");
        write_fixture(gen_fixture(fixture_f1_spec()), dir / "a");
        write_fixture(gen_fixture(fixture_f1_spec()), dir / "b");
        const bool same_bytes = read_tree(dir / "a") == read_tree(dir / "b");
        ok = ok && same_bytes;
        return Verdict{ok, fmt("text formats exact, binary max rel error %.2g, bundle max error %.2g, generator byte-identical: %s",
                               worst_f32, worst_pt, same_bytes ? "yes" : "no")};
    });

    criterion("API contract", 60, [&] {
        const auto ds_f1 = Dataset::make("f1", StoreData{f1.atlas, f1.biological, f1.dtb, f1.dti, std::nullopt});
        const std::size_t functional = functional_regions(f1.atlas).size();
        auto s = fresh_session(*ds_f1, "a");
        const std::size_t single = snapshot(*ds_f1, s).spheres.size();
        const std::size_t doubled = snapshot(*ds_f1, with_compare(*ds_f1, s, true)).spheres.size();

        const auto& h = human();
        const auto ds = Dataset::make("human", StoreData{h.atlas, h.biological, h.dtb, h.dti, std::nullopt});
        const double tau = 1.0 - 9900.0 / double(h.dti.size());
        auto big = with_time(*ds, with_threshold(fresh_session(*ds, "b"), tau), 119);
        std::vector<double> times;
        std::size_t objects = 0;
        for (int i = 0; i < 7; ++i) {
            const auto t0 = Clock::now();
            const auto snap = snapshot(*ds, big);
            times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
            objects = snap.object_count();
        }
        std::sort(times.begin(), times.end());
        const double median_ms = times[times.size() / 2];
        const bool ok = single == functional && doubled == 2 * functional && objects <= 10000 && objects > 9000 && median_ms < 100.0;
        return Verdict{ok, fmt("spheres %zu (functional %zu), compare %zu; %zu-object snapshot median %.1f ms (limit 100 ms)",
                               single, functional, doubled, objects, median_ms)};
    });

    std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
