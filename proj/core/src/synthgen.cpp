#include "dtb/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "dtb/error.hpp"
#include "dtb/io.hpp"
#include "dtb/rng.hpp"
#include "dtb/store.hpp"
#include "json.hpp"

namespace dtb {

void GenSpec::validate() const {
    if (n_regions < 1) throw SpecError("n_regions must be positive");
    if (aal_names && n_regions > kAalRegionCount)
        throw SpecError("the AAL name table has only " + std::to_string(kAalRegionCount) + " regions");
    if (voxels_per_region_min < 1 || voxels_per_region_max < voxels_per_region_min)
        throw SpecError("voxels_per_region must be a positive range");
    if (!(spacing_mm > 0.0)) throw SpecError("spacing_mm must be positive");
    if (!(brain_radii_mm.x > 0.0 && brain_radii_mm.y > 0.0 && brain_radii_mm.z > 0.0))
        throw SpecError("brain radii must be positive");
    if (n_timepoints < 1) throw SpecError("n_timepoints must be positive");
    if (!(dt_ms > 0.0)) throw SpecError("dt_ms must be positive");
    if (noise_sd < 0.0) throw SpecError("noise_sd must be non-negative");
    if (dti_edge_count < 1) throw SpecError("dti_edge_count must be positive");
    if (dtb_lag < 0) throw SpecError("dtb_lag must be non-negative");
    if (!(dtb_gain > 0.0)) throw SpecError("dtb_gain must be positive");
    if (burst) {
        if (burst->time_index >= n_timepoints) throw SpecError("burst time index must be < n_timepoints");
        if (burst->region_label < 1 || burst->region_label > n_regions)
            throw SpecError("burst region label is outside 1..n_regions");
    }
    const double max_voxels = static_cast<double>(n_regions) * voxels_per_region_max;
    const double lattice_sites = 4.0 / 3.0 * std::numbers::pi * brain_radii_mm.x * brain_radii_mm.y *
                                 brain_radii_mm.z / (spacing_mm * spacing_mm * spacing_mm);
    if (max_voxels > 0.6 * lattice_sites)
        throw SpecError("brain volume is too small for the requested voxel count");
}

namespace {

struct RegionPlan {
    RegionLabel label = 0;
    std::string name;
    bool functional = true;
    int hemisphere = 0;  // -1 left, +1 right, 0 midline
};

std::vector<RegionPlan> plan_regions(const GenSpec& spec) {
    std::vector<RegionPlan> plans;
    for (int label = 1; label <= spec.n_regions; ++label) {
        RegionPlan p;
        p.label = label;
        if (spec.aal_names) {
            p.name = std::string(aal_region_name(label));
            p.functional = aal_default_functional(label);
        } else {
            // Pairs share an index: (1,2) -> R01_L / R01_R, ...
            const int pair = (label + 1) / 2;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%02d_%s", spec.species.kind == SpeciesKind::macaque ? "M" : "R", pair,
                          label % 2 == 1 ? "L" : "R");
            p.name = buf;
            p.functional = true;
        }
        if (p.name.ends_with("_L")) p.hemisphere = -1;
        else if (p.name.ends_with("_R")) p.hemisphere = 1;
        plans.push_back(std::move(p));
    }
    return plans;
}

struct LatticeKey {
    std::int64_t x, y, z;
    bool operator==(const LatticeKey&) const = default;
};
struct LatticeHash {
    std::size_t operator()(const LatticeKey& k) const {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
        h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6);
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

bool inside_brain(const Vec3& p, const Vec3& radii) {
    const double u = p.x / radii.x, v = p.y / radii.y, w = p.z / radii.z;
    return u * u + v * v + w * w <= 1.0;
}

Vec3 random_in_unit_ball(Rng& rng) {
    while (true) {
        Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        if (dot(p, p) <= 1.0) return p;
    }
}

// Region centres: mirrored across x = 0 for _L/_R pairs; non-functional
// regions sit in the posterior-inferior (cerebellar) part of the ellipsoid.
std::vector<Vec3> place_centres(const std::vector<RegionPlan>& plans, const GenSpec& spec, Rng& rng) {
    const Vec3 r = spec.brain_radii_mm;
    std::vector<Vec3> centres(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& p = plans[i];
        if (p.hemisphere == -1 && i + 1 < plans.size() && plans[i + 1].hemisphere == 1) {
            Vec3 c;
            do {
                Vec3 u = random_in_unit_ball(rng);
                c = {std::abs(u.x) * 0.7 * r.x + 0.12 * r.x, u.y * 0.75 * r.y, u.z * 0.7 * r.z};
                if (!p.functional) c = {c.x * 0.6, -0.65 * r.y + 0.15 * u.y * r.y, -0.55 * r.z + 0.15 * u.z * r.z};
            } while (!inside_brain(c, r * 0.85));
            centres[i] = {-c.x, c.y, c.z};
            centres[i + 1] = c;
            ++i;
            continue;
        }
        Vec3 c;
        do {
            Vec3 u = random_in_unit_ball(rng);
            c = {p.hemisphere == 0 ? u.x * 0.08 * r.x : p.hemisphere * (std::abs(u.x) * 0.7 + 0.12) * r.x,
                 u.y * 0.75 * r.y, u.z * 0.7 * r.z};
            if (!p.functional) c = {c.x, -0.65 * r.y + 0.15 * u.y * r.y, -0.55 * r.z + 0.15 * u.z * r.z};
        } while (!inside_brain(c, r * 0.85));
        centres[i] = c;
    }
    return centres;
}

std::vector<std::vector<Vec3>> place_voxels(const std::vector<RegionPlan>& plans, const std::vector<Vec3>& centres,
                                            const GenSpec& spec, Rng& rng) {
    const double s = spec.spacing_mm;
    std::unordered_set<LatticeKey, LatticeHash> occupied;
    std::vector<std::vector<Vec3>> out(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(spec.voxels_per_region_min, spec.voxels_per_region_max));
        // Ellipsoidal cluster, slightly elongated along y, holding ~n lattice sites.
        double radius = 1.4 * s * std::cbrt(3.0 * static_cast<double>(n) / (4.0 * std::numbers::pi));
        const Vec3 shape{1.0, 1.2, 0.85};
        std::size_t misses = 0;
        while (out[i].size() < n) {
            const Vec3 u = random_in_unit_ball(rng);
            const Vec3 p = centres[i] + Vec3{u.x * shape.x, u.y * shape.y, u.z * shape.z} * radius;
            const LatticeKey key{std::llround(p.x / s), std::llround(p.y / s), std::llround(p.z / s)};
            const Vec3 snapped{static_cast<double>(key.x) * s, static_cast<double>(key.y) * s,
                               static_cast<double>(key.z) * s};
            if (inside_brain(snapped, spec.brain_radii_mm) && occupied.insert(key).second) {
                out[i].push_back(snapped);
                misses = 0;
            } else if (++misses > 64) {
                radius *= 1.1;  // neighbourhood saturated; grow the shell
                misses = 0;
                if (radius > 4.0 * norm(spec.brain_radii_mm))
                    throw SpecError("cannot place " + std::to_string(n) + " voxels for region " +
                                    std::to_string(plans[i].label));
            }
        }
    }
    return out;
}

struct Latent {
    double a1, p1, phase1, a2, p2, phase2, offset;
};

}  // namespace

Fixture gen_fixture(const GenSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const auto plans = plan_regions(spec);
    const auto centres = place_centres(plans, spec, rng);
    const auto positions = place_voxels(plans, centres, spec, rng);

    std::vector<RegionSpec> region_specs;
    std::vector<std::size_t> region_of_voxel;
    VoxelId next_id = 0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        RegionSpec rs;
        rs.label = plans[i].label;
        rs.name = plans[i].name;
        rs.functional = plans[i].functional;
        for (const auto& p : positions[i]) {
            rs.voxels.emplace_back(next_id++, p);
            region_of_voxel.push_back(i);
        }
        region_specs.push_back(std::move(rs));
    }
    Atlas atlas = Atlas::build(spec.species, spec.spacing_mm, std::move(region_specs));
    const std::size_t n_voxels = atlas.voxel_count();

    // ----- BOLD: regional latent oscillations + voxel noise + planted burst.
    std::vector<Latent> latents(plans.size());
    for (auto& l : latents) {
        l.a1 = rng.uniform(0.6, 1.0);
        l.p1 = rng.uniform(70.0, 160.0);
        l.phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        l.a2 = rng.uniform(0.15, 0.3);
        l.p2 = rng.uniform(30.0, 60.0);
        l.phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        l.offset = rng.uniform(-0.2, 0.2);
    }
    const std::size_t n_t = spec.n_timepoints;
    const auto lag = static_cast<std::size_t>(spec.dtb_lag);
    const std::size_t n_raw = n_t + lag;
    // Raw sample k maps to biological time k - lag and DTB time k.
    constexpr double burst_decay = 12.0;
    std::vector<double> bio(n_voxels * n_t), dtb(n_voxels * n_t);
    std::vector<double> raw(n_raw);
    for (std::size_t v = 0; v < n_voxels; ++v) {
        const std::size_t r = region_of_voxel[v];
        const auto& l = latents[r];
        const double voxel_gain = rng.uniform(0.8, 1.2);
        for (std::size_t k = 0; k < n_raw; ++k) {
            const double t = static_cast<double>(k) - static_cast<double>(lag);
            double value = l.offset +
                           voxel_gain * (l.a1 * std::sin(2.0 * std::numbers::pi * t / l.p1 + l.phase1) +
                                         l.a2 * std::sin(2.0 * std::numbers::pi * t / l.p2 + l.phase2)) +
                           spec.noise_sd * rng.normal();
            if (spec.burst) {
                const double amp = plans[r].label == spec.burst->region_label ? spec.burst->amplitude
                                                                               : 0.5 * spec.burst->amplitude;
                value += amp * std::exp(-std::abs(t - static_cast<double>(spec.burst->time_index)) / burst_decay);
            }
            raw[k] = value;
        }
        for (std::size_t t = 0; t < n_t; ++t) {
            bio[v * n_t + t] = raw[t + lag];
            dtb[v * n_t + t] = spec.dtb_gain * raw[t];
        }
    }
    std::vector<VoxelId> ids(n_voxels);
    for (std::size_t v = 0; v < n_voxels; ++v) ids[v] = static_cast<VoxelId>(v);
    SignalSet bio_set = SignalSet::build(SignalSource::biological, spec.dt_ms, n_t, ids, std::move(bio));
    SignalSet dtb_set = SignalSet::build(SignalSource::dtb, spec.dt_ms, n_t, ids, std::move(dtb));

    // ----- DTI: distinct directed pairs, weight decaying with distance.
    const std::uint64_t n = n_voxels;
    const std::uint64_t capacity = n * (n - 1);
    if (spec.dti_edge_count > capacity)
        throw SpecError("dti_edge_count " + std::to_string(spec.dti_edge_count) + " exceeds the " +
                        std::to_string(capacity) + " possible voxel pairs");
    std::vector<std::pair<VoxelId, VoxelId>> pairs;
    pairs.reserve(spec.dti_edge_count);
    if (spec.dti_edge_count * 2 > capacity) {
        for (VoxelId a = 0; a < n; ++a)
            for (VoxelId b = 0; b < n; ++b)
                if (a != b) pairs.emplace_back(a, b);
        for (std::size_t i = 0; i < spec.dti_edge_count; ++i) {
            auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                              static_cast<std::int64_t>(pairs.size() - 1)));
            std::swap(pairs[i], pairs[j]);
        }
        pairs.resize(spec.dti_edge_count);
    } else {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(spec.dti_edge_count * 2);
        while (pairs.size() < spec.dti_edge_count) {
            auto a = static_cast<VoxelId>(rng.uniform_int(0, static_cast<std::int64_t>(n - 1)));
            auto b = static_cast<VoxelId>(rng.uniform_int(0, static_cast<std::int64_t>(n - 1)));
            if (a == b) continue;
            if (seen.insert((static_cast<std::uint64_t>(a) << 32) | b).second) pairs.emplace_back(a, b);
        }
    }
    std::vector<MatrixEntry> entries;
    entries.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        const double d = distance(atlas.voxel(a).position_mm, atlas.voxel(b).position_mm);
        const double w = std::exp(-d / spec.dti_length_scale_mm) * (0.5 + rng.uniform());
        entries.push_back({a, b, w});
    }
    ConnectivityMatrix dti = ConnectivityMatrix::build(n_voxels, std::move(entries));

    return Fixture{spec, std::move(atlas), std::move(bio_set), std::move(dtb_set), std::move(dti)};
}

std::string Fixture::manifest_json() const {
    nlohmann::ordered_json m;
    m["seed"] = spec.seed;
    m["species"] = atlas.species().to_string();
    m["n_regions"] = atlas.regions().size();
    m["n_functional_regions"] = functional_regions(atlas).size();
    m["n_voxels"] = atlas.voxel_count();
    m["spacing_mm"] = atlas.spacing_mm();
    m["n_timepoints"] = biological.n_timepoints();
    m["dt_ms"] = biological.dt_ms();
    m["dti_edge_count"] = dti.size();
    m["dtb"] = {{"lag", spec.dtb_lag}, {"gain", spec.dtb_gain}};
    if (spec.burst) {
        m["burst"] = {{"region_label", spec.burst->region_label},
                      {"time_index", spec.burst->time_index},
                      {"amplitude", spec.burst->amplitude}};
    } else {
        m["burst"] = nullptr;
    }
    m["files"] = {{"atlas", std::string(kStoreAtlasFile)},
                  {"bold_biological", std::string(kStoreBoldBiologicalFile)},
                  {"bold_dtb", std::string(kStoreBoldDtbFile)},
                  {"dti", std::string(kStoreDtiFile)}};
    return m.dump(2) + "\n";
}

GenSpec human_preset(std::uint64_t seed) {
    GenSpec spec;
    spec.seed = seed;
    return spec;
}

GenSpec macaque_preset(std::uint64_t seed) {
    GenSpec spec;
    spec.seed = seed;
    spec.species = Species::macaque();
    spec.aal_names = false;
    spec.n_regions = 40;
    spec.voxels_per_region_min = 60;
    spec.voxels_per_region_max = 120;
    spec.spacing_mm = 1.5;
    spec.brain_radii_mm = {28.0, 38.0, 25.0};
    spec.dti_length_scale_mm = 18.0;
    spec.dti_edge_count = 60000;
    spec.burst = BurstSpec{7, 119, 4.0};
    return spec;
}

GenSpec fixture_f1_spec() {
    GenSpec spec;
    spec.seed = 1;
    spec.voxels_per_region_min = 6;
    spec.voxels_per_region_max = 14;
    spec.dti_edge_count = 20000;
    spec.burst = BurstSpec{16, 119, 4.0};
    return spec;
}

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir) {
    StoreData data{fixture.atlas, fixture.biological, fixture.dtb, fixture.dti, std::nullopt};
    write_store(data, dir);
    write_file_atomic(dir / "manifest.json", fixture.manifest_json());
}

}  // namespace dtb
