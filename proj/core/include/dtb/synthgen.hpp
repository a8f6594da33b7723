#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/signal.hpp"

namespace dtb {

struct BurstSpec {
    RegionLabel region_label = 16;
    std::size_t time_index = 119;
    // Added to every voxel of the burst region; every other voxel gets half.
    double amplitude = 4.0;
};

/// Recipe for a synthetic atlas + BOLD pair + DTI fixture.
struct GenSpec {
    std::uint64_t seed = 42;
    Species species = Species::human();
    int n_regions = 116;
    // Names and functional flags from the bundled AAL table (requires n_regions <= 116).
    bool aal_names = true;
    int voxels_per_region_min = 150;
    int voxels_per_region_max = 240;
    double spacing_mm = 3.0;
    // Brain ellipsoid semi-axes (x, y, z) in mm.
    Vec3 brain_radii_mm{70.0, 90.0, 60.0};
    std::size_t n_timepoints = 166;
    double dt_ms = 800.0;
    double noise_sd = 0.15;
    std::optional<BurstSpec> burst = BurstSpec{};
    std::size_t dti_edge_count = 380360;
    // Distance scale of the exponential DTI weight decay.
    double dti_length_scale_mm = 40.0;
    int dtb_lag = 3;
    double dtb_gain = 0.8;

    // Throws SpecError.
    void validate() const;
};

struct Fixture {
    GenSpec spec;
    Atlas atlas;
    SignalSet biological;
    SignalSet dtb;
    ConnectivityMatrix dti;

    // Counts, seed and planted ground truth as a JSON document.
    std::string manifest_json() const;
};

// Deterministic: the same spec always yields identical data and bytes.
Fixture gen_fixture(const GenSpec& spec);

// 116 AAL regions (92 functional), ~22.7k voxels, 166 samples, 380,360 DTI entries.
GenSpec human_preset(std::uint64_t seed = 42);
// Smaller macaque-shaped brain with its own region names.
GenSpec macaque_preset(std::uint64_t seed = 42);
// Standard small test fixture: AAL layout, 6-14 voxels per region, burst in
// region 16 at t = 119, lag 3, gain 0.8, 20,000 DTI entries.
GenSpec fixture_f1_spec();

// Writes a store directory (see store.hpp) plus manifest.json.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace dtb
