#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dtb/atlas.hpp"

namespace dtb {

enum class SignalSource { biological, dtb };

std::string_view to_string(SignalSource source);
SignalSource parse_signal_source(std::string_view text);

struct ColorRGBA {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    double a = 0.0;

    bool operator==(const ColorRGBA&) const = default;
};

struct VoxelColor {
    ColorRGBA rgba;
    double emissive = 0.0;
};

/// Per-voxel BOLD time series sharing one sampling period and length.
///
/// Values are stored row-major (one contiguous row of T samples per voxel,
/// rows in ascending voxel id order).
class SignalSet {
public:
    // Validates T >= 1, dt > 0, unique ids and values.size() == ids.size() * T.
    // Rows are reordered into ascending id order.
    static SignalSet build(SignalSource source, double dt_ms, std::size_t n_timepoints,
                           std::vector<VoxelId> ids, std::vector<double> values);

    SignalSource source() const { return source_; }
    double dt_ms() const { return dt_ms_; }
    std::size_t n_timepoints() const { return n_timepoints_; }
    std::size_t voxel_count() const { return ids_.size(); }
    std::span<const VoxelId> voxel_ids() const { return ids_; }
    std::span<const double> values() const { return values_; }

    bool contains(VoxelId id) const { return row_.contains(id); }
    // Throws NotFoundError.
    std::span<const double> series(VoxelId id) const;
    std::span<const double> row(std::size_t index) const {
        return {values_.data() + index * n_timepoints_, n_timepoints_};
    }

    // Same ids and timing, replaced values (size must match).
    SignalSet with_values(std::vector<double> values) const;

    bool operator==(const SignalSet& other) const {
        return source_ == other.source_ && dt_ms_ == other.dt_ms_ && n_timepoints_ == other.n_timepoints_ &&
               ids_ == other.ids_ && values_ == other.values_;
    }

private:
    SignalSource source_ = SignalSource::biological;
    double dt_ms_ = 800.0;
    std::size_t n_timepoints_ = 0;
    std::vector<VoxelId> ids_;
    std::vector<double> values_;
    std::unordered_map<VoxelId, std::size_t> row_;
};

// ----- file formats ---------------------------------------------------------

enum class BoldEncoding { csv, binary };

// Detects the encoding from the leading bytes ("DTBB" magic means binary).
SignalSet load_bold(const std::filesystem::path& path, const Atlas& atlas, SignalSource source);
SignalSet parse_bold(std::string_view bytes, const Atlas& atlas, SignalSource source);
std::string serialize_bold(const SignalSet& set, BoldEncoding encoding);
void save_bold(const SignalSet& set, const std::filesystem::path& path, BoldEncoding encoding = BoldEncoding::csv);

// ----- analytics ------------------------------------------------------------

// (v - min) / (max - min) over every value of the set; all zeros if max == min.
SignalSet minmax_normalize(const SignalSet& set);

// Normalizes both sets against the union of their value ranges.
std::pair<SignalSet, SignalSet> minmax_normalize_shared(const SignalSet& a, const SignalSet& b);

double region_mean(const SignalSet& set, const Region& region, std::size_t t);
double voxel_mean_over_time(const SignalSet& set, VoxelId id);

// Mean over the given voxels at every time point.
std::vector<double> mean_series(const SignalSet& set, std::span<const VoxelId> voxels);

// argmax over t of the mean over all member voxels of `regions`; first max wins.
std::size_t peak_time(const SignalSet& set, std::span<const Region> regions);

// Green (transparent) -> yellow -> red; alpha saturates at v = 0.25.
ColorRGBA encode_region_color(double v);

// Transparent black -> emissive white, all channels linear in v.
VoxelColor encode_voxel_color(double v);

struct ComparisonReport {
    double pearson_r = 0.0;
    int lag = 0;  // positive: the second series trails the first
    bool degenerate = false;
};

// Which voxels a comparison averages over.
struct Scope {
    enum class Kind { all, regions, voxels };
    Kind kind = Kind::all;
    std::vector<RegionLabel> labels;
    std::vector<VoxelId> voxels;

    static Scope all_voxels() { return {}; }
    static Scope of_regions(std::vector<RegionLabel> l) { return {Kind::regions, std::move(l), {}}; }
    static Scope of_voxels(std::vector<VoxelId> v) { return {Kind::voxels, {}, std::move(v)}; }

    // "all", "region:16", "regions:23,24", "voxel:7" or "voxels:1,2,3".
    static Scope parse(std::string_view text);
};

// Pearson correlation; constant input yields 0 with degenerate = true.
double pearson(std::span<const double> a, std::span<const double> b, bool* degenerate = nullptr);

// Shift in [-T/2, T/2] maximising the normalized cross-correlation of the
// mean-centred, zero-padded series. Ties go to the smallest |shift|, then the
// negative one.
int cross_correlation_lag(std::span<const double> a, std::span<const double> b);

ComparisonReport compare_series(std::span<const double> a, std::span<const double> b);

// Throws ShapeError when T differs or a scoped voxel is missing from either set.
ComparisonReport compare_sets(const SignalSet& a, const SignalSet& b, const Atlas& atlas,
                              const Scope& scope = Scope::all_voxels());

// One report per label, computed in parallel; output order follows `labels`.
std::vector<std::pair<RegionLabel, ComparisonReport>> compare_by_region(
    const SignalSet& a, const SignalSet& b, const Atlas& atlas, std::span<const RegionLabel> labels,
    unsigned workers = 1);

struct RegionMean {
    RegionLabel label = 0;
    double mean = 0.0;
};

// The k highest non-empty region means at t, descending, ties by ascending label.
std::vector<RegionMean> top_regions(const SignalSet& set, const Atlas& atlas, std::size_t t, std::size_t k);

}  // namespace dtb
