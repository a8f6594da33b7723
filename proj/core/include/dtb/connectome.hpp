#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dtb/atlas.hpp"
#include "dtb/signal.hpp"

namespace dtb {

struct MatrixEntry {
    VoxelId src = 0;
    VoxelId dst = 0;
    double weight = 0.0;

    bool operator==(const MatrixEntry&) const = default;
};

/// Sparse directed voxel-to-voxel connection weights.
///
/// Entries are unique, sorted by (src, dst) and never self-connections. A
/// "fully connected" matrix at 22,703 voxels would hold ~515M pairs; only the
/// entries present in the input are stored.
class ConnectivityMatrix {
public:
    // Validates non-negative finite weights, no self-loops, no duplicate pairs.
    static ConnectivityMatrix build(std::size_t n_voxels, std::vector<MatrixEntry> entries, bool normalized = false);

    std::size_t n_voxels() const { return n_voxels_; }
    std::span<const MatrixEntry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool normalized() const { return normalized_; }

    double total_weight() const;

    bool operator==(const ConnectivityMatrix&) const = default;

private:
    std::size_t n_voxels_ = 0;
    std::vector<MatrixEntry> entries_;
    bool normalized_ = false;
};

struct Edge {
    VoxelId src = 0;
    VoxelId dst = 0;
    double weight = 0.0;
    // Fraction of matrix entries with weight <= this one (ties share the higher value).
    double rank_pct = 0.0;

    bool operator==(const Edge&) const = default;
};

struct EdgeSet {
    std::vector<Edge> edges;

    std::size_t size() const { return edges.size(); }
    bool empty() const { return edges.empty(); }
};

// Directed region-to-region aggregate; (a, b) and (b, a) are distinct.
struct RegionAdjacency {
    std::size_t n_regions = 0;
    std::map<std::pair<RegionLabel, RegionLabel>, double> entries;

    double at(RegionLabel a, RegionLabel b) const {
        auto it = entries.find({a, b});
        return it == entries.end() ? 0.0 : it->second;
    }
};

// ----- file formats ---------------------------------------------------------

enum class DtiEncoding { csv, binary };

// Validates ids against the atlas (and n_voxels == atlas voxel count).
ConnectivityMatrix load_dti(const std::filesystem::path& path, const Atlas& atlas);
ConnectivityMatrix parse_dti(std::string_view bytes, const Atlas& atlas);
// Format-level parse only (no atlas checks).
ConnectivityMatrix parse_dti(std::string_view bytes);
std::string serialize_dti(const ConnectivityMatrix& m, DtiEncoding encoding);
void save_dti(const ConnectivityMatrix& m, const std::filesystem::path& path, DtiEncoding encoding = DtiEncoding::csv);

// ----- operations -----------------------------------------------------------

// Divides every weight by the total; throws DegenerateInputError for an all-zero matrix.
ConnectivityMatrix global_normalize(const ConnectivityMatrix& m);

// rank_pct for every entry of `m`, aligned with m.entries().
std::vector<double> rank_percentiles(const ConnectivityMatrix& m);

// Number of edges kept by top_fraction for N entries: ceil(f * N), guarded
// against representation error in f (0.1 * 380360 is 38036, not 38037).
std::size_t top_fraction_count(std::size_t n_entries, double fraction);

// The ceil(f*N) heaviest entries, heaviest first, ties by ascending (src, dst).
// rank_pct is computed over the full matrix before the cut.
EdgeSet top_fraction(const ConnectivityMatrix& m, double fraction);

// Every entry as an edge, heaviest first (top_fraction with f = 1).
EdgeSet all_edges(const ConnectivityMatrix& m);

enum class ThresholdMode { rank, absolute_weight };

// Rank mode keeps edges with rank_pct > tau, and at tau = 1 the edges tied for
// the maximum weight; tau = 0.8 therefore keeps exactly the top 20% of
// distinct-weight edges. Absolute mode keeps weight >= tau.
EdgeSet threshold_filter(const EdgeSet& edges, double tau, ThresholdMode mode = ThresholdMode::rank);

// Sum of weights of voxel pairs crossing regions (intra-region pairs dropped).
RegionAdjacency region_adjacency(const ConnectivityMatrix& m, const Atlas& atlas);

// Sum of the weights of intra-region pairs; with region_adjacency this conserves the total.
double intra_region_weight(const ConnectivityMatrix& m, const Atlas& atlas);

// Edges whose source voxel lies in any of the labelled regions.
EdgeSet edges_from_regions(const EdgeSet& edges, const Atlas& atlas, const std::set<RegionLabel>& labels);

// Linear green (0,1,0,1) -> orange (1,0.5,0,1) from source to target.
std::vector<ColorRGBA> direction_gradient(const Edge& e, std::size_t n_stops);

// Adds the reverse of every entry (summing where both directions exist).
ConnectivityMatrix symmetrize(const ConnectivityMatrix& m);

}  // namespace dtb
