#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/vec3.hpp"

namespace dtb {

/// Force-directed edge bundling in 3D.
///
/// Each edge is a polyline whose interior control points are pulled by two
/// forces: a spring toward their polyline neighbours and an attraction toward
/// the same-index control point of every compatible edge,
///
///     F(p_i) = k_P * ((p_{i-1} - p_i) + (p_{i+1} - p_i))
///            + sum_Q  C(P,Q) * (q_i - p_i) / |q_i - p_i| * 1 / max(|q_i - p_i|, eps)
///
/// summed over edges Q with C(P,Q) >= compat_threshold. The printed form
/// k_P * (|p_{i-1} - p_i| + |p_i - p_{i+1}|) + sum |p_i - q_i| / C(P,Q) gives
/// magnitudes only and divides by compatibility, which diverges as C -> 0;
/// here compatibility weights the attraction instead and the threshold prunes
/// incompatible pairs. Directions are the usual ones (springs toward
/// neighbours, attraction toward q_i).
///
/// The schedule runs n_cycles of {double the subdivision; iterate}. The step
/// size halves and the iteration count shrinks by 2/3 (floor 10) per cycle.
/// Iterations are Jacobi-style: every force is computed from the previous
/// positions, so the result does not depend on the worker count.
struct BundleParams {
    double k_p = 0.1;
    int n_cycles = 6;
    int initial_subdivisions = 1;
    int iterations_per_cycle = 50;
    double iteration_decay = 2.0 / 3.0;
    int min_iterations = 10;
    // Physical step per unit force. Unset means 0.04 x mean edge length.
    std::optional<double> step_size;
    double compat_threshold = 0.05;
    // Largest displacement of a control point in one iteration, as a fraction
    // of the current step size. Unset disables the clamp.
    std::optional<double> max_move_factor = 1.0;

    // Throws std::invalid_argument on a violated positivity/range constraint.
    void validate() const;

    // Iteration count for a zero-based cycle index.
    int iterations_for_cycle(int cycle) const;
};

struct BundleOptions {
    unsigned workers = 1;
    // Prune candidate pairs with a uniform grid over edge midpoints before
    // evaluating compatibility. The surviving pair set is identical.
    bool use_spatial_grid = false;
};

struct Polyline {
    std::vector<Vec3> points;
    double weight = 0.0;

    std::size_t intervals() const { return points.empty() ? 0 : points.size() - 1; }
    bool operator==(const Polyline&) const = default;
};

struct Segment {
    Vec3 a;
    Vec3 b;
};

// Angle x scale x position x visibility, each in [0, 1].
// Throws DegenerateInputError for a zero-length segment.
double compatibility(const Segment& p, const Segment& q);

struct CompatibilityFactors {
    double angle = 0.0;
    double scale = 0.0;
    double position = 0.0;
    double visibility = 0.0;

    double product() const { return angle * scale * position * visibility; }
};
CompatibilityFactors compatibility_factors(const Segment& p, const Segment& q);

/// Symmetric list of compatible edge pairs (c >= threshold) with c(P,P) = 1.
class CompatibilityCache {
public:
    struct Neighbor {
        std::size_t index = 0;
        double c = 0.0;
    };

    static CompatibilityCache build(std::span<const Segment> segments, double threshold, bool use_spatial_grid = false,
                                    unsigned workers = 1);

    std::size_t edge_count() const { return neighbors_.size(); }
    // Neighbours of edge p sorted by index; p itself is not listed.
    std::span<const Neighbor> neighbors(std::size_t p) const { return neighbors_[p]; }
    // c(P,Q) if the pair passed the threshold, 1 for P == Q, 0 otherwise.
    double at(std::size_t p, std::size_t q) const;
    std::size_t pair_count() const;

private:
    std::vector<std::vector<Neighbor>> neighbors_;
};

// Arc-length resampling from m to 2m intervals; endpoints copied exactly.
Polyline subdivide(const Polyline& line);

// Resample to exactly `intervals` uniform arc-length intervals.
Polyline resample(const Polyline& line, std::size_t intervals);

// Total force on interior point i of lines[p] (0 < i < m). `eps` guards the
// 1/d falloff; coincident points contribute nothing.
Vec3 force_on_point(std::span<const Polyline> lines, std::size_t p, std::size_t i, const CompatibilityCache& cache,
                    const BundleParams& params, double eps);

// Straight input polylines (first/last points are the endpoints; interior
// points are ignored). Output endpoints are bit-identical to the input.
std::vector<Polyline> bundle(std::span<const Polyline> edges, const BundleParams& params = {},
                             const BundleOptions& options = {});

// Edges positioned by their voxel coordinates in `atlas`.
std::vector<Polyline> bundle(const EdgeSet& edges, const Atlas& atlas, const BundleParams& params = {},
                             const BundleOptions& options = {});

double mean_edge_length(std::span<const Polyline> edges);

// ----- Bundled-Edge Format --------------------------------------------------

struct BundledEdge {
    VoxelId src = 0;
    VoxelId dst = 0;
    Polyline line;
};

struct BundleDocument {
    BundleParams params;
    std::vector<BundledEdge> edges;
};

std::string serialize_bundles(const BundleDocument& doc);
BundleDocument parse_bundles(std::string_view json_text);
void export_bundles(const BundleDocument& doc, const std::filesystem::path& path);
BundleDocument import_bundles(const std::filesystem::path& path);

// Pairs bundled lines with the edge ids they came from (same order).
BundleDocument make_bundle_document(const EdgeSet& edges, std::vector<Polyline> lines, const BundleParams& params);

}  // namespace dtb
