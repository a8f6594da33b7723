#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/fdeb.hpp"
#include "dtb/signal.hpp"
#include "dtb/slicer.hpp"
#include "dtb/store.hpp"

namespace dtb {

enum class ColorRangeMode { per_set, shared };

/// Immutable, render-ready view of one store, shared read-only by all sessions.
class Dataset {
public:
    struct Options {
        // Fraction of matrix entries that form the scene's edge universe.
        double edge_fraction = 1.0;
        // Scene units per cbrt(voxel count); defaults to the atlas spacing.
        std::optional<double> sphere_scale;
    };

    static std::shared_ptr<const Dataset> make(std::string id, StoreData data, Options options);
    static std::shared_ptr<const Dataset> make(std::string id, StoreData data) { return make(std::move(id), std::move(data), Options{}); }

    const std::string& id() const { return id_; }
    const Atlas& atlas() const { return data_.atlas; }
    const SignalSet& biological() const { return data_.biological; }
    const std::optional<SignalSet>& dtb() const { return data_.dtb; }
    const ConnectivityMatrix& dti() const { return data_.dti; }
    const std::optional<BundleDocument>& bundles() const { return data_.bundles; }
    const EdgeSet& edges() const { return edges_; }
    const RegionAdjacency& adjacency() const { return adjacency_; }
    double sphere_scale() const { return sphere_scale_; }
    // Lateral (x) offset between the two sphere groups in compare mode.
    double compare_offset_mm() const { return compare_offset_; }

    // Min-max normalized signal used for colours.
    const SignalSet& normalized(SignalSource source, ColorRangeMode mode) const;

    // Bundled polyline for (src, dst), if a bundle document is attached.
    const Polyline* bundled(VoxelId src, VoxelId dst) const;

private:
    std::string id_;
    StoreData data_;
    EdgeSet edges_;
    RegionAdjacency adjacency_;
    double sphere_scale_ = 1.0;
    double compare_offset_ = 0.0;
    SignalSet bio_own_, bio_shared_;
    std::optional<SignalSet> dtb_own_, dtb_shared_;
    std::unordered_map<std::uint64_t, std::size_t> bundle_index_;
};

struct SessionState {
    std::string session_id;
    std::string dataset_id;
    std::size_t time_index = 0;
    double threshold_tau = 0.9;
    std::set<RegionLabel> selected_regions;
    std::vector<RegionLabel> visited_regions;  // first-visit order, no duplicates
    bool compare_mode = false;
    ColorRangeMode color_range_mode = ColorRangeMode::shared;
    std::optional<SlicePlane> slice;

    bool operator==(const SessionState& o) const {
        return session_id == o.session_id && dataset_id == o.dataset_id && time_index == o.time_index &&
               threshold_tau == o.threshold_tau && selected_regions == o.selected_regions &&
               visited_regions == o.visited_regions && compare_mode == o.compare_mode &&
               color_range_mode == o.color_range_mode && slice.has_value() == o.slice.has_value() &&
               (!slice || (slice->axis == o.slice->axis && slice->coordinate_mm == o.slice->coordinate_mm &&
                           slice->thickness_mm == o.slice->thickness_mm));
    }
};

struct SphereItem {
    RegionLabel label = 0;
    SignalSource group = SignalSource::biological;
    Vec3 center_mm;
    double radius = 0.0;
    double value = 0.0;  // normalized region mean at the session time
    ColorRGBA color;
    bool highlighted = false;
    bool selected = false;
};

struct PolylineItem {
    VoxelId src = 0;
    VoxelId dst = 0;
    double weight = 0.0;
    double rank_pct = 0.0;
    bool bundled = false;
    bool flagged = false;  // source lies in a selected region
    std::vector<Vec3> points;
    std::shared_ptr<const std::vector<ColorRGBA>> color_stops;
};

struct ChartItem {
    VoxelId voxel_id = 0;
    RegionLabel region_label = 0;
    Vec3 anchor_mm;
    std::span<const double> series;  // view into the dataset's normalized signal
    double mean = 0.0;
    ColorRGBA mean_color;
};

struct SceneSnapshot {
    std::string dataset_id;
    std::size_t time_index = 0;
    double time_ms = 0.0;
    double threshold_tau = 0.0;
    bool compare_mode = false;
    std::vector<SphereItem> spheres;
    std::vector<PolylineItem> polylines;
    std::vector<ChartItem> charts;
    std::optional<SliceRaster> raster;
    std::optional<SlicePlane> slice;

    std::size_t object_count() const { return spheres.size() + polylines.size() + charts.size() + (raster ? 1 : 0); }
};

// ----- session operations (pure) -------------------------------------------

SessionState fresh_session(const Dataset& dataset, std::string session_id);

// Adds label to the selection and the visited list. Throws NotFoundError.
SessionState select_region(const Dataset& dataset, SessionState state, RegionLabel label);

// Clears the selection; the visited list is kept and highlighted.
SessionState reset_navigation(SessionState state);

// Outgoing region-adjacency neighbours by descending weight, ties by label.
std::vector<std::pair<RegionLabel, double>> navigate_next(const Dataset& dataset, RegionLabel from);

// Validated setters; throw BoundsError / std::invalid_argument.
SessionState with_time(const Dataset& dataset, SessionState state, std::size_t t);
SessionState with_threshold(SessionState state, double tau);
SessionState with_compare(const Dataset& dataset, SessionState state, bool compare);

SceneSnapshot snapshot(const Dataset& dataset, const SessionState& state);

// ----- JSON payloads --------------------------------------------------------

std::string to_json(const SessionState& state);
std::string to_json(const SceneSnapshot& snapshot);
std::string to_json(const std::vector<std::pair<RegionLabel, double>>& ranking);
std::string to_json(const ComparisonReport& report);

// ----- session registry -----------------------------------------------------

struct DatasetInfo {
    std::string id;
    std::string species;
    std::size_t n_regions = 0;
    std::size_t n_functional_regions = 0;
    std::size_t n_voxels = 0;
    std::size_t n_timepoints = 0;
    std::size_t n_edges = 0;
    bool has_dtb = false;
    bool has_bundles = false;
};

std::string to_json(const std::vector<DatasetInfo>& infos);

/// Server-held sessions over shared read-only datasets.
///
/// Sessions are isolated; mutations of one session are serialised by a
/// per-session mutex (arrival order wins). Idle sessions expire after `idle_ttl`.
class SessionManager {
public:
    using Clock = std::chrono::steady_clock;

    explicit SessionManager(std::chrono::seconds idle_ttl = std::chrono::minutes(30),
                            std::function<Clock::time_point()> now = [] { return Clock::now(); });

    void add_dataset(std::shared_ptr<const Dataset> dataset);
    std::shared_ptr<const Dataset> dataset(const std::string& id) const;
    std::shared_ptr<const Dataset> default_dataset() const;
    std::vector<DatasetInfo> datasets() const;

    SessionState open_session(const std::string& dataset_id);
    SessionState state(const std::string& session_id);

    // Applies `change` under the session lock and stores the result.
    SessionState update(const std::string& session_id,
                        const std::function<SessionState(const Dataset&, SessionState)>& change);

    // Drops sessions idle for longer than the TTL; returns how many were removed.
    std::size_t expire_idle();
    std::size_t session_count() const;

private:
    struct Session {
        std::mutex mutex;
        SessionState state;
        Clock::time_point last_used;
    };
    std::shared_ptr<Session> find(const std::string& session_id);

    std::chrono::seconds idle_ttl_;
    std::function<Clock::time_point()> now_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
    std::vector<std::string> dataset_order_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_session_ = 1;
};

}  // namespace dtb
