#include "dtb/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "dtb/error.hpp"
#include "dtb/io.hpp"

namespace dtb {

namespace {

std::uint64_t pair_key(VoxelId src, VoxelId dst) { return (std::uint64_t{src} << 32) | dst; }

double axis_extent(const Atlas& atlas) { return atlas.max_corner().x - atlas.min_corner().x; }

}  // namespace

// ----- Dataset ---------------------------------------------------------------

std::shared_ptr<const Dataset> Dataset::make(std::string id, StoreData data, Options options) {
    if (!(options.edge_fraction > 0.0 && options.edge_fraction <= 1.0)) {
        throw std::invalid_argument("edge fraction must be in (0, 1]");
    }
    if (options.sphere_scale && !(*options.sphere_scale > 0.0)) {
        throw std::invalid_argument("sphere scale must be positive");
    }
    if (data.dtb && data.dtb->n_timepoints() != data.biological.n_timepoints()) {
        throw ShapeError("biological and DTB signals differ in length");
    }

    auto ds = std::make_shared<Dataset>();
    ds->id_ = std::move(id);
    ds->data_ = std::move(data);
    const Atlas& atlas = ds->data_.atlas;

    ds->edges_ = options.edge_fraction >= 1.0 ? all_edges(ds->data_.dti) : top_fraction(ds->data_.dti, options.edge_fraction);
    ds->adjacency_ = region_adjacency(ds->data_.dti, atlas);
    ds->sphere_scale_ = options.sphere_scale.value_or(atlas.spacing_mm());

    double max_radius = 0.0;
    for (const Region& r : atlas.regions()) max_radius = std::max(max_radius, region_sphere_radius(r, ds->sphere_scale_));
    ds->compare_offset_ = axis_extent(atlas) + 4.0 * max_radius;

    ds->bio_own_ = minmax_normalize(ds->data_.biological);
    if (ds->data_.dtb) {
        ds->dtb_own_ = minmax_normalize(*ds->data_.dtb);
        auto [a, b] = minmax_normalize_shared(ds->data_.biological, *ds->data_.dtb);
        ds->bio_shared_ = std::move(a);
        ds->dtb_shared_ = std::move(b);
    } else {
        ds->bio_shared_ = ds->bio_own_;
    }

    if (ds->data_.bundles) {
        const auto& edges = ds->data_.bundles->edges;
        for (std::size_t i = 0; i < edges.size(); ++i) ds->bundle_index_.emplace(pair_key(edges[i].src, edges[i].dst), i);
    }
    return ds;
}

const SignalSet& Dataset::normalized(SignalSource source, ColorRangeMode mode) const {
    if (source == SignalSource::biological) return mode == ColorRangeMode::shared ? bio_shared_ : bio_own_;
    if (!dtb_own_) throw NotFoundError("dataset '" + id_ + "' has no DTB signal");
    return mode == ColorRangeMode::shared ? *dtb_shared_ : *dtb_own_;
}

const Polyline* Dataset::bundled(VoxelId src, VoxelId dst) const {
    auto it = bundle_index_.find(pair_key(src, dst));
    return it == bundle_index_.end() ? nullptr : &data_.bundles->edges[it->second].line;
}

// ----- session operations ------------------------------------------------------

SessionState fresh_session(const Dataset& dataset, std::string session_id) {
    SessionState s;
    s.session_id = std::move(session_id);
    s.dataset_id = dataset.id();
    return s;
}

SessionState select_region(const Dataset& dataset, SessionState state, RegionLabel label) {
    if (!dataset.atlas().contains_region(label)) {
        throw NotFoundError("unknown region label " + std::to_string(label));
    }
    state.selected_regions.insert(label);
    if (std::find(state.visited_regions.begin(), state.visited_regions.end(), label) == state.visited_regions.end()) {
        state.visited_regions.push_back(label);
    }
    return state;
}

SessionState reset_navigation(SessionState state) {
    state.selected_regions.clear();
    return state;
}

std::vector<std::pair<RegionLabel, double>> navigate_next(const Dataset& dataset, RegionLabel from) {
    if (!dataset.atlas().contains_region(from)) {
        throw NotFoundError("unknown region label " + std::to_string(from));
    }
    std::vector<std::pair<RegionLabel, double>> out;
    const auto& entries = dataset.adjacency().entries;
    for (auto it = entries.lower_bound({from, std::numeric_limits<RegionLabel>::min()});
         it != entries.end() && it->first.first == from; ++it) {
        if (it->first.second != from && it->second > 0.0) out.emplace_back(it->first.second, it->second);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

SessionState with_time(const Dataset& dataset, SessionState state, std::size_t t) {
    if (t >= dataset.biological().n_timepoints()) {
        throw BoundsError("time index " + std::to_string(t) + " outside [0, " +
                          std::to_string(dataset.biological().n_timepoints()) + ")");
    }
    state.time_index = t;
    return state;
}

SessionState with_threshold(SessionState state, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw BoundsError("threshold must be in [0, 1]");
    state.threshold_tau = tau;
    return state;
}

SessionState with_compare(const Dataset& dataset, SessionState state, bool compare) {
    if (compare && !dataset.dtb()) throw NotFoundError("dataset '" + dataset.id() + "' has no DTB signal");
    state.compare_mode = compare;
    return state;
}

// ----- snapshot ------------------------------------------------------------------

namespace {

std::shared_ptr<const std::vector<ColorRGBA>> gradient_for(std::size_t n_stops,
                                                           std::vector<std::shared_ptr<const std::vector<ColorRGBA>>>& cache) {
    if (n_stops >= cache.size()) cache.resize(n_stops + 1);
    if (!cache[n_stops]) cache[n_stops] = std::make_shared<const std::vector<ColorRGBA>>(direction_gradient(Edge{}, n_stops));
    return cache[n_stops];
}

void add_spheres(const Dataset& dataset, const SessionState& state, SignalSource group, double x_offset,
                 std::vector<SphereItem>& out) {
    const SignalSet& set = dataset.normalized(group, state.color_range_mode);
    std::set<RegionLabel> highlighted(state.visited_regions.begin(), state.visited_regions.end());
    highlighted.insert(state.selected_regions.begin(), state.selected_regions.end());
    for (const Region& r : dataset.atlas().regions()) {
        if (!r.functional || r.voxel_ids.empty()) continue;
        SphereItem s;
        s.label = r.label;
        s.group = group;
        s.center_mm = r.centroid_mm;
        s.center_mm.x += x_offset;
        s.radius = region_sphere_radius(r, dataset.sphere_scale());
        s.value = region_mean(set, r, state.time_index);
        s.color = encode_region_color(s.value);
        s.highlighted = highlighted.contains(r.label);
        s.selected = state.selected_regions.contains(r.label);
        out.push_back(s);
    }
}

}  // namespace

SceneSnapshot snapshot(const Dataset& dataset, const SessionState& state) {
    const Atlas& atlas = dataset.atlas();
    const SignalSet& bio = dataset.biological();
    if (state.time_index >= bio.n_timepoints()) throw BoundsError("time index outside the signal");
    if (state.compare_mode && !dataset.dtb()) throw NotFoundError("dataset has no DTB signal");

    SceneSnapshot snap;
    snap.dataset_id = dataset.id();
    snap.time_index = state.time_index;
    snap.time_ms = static_cast<double>(state.time_index) * bio.dt_ms();
    snap.threshold_tau = state.threshold_tau;
    snap.compare_mode = state.compare_mode;

    add_spheres(dataset, state, SignalSource::biological, 0.0, snap.spheres);
    if (state.compare_mode) add_spheres(dataset, state, SignalSource::dtb, dataset.compare_offset_mm(), snap.spheres);

    EdgeSet visible = threshold_filter(dataset.edges(), state.threshold_tau);
    if (!state.selected_regions.empty()) visible = edges_from_regions(visible, atlas, state.selected_regions);
    const bool flag = !state.selected_regions.empty();

    std::vector<std::shared_ptr<const std::vector<ColorRGBA>>> gradients;
    snap.polylines.reserve(visible.size());
    for (const Edge& e : visible.edges) {
        PolylineItem p;
        p.src = e.src;
        p.dst = e.dst;
        p.weight = e.weight;
        p.rank_pct = e.rank_pct;
        p.flagged = flag;
        if (const Polyline* line = dataset.bundled(e.src, e.dst)) {
            p.points = line->points;
            p.bundled = true;
        } else {
            p.points = {atlas.voxel(e.src).position_mm, atlas.voxel(e.dst).position_mm};
        }
        p.color_stops = gradient_for(p.points.size(), gradients);
        snap.polylines.push_back(std::move(p));
    }

    const SignalSet& norm = dataset.normalized(SignalSource::biological, state.color_range_mode);
    for (RegionLabel label : state.selected_regions) {
        const Region& r = atlas.region(label);
        for (VoxelId id : r.voxel_ids) {
            ChartItem c;
            c.voxel_id = id;
            c.region_label = label;
            c.anchor_mm = atlas.voxel(id).position_mm;
            c.series = norm.series(id);
            double sum = 0.0;
            for (double v : c.series) sum += v;
            c.mean = c.series.empty() ? 0.0 : sum / static_cast<double>(c.series.size());
            c.mean_color = encode_region_color(c.mean);
            snap.charts.push_back(c);
        }
    }

    if (state.slice) {
        snap.slice = state.slice;
        snap.raster = raster(atlas, norm, *state.slice, state.time_index);
    }
    return snap;
}

// ----- JSON ------------------------------------------------------------------------

namespace {

void append_string(std::string& out, std::string_view s) {
    out += '"';
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    static constexpr char hex[] = "0123456789abcdef";
                    out += "\\u00";
                    out += hex[c >> 4];
                    out += hex[c & 0xF];
                } else {
                    out += ch;
                }
        }
    }
    out += '"';
}

void append_number(std::string& out, double v) { out += std::isfinite(v) ? format_double(v) : std::string("null"); }
void append_number(std::string& out, std::size_t v) { out += std::to_string(v); }
void append_bool(std::string& out, bool v) { out += v ? "true" : "false"; }

void append_vec(std::string& out, const Vec3& v) {
    out += '[';
    append_number(out, v.x);
    out += ',';
    append_number(out, v.y);
    out += ',';
    append_number(out, v.z);
    out += ']';
}

void append_color(std::string& out, const ColorRGBA& c) {
    out += '[';
    append_number(out, c.r);
    out += ',';
    append_number(out, c.g);
    out += ',';
    append_number(out, c.b);
    out += ',';
    append_number(out, c.a);
    out += ']';
}

template <class T, class F>
void append_array(std::string& out, const T& items, F&& each) {
    out += '[';
    bool first = true;
    for (const auto& item : items) {
        if (!first) out += ',';
        first = false;
        each(item);
    }
    out += ']';
}

std::string_view to_string(ColorRangeMode m) { return m == ColorRangeMode::shared ? "shared" : "per_set"; }

void append_plane(std::string& out, const SlicePlane& p) {
    out += "{\"axis\":";
    append_string(out, to_string(p.axis));
    out += ",\"coordinate_mm\":";
    append_number(out, p.coordinate_mm);
    out += ",\"thickness_mm\":";
    append_number(out, p.thickness_mm);
    out += '}';
}

}  // namespace

std::string to_json(const SessionState& s) {
    std::string out = "{\"session_id\":";
    append_string(out, s.session_id);
    out += ",\"dataset_id\":";
    append_string(out, s.dataset_id);
    out += ",\"time_index\":";
    append_number(out, s.time_index);
    out += ",\"threshold_tau\":";
    append_number(out, s.threshold_tau);
    out += ",\"selected_regions\":";
    append_array(out, s.selected_regions, [&](RegionLabel l) { out += std::to_string(l); });
    out += ",\"visited_regions\":";
    append_array(out, s.visited_regions, [&](RegionLabel l) { out += std::to_string(l); });
    out += ",\"compare_mode\":";
    append_bool(out, s.compare_mode);
    out += ",\"color_range_mode\":";
    append_string(out, to_string(s.color_range_mode));
    out += ",\"slice\":";
    if (s.slice) {
        append_plane(out, *s.slice);
    } else {
        out += "null";
    }
    out += '}';
    return out;
}

std::string to_json(const SceneSnapshot& snap) {
    std::string out;
    std::size_t points = 0;
    for (const auto& p : snap.polylines) points += p.points.size();
    out.reserve(512 + snap.spheres.size() * 200 + points * 160 + snap.charts.size() * 2048);

    out += "{\"dataset_id\":";
    append_string(out, snap.dataset_id);
    out += ",\"time_index\":";
    append_number(out, snap.time_index);
    out += ",\"time_ms\":";
    append_number(out, snap.time_ms);
    out += ",\"threshold_tau\":";
    append_number(out, snap.threshold_tau);
    out += ",\"compare_mode\":";
    append_bool(out, snap.compare_mode);
    out += ",\"object_count\":";
    append_number(out, snap.object_count());

    out += ",\"spheres\":";
    append_array(out, snap.spheres, [&](const SphereItem& s) {
        out += "{\"label\":";
        out += std::to_string(s.label);
        out += ",\"group\":";
        append_string(out, to_string(s.group));
        out += ",\"center_mm\":";
        append_vec(out, s.center_mm);
        out += ",\"radius\":";
        append_number(out, s.radius);
        out += ",\"value\":";
        append_number(out, s.value);
        out += ",\"color\":";
        append_color(out, s.color);
        out += ",\"highlighted\":";
        append_bool(out, s.highlighted);
        out += ",\"selected\":";
        append_bool(out, s.selected);
        out += '}';
    });

    out += ",\"polylines\":";
    append_array(out, snap.polylines, [&](const PolylineItem& p) {
        out += "{\"src\":";
        out += std::to_string(p.src);
        out += ",\"dst\":";
        out += std::to_string(p.dst);
        out += ",\"weight\":";
        append_number(out, p.weight);
        out += ",\"rank_pct\":";
        append_number(out, p.rank_pct);
        out += ",\"bundled\":";
        append_bool(out, p.bundled);
        out += ",\"flagged\":";
        append_bool(out, p.flagged);
        out += ",\"points\":";
        append_array(out, p.points, [&](const Vec3& v) { append_vec(out, v); });
        out += ",\"color_stops\":";
        if (p.color_stops) {
            append_array(out, *p.color_stops, [&](const ColorRGBA& c) { append_color(out, c); });
        } else {
            out += "[]";
        }
        out += '}';
    });

    out += ",\"charts\":";
    append_array(out, snap.charts, [&](const ChartItem& c) {
        out += "{\"voxel_id\":";
        out += std::to_string(c.voxel_id);
        out += ",\"region_label\":";
        out += std::to_string(c.region_label);
        out += ",\"anchor_mm\":";
        append_vec(out, c.anchor_mm);
        out += ",\"mean\":";
        append_number(out, c.mean);
        out += ",\"mean_color\":";
        append_color(out, c.mean_color);
        out += ",\"series\":";
        append_array(out, c.series, [&](double v) { append_number(out, v); });
        out += '}';
    });

    out += ",\"slice\":";
    if (snap.raster && snap.slice) {
        const SliceRaster& r = *snap.raster;
        out += "{\"plane\":";
        append_plane(out, *snap.slice);
        out += ",\"origin_mm\":[";
        append_number(out, r.origin_u);
        out += ',';
        append_number(out, r.origin_v);
        out += "],\"cell_mm\":";
        append_number(out, r.cell_mm);
        out += ",\"width\":";
        append_number(out, r.width);
        out += ",\"height\":";
        append_number(out, r.height);
        out += ",\"cells\":";
        append_array(out, r.cells, [&](const std::optional<double>& v) {
            if (v) {
                append_number(out, *v);
            } else {
                out += "null";
            }
        });
        out += '}';
    } else {
        out += "null";
    }
    out += '}';
    return out;
}

std::string to_json(const std::vector<std::pair<RegionLabel, double>>& ranking) {
    std::string out;
    append_array(out, ranking, [&](const auto& item) {
        out += "{\"label\":";
        out += std::to_string(item.first);
        out += ",\"weight\":";
        append_number(out, item.second);
        out += '}';
    });
    return out;
}

std::string to_json(const ComparisonReport& report) {
    std::string out = "{\"pearson_r\":";
    append_number(out, report.pearson_r);
    out += ",\"lag\":";
    out += std::to_string(report.lag);
    out += ",\"degenerate\":";
    append_bool(out, report.degenerate);
    out += '}';
    return out;
}

std::string to_json(const std::vector<DatasetInfo>& infos) {
    std::string out;
    append_array(out, infos, [&](const DatasetInfo& d) {
        out += "{\"id\":";
        append_string(out, d.id);
        out += ",\"species\":";
        append_string(out, d.species);
        out += ",\"n_regions\":";
        append_number(out, d.n_regions);
        out += ",\"n_functional_regions\":";
        append_number(out, d.n_functional_regions);
        out += ",\"n_voxels\":";
        append_number(out, d.n_voxels);
        out += ",\"n_timepoints\":";
        append_number(out, d.n_timepoints);
        out += ",\"n_edges\":";
        append_number(out, d.n_edges);
        out += ",\"has_dtb\":";
        append_bool(out, d.has_dtb);
        out += ",\"has_bundles\":";
        append_bool(out, d.has_bundles);
        out += '}';
    });
    return out;
}

// ----- SessionManager ------------------------------------------------------------

SessionManager::SessionManager(std::chrono::seconds idle_ttl, std::function<Clock::time_point()> now)
    : idle_ttl_(idle_ttl), now_(std::move(now)) {}

void SessionManager::add_dataset(std::shared_ptr<const Dataset> dataset) {
    if (!dataset) throw std::invalid_argument("null dataset");
    std::unique_lock lock(mutex_);
    if (!datasets_.contains(dataset->id())) dataset_order_.push_back(dataset->id());
    datasets_[dataset->id()] = std::move(dataset);
}

std::shared_ptr<const Dataset> SessionManager::dataset(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = datasets_.find(id);
    if (it == datasets_.end()) throw NotFoundError("unknown dataset '" + id + "'");
    return it->second;
}

std::shared_ptr<const Dataset> SessionManager::default_dataset() const {
    std::shared_lock lock(mutex_);
    if (dataset_order_.empty()) throw NotFoundError("no datasets loaded");
    return datasets_.at(dataset_order_.front());
}

std::vector<DatasetInfo> SessionManager::datasets() const {
    std::shared_lock lock(mutex_);
    std::vector<DatasetInfo> out;
    for (const std::string& id : dataset_order_) {
        const Dataset& d = *datasets_.at(id);
        DatasetInfo info;
        info.id = id;
        info.species = d.atlas().species().to_string();
        info.n_regions = d.atlas().regions().size();
        info.n_functional_regions = functional_regions(d.atlas()).size();
        info.n_voxels = d.atlas().voxel_count();
        info.n_timepoints = d.biological().n_timepoints();
        info.n_edges = d.edges().size();
        info.has_dtb = d.dtb().has_value();
        info.has_bundles = d.bundles().has_value();
        out.push_back(std::move(info));
    }
    return out;
}

SessionState SessionManager::open_session(const std::string& dataset_id) {
    auto ds = dataset(dataset_id);
    std::unique_lock lock(mutex_);
    auto session = std::make_shared<Session>();
    session->state = fresh_session(*ds, "s" + std::to_string(next_session_++));
    session->last_used = now_();
    sessions_.emplace(session->state.session_id, session);
    return session->state;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& session_id) {
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + session_id + "'");
    return it->second;
}

SessionState SessionManager::state(const std::string& session_id) {
    auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    session->last_used = now_();
    return session->state;
}

SessionState SessionManager::update(const std::string& session_id,
                                    const std::function<SessionState(const Dataset&, SessionState)>& change) {
    auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    auto ds = dataset(session->state.dataset_id);
    SessionState next = change(*ds, session->state);
    next.session_id = session->state.session_id;
    next.dataset_id = session->state.dataset_id;
    session->state = std::move(next);
    session->last_used = now_();
    return session->state;
}

std::size_t SessionManager::expire_idle() {
    const auto now = now_();
    std::unique_lock lock(mutex_);
    std::size_t removed = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        bool idle;
        {
            std::lock_guard session_lock(it->second->mutex);
            idle = now - it->second->last_used > idle_ttl_;
        }
        if (idle) {
            it = sessions_.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

std::size_t SessionManager::session_count() const {
    std::shared_lock lock(mutex_);
    return sessions_.size();
}

}  // namespace dtb
