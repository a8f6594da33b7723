#include "dtb/fdeb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dtb/error.hpp"
#include "dtb/io.hpp"
#include "dtb/parallel.hpp"
#include "json.hpp"

namespace dtb {

// ----- parameters -----------------------------------------------------------

void BundleParams::validate() const {
    if (!(k_p > 0.0)) throw std::invalid_argument("k_p must be positive");
    if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");
    if (initial_subdivisions < 1) throw std::invalid_argument("initial_subdivisions must be >= 1");
    if (iterations_per_cycle < 1) throw std::invalid_argument("iterations_per_cycle must be >= 1");
    if (min_iterations < 1) throw std::invalid_argument("min_iterations must be >= 1");
    if (!(iteration_decay > 0.0)) throw std::invalid_argument("iteration_decay must be positive");
    if (step_size && !(*step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
    if (!(compat_threshold >= 0.0 && compat_threshold <= 1.0))
        throw std::invalid_argument("compat_threshold must lie in [0, 1]");
    if (max_move_factor && !(*max_move_factor > 0.0)) throw std::invalid_argument("max_move_factor must be positive");
}

int BundleParams::iterations_for_cycle(int cycle) const {
    const double decayed = iterations_per_cycle * std::pow(iteration_decay, cycle);
    return std::max(min_iterations, static_cast<int>(std::lround(decayed)));
}

// ----- compatibility --------------------------------------------------------

namespace {

double visibility_one_way(const Segment& p, const Segment& q) {
    const Vec3 dir = p.b - p.a;
    const double len2 = dot(dir, dir);
    auto project = [&](const Vec3& x) { return p.a + dir * (dot(x - p.a, dir) / len2); };
    const Vec3 i0 = project(q.a);
    const Vec3 i1 = project(q.b);
    const double span = distance(i0, i1);
    if (!(span > 0.0)) return 0.0;
    const Vec3 im = (i0 + i1) * 0.5;
    const Vec3 pm = (p.a + p.b) * 0.5;
    return std::max(0.0, 1.0 - 2.0 * distance(pm, im) / span);
}

}  // namespace

CompatibilityFactors compatibility_factors(const Segment& p, const Segment& q) {
    const Vec3 dp = p.b - p.a;
    const Vec3 dq = q.b - q.a;
    const double lp = norm(dp);
    const double lq = norm(dq);
    if (!(lp > 0.0) || !(lq > 0.0)) throw DegenerateInputError("compatibility of a zero-length segment");
    const double l_avg = 0.5 * (lp + lq);

    CompatibilityFactors f;
    f.angle = std::min(1.0, std::abs(dot(dp, dq)) / (lp * lq));
    f.scale = 2.0 / (l_avg / std::min(lp, lq) + std::max(lp, lq) / l_avg);
    const Vec3 mp = (p.a + p.b) * 0.5;
    const Vec3 mq = (q.a + q.b) * 0.5;
    f.position = l_avg / (l_avg + distance(mp, mq));
    f.visibility = std::min(visibility_one_way(p, q), visibility_one_way(q, p));
    return f;
}

double compatibility(const Segment& p, const Segment& q) { return compatibility_factors(p, q).product(); }

namespace {

// Midpoint-distance bound: c <= position factor, so c >= t implies
// |mid_P - mid_Q| <= l_avg * (1 - t) / t.
struct MidpointGrid {
    double cell = 1.0;
    Vec3 origin;
    int nx = 1, ny = 1, nz = 1;
    std::vector<std::vector<std::size_t>> cells;

    int clamp_index(double v, int n) const { return std::clamp(static_cast<int>(std::floor(v / cell)), 0, n - 1); }
    std::size_t flat(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(iy)) *
                   static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix);
    }
};

MidpointGrid build_grid(std::span<const Vec3> mids, double cell) {
    MidpointGrid g;
    constexpr double inf = std::numeric_limits<double>::infinity();
    Vec3 lo{inf, inf, inf}, hi{-inf, -inf, -inf};
    for (const auto& m : mids) {
        lo = {std::min(lo.x, m.x), std::min(lo.y, m.y), std::min(lo.z, m.z)};
        hi = {std::max(hi.x, m.x), std::max(hi.y, m.y), std::max(hi.z, m.z)};
    }
    g.origin = lo;
    g.cell = cell;
    auto count = [&](double extent) {
        return static_cast<int>(std::min(256.0, std::floor(extent / cell) + 1.0));
    };
    g.nx = count(hi.x - lo.x);
    g.ny = count(hi.y - lo.y);
    g.nz = count(hi.z - lo.z);
    g.cells.resize(static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny) * static_cast<std::size_t>(g.nz));
    for (std::size_t i = 0; i < mids.size(); ++i) {
        const Vec3 r = mids[i] - g.origin;
        g.cells[g.flat(g.clamp_index(r.x, g.nx), g.clamp_index(r.y, g.ny), g.clamp_index(r.z, g.nz))].push_back(i);
    }
    return g;
}

}  // namespace

CompatibilityCache CompatibilityCache::build(std::span<const Segment> segments, double threshold, bool use_spatial_grid,
                                             unsigned workers) {
    const std::size_t n = segments.size();
    std::vector<double> lengths(n);
    std::vector<Vec3> mids(n);
    double max_len = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lengths[i] = distance(segments[i].a, segments[i].b);
        if (!(lengths[i] > 0.0)) throw DegenerateInputError("edge " + std::to_string(i) + " has zero length");
        mids[i] = (segments[i].a + segments[i].b) * 0.5;
        max_len = std::max(max_len, lengths[i]);
    }

    CompatibilityCache cache;
    cache.neighbors_.resize(n);
    const bool grid_ok = use_spatial_grid && threshold > 0.0 && n > 1;

    auto consider = [&](std::size_t p, std::size_t q, std::vector<Neighbor>& row) {
        const double c = compatibility(segments[std::min(p, q)], segments[std::max(p, q)]);
        if (c > 0.0 && c >= threshold) row.push_back({q, c});
    };

    if (!grid_ok) {
        parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p)
                for (std::size_t q = 0; q < n; ++q)
                    if (q != p) consider(p, q, cache.neighbors_[p]);
        });
        return cache;
    }

    const double reach = (1.0 - threshold) / threshold;
    const double cell = std::max(max_len * 0.5, 1e-12);
    const MidpointGrid grid = build_grid(mids, cell);
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<std::size_t> candidates;
        for (std::size_t p = begin; p < end; ++p) {
            const double radius = 0.5 * (lengths[p] + max_len) * reach;
            const Vec3 r = mids[p] - grid.origin;
            const int x0 = grid.clamp_index(r.x - radius, grid.nx), x1 = grid.clamp_index(r.x + radius, grid.nx);
            const int y0 = grid.clamp_index(r.y - radius, grid.ny), y1 = grid.clamp_index(r.y + radius, grid.ny);
            const int z0 = grid.clamp_index(r.z - radius, grid.nz), z1 = grid.clamp_index(r.z + radius, grid.nz);
            const std::size_t box = static_cast<std::size_t>(x1 - x0 + 1) * static_cast<std::size_t>(y1 - y0 + 1) *
                                    static_cast<std::size_t>(z1 - z0 + 1);
            auto near = [&](std::size_t q) {
                return distance(mids[p], mids[q]) <= 0.5 * (lengths[p] + lengths[q]) * reach * (1.0 + 1e-12);
            };
            if (2 * box >= grid.cells.size()) {
                // Box spans most of the grid: an ordered scan avoids the sort.
                for (std::size_t q = 0; q < n; ++q)
                    if (q != p && near(q)) consider(p, q, cache.neighbors_[p]);
                continue;
            }
            candidates.clear();
            for (int iz = z0; iz <= z1; ++iz)
                for (int iy = y0; iy <= y1; ++iy)
                    for (int ix = x0; ix <= x1; ++ix)
                        for (std::size_t q : grid.cells[grid.flat(ix, iy, iz)])
                            if (q != p && near(q)) candidates.push_back(q);
            std::sort(candidates.begin(), candidates.end());
            for (std::size_t q : candidates) consider(p, q, cache.neighbors_[p]);
        }
    });
    return cache;
}

double CompatibilityCache::at(std::size_t p, std::size_t q) const {
    if (p == q) return 1.0;
    const auto& row = neighbors_.at(p);
    auto it = std::lower_bound(row.begin(), row.end(), q,
                               [](const Neighbor& n, std::size_t idx) { return n.index < idx; });
    return (it != row.end() && it->index == q) ? it->c : 0.0;
}

std::size_t CompatibilityCache::pair_count() const {
    std::size_t total = 0;
    for (const auto& row : neighbors_) total += row.size();
    return total / 2;
}

// ----- resampling -----------------------------------------------------------

Polyline resample(const Polyline& line, std::size_t intervals) {
    if (line.points.size() < 2) throw DegenerateInputError("polyline needs at least two points");
    if (intervals == 0) throw std::invalid_argument("resample needs at least one interval");
    const auto& pts = line.points;
    std::vector<double> cumulative(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) cumulative[i] = cumulative[i - 1] + distance(pts[i - 1], pts[i]);
    const double total = cumulative.back();

    Polyline out;
    out.weight = line.weight;
    out.points.resize(intervals + 1);
    out.points.front() = pts.front();
    out.points.back() = pts.back();
    std::size_t seg = 0;
    for (std::size_t k = 1; k < intervals; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(intervals);
        while (seg + 2 < pts.size() && cumulative[seg + 1] < target) ++seg;
        const double seg_len = cumulative[seg + 1] - cumulative[seg];
        const double t = seg_len > 0.0 ? (target - cumulative[seg]) / seg_len : 0.0;
        out.points[k] = lerp(pts[seg], pts[seg + 1], std::clamp(t, 0.0, 1.0));
    }
    return out;
}

Polyline subdivide(const Polyline& line) { return resample(line, 2 * std::max<std::size_t>(1, line.intervals())); }

// ----- forces ---------------------------------------------------------------

namespace {

inline Vec3 spring_term(const Vec3& prev, const Vec3& p, const Vec3& next, double k_p) {
    return ((prev - p) + (next - p)) * k_p;
}

// c * unit(q - p) / max(|q - p|, eps); zero for coincident points.
inline Vec3 attraction_term(const Vec3& p, const Vec3& q, double c, double eps) {
    const Vec3 diff = q - p;
    const double d = norm(diff);
    if (!(d > 0.0)) return {};
    return diff * (c / (d * std::max(d, eps)));
}

}  // namespace

Vec3 force_on_point(std::span<const Polyline> lines, std::size_t p, std::size_t i, const CompatibilityCache& cache,
                    const BundleParams& params, double eps) {
    const auto& pts = lines[p].points;
    if (i == 0 || i + 1 >= pts.size()) throw std::out_of_range("force_on_point needs an interior index");
    Vec3 force = spring_term(pts[i - 1], pts[i], pts[i + 1], params.k_p);
    for (const auto& n : cache.neighbors(p)) {
        if (n.c < params.compat_threshold) continue;
        const auto& other = lines[n.index].points;
        if (other.size() != pts.size()) throw ShapeError("force_on_point: polylines have different point counts");
        force += attraction_term(pts[i], other[i], n.c, eps);
    }
    return force;
}

double mean_edge_length(std::span<const Polyline> edges) {
    if (edges.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& e : edges) sum += distance(e.points.front(), e.points.back());
    return sum / static_cast<double>(edges.size());
}

// ----- bundling -------------------------------------------------------------

std::vector<Polyline> bundle(std::span<const Polyline> edges, const BundleParams& params, const BundleOptions& options) {
    params.validate();
    if (edges.empty()) return {};

    const std::size_t n_edges = edges.size();
    std::vector<Segment> segments(n_edges);
    for (std::size_t e = 0; e < n_edges; ++e) {
        if (edges[e].points.size() < 2) throw DegenerateInputError("edge " + std::to_string(e) + " has fewer than two points");
        segments[e] = {edges[e].points.front(), edges[e].points.back()};
        if (segments[e].a == segments[e].b)
            throw DegenerateInputError("edge " + std::to_string(e) + " has identical endpoints");
    }
    const double mean_len = mean_edge_length(edges);
    const double eps = 1e-6 * mean_len;
    double step = params.step_size.value_or(0.04 * mean_len);
    const unsigned workers = std::max(1u, options.workers);

    const auto cache = CompatibilityCache::build(segments, params.compat_threshold, options.use_spatial_grid, workers);

    // Flat storage: edge e owns points [e * stride, (e + 1) * stride).
    std::size_t intervals = static_cast<std::size_t>(params.initial_subdivisions);
    std::vector<Vec3> current;
    auto straight = [&](std::size_t n_intervals) {
        std::vector<Vec3> out(n_edges * (n_intervals + 1));
        for (std::size_t e = 0; e < n_edges; ++e) {
            auto line = resample(Polyline{{segments[e].a, segments[e].b}, 0.0}, n_intervals);
            std::copy(line.points.begin(), line.points.end(), out.begin() + static_cast<std::ptrdiff_t>(e * (n_intervals + 1)));
        }
        return out;
    };
    current = straight(intervals);

    std::vector<Vec3> next;
    for (int cycle = 0; cycle < params.n_cycles; ++cycle) {
        // Subdivide every polyline.
        const std::size_t old_stride = intervals + 1;
        intervals *= 2;
        const std::size_t stride = intervals + 1;
        std::vector<Vec3> refined(n_edges * stride);
        for (std::size_t e = 0; e < n_edges; ++e) {
            Polyline line;
            line.points.assign(current.begin() + static_cast<std::ptrdiff_t>(e * old_stride),
                               current.begin() + static_cast<std::ptrdiff_t>((e + 1) * old_stride));
            auto sub = resample(line, intervals);
            std::copy(sub.points.begin(), sub.points.end(), refined.begin() + static_cast<std::ptrdiff_t>(e * stride));
        }
        current = std::move(refined);
        next = current;

        const int iterations = params.iterations_for_cycle(cycle);
        const double max_move = params.max_move_factor ? *params.max_move_factor * step
                                                       : std::numeric_limits<double>::infinity();
        for (int it = 0; it < iterations; ++it) {
            parallel_for(n_edges, workers, [&](std::size_t begin, std::size_t end) {
                std::vector<Vec3> force(stride);
                for (std::size_t e = begin; e < end; ++e) {
                    const Vec3* p = current.data() + e * stride;
                    for (std::size_t i = 1; i + 1 < stride; ++i)
                        force[i] = spring_term(p[i - 1], p[i], p[i + 1], params.k_p);
                    for (const auto& nb : cache.neighbors(e)) {
                        const Vec3* q = current.data() + nb.index * stride;
                        for (std::size_t i = 1; i + 1 < stride; ++i) force[i] += attraction_term(p[i], q[i], nb.c, eps);
                    }
                    Vec3* out = next.data() + e * stride;
                    for (std::size_t i = 1; i + 1 < stride; ++i) {
                        Vec3 move = force[i] * step;
                        const double len = norm(move);
                        if (len > max_move) move = move * (max_move / len);
                        out[i] = p[i] + move;
                    }
                }
            });
            std::swap(current, next);
        }
        step *= 0.5;
    }

    std::vector<Polyline> result(n_edges);
    const std::size_t stride = intervals + 1;
    for (std::size_t e = 0; e < n_edges; ++e) {
        result[e].weight = edges[e].weight;
        result[e].points.assign(current.begin() + static_cast<std::ptrdiff_t>(e * stride),
                                current.begin() + static_cast<std::ptrdiff_t>((e + 1) * stride));
        result[e].points.front() = edges[e].points.front();
        result[e].points.back() = edges[e].points.back();
    }
    return result;
}

std::vector<Polyline> bundle(const EdgeSet& edges, const Atlas& atlas, const BundleParams& params,
                             const BundleOptions& options) {
    std::vector<Polyline> lines;
    lines.reserve(edges.size());
    for (const auto& e : edges.edges)
        lines.push_back({{atlas.voxel(e.src).position_mm, atlas.voxel(e.dst).position_mm}, e.weight});
    return bundle(lines, params, options);
}

// ----- Bundled-Edge Format --------------------------------------------------

namespace {

std::string params_json(const BundleParams& p) {
    std::ostringstream out;
    out << "{\"k_p\":" << format_double(p.k_p) << ",\"n_cycles\":" << p.n_cycles
        << ",\"initial_subdivisions\":" << p.initial_subdivisions
        << ",\"iterations_per_cycle\":" << p.iterations_per_cycle
        << ",\"iteration_decay\":" << format_double(p.iteration_decay) << ",\"min_iterations\":" << p.min_iterations
        << ",\"step_size\":" << (p.step_size ? format_double(*p.step_size) : std::string("null"))
        << ",\"compat_threshold\":" << format_double(p.compat_threshold)
        << ",\"max_move_factor\":" << (p.max_move_factor ? format_double(*p.max_move_factor) : std::string("null"))
        << "}";
    return out.str();
}

}  // namespace

std::string serialize_bundles(const BundleDocument& doc) {
    std::string out = "{\"params\":" + params_json(doc.params) + ",\"edges\":[";
    bool first = true;
    for (const auto& e : doc.edges) {
        out += first ? "\n" : ",\n";
        first = false;
        out += "{\"src\":" + std::to_string(e.src) + ",\"dst\":" + std::to_string(e.dst) +
               ",\"weight\":" + format_double(e.line.weight) + ",\"points\":[";
        for (std::size_t i = 0; i < e.line.points.size(); ++i) {
            const auto& p = e.line.points[i];
            if (i) out += ',';
            out += '[' + format_double(p.x) + ',' + format_double(p.y) + ',' + format_double(p.z) + ']';
        }
        out += "]}";
    }
    out += "\n]}\n";
    return out;
}

BundleDocument parse_bundles(std::string_view text) {
    using nlohmann::json;
    BundleDocument doc;
    try {
        const json j = json::parse(text);
        if (j.contains("params")) {
            const json& p = j.at("params");
            doc.params.k_p = p.value("k_p", doc.params.k_p);
            doc.params.n_cycles = p.value("n_cycles", doc.params.n_cycles);
            doc.params.initial_subdivisions = p.value("initial_subdivisions", doc.params.initial_subdivisions);
            doc.params.iterations_per_cycle = p.value("iterations_per_cycle", doc.params.iterations_per_cycle);
            doc.params.iteration_decay = p.value("iteration_decay", doc.params.iteration_decay);
            doc.params.min_iterations = p.value("min_iterations", doc.params.min_iterations);
            doc.params.compat_threshold = p.value("compat_threshold", doc.params.compat_threshold);
            if (p.contains("step_size") && !p.at("step_size").is_null())
                doc.params.step_size = p.at("step_size").get<double>();
            else
                doc.params.step_size.reset();
            if (p.contains("max_move_factor")) {
                if (p.at("max_move_factor").is_null()) doc.params.max_move_factor.reset();
                else doc.params.max_move_factor = p.at("max_move_factor").get<double>();
            }
        }
        for (const auto& e : j.at("edges")) {
            BundledEdge be;
            be.src = e.at("src").get<VoxelId>();
            be.dst = e.at("dst").get<VoxelId>();
            be.line.weight = e.at("weight").get<double>();
            for (const auto& pt : e.at("points")) {
                if (!pt.is_array() || pt.size() != 3) throw FormatError("bundle points must be [x, y, z]");
                be.line.points.push_back({pt[0].get<double>(), pt[1].get<double>(), pt[2].get<double>()});
            }
            doc.edges.push_back(std::move(be));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed bundle document: ") + e.what());
    }
    return doc;
}

void export_bundles(const BundleDocument& doc, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_bundles(doc));
}

BundleDocument import_bundles(const std::filesystem::path& path) { return parse_bundles(read_text_file(path)); }

BundleDocument make_bundle_document(const EdgeSet& edges, std::vector<Polyline> lines, const BundleParams& params) {
    if (lines.size() != edges.size()) throw ShapeError("bundled lines and edges differ in count");
    BundleDocument doc;
    doc.params = params;
    doc.edges.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i)
        doc.edges.push_back({edges.edges[i].src, edges.edges[i].dst, std::move(lines[i])});
    return doc;
}

}  // namespace dtb
