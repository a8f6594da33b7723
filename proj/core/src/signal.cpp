#include "dtb/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "dtb/error.hpp"
#include "dtb/io.hpp"
#include "dtb/parallel.hpp"

namespace dtb {

std::string_view to_string(SignalSource source) {
    return source == SignalSource::biological ? "biological" : "dtb";
}

SignalSource parse_signal_source(std::string_view text) {
    if (text == "biological") return SignalSource::biological;
    if (text == "dtb") return SignalSource::dtb;
    throw FormatError("unknown signal source '" + std::string(text) + "'");
}

SignalSet SignalSet::build(SignalSource source, double dt_ms, std::size_t n_timepoints,
                           std::vector<VoxelId> ids, std::vector<double> values) {
    if (n_timepoints == 0) throw FormatError("BOLD series must have at least one time point");
    if (!(dt_ms > 0.0) || !std::isfinite(dt_ms)) throw FormatError("dt_ms must be positive");
    if (values.size() != ids.size() * n_timepoints)
        throw FormatError("BOLD value count does not match voxel count x time points");

    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

    SignalSet set;
    set.source_ = source;
    set.dt_ms_ = dt_ms;
    set.n_timepoints_ = n_timepoints;
    set.ids_.reserve(ids.size());
    bool sorted = std::is_sorted(ids.begin(), ids.end());
    if (sorted) {
        set.ids_ = std::move(ids);
        set.values_ = std::move(values);
    } else {
        set.values_.reserve(values.size());
        for (std::size_t i : order) {
            set.ids_.push_back(ids[i]);
            set.values_.insert(set.values_.end(), values.begin() + static_cast<std::ptrdiff_t>(i * n_timepoints),
                               values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_timepoints));
        }
    }
    for (std::size_t i = 0; i < set.ids_.size(); ++i) {
        if (!set.row_.emplace(set.ids_[i], i).second)
            throw FormatError("voxel " + std::to_string(set.ids_[i]) + " has more than one BOLD series");
    }
    for (double v : set.values_)
        if (!std::isfinite(v)) throw FormatError("BOLD values must be finite");
    return set;
}

std::span<const double> SignalSet::series(VoxelId id) const {
    auto it = row_.find(id);
    if (it == row_.end()) throw NotFoundError("no BOLD series for voxel " + std::to_string(id));
    return row(it->second);
}

SignalSet SignalSet::with_values(std::vector<double> values) const {
    if (values.size() != values_.size()) throw ShapeError("replacement values have the wrong size");
    SignalSet out = *this;
    out.values_ = std::move(values);
    return out;
}

// ----- file formats ---------------------------------------------------------

namespace {

constexpr std::string_view kBoldMagic = "DTBB";

void check_ids_in_atlas(std::span<const VoxelId> ids, const Atlas& atlas) {
    for (VoxelId id : ids)
        if (!atlas.contains_voxel(id))
            throw FormatError("BOLD series references voxel " + std::to_string(id) + " which is not in the atlas");
}

SignalSet parse_bold_csv(std::string_view text, const Atlas& atlas, SignalSource source) {
    double dt_ms = 0.0;
    std::size_t n_t = 0;
    bool have_header = false;
    std::vector<VoxelId> ids;
    std::vector<double> values;

    detail::for_each_line(text, [&](std::string_view line, std::size_t number) {
        if (!have_header) {
            std::size_t field = 0;
            detail::for_each_field(line, [&](std::string_view f) {
                if (field == 0) dt_ms = parse_double(f, "BOLD header dt_ms");
                else if (field == 1) n_t = parse_unsigned(f, "BOLD header n_timepoints");
                ++field;
            });
            if (field != 2) throw FormatError("BOLD header must be 'dt_ms,n_timepoints'");
            if (n_t == 0) throw FormatError("BOLD header declares zero time points");
            have_header = true;
            values.reserve(n_t * 1024);
            return;
        }
        std::size_t field = 0;
        VoxelId id = 0;
        detail::for_each_field(line, [&](std::string_view f) {
            if (field == 0) {
                auto raw = parse_unsigned(f, "voxel id on line " + std::to_string(number));
                if (raw > 0xFFFFFFFFull) throw FormatError("voxel id out of range on line " + std::to_string(number));
                id = static_cast<VoxelId>(raw);
            } else {
                if (field > n_t)
                    throw FormatError("voxel " + std::to_string(id) + " has more than " + std::to_string(n_t) +
                                      " values (ragged series)");
                values.push_back(parse_double(f, "BOLD value of voxel " + std::to_string(id)));
            }
            ++field;
        });
        if (field - 1 != n_t)
            throw FormatError("voxel " + std::to_string(id) + " has " + std::to_string(field - 1) +
                              " values, expected " + std::to_string(n_t) + " (ragged series)");
        ids.push_back(id);
    });
    if (!have_header) throw FormatError("BOLD file is empty");
    if (ids.empty()) throw FormatError("BOLD file contains no voxel series");
    check_ids_in_atlas(ids, atlas);
    return SignalSet::build(source, dt_ms, n_t, std::move(ids), std::move(values));
}

SignalSet parse_bold_binary(std::string_view bytes, const Atlas& atlas, SignalSource source) {
    detail::ByteReader in(bytes, "BOLD");
    in.raw(4);
    const std::uint32_t count = in.u32();
    const std::uint32_t n_t = in.u32();
    const double dt_ms = in.f64();
    if (n_t == 0) throw FormatError("BOLD header declares zero time points");
    if (count == 0) throw FormatError("BOLD file contains no voxel series");
    const std::size_t expected = static_cast<std::size_t>(count) * (4 + 4 * static_cast<std::size_t>(n_t));
    if (in.remaining() != expected) throw FormatError("BOLD binary payload size does not match its header");
    std::vector<VoxelId> ids(count);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(count) * n_t);
    for (std::uint32_t i = 0; i < count; ++i) {
        ids[i] = in.u32();
        for (std::uint32_t t = 0; t < n_t; ++t) values.push_back(static_cast<double>(in.f32()));
    }
    check_ids_in_atlas(ids, atlas);
    return SignalSet::build(source, dt_ms, n_t, std::move(ids), std::move(values));
}

}  // namespace

SignalSet parse_bold(std::string_view bytes, const Atlas& atlas, SignalSource source) {
    if (bytes.substr(0, 4) == kBoldMagic) return parse_bold_binary(bytes, atlas, source);
    return parse_bold_csv(bytes, atlas, source);
}

SignalSet load_bold(const std::filesystem::path& path, const Atlas& atlas, SignalSource source) {
    return parse_bold(read_text_file(path), atlas, source);
}

std::string serialize_bold(const SignalSet& set, BoldEncoding encoding) {
    const std::size_t n_t = set.n_timepoints();
    if (encoding == BoldEncoding::binary) {
        detail::ByteWriter out;
        out.raw(kBoldMagic);
        out.u32(static_cast<std::uint32_t>(set.voxel_count()));
        out.u32(static_cast<std::uint32_t>(n_t));
        out.f64(set.dt_ms());
        for (std::size_t i = 0; i < set.voxel_count(); ++i) {
            out.u32(set.voxel_ids()[i]);
            for (double v : set.row(i)) out.f32(static_cast<float>(v));
        }
        return out.take();
    }
    std::string out;
    out.reserve(set.values().size() * 12);
    out += format_double(set.dt_ms());
    out += ',';
    out += std::to_string(n_t);
    out += '\n';
    for (std::size_t i = 0; i < set.voxel_count(); ++i) {
        out += std::to_string(set.voxel_ids()[i]);
        for (double v : set.row(i)) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

void save_bold(const SignalSet& set, const std::filesystem::path& path, BoldEncoding encoding) {
    write_file_atomic(path, serialize_bold(set, encoding));
}

// ----- analytics ------------------------------------------------------------

namespace {

std::vector<double> affine_normalized(std::span<const double> values, double lo, double hi) {
    std::vector<double> out(values.size(), 0.0);
    const double range = hi - lo;
    if (range > 0.0)
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::clamp((values[i] - lo) / range, 0.0, 1.0);
    return out;
}

std::pair<double, double> value_range(const SignalSet& set) {
    auto [lo, hi] = std::minmax_element(set.values().begin(), set.values().end());
    return {*lo, *hi};
}

}  // namespace

SignalSet minmax_normalize(const SignalSet& set) {
    auto [lo, hi] = value_range(set);
    return set.with_values(affine_normalized(set.values(), lo, hi));
}

std::pair<SignalSet, SignalSet> minmax_normalize_shared(const SignalSet& a, const SignalSet& b) {
    auto [alo, ahi] = value_range(a);
    auto [blo, bhi] = value_range(b);
    const double lo = std::min(alo, blo);
    const double hi = std::max(ahi, bhi);
    return {a.with_values(affine_normalized(a.values(), lo, hi)),
            b.with_values(affine_normalized(b.values(), lo, hi))};
}

double region_mean(const SignalSet& set, const Region& region, std::size_t t) {
    if (t >= set.n_timepoints())
        throw BoundsError("time index " + std::to_string(t) + " outside [0, " + std::to_string(set.n_timepoints()) + ")");
    if (region.voxel_ids.empty())
        throw DegenerateInputError("region " + std::to_string(region.label) + " has no voxels");
    double sum = 0.0;
    for (VoxelId id : region.voxel_ids) sum += set.series(id)[t];
    return sum / static_cast<double>(region.voxel_ids.size());
}

double voxel_mean_over_time(const SignalSet& set, VoxelId id) {
    auto s = set.series(id);
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

std::vector<double> mean_series(const SignalSet& set, std::span<const VoxelId> voxels) {
    const std::size_t n_t = set.n_timepoints();
    std::vector<double> sum(n_t, 0.0);
    if (voxels.empty()) return sum;
    for (VoxelId id : voxels) {
        auto s = set.series(id);
        for (std::size_t t = 0; t < n_t; ++t) sum[t] += s[t];
    }
    for (double& v : sum) v /= static_cast<double>(voxels.size());
    return sum;
}

std::size_t peak_time(const SignalSet& set, std::span<const Region> regions) {
    if (regions.empty()) throw DegenerateInputError("peak_time needs at least one region");
    std::vector<VoxelId> members;
    for (const auto& r : regions) members.insert(members.end(), r.voxel_ids.begin(), r.voxel_ids.end());
    if (members.empty()) throw DegenerateInputError("peak_time regions contain no voxels");
    auto means = mean_series(set, members);
    return static_cast<std::size_t>(std::max_element(means.begin(), means.end()) - means.begin());
}

ColorRGBA encode_region_color(double v) {
    v = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
    const double alpha = std::min(1.0, v / 0.25);
    if (v <= 0.5) return {2.0 * v, 1.0, 0.0, alpha};
    return {1.0, 2.0 * (1.0 - v), 0.0, alpha};
}

VoxelColor encode_voxel_color(double v) {
    v = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
    return {{v, v, v, v}, v};
}

// ----- comparison -----------------------------------------------------------

Scope Scope::parse(std::string_view text) {
    if (text.empty() || text == "all") return all_voxels();
    auto colon = text.find(':');
    if (colon == std::string_view::npos) throw FormatError("invalid scope '" + std::string(text) + "'");
    auto kind = text.substr(0, colon);
    auto list = text.substr(colon + 1);
    std::vector<unsigned long long> items;
    detail::for_each_field(list, [&](std::string_view f) { items.push_back(parse_unsigned(f, "scope item")); });
    if (kind == "region" || kind == "regions") {
        std::vector<RegionLabel> labels;
        for (auto v : items) labels.push_back(static_cast<RegionLabel>(v));
        return of_regions(std::move(labels));
    }
    if (kind == "voxel" || kind == "voxels") {
        std::vector<VoxelId> ids;
        for (auto v : items) ids.push_back(static_cast<VoxelId>(v));
        return of_voxels(std::move(ids));
    }
    throw FormatError("invalid scope kind '" + std::string(kind) + "'");
}

double pearson(std::span<const double> a, std::span<const double> b, bool* degenerate) {
    if (a.size() != b.size()) throw ShapeError("pearson: series lengths differ");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (degenerate) *degenerate = false;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

int cross_correlation_lag(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("cross-correlation: series lengths differ");
    const std::size_t n = a.size();
    if (n == 0) return 0;
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    std::vector<double> ca(n), cb(n);
    double saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ca[i] = a[i] - ma;
        cb[i] = b[i] - mb;
        saa += ca[i] * ca[i];
        sbb += cb[i] * cb[i];
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return 0;
    const double denom = std::sqrt(saa * sbb);
    auto ncc = [&](int s) {
        double acc = 0.0;
        const long long ln = static_cast<long long>(n);
        for (long long t = std::max(0LL, -static_cast<long long>(s)); t < ln && t + s < ln; ++t)
            acc += ca[static_cast<std::size_t>(t)] * cb[static_cast<std::size_t>(t + s)];
        return acc / denom;
    };
    const int max_shift = static_cast<int>(n / 2);
    int best = 0;
    double best_value = ncc(0);
    // Visiting 0, -1, +1, -2, +2, ... and replacing only on a strict increase
    // implements the tie rule (smallest |s| first, then negative s).
    for (int m = 1; m <= max_shift; ++m) {
        for (int s : {-m, m}) {
            const double v = ncc(s);
            if (v > best_value) {
                best_value = v;
                best = s;
            }
        }
    }
    return best;
}

ComparisonReport compare_series(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("compared series have different lengths");
    ComparisonReport report;
    report.pearson_r = pearson(a, b, &report.degenerate);
    report.lag = cross_correlation_lag(a, b);
    return report;
}

namespace {

std::vector<VoxelId> scope_voxels(const SignalSet& a, const SignalSet& b, const Atlas& atlas, const Scope& scope) {
    std::vector<VoxelId> voxels;
    switch (scope.kind) {
        case Scope::Kind::all:
            if (!std::equal(a.voxel_ids().begin(), a.voxel_ids().end(), b.voxel_ids().begin(), b.voxel_ids().end()))
                throw ShapeError("compared sets cover different voxels");
            voxels.assign(a.voxel_ids().begin(), a.voxel_ids().end());
            return voxels;
        case Scope::Kind::regions:
            for (RegionLabel label : scope.labels) {
                const auto& r = atlas.region(label);
                voxels.insert(voxels.end(), r.voxel_ids.begin(), r.voxel_ids.end());
            }
            break;
        case Scope::Kind::voxels:
            for (VoxelId id : scope.voxels) atlas.voxel(id);
            voxels = scope.voxels;
            break;
    }
    for (VoxelId id : voxels)
        if (!a.contains(id) || !b.contains(id))
            throw ShapeError("voxel " + std::to_string(id) + " is missing from one of the compared sets");
    return voxels;
}

}  // namespace

ComparisonReport compare_sets(const SignalSet& a, const SignalSet& b, const Atlas& atlas, const Scope& scope) {
    if (a.n_timepoints() != b.n_timepoints())
        throw ShapeError("compared sets have different lengths (" + std::to_string(a.n_timepoints()) + " vs " +
                         std::to_string(b.n_timepoints()) + ")");
    auto voxels = scope_voxels(a, b, atlas, scope);
    if (voxels.empty()) throw DegenerateInputError("comparison scope contains no voxels");
    return compare_series(mean_series(a, voxels), mean_series(b, voxels));
}

std::vector<std::pair<RegionLabel, ComparisonReport>> compare_by_region(const SignalSet& a, const SignalSet& b,
                                                                        const Atlas& atlas,
                                                                        std::span<const RegionLabel> labels,
                                                                        unsigned workers) {
    std::vector<std::pair<RegionLabel, ComparisonReport>> out(labels.size());
    parallel_for(labels.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            out[i] = {labels[i], compare_sets(a, b, atlas, Scope::of_regions({labels[i]}))};
    });
    return out;
}

std::vector<RegionMean> top_regions(const SignalSet& set, const Atlas& atlas, std::size_t t, std::size_t k) {
    if (t >= set.n_timepoints())
        throw BoundsError("time index " + std::to_string(t) + " outside [0, " + std::to_string(set.n_timepoints()) + ")");
    if (k == 0) throw std::invalid_argument("top_regions needs k >= 1");
    std::vector<RegionMean> means;
    for (const auto& r : atlas.regions())
        if (!r.voxel_ids.empty()) means.push_back({r.label, region_mean(set, r, t)});
    std::sort(means.begin(), means.end(), [](const RegionMean& x, const RegionMean& y) {
        if (x.mean != y.mean) return x.mean > y.mean;
        return x.label < y.label;
    });
    if (means.size() > k) means.resize(k);
    return means;
}

}  // namespace dtb
