#include "dtb/connectome.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "dtb/error.hpp"
#include "dtb/io.hpp"

namespace dtb {

namespace {

// Neumaier summation; fixed order keeps results reproducible.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
        else comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

bool heavier_first(const MatrixEntry& a, const MatrixEntry& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
}

}  // namespace

ConnectivityMatrix ConnectivityMatrix::build(std::size_t n_voxels, std::vector<MatrixEntry> entries, bool normalized) {
    for (const auto& e : entries) {
        if (e.src == e.dst)
            throw FormatError("self-connection (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                              ") is not allowed");
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
            throw FormatError("entry (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                              ") has a negative or non-finite weight");
    }
    std::sort(entries.begin(), entries.end(), [](const MatrixEntry& a, const MatrixEntry& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].src == entries[i - 1].src && entries[i].dst == entries[i - 1].dst)
            throw FormatError("duplicate entry (" + std::to_string(entries[i].src) + "," +
                              std::to_string(entries[i].dst) + ")");
    ConnectivityMatrix m;
    m.n_voxels_ = n_voxels;
    m.entries_ = std::move(entries);
    m.normalized_ = normalized;
    return m;
}

double ConnectivityMatrix::total_weight() const {
    CompensatedSum sum;
    for (const auto& e : entries_) sum.add(e.weight);
    return sum.value();
}

// ----- file formats ---------------------------------------------------------

namespace {

constexpr std::string_view kDtiMagic = "DTBC";

VoxelId parse_voxel_field(std::string_view f, std::size_t line) {
    auto raw = parse_unsigned(f, "voxel id on line " + std::to_string(line));
    if (raw > 0xFFFFFFFFull) throw FormatError("voxel id out of range on line " + std::to_string(line));
    return static_cast<VoxelId>(raw);
}

ConnectivityMatrix parse_dti_csv(std::string_view text) {
    bool have_header = false;
    std::size_t n_voxels = 0;
    std::size_t n_entries = 0;
    std::vector<MatrixEntry> entries;
    detail::for_each_line(text, [&](std::string_view line, std::size_t number) {
        std::string_view fields[3];
        std::size_t count = 0;
        detail::for_each_field(line, [&](std::string_view f) {
            if (count < 3) fields[count] = f;
            ++count;
        });
        if (!have_header) {
            if (count != 2) throw FormatError("DTI header must be 'n_voxels,n_entries'");
            n_voxels = parse_unsigned(fields[0], "DTI header n_voxels");
            n_entries = parse_unsigned(fields[1], "DTI header n_entries");
            entries.reserve(n_entries);
            have_header = true;
            return;
        }
        if (count != 3) throw FormatError("DTI line " + std::to_string(number) + " must be 'src,dst,weight'");
        MatrixEntry e;
        e.src = parse_voxel_field(fields[0], number);
        e.dst = parse_voxel_field(fields[1], number);
        e.weight = parse_double(fields[2], "weight on line " + std::to_string(number));
        if (e.weight < 0.0)
            throw FormatError("negative weight on line " + std::to_string(number));
        if (e.src == e.dst)
            throw FormatError("self-loop (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ") on line " +
                              std::to_string(number));
        entries.push_back(e);
    });
    if (!have_header) throw FormatError("DTI file is empty");
    if (entries.size() != n_entries)
        throw FormatError("DTI header declares " + std::to_string(n_entries) + " entries but the file has " +
                          std::to_string(entries.size()));
    return ConnectivityMatrix::build(n_voxels, std::move(entries));
}

ConnectivityMatrix parse_dti_binary(std::string_view bytes) {
    detail::ByteReader in(bytes, "DTI");
    in.raw(4);
    const std::uint32_t n_voxels = in.u32();
    const std::uint64_t n_entries = in.u64();
    if (in.remaining() != n_entries * 12) throw FormatError("DTI binary payload size does not match its header");
    std::vector<MatrixEntry> entries(n_entries);
    for (auto& e : entries) {
        e.src = in.u32();
        e.dst = in.u32();
        e.weight = static_cast<double>(in.f32());
        if (e.weight < 0.0) throw FormatError("negative weight for entry (" + std::to_string(e.src) + "," +
                                              std::to_string(e.dst) + ")");
    }
    return ConnectivityMatrix::build(n_voxels, std::move(entries));
}

}  // namespace

ConnectivityMatrix parse_dti(std::string_view bytes) {
    if (bytes.substr(0, 4) == kDtiMagic) return parse_dti_binary(bytes);
    return parse_dti_csv(bytes);
}

ConnectivityMatrix parse_dti(std::string_view bytes, const Atlas& atlas) {
    auto m = parse_dti(bytes);
    if (m.n_voxels() != atlas.voxel_count())
        throw FormatError("DTI header declares " + std::to_string(m.n_voxels()) + " voxels but the atlas has " +
                          std::to_string(atlas.voxel_count()));
    for (const auto& e : m.entries()) {
        if (!atlas.contains_voxel(e.src))
            throw FormatError("DTI entry references voxel " + std::to_string(e.src) + " which is not in the atlas");
        if (!atlas.contains_voxel(e.dst))
            throw FormatError("DTI entry references voxel " + std::to_string(e.dst) + " which is not in the atlas");
    }
    return m;
}

ConnectivityMatrix load_dti(const std::filesystem::path& path, const Atlas& atlas) {
    return parse_dti(read_text_file(path), atlas);
}

std::string serialize_dti(const ConnectivityMatrix& m, DtiEncoding encoding) {
    if (encoding == DtiEncoding::binary) {
        detail::ByteWriter out;
        out.raw(kDtiMagic);
        out.u32(static_cast<std::uint32_t>(m.n_voxels()));
        out.u64(m.size());
        for (const auto& e : m.entries()) {
            out.u32(e.src);
            out.u32(e.dst);
            out.f32(static_cast<float>(e.weight));
        }
        return out.take();
    }
    std::string out;
    out.reserve(m.size() * 32);
    out += std::to_string(m.n_voxels()) + "," + std::to_string(m.size()) + "\n";
    for (const auto& e : m.entries()) {
        out += std::to_string(e.src);
        out += ',';
        out += std::to_string(e.dst);
        out += ',';
        out += format_double(e.weight);
        out += '\n';
    }
    return out;
}

void save_dti(const ConnectivityMatrix& m, const std::filesystem::path& path, DtiEncoding encoding) {
    write_file_atomic(path, serialize_dti(m, encoding));
}

// ----- operations -----------------------------------------------------------

ConnectivityMatrix global_normalize(const ConnectivityMatrix& m) {
    const double total = m.total_weight();
    if (!(total > 0.0)) throw DegenerateInputError("cannot normalize a matrix whose weights sum to zero");
    std::vector<MatrixEntry> entries(m.entries().begin(), m.entries().end());
    for (auto& e : entries) e.weight /= total;
    return ConnectivityMatrix::build(m.n_voxels(), std::move(entries), true);
}

std::vector<double> rank_percentiles(const ConnectivityMatrix& m) {
    const auto entries = m.entries();
    const std::size_t n = entries.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return entries[a].weight < entries[b].weight; });
    std::vector<double> pct(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && entries[order[j + 1]].weight == entries[order[i]].weight) ++j;
        const double value = static_cast<double>(j + 1) / static_cast<double>(n);
        for (std::size_t k = i; k <= j; ++k) pct[order[k]] = value;
        i = j + 1;
    }
    return pct;
}

std::size_t top_fraction_count(std::size_t n_entries, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0) throw std::invalid_argument("fraction must lie in (0, 1]");
    const double exact = fraction * static_cast<double>(n_entries);
    auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
    return std::min(k, n_entries);
}

EdgeSet top_fraction(const ConnectivityMatrix& m, double fraction) {
    const std::size_t k = top_fraction_count(m.size(), fraction);
    const auto pct = rank_percentiles(m);
    const auto entries = m.entries();
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto cmp = [&](std::size_t a, std::size_t b) { return heavier_first(entries[a], entries[b]); };
    if (k < order.size()) {
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), cmp);
        order.resize(k);
    }
    std::sort(order.begin(), order.end(), cmp);
    EdgeSet out;
    out.edges.reserve(order.size());
    for (std::size_t idx : order) {
        const auto& e = entries[idx];
        out.edges.push_back({e.src, e.dst, e.weight, pct[idx]});
    }
    return out;
}

EdgeSet all_edges(const ConnectivityMatrix& m) { return top_fraction(m, 1.0); }

EdgeSet threshold_filter(const EdgeSet& edges, double tau, ThresholdMode mode) {
    EdgeSet out;
    for (const auto& e : edges.edges) {
        bool keep = false;
        if (mode == ThresholdMode::absolute_weight) keep = e.weight >= tau;
        else keep = e.rank_pct > tau || (tau >= 1.0 && e.rank_pct >= 1.0);
        if (keep) out.edges.push_back(e);
    }
    return out;
}

RegionAdjacency region_adjacency(const ConnectivityMatrix& m, const Atlas& atlas) {
    RegionAdjacency adj;
    adj.n_regions = atlas.regions().size();
    std::map<std::pair<RegionLabel, RegionLabel>, CompensatedSum> sums;
    for (const auto& e : m.entries()) {
        const RegionLabel a = atlas.voxel(e.src).region_label;
        const RegionLabel b = atlas.voxel(e.dst).region_label;
        if (a != b) sums[{a, b}].add(e.weight);
    }
    for (const auto& [key, sum] : sums) adj.entries.emplace(key, sum.value());
    return adj;
}

double intra_region_weight(const ConnectivityMatrix& m, const Atlas& atlas) {
    CompensatedSum sum;
    for (const auto& e : m.entries())
        if (atlas.voxel(e.src).region_label == atlas.voxel(e.dst).region_label) sum.add(e.weight);
    return sum.value();
}

EdgeSet edges_from_regions(const EdgeSet& edges, const Atlas& atlas, const std::set<RegionLabel>& labels) {
    for (RegionLabel label : labels) atlas.region(label);
    EdgeSet out;
    if (labels.empty()) return out;
    for (const auto& e : edges.edges)
        if (labels.contains(atlas.voxel(e.src).region_label)) out.edges.push_back(e);
    return out;
}

std::vector<ColorRGBA> direction_gradient(const Edge&, std::size_t n_stops) {
    if (n_stops < 2) throw std::invalid_argument("direction_gradient needs at least two stops");
    constexpr ColorRGBA green{0.0, 1.0, 0.0, 1.0};
    constexpr ColorRGBA orange{1.0, 0.5, 0.0, 1.0};
    std::vector<ColorRGBA> stops(n_stops);
    for (std::size_t i = 0; i < n_stops; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_stops - 1);
        stops[i] = {green.r + (orange.r - green.r) * t, green.g + (orange.g - green.g) * t,
                    green.b + (orange.b - green.b) * t, 1.0};
    }
    return stops;
}

ConnectivityMatrix symmetrize(const ConnectivityMatrix& m) {
    std::map<std::pair<VoxelId, VoxelId>, double> acc;
    for (const auto& e : m.entries()) {
        acc[{e.src, e.dst}] += e.weight;
        acc[{e.dst, e.src}] += e.weight;
    }
    std::vector<MatrixEntry> entries;
    entries.reserve(acc.size());
    for (const auto& [key, w] : acc) entries.push_back({key.first, key.second, w});
    return ConnectivityMatrix::build(m.n_voxels(), std::move(entries));
}

}  // namespace dtb
