#include "dtb/slicer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "dtb/error.hpp"
#include "dtb/io.hpp"

namespace dtb {

std::string_view to_string(SliceAxis axis) {
    switch (axis) {
        case SliceAxis::sagittal: return "sagittal";
        case SliceAxis::horizontal: return "horizontal";
        case SliceAxis::coronal: return "coronal";
    }
    return "sagittal";
}

SliceAxis parse_slice_axis(std::string_view text) {
    if (text == "sagittal") return SliceAxis::sagittal;
    if (text == "horizontal") return SliceAxis::horizontal;
    if (text == "coronal") return SliceAxis::coronal;
    throw FormatError("unknown slice axis '" + std::string(text) + "' (sagittal|horizontal|coronal)");
}

int plane_axis_map(SliceAxis axis) {
    switch (axis) {
        case SliceAxis::sagittal: return 0;
        case SliceAxis::coronal: return 1;
        case SliceAxis::horizontal: return 2;
    }
    return 0;
}

std::pair<int, int> in_plane_axes(SliceAxis axis) {
    switch (axis) {
        case SliceAxis::sagittal: return {1, 2};
        case SliceAxis::coronal: return {0, 2};
        case SliceAxis::horizontal: return {0, 1};
    }
    return {1, 2};
}

SlicePlane SlicePlane::through(const Atlas& atlas, SliceAxis axis, double coordinate_mm,
                               std::optional<double> thickness_mm) {
    SlicePlane plane{axis, coordinate_mm, thickness_mm.value_or(atlas.spacing_mm())};
    if (!(plane.thickness_mm > 0.0)) throw std::invalid_argument("slab thickness must be positive");
    return plane;
}

std::size_t SliceRaster::occupied() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.has_value(); }));
}

std::vector<VoxelId> voxels_in_slab(const Atlas& atlas, const SlicePlane& plane) {
    if (!(plane.thickness_mm > 0.0)) throw std::invalid_argument("slab thickness must be positive");
    const int axis = plane_axis_map(plane.axis);
    const double half = 0.5 * plane.thickness_mm;
    std::vector<VoxelId> out;
    for (const auto& v : atlas.voxels())
        if (std::abs(v.position_mm[axis] - plane.coordinate_mm) <= half) out.push_back(v.id);
    return out;
}

SliceRaster raster(const Atlas& atlas, const SignalSet& set, const SlicePlane& plane, std::size_t t) {
    if (t >= set.n_timepoints())
        throw BoundsError("time index " + std::to_string(t) + " outside [0, " + std::to_string(set.n_timepoints()) + ")");
    SliceRaster r;
    r.axis = plane.axis;
    std::tie(r.axis_u, r.axis_v) = in_plane_axes(plane.axis);
    r.cell_mm = atlas.spacing_mm();
    r.time_index = t;
    const Vec3 lo = atlas.min_corner();
    const Vec3 hi = atlas.max_corner();
    // Cells are centred on the voxel lattice that starts at the atlas minimum.
    r.origin_u = lo[r.axis_u] - 0.5 * r.cell_mm;
    r.origin_v = lo[r.axis_v] - 0.5 * r.cell_mm;
    r.width = static_cast<std::size_t>(std::floor((hi[r.axis_u] - lo[r.axis_u]) / r.cell_mm + 0.5)) + 1;
    r.height = static_cast<std::size_t>(std::floor((hi[r.axis_v] - lo[r.axis_v]) / r.cell_mm + 0.5)) + 1;
    r.cells.assign(r.width * r.height, std::nullopt);
    r.counts.assign(r.width * r.height, 0);

    std::vector<double> sums(r.width * r.height, 0.0);
    for (VoxelId id : voxels_in_slab(atlas, plane)) {
        if (!set.contains(id)) continue;
        const Vec3& p = atlas.voxel(id).position_mm;
        auto col = static_cast<std::size_t>(std::clamp(std::floor((p[r.axis_u] - r.origin_u) / r.cell_mm), 0.0,
                                                       static_cast<double>(r.width - 1)));
        auto from_bottom = static_cast<std::size_t>(std::clamp(std::floor((p[r.axis_v] - r.origin_v) / r.cell_mm), 0.0,
                                                               static_cast<double>(r.height - 1)));
        const std::size_t row = r.height - 1 - from_bottom;
        sums[row * r.width + col] += set.series(id)[t];
        ++r.counts[row * r.width + col];
    }
    for (std::size_t i = 0; i < sums.size(); ++i)
        if (r.counts[i] > 0) r.cells[i] = sums[i] / static_cast<double>(r.counts[i]);
    return r;
}

EdgeSet edges_from_slice(const EdgeSet& edges, std::span<const VoxelId> slab_voxels) {
    std::unordered_set<VoxelId> members(slab_voxels.begin(), slab_voxels.end());
    EdgeSet out;
    for (const auto& e : edges.edges)
        if (members.contains(e.src)) out.edges.push_back(e);
    return out;
}

std::vector<std::vector<VoxelId>> slab_stack(const Atlas& atlas, SliceAxis axis, double thickness_mm) {
    if (!(thickness_mm > 0.0)) throw std::invalid_argument("slab thickness must be positive");
    const int a = plane_axis_map(axis);
    const double lo = atlas.min_corner()[a];
    const double hi = atlas.max_corner()[a];
    const auto n_slabs = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) / thickness_mm)));
    std::vector<std::vector<VoxelId>> slabs(n_slabs);
    for (const auto& v : atlas.voxels()) {
        auto k = static_cast<std::size_t>(std::floor((v.position_mm[a] - lo) / thickness_mm));
        slabs[std::min(k, n_slabs - 1)].push_back(v.id);
    }
    return slabs;
}

// ----- export ---------------------------------------------------------------

std::string slice_file_stem(const SlicePlane& plane, std::size_t t) {
    return "slice_" + std::string(to_string(plane.axis)) + "_" + format_double(plane.coordinate_mm) + "_t" +
           std::to_string(t);
}

std::string raster_to_pgm(const SliceRaster& r) {
    std::ostringstream out;
    out << "P2\n" << r.width << ' ' << r.height << "\n255\n";
    for (std::size_t row = 0; row < r.height; ++row) {
        for (std::size_t col = 0; col < r.width; ++col) {
            const auto& cell = r.at(row, col);
            int level = 0;
            if (cell) level = static_cast<int>(std::lround(std::clamp(*cell, 0.0, 1.0) * 255.0));
            out << (col ? " " : "") << level;
        }
        out << '\n';
    }
    return out.str();
}

std::string raster_to_json(const SliceRaster& r, const SlicePlane& plane) {
    std::string out = "{\"axis\":\"" + std::string(to_string(plane.axis)) +
                      "\",\"coordinate_mm\":" + format_double(plane.coordinate_mm) +
                      ",\"thickness_mm\":" + format_double(plane.thickness_mm) + ",\"t\":" +
                      std::to_string(r.time_index) + ",\"origin_mm\":[" + format_double(r.origin_u) + "," +
                      format_double(r.origin_v) + "],\"cell_mm\":" + format_double(r.cell_mm) + ",\"rows\":[";
    for (std::size_t row = 0; row < r.height; ++row) {
        out += row ? ",[" : "[";
        for (std::size_t col = 0; col < r.width; ++col) {
            if (col) out += ',';
            const auto& cell = r.at(row, col);
            out += cell ? format_double(*cell) : "null";
        }
        out += ']';
    }
    out += "]}\n";
    return out;
}

std::filesystem::path export_slice(const SliceRaster& r, const SlicePlane& plane, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
    const auto stem = out_dir / slice_file_stem(plane, r.time_index);
    auto pgm = stem;
    pgm += ".pgm";
    auto sidecar = stem;
    sidecar += ".json";
    write_file_atomic(pgm, raster_to_pgm(r));
    write_file_atomic(sidecar, raster_to_json(r, plane));
    return stem;
}

}  // namespace dtb
