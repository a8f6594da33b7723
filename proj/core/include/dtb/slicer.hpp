#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/signal.hpp"

namespace dtb {

enum class SliceAxis { sagittal, horizontal, coronal };

std::string_view to_string(SliceAxis axis);
SliceAxis parse_slice_axis(std::string_view text);

// Spatial axis normal to the plane: sagittal -> x (0), coronal -> y (1), horizontal -> z (2).
int plane_axis_map(SliceAxis axis);

// The two in-plane spatial axes (u, v): sagittal (y, z), coronal (x, z), horizontal (x, y).
std::pair<int, int> in_plane_axes(SliceAxis axis);

struct SlicePlane {
    SliceAxis axis = SliceAxis::sagittal;
    double coordinate_mm = 0.0;
    double thickness_mm = 1.0;

    // Thickness defaults to the atlas voxel pitch.
    static SlicePlane through(const Atlas& atlas, SliceAxis axis, double coordinate_mm,
                              std::optional<double> thickness_mm = std::nullopt);
};

/// 2D grid of cell means over a slab. rows[0] is the highest-v row (image
/// order), columns run along increasing u.
struct SliceRaster {
    SliceAxis axis = SliceAxis::sagittal;
    int axis_u = 1;
    int axis_v = 2;
    double origin_u = 0.0;  // lower corner of cell (row = last, column = 0)
    double origin_v = 0.0;
    double cell_mm = 1.0;
    std::size_t width = 1;
    std::size_t height = 1;
    std::size_t time_index = 0;
    std::vector<std::optional<double>> cells;  // height x width, row-major
    std::vector<std::size_t> counts;           // contributing voxels per cell

    const std::optional<double>& at(std::size_t row, std::size_t col) const { return cells[row * width + col]; }
    std::size_t occupied() const;
};

// Voxels with |position[axis] - coordinate| <= thickness / 2, sorted by id.
std::vector<VoxelId> voxels_in_slab(const Atlas& atlas, const SlicePlane& plane);

// Cell grid covering the atlas bounding box in the plane's (u, v) axes with
// cell = atlas spacing; each occupied cell holds the mean value of its voxels at t.
SliceRaster raster(const Atlas& atlas, const SignalSet& set, const SlicePlane& plane, std::size_t t);

// Edges whose source voxel is in `slab_voxels`.
EdgeSet edges_from_slice(const EdgeSet& edges, std::span<const VoxelId> slab_voxels);

// Partition of all voxels into adjacent slabs of `thickness_mm` starting at the
// atlas minimum along the axis. Slab k covers [lo + k*t, lo + (k+1)*t), the last
// slab is closed on its upper face; every voxel lands in exactly one slab.
std::vector<std::vector<VoxelId>> slab_stack(const Atlas& atlas, SliceAxis axis, double thickness_mm);

// ----- export ---------------------------------------------------------------

// "slice_<axis>_<coord>_t<t>" with the coordinate in shortest decimal form.
std::string slice_file_stem(const SlicePlane& plane, std::size_t t);

// ASCII P2 PGM: values clamped to [0,1] and quantized to 0..255; empty cells are 0.
std::string raster_to_pgm(const SliceRaster& r);

// {axis, coordinate_mm, thickness_mm, t, origin_mm, cell_mm, rows}
std::string raster_to_json(const SliceRaster& r, const SlicePlane& plane);

// Writes <prefix>/<stem>.pgm and .json (prefix is a directory) and returns the stem path.
std::filesystem::path export_slice(const SliceRaster& r, const SlicePlane& plane, const std::filesystem::path& out_dir);

}  // namespace dtb
