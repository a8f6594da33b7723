#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtb/vec3.hpp"

namespace dtb {

using VoxelId = std::uint32_t;
using RegionLabel = std::int32_t;

enum class SpeciesKind { human, macaque, other };

struct Species {
    SpeciesKind kind = SpeciesKind::human;
    std::string name;  // only meaningful for `other`

    static Species human() { return {SpeciesKind::human, {}}; }
    static Species macaque() { return {SpeciesKind::macaque, {}}; }
    static Species other(std::string n) { return {SpeciesKind::other, std::move(n)}; }

    // "human", "macaque", or the custom name.
    std::string to_string() const;
    static Species parse(std::string_view text);

    bool operator==(const Species&) const = default;
};

struct Voxel {
    VoxelId id = 0;
    Vec3 position_mm;
    RegionLabel region_label = 0;

    bool operator==(const Voxel&) const = default;
};

struct Region {
    RegionLabel label = 0;
    std::string name;
    std::vector<VoxelId> voxel_ids;
    Vec3 centroid_mm;
    bool functional = true;

    bool operator==(const Region&) const = default;
};

// Input record for building an atlas; centroids and the voxel index are derived.
struct RegionSpec {
    RegionLabel label = 0;
    std::string name;
    bool functional = true;
    std::vector<std::pair<VoxelId, Vec3>> voxels;
};

/// Hierarchical anatomy: labeled regions that partition a set of positioned voxels.
///
/// Regions are kept in ascending label order. The atlas is immutable once built,
/// so concurrent readers need no synchronisation.
class Atlas {
public:
    // Validates every invariant (unique positive labels, disjoint voxel sets,
    // non-empty region list, positive spacing) and throws FormatError otherwise.
    static Atlas build(Species species, double spacing_mm, std::vector<RegionSpec> regions);

    const Species& species() const { return species_; }
    double spacing_mm() const { return spacing_mm_; }
    std::span<const Region> regions() const { return regions_; }
    std::size_t voxel_count() const { return voxels_.size(); }

    // Voxels sorted by id.
    std::span<const Voxel> voxels() const { return voxels_; }

    bool contains_voxel(VoxelId id) const { return voxel_slot_.contains(id); }
    bool contains_region(RegionLabel label) const { return region_slot_.contains(label); }

    // Throws NotFoundError for unknown ids / labels.
    const Voxel& voxel(VoxelId id) const;
    const Region& region(RegionLabel label) const;

    // Axis-aligned bounds of all voxel positions.
    Vec3 min_corner() const { return min_corner_; }
    Vec3 max_corner() const { return max_corner_; }

    bool operator==(const Atlas& other) const;

private:
    Species species_;
    double spacing_mm_ = 1.0;
    std::vector<Region> regions_;
    std::vector<Voxel> voxels_;
    std::unordered_map<VoxelId, std::size_t> voxel_slot_;
    std::unordered_map<RegionLabel, std::size_t> region_slot_;
    Vec3 min_corner_;
    Vec3 max_corner_;
};

Atlas load_atlas(const std::filesystem::path& path);
Atlas parse_atlas(std::string_view json_text);
std::string serialize_atlas(const Atlas& atlas);
void save_atlas(const Atlas& atlas, const std::filesystem::path& path);

// Regions with functional = true, in label order.
std::vector<Region> functional_regions(const Atlas& atlas);

// scale * cbrt(voxel count): sphere volume is proportional to the voxel count.
double region_sphere_radius(const Region& region, double scale);

const Region& region_by_label(const Atlas& atlas, RegionLabel label);

// Name of a label in the bundled 116-entry AAL table, or empty if out of range.
std::string_view aal_region_name(RegionLabel label);
inline constexpr int kAalRegionCount = 116;

// Default functional flag for a label of the bundled table: labels 1..92 are
// functional and the 24 labels 93..116 (Crus2 onward plus vermis) are not.
bool aal_default_functional(RegionLabel label);
inline constexpr int kAalFunctionalCount = 92;

}  // namespace dtb
