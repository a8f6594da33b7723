#include "dtb/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "dtb/error.hpp"
#include "dtb/io.hpp"
#include "json.hpp"

namespace dtb {

using nlohmann::json;

std::string Species::to_string() const {
    switch (kind) {
        case SpeciesKind::human: return "human";
        case SpeciesKind::macaque: return "macaque";
        case SpeciesKind::other: return name;
    }
    return name;
}

Species Species::parse(std::string_view text) {
    if (text == "human") return human();
    if (text == "macaque") return macaque();
    if (text.empty()) throw FormatError("species must be a non-empty string");
    return other(std::string(text));
}

Atlas Atlas::build(Species species, double spacing_mm, std::vector<RegionSpec> specs) {
    if (specs.empty()) throw FormatError("atlas has an empty region list");
    if (!(spacing_mm > 0.0) || !std::isfinite(spacing_mm))
        throw FormatError("spacing_mm must be a positive finite number");

    std::sort(specs.begin(), specs.end(),
              [](const RegionSpec& a, const RegionSpec& b) { return a.label < b.label; });

    Atlas atlas;
    atlas.species_ = std::move(species);
    atlas.spacing_mm_ = spacing_mm;
    atlas.regions_.reserve(specs.size());

    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto& spec = specs[i];
        if (spec.label <= 0)
            throw FormatError("region label " + std::to_string(spec.label) + " is not a positive integer");
        if (i > 0 && specs[i - 1].label == spec.label)
            throw FormatError("duplicate region label " + std::to_string(spec.label));

        Region region;
        region.label = spec.label;
        region.name = std::move(spec.name);
        region.functional = spec.functional;
        region.voxel_ids.reserve(spec.voxels.size());
        Vec3 sum;
        for (const auto& [id, pos] : spec.voxels) {
            if (!std::isfinite(pos.x) || !std::isfinite(pos.y) || !std::isfinite(pos.z))
                throw FormatError("voxel " + std::to_string(id) + " has a non-finite position");
            if (!atlas.voxel_slot_.emplace(id, 0).second)
                throw FormatError("voxel " + std::to_string(id) +
                                  " is listed under more than one region (regions must be disjoint)");
            region.voxel_ids.push_back(id);
            atlas.voxels_.push_back(Voxel{id, pos, spec.label});
            sum += pos;
        }
        if (!region.voxel_ids.empty())
            region.centroid_mm = sum / static_cast<double>(region.voxel_ids.size());
        atlas.region_slot_.emplace(region.label, atlas.regions_.size());
        atlas.regions_.push_back(std::move(region));
    }

    std::sort(atlas.voxels_.begin(), atlas.voxels_.end(),
              [](const Voxel& a, const Voxel& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < atlas.voxels_.size(); ++i) atlas.voxel_slot_[atlas.voxels_[i].id] = i;

    if (!atlas.voxels_.empty()) {
        constexpr double inf = std::numeric_limits<double>::infinity();
        Vec3 lo{inf, inf, inf};
        Vec3 hi{-inf, -inf, -inf};
        for (const auto& v : atlas.voxels_) {
            lo = {std::min(lo.x, v.position_mm.x), std::min(lo.y, v.position_mm.y),
                  std::min(lo.z, v.position_mm.z)};
            hi = {std::max(hi.x, v.position_mm.x), std::max(hi.y, v.position_mm.y),
                  std::max(hi.z, v.position_mm.z)};
        }
        atlas.min_corner_ = lo;
        atlas.max_corner_ = hi;
    }
    return atlas;
}

const Voxel& Atlas::voxel(VoxelId id) const {
    auto it = voxel_slot_.find(id);
    if (it == voxel_slot_.end()) throw NotFoundError("unknown voxel id " + std::to_string(id));
    return voxels_[it->second];
}

const Region& Atlas::region(RegionLabel label) const {
    auto it = region_slot_.find(label);
    if (it == region_slot_.end()) throw NotFoundError("unknown region label " + std::to_string(label));
    return regions_[it->second];
}

bool Atlas::operator==(const Atlas& other) const {
    return species_ == other.species_ && spacing_mm_ == other.spacing_mm_ &&
           regions_ == other.regions_ && voxels_ == other.voxels_;
}

// ----- file format ----------------------------------------------------------

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw FormatError("unknown key '" + key + "' in " + std::string(where));
    }
}

const json& require(const json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw FormatError("missing key '" + std::string(key) + "' in " + std::string(where));
    return *it;
}

}  // namespace

Atlas parse_atlas(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("atlas is not valid JSON: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw FormatError("atlas document must be a JSON object");
        reject_unknown_keys(doc, {"species", "spacing_mm", "regions"}, "atlas");
        auto species = Species::parse(require(doc, "species", "atlas").get<std::string>());
        double spacing = require(doc, "spacing_mm", "atlas").get<double>();
        const json& regions = require(doc, "regions", "atlas");
        if (!regions.is_array()) throw FormatError("atlas 'regions' must be an array");

        std::vector<RegionSpec> specs;
        specs.reserve(regions.size());
        for (const auto& r : regions) {
            if (!r.is_object()) throw FormatError("region entries must be objects");
            reject_unknown_keys(r, {"label", "name", "functional", "voxels"}, "region");
            RegionSpec spec;
            spec.label = require(r, "label", "region").get<RegionLabel>();
            spec.name = require(r, "name", "region").get<std::string>();
            spec.functional = require(r, "functional", "region").get<bool>();
            const json& voxels = require(r, "voxels", "region");
            if (!voxels.is_array()) throw FormatError("region 'voxels' must be an array");
            spec.voxels.reserve(voxels.size());
            for (const auto& v : voxels) {
                if (!v.is_object()) throw FormatError("voxel entries must be objects");
                reject_unknown_keys(v, {"id", "pos"}, "voxel");
                auto id = require(v, "id", "voxel").get<VoxelId>();
                const json& pos = require(v, "pos", "voxel");
                if (!pos.is_array() || pos.size() != 3)
                    throw FormatError("voxel " + std::to_string(id) + " 'pos' must be [x, y, z]");
                spec.voxels.emplace_back(id, Vec3{pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()});
            }
            specs.push_back(std::move(spec));
        }
        return Atlas::build(std::move(species), spacing, std::move(specs));
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed atlas: ") + e.what());
    }
}

Atlas load_atlas(const std::filesystem::path& path) { return parse_atlas(read_text_file(path)); }

std::string serialize_atlas(const Atlas& atlas) {
    std::ostringstream out;
    out << "{\"species\":" << json(atlas.species().to_string()).dump()
        << ",\"spacing_mm\":" << format_double(atlas.spacing_mm()) << ",\"regions\":[";
    bool first_region = true;
    for (const auto& region : atlas.regions()) {
        out << (first_region ? "\n" : ",\n");
        first_region = false;
        out << "{\"label\":" << region.label << ",\"name\":" << json(region.name).dump()
            << ",\"functional\":" << (region.functional ? "true" : "false") << ",\"voxels\":[";
        bool first_voxel = true;
        for (VoxelId id : region.voxel_ids) {
            const auto& p = atlas.voxel(id).position_mm;
            out << (first_voxel ? "" : ",") << "{\"id\":" << id << ",\"pos\":[" << format_double(p.x) << ','
                << format_double(p.y) << ',' << format_double(p.z) << "]}";
            first_voxel = false;
        }
        out << "]}";
    }
    out << "\n]}\n";
    return out.str();
}

void save_atlas(const Atlas& atlas, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_atlas(atlas));
}

std::vector<Region> functional_regions(const Atlas& atlas) {
    std::vector<Region> out;
    for (const auto& r : atlas.regions())
        if (r.functional) out.push_back(r);
    return out;
}

double region_sphere_radius(const Region& region, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("sphere scale must be positive");
    return scale * std::cbrt(static_cast<double>(region.voxel_ids.size()));
}

const Region& region_by_label(const Atlas& atlas, RegionLabel label) { return atlas.region(label); }

}  // namespace dtb
