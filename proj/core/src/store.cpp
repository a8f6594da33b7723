#include "dtb/store.hpp"

#include <random>

#include "dtb/error.hpp"
#include "dtb/io.hpp"

namespace fs = std::filesystem;

namespace dtb {

StoreData load_store(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("store directory '" + dir.string() + "' does not exist");
    Atlas atlas = load_atlas(dir / kStoreAtlasFile);
    SignalSet bio = load_bold(dir / kStoreBoldBiologicalFile, atlas, SignalSource::biological);
    std::optional<SignalSet> dtb;
    if (fs::exists(dir / kStoreBoldDtbFile)) dtb = load_bold(dir / kStoreBoldDtbFile, atlas, SignalSource::dtb);
    ConnectivityMatrix dti = load_dti(dir / kStoreDtiFile, atlas);
    std::optional<BundleDocument> bundles;
    if (fs::exists(dir / kStoreBundlesFile)) bundles = import_bundles(dir / kStoreBundlesFile);
    return StoreData{std::move(atlas), std::move(bio), std::move(dtb), std::move(dti), std::move(bundles)};
}

void write_store(const StoreData& data, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    save_atlas(data.atlas, dir / kStoreAtlasFile);
    save_bold(data.biological, dir / kStoreBoldBiologicalFile);
    if (data.dtb) save_bold(*data.dtb, dir / kStoreBoldDtbFile);
    save_dti(data.dti, dir / kStoreDtiFile);
    if (data.bundles) export_bundles(*data.bundles, dir / kStoreBundlesFile);
}

void prepare_output_directory(const fs::path& final_dir) {
    std::error_code ec;
    if (fs::exists(final_dir, ec)) {
        if (!fs::is_directory(final_dir) || !fs::is_empty(final_dir))
            throw IoError("output '" + final_dir.string() + "' already exists and is not an empty directory");
    }
    const auto parent = final_dir.has_parent_path() ? final_dir.parent_path() : fs::path(".");
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create '" + parent.string() + "': " + ec.message());
}

fs::path make_temp_sibling(const fs::path& final_dir) {
    std::random_device rd;
    auto base = final_dir;
    if (!base.has_filename()) base = base.parent_path();
    for (int attempt = 0; attempt < 16; ++attempt) {
        auto tmp = base;
        tmp += ".tmp-" + std::to_string(rd());
        std::error_code ec;
        if (fs::create_directory(tmp, ec)) return tmp;
    }
    throw IoError("cannot create a temporary directory next to '" + final_dir.string() + "'");
}

void commit_directory(const fs::path& tmp, const fs::path& final_dir) {
    std::error_code ec;
    if (fs::exists(final_dir)) fs::remove(final_dir, ec);  // empty by prepare_output_directory
    fs::rename(tmp, final_dir, ec);
    if (ec) throw IoError("cannot move output into place at '" + final_dir.string() + "': " + ec.message());
}

void discard_directory(const fs::path& tmp) noexcept {
    std::error_code ec;
    fs::remove_all(tmp, ec);
}

}  // namespace dtb
