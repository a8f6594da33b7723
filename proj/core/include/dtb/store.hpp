#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/fdeb.hpp"
#include "dtb/signal.hpp"

namespace dtb {

// A store is a directory holding one validated dataset:
//   atlas.json, bold_biological.csv, [bold_dtb.csv], dti.csv, [bundles.json]
inline constexpr std::string_view kStoreAtlasFile = "atlas.json";
inline constexpr std::string_view kStoreBoldBiologicalFile = "bold_biological.csv";
inline constexpr std::string_view kStoreBoldDtbFile = "bold_dtb.csv";
inline constexpr std::string_view kStoreDtiFile = "dti.csv";
inline constexpr std::string_view kStoreBundlesFile = "bundles.json";

struct StoreData {
    Atlas atlas;
    SignalSet biological;
    std::optional<SignalSet> dtb;
    ConnectivityMatrix dti;
    std::optional<BundleDocument> bundles;
};

// Validates every file against the atlas; throws FormatError / IoError.
StoreData load_store(const std::filesystem::path& dir);

// Writes the store files into `dir` (created if needed).
void write_store(const StoreData& data, const std::filesystem::path& dir);

// Builds `final_dir` by running `fill` on a fresh sibling temp directory and
// renaming it into place on success. `final_dir` must not exist or be empty.
template <typename Fill>
void write_directory_atomic(const std::filesystem::path& final_dir, Fill&& fill);

void prepare_output_directory(const std::filesystem::path& final_dir);
std::filesystem::path make_temp_sibling(const std::filesystem::path& final_dir);
void commit_directory(const std::filesystem::path& tmp, const std::filesystem::path& final_dir);
void discard_directory(const std::filesystem::path& tmp) noexcept;

template <typename Fill>
void write_directory_atomic(const std::filesystem::path& final_dir, Fill&& fill) {
    prepare_output_directory(final_dir);
    const auto tmp = make_temp_sibling(final_dir);
    try {
        fill(tmp);
        commit_directory(tmp, final_dir);
    } catch (...) {
        discard_directory(tmp);
        throw;
    }
}

}  // namespace dtb
