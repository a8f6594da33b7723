#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dtb {

// Throws IoError when the file cannot be opened or read.
std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Strict decimal parse of the whole field; throws FormatError naming `what`.
double parse_double(std::string_view field, std::string_view what);
unsigned long long parse_unsigned(std::string_view field, std::string_view what);

}  // namespace dtb
