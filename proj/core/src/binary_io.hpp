#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "dtb/error.hpp"

namespace dtb::detail {

// Little-endian encoding regardless of host byte order.
class ByteWriter {
public:
    void raw(std::string_view bytes) { out_.append(bytes); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    std::string take() { return std::move(out_); }

private:
    template <typename U>
    void put(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string out_;
};

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string_view what) : bytes_(bytes), what_(what) {}

    std::string_view raw(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated binary file");
    }
    template <typename U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    std::string_view bytes_;
    std::string_view what_;
    std::size_t pos_ = 0;
};

// Splits on ',' without allocating.
template <typename F>
void for_each_field(std::string_view line, F&& f) {
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            f(line.substr(start));
            return;
        }
        f(line.substr(start, comma - start));
        start = comma + 1;
    }
}

// Calls f(line, line_number) for each non-empty line; strips a trailing '\r'.
template <typename F>
void for_each_line(std::string_view text, F&& f) {
    std::size_t start = 0;
    std::size_t number = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        auto end = nl == std::string_view::npos ? text.size() : nl;
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++number;
        if (!line.empty()) f(line, number);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
}

}  // namespace dtb::detail
