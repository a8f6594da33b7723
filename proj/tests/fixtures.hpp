#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/fdeb.hpp"
#include "dtb/signal.hpp"
#include "dtb/synthgen.hpp"

namespace dtb::testing {

// Fixture F1, generated once per process.
inline const Fixture& f1() {
    static const Fixture fixture = gen_fixture(fixture_f1_spec());
    return fixture;
}

// 50 straight edges of length 100 along x, one unit apart in y (a planar grid).
inline std::vector<Polyline> parallel_grid(std::size_t n = 50, double gap = 1.0, double length = 100.0) {
    std::vector<Polyline> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = static_cast<double>(i) * gap;
        out.push_back({{Vec3{0.0, y, 0.0}, Vec3{length, y, 0.0}}, 1.0});
    }
    return out;
}

// Mean distance between same-index interior points over all polyline pairs.
inline double mean_pairwise_interior_distance(const std::vector<Polyline>& lines) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t a = 0; a < lines.size(); ++a) {
        for (std::size_t b = a + 1; b < lines.size(); ++b) {
            for (std::size_t i = 1; i + 1 < lines[a].points.size(); ++i) {
                sum += distance(lines[a].points[i], lines[b].points[i]);
                ++n;
            }
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

// Straight polylines uniformly split into `intervals` pieces.
inline std::vector<Polyline> straight(const std::vector<Polyline>& lines, std::size_t intervals) {
    std::vector<Polyline> out;
    for (const Polyline& l : lines) {
        Polyline s{{}, l.weight};
        for (std::size_t i = 0; i <= intervals; ++i) {
            s.points.push_back(lerp(l.points.front(), l.points.back(), static_cast<double>(i) / static_cast<double>(intervals)));
        }
        out.push_back(std::move(s));
    }
    return out;
}

// Random edges with distinct endpoints inside a box.
inline std::vector<Polyline> random_edges(std::size_t n, std::uint64_t seed, double extent = 100.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, extent);
    std::vector<Polyline> out;
    while (out.size() < n) {
        Vec3 a{u(gen), u(gen), u(gen)};
        Vec3 b{u(gen), u(gen), u(gen)};
        if (distance(a, b) < extent * 0.2) continue;
        out.push_back({{a, b}, 1.0});
    }
    return out;
}

// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("dtb-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace dtb::testing
