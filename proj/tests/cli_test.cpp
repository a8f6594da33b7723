#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "dtb/io.hpp"
#include "dtb/store.hpp"
#include "fixtures.hpp"
#include "json.hpp"

using namespace dtb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "dtb-engine");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Outcome o;
    o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

// One F1 store shared by the read-only tests.
const fs::path& f1_store() {
    static testing::TempDir dir("cli-f1");
    static const fs::path store = [] {
        const fs::path p = dir / "f1";
        auto o = run({"synth", "--preset", "f1", "--seed", "1", "--out", p.string()});
        REQUIRE(o.code == 0);
        return p;
    }();
    return store;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("synth is deterministic and refuses to overwrite") {
        testing::TempDir dir("cli-synth");
        CHECK(run({"synth", "--preset", "f1", "--seed", "5", "--out", (dir / "a").string()}).code == 0);
        CHECK(run({"synth", "--preset", "f1", "--seed", "5", "--out", (dir / "b").string()}).code == 0);
        for (const char* name : {"atlas.json", "bold_biological.csv", "bold_dtb.csv", "dti.csv", "manifest.json"}) {
            CHECK(read_text_file(dir / "a" / name) == read_text_file(dir / "b" / name));
        }
        auto again = run({"synth", "--preset", "f1", "--out", (dir / "a").string()});
        CHECK(again.code == 2);
        CHECK_FALSE(again.err.empty());
    }

    TEST_CASE("stats reports the planted lag and peak") {
        auto text = run({"stats", "--store", f1_store().string(), "--compare", "--top-regions", "1"});
        REQUIRE(text.code == 0);
        CHECK(text.out.find("lag = 3") != std::string::npos);
        CHECK(text.out.find("peak time: 119") != std::string::npos);

        auto js = run({"stats", "--store", f1_store().string(), "--compare", "--top-regions", "2", "--t", "119", "--format", "json"});
        REQUIRE(js.code == 0);
        auto doc = nlohmann::json::parse(js.out);
        CHECK(doc.at("compare").at("lag") == 3);
        CHECK(doc.at("compare").at("pearson_r").get<double>() > 0.95);
        CHECK(doc.at("top_regions")[0].at("label") == 16);
        CHECK(doc.at("peak_time") == 119);
    }

    TEST_CASE("ingest validates and copies a store") {
        testing::TempDir dir("cli-ingest");
        const fs::path s = f1_store();
        auto ok = run({"ingest", "--atlas", (s / "atlas.json").string(), "--bold", (s / "bold_biological.csv").string(),
                       "--bold-dtb", (s / "bold_dtb.csv").string(), "--dti", (s / "dti.csv").string(), "--out",
                       (dir / "store").string()});
        REQUIRE(ok.code == 0);
        CHECK(load_store(dir / "store").dtb.has_value());

        write_file_atomic(dir / "bad.csv", "1110,1\n5,5,1\n");
        auto bad = run({"ingest", "--atlas", (s / "atlas.json").string(), "--bold", (s / "bold_biological.csv").string(),
                        "--dti", (dir / "bad.csv").string(), "--out", (dir / "bad_store").string()});
        CHECK(bad.code == 1);
        CHECK(bad.err.find("self") != std::string::npos);
        CHECK_FALSE(fs::exists(dir / "bad_store"));
    }

    TEST_CASE("bundle reports the selection and writes the bundled-edge file") {
        testing::TempDir dir("cli-bundle");
        const fs::path s = f1_store();
        auto o = run({"bundle", "--edges", (s / "dti.csv").string(), "--atlas", (s / "atlas.json").string(), "--fraction",
                      "0.01", "--cycles", "3", "--threads", "2", "--out", (dir / "bundles.json").string()});
        REQUIRE(o.code == 0);
        CHECK(o.out.find("selected 200 edges") != std::string::npos);
        auto doc = nlohmann::json::parse(read_text_file(dir / "bundles.json"));
        CHECK(doc.at("edges").size() == 200);
        CHECK(doc.at("edges")[0].at("points").size() == 9);

        auto bad = run({"bundle", "--edges", (s / "dti.csv").string(), "--atlas", (s / "atlas.json").string(), "--fraction",
                        "1.5", "--out", (dir / "x.json").string()});
        CHECK(bad.code == 1);
        CHECK_FALSE(fs::exists(dir / "x.json"));
    }

    TEST_CASE("slice writes a PGM and sidecar") {
        testing::TempDir dir("cli-slice");
        auto o = run({"slice", "--store", f1_store().string(), "--axis", "sagittal", "--coord", "0", "--t", "119", "--out",
                      (dir / "slices").string()});
        REQUIRE(o.code == 0);
        CHECK(fs::exists(dir / "slices" / "slice_sagittal_0_t119.pgm"));
        CHECK(fs::exists(dir / "slices" / "slice_sagittal_0_t119.json"));
        auto bad = run({"slice", "--store", f1_store().string(), "--axis", "oblique", "--coord", "0", "--out",
                        (dir / "nope").string()});
        CHECK(bad.code == 1);
    }

    TEST_CASE("exit codes for usage and I/O errors") {
        CHECK(run({}).code == 1);
        CHECK(run({"stats"}).code == 1);
        CHECK(run({"stats", "--store", "/definitely/not/here"}).code == 2);
        CHECK(run({"synth", "--preset", "zebrafish", "--out", "/tmp/x"}).code == 1);
        CHECK(run({"--help"}).code == 0);
    }
}
