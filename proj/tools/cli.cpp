#include "cli.hpp"

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dtb/atlas.hpp"
#include "dtb/connectome.hpp"
#include "dtb/error.hpp"
#include "dtb/fdeb.hpp"
#include "dtb/io.hpp"
#include "dtb/parallel.hpp"
#include "dtb/scene.hpp"
#include "dtb/signal.hpp"
#include "dtb/slicer.hpp"
#include "dtb/store.hpp"
#include "dtb/synthgen.hpp"
#include "json.hpp"
#include "scene_server.hpp"

namespace dtb::cli {

namespace fs = std::filesystem;

namespace {

struct SynthArgs {
    std::uint64_t seed = 42;
    std::string preset = "human";
    std::optional<std::size_t> dti_edges;
    std::string out;
};

struct IngestArgs {
    std::string atlas, bold, bold_dtb, dti, bundles, out;
};

struct BundleArgs {
    std::string edges, atlas, out;
    double fraction = 0.1;
    int cycles = 6;
    double kp = 0.1;
    std::optional<double> step;
    double compat = 0.05;
    bool no_grid = false;
    bool dry_run = false;
};

struct SliceArgs {
    std::string store, axis, out, range = "shared";
    double coord = 0.0;
    std::optional<double> thickness;
    std::size_t t = 0;
};

struct StatsArgs {
    std::string store, format = "text", scope = "all";
    std::optional<std::size_t> top_regions;
    std::optional<std::size_t> t;
    bool compare = false;
};

struct ServeArgs {
    std::vector<std::string> stores;
    std::string host = "127.0.0.1";
    int port = 8080;
};

GenSpec preset_spec(const std::string& name, std::uint64_t seed) {
    if (name == "human") return human_preset(seed);
    if (name == "macaque") return macaque_preset(seed);
    if (name == "f1") {
        GenSpec s = fixture_f1_spec();
        s.seed = seed;
        return s;
    }
    throw SpecError("unknown preset '" + name + "' (expected human, macaque or f1)");
}

int do_synth(const SynthArgs& a, std::ostream& out) {
    GenSpec spec = preset_spec(a.preset, a.seed);
    if (a.dti_edges) spec.dti_edge_count = *a.dti_edges;
    spec.validate();
    const fs::path dir = a.out;
    prepare_output_directory(dir);
    Fixture fixture = gen_fixture(spec);
    write_directory_atomic(dir, [&](const fs::path& tmp) { write_fixture(fixture, tmp); });
    out << "wrote " << a.preset << " fixture (seed " << spec.seed << ", " << fixture.atlas.voxel_count() << " voxels, "
        << fixture.dti.size() << " DTI entries) to " << dir.string() << "\n";
    return kOk;
}

int do_ingest(const IngestArgs& a, std::ostream& out) {
    const fs::path dir = a.out;
    prepare_output_directory(dir);
    Atlas atlas = load_atlas(a.atlas);
    StoreData data{atlas, load_bold(a.bold, atlas, SignalSource::biological), std::nullopt, load_dti(a.dti, atlas),
                   std::nullopt};
    if (!a.bold_dtb.empty()) {
        data.dtb = load_bold(a.bold_dtb, atlas, SignalSource::dtb);
        if (data.dtb->n_timepoints() != data.biological.n_timepoints())
            throw ShapeError("biological and DTB signals differ in length");
    }
    if (!a.bundles.empty()) data.bundles = import_bundles(a.bundles);
    write_directory_atomic(dir, [&](const fs::path& tmp) { write_store(data, tmp); });
    out << "ingested " << atlas.regions().size() << " regions, " << atlas.voxel_count() << " voxels, "
        << data.biological.n_timepoints() << " samples, " << data.dti.size() << " DTI entries into " << dir.string()
        << "\n";
    return kOk;
}

int do_bundle(const BundleArgs& a, unsigned threads, std::ostream& out) {
    if (!(a.fraction > 0.0 && a.fraction <= 1.0)) throw std::invalid_argument("--fraction must be in (0, 1]");
    if (a.out.empty() && !a.dry_run) throw std::invalid_argument("--out is required unless --dry-run is given");
    BundleParams params;
    params.n_cycles = a.cycles;
    params.k_p = a.kp;
    params.step_size = a.step;
    params.compat_threshold = a.compat;
    params.validate();

    Atlas atlas = load_atlas(a.atlas);
    ConnectivityMatrix m = load_dti(a.edges, atlas);
    EdgeSet edges = top_fraction(m, a.fraction);
    out << "selected " << edges.size() << " edges\n" << std::flush;
    if (a.dry_run) return kOk;

    auto lines = bundle(edges, atlas, params, BundleOptions{threads, !a.no_grid});
    export_bundles(make_bundle_document(edges, std::move(lines), params), a.out);
    out << "wrote " << a.out << "\n";
    return kOk;
}

int do_slice(const SliceArgs& a, std::ostream& out) {
    const SliceAxis axis = parse_slice_axis(a.axis);
    if (a.range != "shared" && a.range != "per_set") throw std::invalid_argument("--range must be shared or per_set");
    auto ds = Dataset::make(fs::path(a.store).filename().string(), load_store(a.store));
    const SlicePlane plane = SlicePlane::through(ds->atlas(), axis, a.coord, a.thickness);
    const auto mode = a.range == "shared" ? ColorRangeMode::shared : ColorRangeMode::per_set;
    const SliceRaster r = raster(ds->atlas(), ds->normalized(SignalSource::biological, mode), plane, a.t);
    const fs::path stem = export_slice(r, plane, a.out);
    out << "wrote " << stem.string() << ".pgm and " << stem.string() << ".json (" << r.occupied() << " of "
        << r.width * r.height << " cells occupied)\n";
    return kOk;
}

int do_stats(const StatsArgs& a, std::ostream& out) {
    if (a.format != "text" && a.format != "json") throw std::invalid_argument("--format must be text or json");
    const Scope scope = Scope::parse(a.scope);
    StoreData data = load_store(a.store);
    const Atlas& atlas = data.atlas;
    const SignalSet& bio = data.biological;
    if (a.t && *a.t >= bio.n_timepoints()) {
        throw BoundsError("--t " + std::to_string(*a.t) + " outside [0, " + std::to_string(bio.n_timepoints()) + ")");
    }

    const std::vector<Region> functional = functional_regions(atlas);
    const std::size_t peak = peak_time(bio, functional);
    const std::size_t t = a.t.value_or(peak);

    nlohmann::ordered_json report;
    report["store"] = a.store;
    report["n_regions"] = atlas.regions().size();
    report["n_functional_regions"] = functional.size();
    report["n_voxels"] = atlas.voxel_count();
    report["n_timepoints"] = bio.n_timepoints();
    report["dt_ms"] = bio.dt_ms();
    report["n_dti_entries"] = data.dti.size();
    report["peak_time"] = peak;
    report["peak_time_ms"] = static_cast<double>(peak) * bio.dt_ms();

    if (a.top_regions) {
        report["t"] = t;
        auto& list = report["top_regions"] = nlohmann::ordered_json::array();
        for (const RegionMean& rm : top_regions(bio, atlas, t, *a.top_regions)) {
            list.push_back({{"label", rm.label}, {"name", atlas.region(rm.label).name}, {"mean", rm.mean}});
        }
    }
    if (a.compare) {
        if (!data.dtb) throw NotFoundError("store has no DTB signal to compare against");
        const ComparisonReport c = compare_sets(bio, *data.dtb, atlas, scope);
        report["compare"] = {{"scope", a.scope}, {"pearson_r", c.pearson_r}, {"lag", c.lag}, {"degenerate", c.degenerate}};
    }

    if (a.format == "json") {
        out << report.dump(2) << "\n";
        return kOk;
    }
    out << "store: " << a.store << "\n";
    out << "regions: " << atlas.regions().size() << " (" << functional.size() << " functional), voxels: "
        << atlas.voxel_count() << ", timepoints: " << bio.n_timepoints() << " @ " << format_double(bio.dt_ms())
        << " ms, DTI entries: " << data.dti.size() << "\n";
    out << "peak time: " << peak << " (" << format_double(static_cast<double>(peak) * bio.dt_ms()) << " ms)\n";
    if (a.top_regions) {
        out << "top " << *a.top_regions << " regions at t = " << t << ":\n";
        for (const auto& item : report["top_regions"]) {
            out << "  " << item["label"].get<int>() << "  " << item["name"].get<std::string>() << "  "
                << format_double(item["mean"].get<double>()) << "\n";
        }
    }
    if (a.compare) {
        const auto& c = report["compare"];
        out << "compare (" << a.scope << "): pearson r = " << format_double(c["pearson_r"].get<double>())
            << ", lag = " << c["lag"].get<int>() << (c["degenerate"].get<bool>() ? " (degenerate)" : "") << "\n";
    }
    return kOk;
}

int do_serve(const ServeArgs& a, unsigned threads, std::ostream& out) {
    if (a.port < 0 || a.port > 65535) throw std::invalid_argument("--port must be in [0, 65535]");
    auto sessions = std::make_shared<SessionManager>();
    for (const std::string& store : a.stores) {
        fs::path p(store);
        std::string id = (p.has_filename() ? p : p.parent_path()).filename().string();
        sessions->add_dataset(Dataset::make(id, load_store(p)));
    }

    // Block the stop signals in every thread; the main thread collects them with sigwait.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    SceneServer server(sessions, threads);
    const int port = server.start(a.host, a.port);
    out << "serving " << a.stores.size() << " dataset(s) on http://" << a.host << ":" << port << "\n" << std::flush;

    int sig = 0;
    sigwait(&stop_signals, &sig);
    out << "received signal " << sig << ", shutting down\n" << std::flush;
    server.stop();
    pthread_sigmask(SIG_UNBLOCK, &stop_signals, nullptr);
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Digital twin brain exploration engine", "dtb-engine"};
    app.require_subcommand(1);
    unsigned threads_flag = 0;
    app.add_option("--threads", threads_flag, "Worker threads (0 = all cores; DTB_ENGINE_THREADS overrides)");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a deterministic synthetic fixture");
    synth_cmd->add_option("--seed", synth.seed, "PRNG seed");
    synth_cmd->add_option("--preset", synth.preset, "human, macaque or f1")->check(CLI::IsMember({"human", "macaque", "f1"}));
    synth_cmd->add_option("--dti-edges", synth.dti_edges, "Override the DTI entry count");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate input files into a store directory");
    ingest_cmd->add_option("--atlas", ingest.atlas, "Atlas JSON")->required();
    ingest_cmd->add_option("--bold", ingest.bold, "Biological BOLD (CSV or binary)")->required();
    ingest_cmd->add_option("--bold-dtb", ingest.bold_dtb, "DTB BOLD (CSV or binary)");
    ingest_cmd->add_option("--dti", ingest.dti, "DTI entries (CSV or binary)")->required();
    ingest_cmd->add_option("--bundles", ingest.bundles, "Bundled-edge JSON to attach");
    ingest_cmd->add_option("--out", ingest.out, "Output store directory")->required();

    BundleArgs bundle_args;
    auto* bundle_cmd = app.add_subcommand("bundle", "Edge-bundle the strongest DTI connections");
    bundle_cmd->add_option("--edges", bundle_args.edges, "DTI entries (CSV or binary)")->required();
    bundle_cmd->add_option("--atlas", bundle_args.atlas, "Atlas JSON")->required();
    bundle_cmd->add_option("--fraction", bundle_args.fraction, "Fraction of strongest entries to bundle");
    bundle_cmd->add_option("--cycles", bundle_args.cycles, "Subdivision cycles");
    bundle_cmd->add_option("--kp", bundle_args.kp, "Spring constant");
    bundle_cmd->add_option("--step", bundle_args.step, "Step size (default 0.04 x mean edge length)");
    bundle_cmd->add_option("--compat-threshold", bundle_args.compat, "Minimum pair compatibility");
    bundle_cmd->add_flag("--no-grid", bundle_args.no_grid, "Skip spatial-grid candidate pruning");
    bundle_cmd->add_flag("--dry-run", bundle_args.dry_run, "Report the selection without bundling");
    bundle_cmd->add_option("--out", bundle_args.out, "Output bundles JSON");

    SliceArgs slice;
    auto* slice_cmd = app.add_subcommand("slice", "Export a slab raster as PGM plus JSON sidecar");
    slice_cmd->add_option("--store", slice.store, "Store directory")->required();
    slice_cmd->add_option("--axis", slice.axis, "sagittal, horizontal or coronal")->required();
    slice_cmd->add_option("--coord", slice.coord, "Plane coordinate in mm")->required();
    slice_cmd->add_option("--thickness", slice.thickness, "Slab thickness in mm (default: voxel spacing)");
    slice_cmd->add_option("--t", slice.t, "Time index");
    slice_cmd->add_option("--range", slice.range, "Normalization range: shared or per_set");
    slice_cmd->add_option("--out", slice.out, "Output directory")->required();

    StatsArgs stats;
    auto* stats_cmd = app.add_subcommand("stats", "Region means, peak time and biological-vs-DTB comparison");
    stats_cmd->add_option("--store", stats.store, "Store directory")->required();
    stats_cmd->add_option("--top-regions", stats.top_regions, "List the K highest region means");
    stats_cmd->add_option("--t", stats.t, "Time index for --top-regions (default: peak time)");
    stats_cmd->add_flag("--compare", stats.compare, "Pearson r and lag between biological and DTB signals");
    stats_cmd->add_option("--scope", stats.scope, "Comparison scope: all, region:L, regions:A,B, voxels:...");
    stats_cmd->add_option("--format", stats.format, "text or json")->check(CLI::IsMember({"text", "json"}));

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the scene API over HTTP");
    serve_cmd->add_option("--store", serve.stores, "Store directory (repeatable)")->required();
    serve_cmd->add_option("--host", serve.host, "Bind address");
    serve_cmd->add_option("--port", serve.port, "Port (0 picks a free one)");

    for (auto* sub : {synth_cmd, ingest_cmd, bundle_cmd, slice_cmd, stats_cmd, serve_cmd}) {
        sub->add_option("--threads", threads_flag, "Worker threads (0 = all cores; DTB_ENGINE_THREADS overrides)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << "error: " << e.what() << "\n";
        return kValidationError;
    }

    try {
        const unsigned threads = resolve_thread_count(threads_flag);
        if (*synth_cmd) return do_synth(synth, out);
        if (*ingest_cmd) return do_ingest(ingest, out);
        if (*bundle_cmd) return do_bundle(bundle_args, threads, out);
        if (*slice_cmd) return do_slice(slice, out);
        if (*stats_cmd) return do_stats(stats, out);
        if (*serve_cmd) return do_serve(serve, threads, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidationError;
    }
    return kValidationError;
}

}  // namespace dtb::cli
