// cdnslice command-line driver: batch scenario runs, parameter sweeps, the
// control API and synthetic catalog generation.

#include "cdnslice/control_api.hpp"
#include "cdnslice/scenario.hpp"
#include "cdnslice/sweep.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace cdnslice;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

constexpr const char* kOutputEnv = "CDNSLICE_OUTPUT_DIR";

// --out beats the environment, which beats the config file.
fs::path output_dir(const std::string& flag, const std::string& from_config) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return from_config;
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
}

int cmd_run(const std::string& config, const std::string& out_flag, bool quiet) {
    const auto cfg = load_scenario(config);
    const auto report = run_scenario(cfg);
    const auto dir = output_dir(out_flag, cfg.output_dir);
    write_outputs(report, dir);
    if (!quiet) {
        std::cout << "scenario " << report.name << ": " << report.decisions.size() << " decisions, "
                  << report.jobs.size() << " transcode jobs, accrued $" << report.accrued_cost << "\n";
        for (const auto& inv : report.invariants)
            std::cout << "  [" << (inv.ok ? "ok" : "FAIL") << "] " << inv.name
                      << (inv.ok ? "" : ": " + inv.detail) << "\n";
        std::cout << "outputs in " << dir.string() << "\n";
    }
    return report.ok() ? kExitOk : kExitInvariant;
}

int cmd_sweep(const std::string& config, const std::string& axis, int reps, const std::vector<int>& sizes,
              const std::vector<double>& values, const std::string& out_flag, bool quiet) {
    std::ifstream in(config);
    if (!in) throw IoError("cannot open sweep config '" + config + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed sweep config: " + std::string(e.what()));
    }
    auto cfg = parse_sweep_config(j);
    if (!axis.empty()) {
        const auto a = parse_axis(axis);
        if (a != cfg.axis) cfg.values.clear();
        cfg.axis = a;
    }
    if (reps > 0) cfg.replications = reps;
    if (!sizes.empty()) cfg.sizes = sizes;
    if (!values.empty()) cfg.values = values;
    cfg.fill_defaults();
    cfg.validate();

    const auto result = run_sweep(cfg);
    const auto dir = output_dir(out_flag, j.value("output_dir", std::string("out/sweep")));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / "sweep_points.csv", sweep_points_csv(result));
    write_file(dir / "sweep_aggregates.csv", sweep_aggregates_csv(result));
    write_file(dir / "sweep_timing.csv", sweep_timing_csv(result));

    std::string report;
    int infeasible = 0;
    for (const auto& p : result.points) infeasible += p.feasible ? 0 : 1;
    report += "axis " + std::string(to_string(cfg.axis)) + ", " + std::to_string(cfg.sizes.size()) + " sizes, " +
              std::to_string(cfg.replications) + " replications\n";
    report += "infeasible points: " + std::to_string(infeasible) + " of " + std::to_string(result.points.size()) + "\n";
    for (double v : cfg.values) {
        const auto t = size_trend(result, v);
        char buf[96];
        std::snprintf(buf, sizeof buf, "size trend %s=%g: %s over %zu pressured sizes\n", to_string(cfg.axis), v,
                      t.ok() ? "rising" : "NOT rising", t.pressured_sizes.size());
        report += buf;
        for (const auto& f : t.failures) report += "  " + f + "\n";
    }
    for (const auto& v : result.violations) report += "violation: " + v + "\n";
    write_file(dir / "sweep_report.txt", report);
    if (!quiet) std::cout << report << "outputs in " << dir.string() << "\n";
    return result.violations.empty() ? kExitOk : kExitInvariant;
}

int cmd_serve(const std::string& config, const std::string& host, int port) {
    const auto cfg = load_scenario(config);
    ControlService svc(ServiceConfig::from_scenario(cfg));
    ControlServer server(svc);
    std::cout << "serving on " << host << ":" << port << "\n" << std::flush;
    if (!server.listen(host, port)) throw ResourceUnavailable("cannot listen on " + host + ":" + std::to_string(port));
    return kExitOk;
}

int cmd_gen_catalog(std::uint64_t seed, int clouds, int flavors, int capacity, const std::string& out) {
    SyntheticCatalogParams p;
    p.seed = seed;
    p.n_clouds = clouds;
    p.total_flavors = flavors;
    p.capacity_vcpus = capacity;
    const auto cat = generate_synthetic_catalog(p);
    if (out.empty() || out == "-") {
        std::cout << catalog_to_json(cat).dump(2) << "\n";
    } else {
        save_catalog(cat, out);
        std::cerr << "wrote " << cat.flavors().size() << " flavors in " << cat.clouds().size() << " clouds to " << out
                  << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cdnslice: QoE-aware elastic CDN slices"};
    app.require_subcommand(1);

    std::string config, out_dir, axis, host = "127.0.0.1", catalog_out;
    int reps = 0, port = 8080, clouds = 45, flavors = 1417, capacity = 20;
    std::uint64_t seed = 42;
    std::vector<int> sizes;
    std::vector<double> values;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "run a scenario and write timeseries.csv, decisions.log, summary.csv");
    run->add_option("config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out_dir, std::string("output directory (else $") + kOutputEnv + ", else config)");
    run->add_flag("-q,--quiet", quiet);

    auto* sweep = app.add_subcommand("sweep", "slice-size sweep with replications");
    sweep->add_option("config", config, "sweep JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--axis", axis, "q_min | l_min | n_instances");
    sweep->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
    sweep->add_option("--sizes", sizes, "slice sizes")->delimiter(',');
    sweep->add_option("--values", values, "axis values")->delimiter(',');
    sweep->add_option("-o,--out", out_dir, "output directory");
    sweep->add_flag("-q,--quiet", quiet);

    auto* serve = app.add_subcommand("serve", "serve the slice control API");
    serve->add_option("config", config, "scenario JSON providing catalog and models")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
    serve->add_option("--host", host, "bind address");

    auto* gen = app.add_subcommand("gen-catalog", "print or write a synthetic flavor catalog");
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--clouds", clouds, "cloud domains")->check(CLI::PositiveNumber);
    gen->add_option("--flavors", flavors, "total flavors")->check(CLI::PositiveNumber);
    gen->add_option("--capacity", capacity, "vCPU capacity per cloud")->check(CLI::PositiveNumber);
    gen->add_option("-o,--out", catalog_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) return cmd_run(config, out_dir, quiet);
        if (*sweep) return cmd_sweep(config, axis, reps, sizes, values, out_dir, quiet);
        if (*serve) return cmd_serve(config, host, port);
        if (*gen) return cmd_gen_catalog(seed, clouds, flavors, capacity, catalog_out);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
