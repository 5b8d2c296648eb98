// epicbench: seeded conformal-prediction benchmark runner.
//
// Subcommands: simulate (write synthetic CSVs), run (config -> per-run
// reports), aggregate (reports -> table), bands (per-point band dump).
// Exit codes: 0 success, 2 config error, 3 runtime failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "epic/data.hpp"
#include "epic/experiment.hpp"

namespace {

int run_simulate(const std::string& dgp, std::size_t n, std::uint64_t seed,
                 const std::string& out, const std::string& convention, int k_classes,
                 double spread) {
    const epic::VarianceConvention conv = convention == "var"
                                              ? epic::VarianceConvention::var
                                              : epic::VarianceConvention::sd;
    epic::Dataset ds;
    if (dgp == "bimodal") {
        ds = epic::generate_bimodal_dgp(n, seed, conv);
    } else if (dgp == "blobs") {
        ds = epic::generate_blobs_classification(n, k_classes, spread, seed).first;
    } else {
        throw epic::ConfigError("unknown dgp: " + dgp);
    }
    epic::write_csv(ds, out);
    std::printf("wrote %zu rows to %s\n", ds.n, out.c_str());
    return 0;
}

epic::ExperimentConfig load_config(const std::string& config_path, std::uint64_t seed,
                                   bool seed_set, double alpha, bool alpha_set, int runs,
                                   const std::string& out, const std::string& format,
                                   const std::string& convention) {
    epic::ExperimentConfig config = config_path.empty()
                                        ? epic::ExperimentConfig{}
                                        : epic::config_from_json_file(config_path);
    if (seed_set) config.seed = seed;
    if (alpha_set) config.alpha = alpha;
    if (runs > 0) config.n_runs = runs;
    if (!out.empty()) config.out_path = out;
    if (!format.empty()) config.format = format;
    if (!convention.empty())
        config.convention = convention == "var" ? epic::VarianceConvention::var
                                                : epic::VarianceConvention::sd;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conformal prediction benchmark with epistemic score transforms"};
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset CSV");
    std::string sim_dgp = "bimodal";
    std::size_t sim_n = 2000;
    std::uint64_t sim_seed = 1;
    std::string sim_out = "data.csv";
    std::string sim_conv = "sd";
    int sim_classes = 3;
    double sim_spread = 1.0;
    simulate->add_option("--dgp", sim_dgp, "bimodal|blobs");
    simulate->add_option("--n", sim_n, "rows");
    simulate->add_option("--seed", sim_seed, "seed");
    simulate->add_option("--out", sim_out, "output CSV path");
    simulate->add_option("--variance-convention", sim_conv, "sd|var");
    simulate->add_option("--k-classes", sim_classes, "blob classes");
    simulate->add_option("--spread", sim_spread, "blob spread");

    // run
    auto* run = app.add_subcommand("run", "run a config and write per-run reports");
    std::string run_config;
    std::uint64_t run_seed = 0;
    double run_alpha = 0.0;
    int run_runs = 0;
    std::string run_out, run_format, run_conv;
    run->add_option("--config", run_config, "config JSON path")->required();
    auto* run_seed_opt = run->add_option("--seed", run_seed, "override seed");
    auto* run_alpha_opt = run->add_option("--alpha", run_alpha, "override alpha");
    run->add_option("--runs", run_runs, "override run count");
    run->add_option("--out", run_out, "output path");
    run->add_option("--format", run_format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    run->add_option("--variance-convention", run_conv, "sd|var")
        ->check(CLI::IsMember({"sd", "var"}));

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "aggregate a reports JSON file");
    std::string agg_in, agg_out = "aggregate.json", agg_format = "json";
    agg->add_option("--in", agg_in, "reports JSON path")->required();
    agg->add_option("--out", agg_out, "output path");
    agg->add_option("--format", agg_format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));

    // bands
    auto* bands = app.add_subcommand("bands", "dump per-point bands for one method");
    std::string bands_config, bands_method = "epic_knn", bands_out = "bands.csv";
    std::uint64_t bands_seed = 0;
    bands->add_option("--config", bands_config, "config JSON path")->required();
    bands->add_option("--method", bands_method, "method name");
    bands->add_option("--seed", bands_seed, "seed");
    bands->add_option("--out", bands_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed())
            return run_simulate(sim_dgp, sim_n, sim_seed, sim_out, sim_conv, sim_classes,
                                sim_spread);

        if (run->parsed()) {
            const epic::ExperimentConfig config =
                load_config(run_config, run_seed, run_seed_opt->count() > 0, run_alpha,
                            run_alpha_opt->count() > 0, run_runs, run_out, run_format,
                            run_conv);
            const std::vector<epic::MetricsReport> reports = epic::run_experiment(config);
            const std::string text = config.format == "csv"
                                         ? epic::reports_to_csv(reports)
                                         : epic::reports_to_json(reports);
            if (config.out_path.empty()) {
                std::fputs(text.c_str(), stdout);
            } else {
                epic::write_text_file(config.out_path, text);
                std::printf("wrote %zu reports to %s\n", reports.size(),
                            config.out_path.c_str());
            }
            return 0;
        }

        if (agg->parsed()) {
            const std::vector<epic::MetricsReport> reports =
                epic::reports_from_json_text(epic::read_text_file(agg_in));
            const epic::AggregateReport report = epic::aggregate(reports);
            const std::string text = agg_format == "csv" ? epic::aggregate_to_csv(report)
                                                         : epic::aggregate_to_json(report);
            epic::write_text_file(agg_out, text);
            std::printf("wrote aggregate to %s\n", agg_out.c_str());
            return 0;
        }

        if (bands->parsed()) {
            const epic::ExperimentConfig config = epic::config_from_json_file(bands_config);
            const std::vector<epic::BandDumpRow> rows =
                epic::dump_bands(config, bands_method, bands_seed);
            const std::size_t p = rows.empty() ? 0 : rows[0].x.size();
            epic::write_text_file(bands_out, epic::bands_to_csv(rows, p));
            std::printf("wrote %zu bands to %s\n", rows.size(), bands_out.c_str());
            return 0;
        }
    } catch (const epic::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
