#include "ctmed/cli.hpp"

#include "ctmed/csv.hpp"
#include "ctmed/effects.hpp"
#include "ctmed/errors.hpp"
#include "ctmed/harness.hpp"
#include "ctmed/jsonio.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace ctmed::cli {

namespace {

void emit(const std::string& text, const std::string& output_path) {
  if (output_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(output_path);
  if (!out) throw config_error("cannot open '" + output_path + "' for writing");
  out << text;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"mediation functional estimation for continuous treatments"};
  app.name("ctmed");

  std::string mode;
  std::string config_path;
  std::string input_path;
  std::string output_path;
  std::string format = "json";
  std::uint64_t seed_value = 0;
  int workers = 0;
  bool verbose = false;

  app.add_option("--mode", mode, "estimate | simulate | oracle")
      ->required()
      ->check(CLI::IsMember({"estimate", "simulate", "oracle"}));
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--input", input_path, "dataset CSV (estimate mode)");
  app.add_option("--output", output_path, "output file (default stdout)");
  app.add_option("--format", format, "csv | json (default json)")
      ->check(CLI::IsMember({"csv", "json"}));
  auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
  app.add_option("--workers", workers, "override the config worker count");
  app.add_flag("--verbose", verbose, "progress notes on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    FileConfig cfg = load_config(config_path);
    if (seed_opt->count() > 0) {
      cfg.estimator.seed = seed_value;
      cfg.experiment.base_seed = seed_value;
      cfg.dgp.seed = seed_value;
      cfg.experiment.dgp.seed = seed_value;
    }
    if (workers > 0) cfg.workers = workers;
    if (cfg.workers < 1) throw config_error("workers must be at least 1");

    if (mode == "oracle") {
      if (!cfg.has_dgp) throw config_error("oracle mode needs a 'dgp' section in the config");
      if (cfg.pairs.empty()) throw config_error("oracle mode needs 'pairs' in the config");
      emit(format == "csv" ? oracle_to_csv(cfg.dgp, cfg.pairs)
                           : oracle_to_json(cfg.dgp, cfg.pairs),
           output_path);
      return 0;
    }

    if (mode == "simulate") {
      if (!cfg.has_experiment) {
        throw config_error("simulate mode needs an 'experiment' section in the config");
      }
      if (verbose) {
        const std::size_t cells = cfg.experiment.estimators.size() *
                                  cfg.experiment.n_grid.size() * cfg.experiment.pairs.size() *
                                  cfg.experiment.patterns.size();
        std::cerr << "simulate: " << cells << " cells x " << cfg.experiment.reps
                  << " replications on " << cfg.workers << " worker(s)\n";
      }
      const ExperimentReport report = run_experiment(cfg.experiment, cfg.workers);
      emit(format == "csv" ? report_to_csv(report) : report_to_json(report), output_path);
      return 0;
    }

    // estimate
    if (input_path.empty()) throw config_error("estimate mode needs --input");
    if (cfg.pairs.empty()) throw config_error("estimate mode needs 'pairs' in the config");
    const Dataset data = load_dataset(input_path);
    if (verbose) {
      std::cerr << "estimate: " << data.n() << " rows, " << cfg.pairs.size() << " pair(s)\n";
    }
    std::vector<EffectDecomposition> rows;
    rows.reserve(cfg.pairs.size());
    for (const TreatmentPair& pair : cfg.pairs) {
      rows.push_back(decompose(data, pair, cfg.estimator));
    }
    emit(format == "csv" ? estimates_to_csv(rows) : estimates_to_json(rows), output_path);
    return 0;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ctmed::cli
