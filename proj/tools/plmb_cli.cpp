// Command-line front end: Monte Carlo runs of the evaluation cases and
// metric recomputation from stored results.

#include "plmb/errors.hpp"
#include "plmb/monte_carlo.hpp"
#include "plmb/scenario.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

void print_window(const std::vector<plmb::SummaryRow>& rows, int from, int to) {
  double ospa = 0.0, card_err = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.step >= from && r.step <= to) {
      ospa += r.ospa_mean;
      card_err += r.card_est_mean - r.card_true_mean;
      ++n;
    }
  }
  if (n > 0) {
    std::printf("steps %d-%d: mean OSPA %.3f m, mean cardinality error %+.3f\n", from, to, ospa / n, card_err / n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Possibility LMB multi-sensor tracking simulations"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run Monte Carlo simulations of a case and write CSV results");
  std::string case_name;
  std::string method_name;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir;
  std::string config_file;
  run->add_option("--case", case_name, "Scenario case")->required()->check(CLI::IsMember({"A", "B"}));
  run->add_option("--method", method_name, "Fusion method")
      ->required()
      ->check(CLI::IsMember({"centralized", "distributed"}));
  run->add_option("--runs", runs, "Number of Monte Carlo runs")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--config", config_file, "key = value scenario overrides")->check(CLI::ExistingFile);
  run->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);

  auto* metrics = app.add_subcommand("metrics", "Recompute OSPA and cardinality summaries from stored results");
  std::string in_dir;
  metrics->add_option("--in", in_dir, "Directory written by run")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const plmb::ScenarioCase c = plmb::parse_case(case_name);
      plmb::ScenarioConfig cfg = plmb::default_config(c);
      if (!config_file.empty()) {
        plmb::apply_config_file(config_file, cfg);
      }
      cfg.case_id = c;
      if (runs) {
        cfg.mc_runs = *runs;
      }
      if (seed) {
        cfg.seed = *seed;
      }
      if (threads) {
        cfg.threads = *threads;
      }
      const plmb::Method m = plmb::parse_method(method_name);
      const auto start = std::chrono::steady_clock::now();
      const auto result = plmb::monte_carlo(cfg, m, std::filesystem::path(out_dir));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("case %s, %s, %d runs, seed %llu: %.1f s\n", case_name.c_str(), method_name.c_str(), cfg.mc_runs,
                  static_cast<unsigned long long>(cfg.seed), secs);
      print_window(result.summary, 1, cfg.steps);
      print_window(result.summary, 60, 100);
      std::printf("wrote %s\n",
                  (std::filesystem::path(out_dir) / (plmb::result_stem("summary", c, m) + ".csv")).string().c_str());
    } else if (*metrics) {
      for (const auto& rec : plmb::recompute_metrics(in_dir)) {
        std::printf("case %s, %s:\n", plmb::to_string(rec.case_id).c_str(), plmb::to_string(rec.method).c_str());
        print_window(rec.summary, 1, static_cast<int>(rec.summary.size()));
        print_window(rec.summary, 60, 100);
        std::printf("wrote %s\n", rec.written.string().c_str());
      }
    }
  } catch (const plmb::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
