#pragma once

// Monte Carlo runs of the multi-sensor trackers, their CSV records and the
// per-step summary.

#include "plmb/labeled_ufs.hpp"
#include "plmb/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace plmb {

enum class Method { centralized, distributed };

[[nodiscard]] std::string to_string(Method m);
/// "centralized" or "distributed"; throws ConfigError otherwise.
[[nodiscard]] Method parse_method(const std::string& s);

struct TruthRecord {
  int run = 0;
  int step = 0;
  int id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct EstimateRecord {
  int run = 0;
  int step = 0;
  int node = 0;
  Label label;
  double x = 0.0;
  double y = 0.0;
};

struct RunResult {
  int run = 0;
  /// Per step, averaged over nodes for the distributed method.
  std::vector<double> ospa;
  std::vector<double> ospa2;
  std::vector<double> card_true;
  std::vector<double> card_est;
  std::vector<TruthRecord> truth;
  std::vector<EstimateRecord> estimates;
};

struct SummaryRow {
  int step = 0;
  double ospa_mean = 0.0;
  double ospa2_mean = 0.0;
  double card_true_mean = 0.0;
  double card_est_mean = 0.0;
};

struct MonteCarloResult {
  std::vector<RunResult> runs;
  std::vector<SummaryRow> summary;
};

/// Independent stream of run `run` under `seed`.
[[nodiscard]] std::mt19937_64 run_rng(std::uint64_t seed, int run);

using DensityObserver = std::function<void(const char* stage, const LmbDensity&)>;

/// Simulates one run: truth, sensor paths and measurements come from
/// run_rng(cfg.seed, run) and do not depend on the method.
[[nodiscard]] RunResult run_once(const ScenarioConfig& cfg, Method method, int run,
                                 const DensityObserver& observer = {});

/// Metrics of one run from its records; `nodes` estimate sets are averaged.
void compute_run_metrics(RunResult& r, const ScenarioConfig& cfg, int nodes);

[[nodiscard]] std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs, int steps);

/// cfg.mc_runs runs on a thread pool; the summary is reduced in run order.
/// When `out` is set, writes config, truth, estimates and summary files there.
[[nodiscard]] MonteCarloResult monte_carlo(const ScenarioConfig& cfg, Method method,
                                           const std::optional<std::filesystem::path>& out = std::nullopt);

/// File name stem "<kind>_<case>_<method>".
[[nodiscard]] std::string result_stem(const std::string& kind, ScenarioCase c, Method m);

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
void write_truth_csv(const std::filesystem::path& path, const std::vector<RunResult>& runs);
void write_estimates_csv(const std::filesystem::path& path, const std::vector<RunResult>& runs);
[[nodiscard]] std::vector<TruthRecord> read_truth_csv(const std::filesystem::path& path);
[[nodiscard]] std::vector<EstimateRecord> read_estimates_csv(const std::filesystem::path& path);
[[nodiscard]] std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

struct RecomputedMetrics {
  ScenarioCase case_id;
  Method method;
  std::vector<SummaryRow> summary;
  std::filesystem::path written;
};

/// Recomputes the summaries of every result set in `dir` from its stored
/// truth and estimates and writes them as metrics_<case>_<method>.csv.
/// Throws FileError if `dir` holds no result set.
[[nodiscard]] std::vector<RecomputedMetrics> recompute_metrics(const std::filesystem::path& dir);

}  // namespace plmb
