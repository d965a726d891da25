#include "plmb/monte_carlo.hpp"

#include "plmb/errors.hpp"
#include "plmb/metrics.hpp"
#include "plmb/network.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace plmb {

namespace {

std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw FileError("cannot write " + path.string());
  }
  return out;
}

// Rows of a CSV file with the expected header, split on commas.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, const std::string& header,
                                                std::size_t columns) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw FileError(path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() != columns) {
      throw FileError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                      " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

int to_int(const std::string& s) { return std::stoi(s); }
double to_double(const std::string& s) { return std::stod(s); }

}  // namespace

std::string to_string(Method m) { return m == Method::centralized ? "centralized" : "distributed"; }

Method parse_method(const std::string& s) {
  if (s == "centralized") {
    return Method::centralized;
  }
  if (s == "distributed") {
    return Method::distributed;
  }
  throw ConfigError("unknown method '" + s + "', expected centralized or distributed");
}

std::mt19937_64 run_rng(std::uint64_t seed, int run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run)};
  return std::mt19937_64(seq);
}

RunResult run_once(const ScenarioConfig& cfg, Method method, int run, const DensityObserver& observer) {
  cfg.validate();
  std::mt19937_64 rng = run_rng(cfg.seed, run);
  const GroundTruth truth = generate_truth(cfg, rng);
  const auto paths = generate_sensor_paths(cfg, rng);
  const auto frames = generate_measurements(truth, paths, cfg, rng);

  TrackerConfig tcfg = tracker_config(cfg);
  tcfg.observer = observer;
  const auto n = static_cast<std::size_t>(cfg.sensor_count);
  const SensorGraph graph = method == Method::distributed ? scenario_graph(cfg) : SensorGraph(1);
  CentralizedState central;
  DistributedState distributed(n);

  RunResult r;
  r.run = run;
  for (int k = 1; k <= cfg.steps; ++k) {
    for (const auto& [id, x] : truth.at(k)) {
      r.truth.push_back({run, k, id, x(0), x(2)});
    }
    const auto sensors = sensor_models(cfg, paths[static_cast<std::size_t>(k - 1)]);
    const auto& z = frames[static_cast<std::size_t>(k - 1)];
    const auto time = static_cast<std::uint32_t>(k);
    const auto record = [&](int node, const LmbDensity& d) {
      for (const auto& e : map_estimate(d)) {
        r.estimates.push_back({run, k, node, e.label, e.state(0), e.state(2)});
      }
    };
    if (method == Method::centralized) {
      record(0, centralized_step(central, z, sensors, tcfg, time));
    } else {
      const auto& nodes = distributed_step(distributed, z, sensors, graph, tcfg, time);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        record(static_cast<int>(i), nodes[i]);
      }
    }
  }
  compute_run_metrics(r, cfg, method == Method::centralized ? 1 : cfg.sensor_count);
  return r;
}

void compute_run_metrics(RunResult& r, const ScenarioConfig& cfg, int nodes) {
  const auto steps = static_cast<std::size_t>(cfg.steps);
  std::vector<std::vector<Vector>> truth_at(steps);
  std::map<int, TrackHistory> truth_tracks;
  for (const auto& t : r.truth) {
    Vector p(2);
    p << t.x, t.y;
    const auto k = static_cast<std::size_t>(t.step - 1);
    truth_at.at(k).push_back(p);
    auto& h = truth_tracks[t.id];
    h.resize(steps);
    h[k] = p;
  }
  std::vector<TrackHistory> truth_hist;
  for (auto& [id, h] : truth_tracks) {
    truth_hist.push_back(std::move(h));
  }

  r.ospa.assign(steps, 0.0);
  r.ospa2.assign(steps, 0.0);
  r.card_true.assign(steps, 0.0);
  r.card_est.assign(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    r.card_true[k] = static_cast<double>(truth_at[k].size());
  }
  for (int node = 0; node < nodes; ++node) {
    std::vector<std::vector<Vector>> est_at(steps);
    std::map<Label, TrackHistory> est_tracks;
    for (const auto& e : r.estimates) {
      if (e.node != node) {
        continue;
      }
      Vector p(2);
      p << e.x, e.y;
      const auto k = static_cast<std::size_t>(e.step - 1);
      est_at.at(k).push_back(p);
      auto& h = est_tracks[e.label];
      h.resize(steps);
      h[k] = p;
    }
    std::vector<TrackHistory> est_hist;
    for (auto& [label, h] : est_tracks) {
      est_hist.push_back(std::move(h));
    }
    std::vector<double> o2 = ospa2_windowed(est_hist, truth_hist, cfg.ospa2_window, cfg.ospa_c, cfg.ospa_p);
    o2.resize(steps, 0.0);
    for (std::size_t k = 0; k < steps; ++k) {
      r.ospa[k] += ospa(est_at[k], truth_at[k], cfg.ospa_c, cfg.ospa_p) / nodes;
      r.ospa2[k] += o2[k] / nodes;
      r.card_est[k] += static_cast<double>(est_at[k].size()) / nodes;
    }
  }
}

std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs, int steps) {
  std::vector<SummaryRow> rows(static_cast<std::size_t>(steps));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].step = static_cast<int>(k) + 1;
  }
  if (runs.empty()) {
    return rows;
  }
  const auto n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      rows[k].ospa_mean += r.ospa[k];
      rows[k].ospa2_mean += r.ospa2[k];
      rows[k].card_true_mean += r.card_true[k];
      rows[k].card_est_mean += r.card_est[k];
    }
  }
  for (auto& row : rows) {
    row.ospa_mean /= n;
    row.ospa2_mean /= n;
    row.card_true_mean /= n;
    row.card_est_mean /= n;
  }
  return rows;
}

MonteCarloResult monte_carlo(const ScenarioConfig& cfg, Method method, const std::optional<std::filesystem::path>& out) {
  cfg.validate();
  if (out) {
    std::error_code ec;
    std::filesystem::create_directories(*out, ec);
    if (ec || !std::filesystem::is_directory(*out)) {
      throw FileError("cannot create output directory " + out->string());
    }
  }
  MonteCarloResult result;
  result.runs.resize(static_cast<std::size_t>(cfg.mc_runs));
  std::vector<std::exception_ptr> errors(result.runs.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = std::min<std::size_t>(cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw,
                                             result.runs.size());
  std::atomic<int> next{0};
  const auto work = [&] {
    for (int i = next++; i < cfg.mc_runs; i = next++) {
      try {
        result.runs[static_cast<std::size_t>(i)] = run_once(cfg, method, i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) {
    pool.emplace_back(work);
  }
  work();
  for (auto& t : pool) {
    t.join();
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  result.summary = summarize(result.runs, cfg.steps);

  if (out) {
    {
      auto f = open_out(*out / (result_stem("config", cfg.case_id, method) + ".txt"));
      write_config(f, cfg);
    }
    write_truth_csv(*out / (result_stem("truth", cfg.case_id, method) + ".csv"), result.runs);
    write_estimates_csv(*out / (result_stem("estimates", cfg.case_id, method) + ".csv"), result.runs);
    write_summary_csv(*out / (result_stem("summary", cfg.case_id, method) + ".csv"), result.summary);
  }
  return result;
}

std::string result_stem(const std::string& kind, ScenarioCase c, Method m) {
  return kind + "_" + to_string(c) + "_" + to_string(m);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << "step,ospa_mean,ospa2_mean,card_true_mean,card_est_mean\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f\n", r.step, r.ospa_mean, r.ospa2_mean, r.card_true_mean,
                  r.card_est_mean);
    out << buf;
  }
}

void write_truth_csv(const std::filesystem::path& path, const std::vector<RunResult>& runs) {
  auto out = open_out(path);
  out << "run,step,id,x,y\n";
  for (const auto& r : runs) {
    for (const auto& t : r.truth) {
      out << t.run << ',' << t.step << ',' << t.id << ',' << fmt_coord(t.x) << ',' << fmt_coord(t.y) << '\n';
    }
  }
}

void write_estimates_csv(const std::filesystem::path& path, const std::vector<RunResult>& runs) {
  auto out = open_out(path);
  out << "run,step,node,label_time,label_index,x,y\n";
  for (const auto& r : runs) {
    for (const auto& e : r.estimates) {
      out << e.run << ',' << e.step << ',' << e.node << ',' << e.label.birth_time << ',' << e.label.index << ','
          << fmt_coord(e.x) << ',' << fmt_coord(e.y) << '\n';
    }
  }
}

std::vector<TruthRecord> read_truth_csv(const std::filesystem::path& path) {
  std::vector<TruthRecord> out;
  for (const auto& c : read_rows(path, "run,step,id,x,y", 5)) {
    out.push_back({to_int(c[0]), to_int(c[1]), to_int(c[2]), to_double(c[3]), to_double(c[4])});
  }
  return out;
}

std::vector<EstimateRecord> read_estimates_csv(const std::filesystem::path& path) {
  std::vector<EstimateRecord> out;
  for (const auto& c : read_rows(path, "run,step,node,label_time,label_index,x,y", 7)) {
    const Label l{static_cast<std::uint32_t>(std::stoul(c[3])), static_cast<std::uint32_t>(std::stoul(c[4]))};
    out.push_back({to_int(c[0]), to_int(c[1]), to_int(c[2]), l, to_double(c[5]), to_double(c[6])});
  }
  return out;
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  std::vector<SummaryRow> out;
  for (const auto& c : read_rows(path, "step,ospa_mean,ospa2_mean,card_true_mean,card_est_mean", 5)) {
    out.push_back({to_int(c[0]), to_double(c[1]), to_double(c[2]), to_double(c[3]), to_double(c[4])});
  }
  return out;
}

std::vector<RecomputedMetrics> recompute_metrics(const std::filesystem::path& dir) {
  std::vector<RecomputedMetrics> out;
  for (ScenarioCase c : {ScenarioCase::A, ScenarioCase::B}) {
    for (Method m : {Method::centralized, Method::distributed}) {
      const auto config_path = dir / (result_stem("config", c, m) + ".txt");
      if (!std::filesystem::exists(config_path)) {
        continue;
      }
      ScenarioConfig cfg = default_config(c);
      apply_config_file(config_path, cfg);
      const auto truth = read_truth_csv(dir / (result_stem("truth", c, m) + ".csv"));
      const auto estimates = read_estimates_csv(dir / (result_stem("estimates", c, m) + ".csv"));
      std::vector<RunResult> runs(static_cast<std::size_t>(cfg.mc_runs));
      for (std::size_t i = 0; i < runs.size(); ++i) {
        runs[i].run = static_cast<int>(i);
      }
      const auto slot = [&](int run) -> RunResult& {
        if (run < 0 || run >= cfg.mc_runs) {
          throw FileError("record for run " + std::to_string(run) + " outside 0.." + std::to_string(cfg.mc_runs - 1));
        }
        return runs[static_cast<std::size_t>(run)];
      };
      for (const auto& t : truth) {
        slot(t.run).truth.push_back(t);
      }
      for (const auto& e : estimates) {
        slot(e.run).estimates.push_back(e);
      }
      const int nodes = m == Method::centralized ? 1 : cfg.sensor_count;
      for (auto& r : runs) {
        compute_run_metrics(r, cfg, nodes);
      }
      RecomputedMetrics rec{c, m, summarize(runs, cfg.steps), dir / (result_stem("metrics", c, m) + ".csv")};
      write_summary_csv(rec.written, rec.summary);
      out.push_back(std::move(rec));
    }
  }
  if (out.empty()) {
    throw FileError("no result set (config_<case>_<method>.txt) in " + dir.string());
  }
  return out;
}

}  // namespace plmb
