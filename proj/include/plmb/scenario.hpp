#pragma once

// Simulation scenarios: configuration, ground truth, sensor paths and
// synthetic measurements for the two evaluation cases.

#include "plmb/filter.hpp"
#include "plmb/network.hpp"
#include "plmb/possibility.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace plmb {

enum class ScenarioCase { A, B };

[[nodiscard]] std::string to_string(ScenarioCase c);
/// "A" or "B"; throws ConfigError otherwise.
[[nodiscard]] ScenarioCase parse_case(const std::string& s);

/// Every field is settable from a key = value file under the same name,
/// except case_id whose key is "case".
struct ScenarioConfig {
  ScenarioCase case_id = ScenarioCase::A;
  double area_min = -1000.0;
  double area_max = 1000.0;
  int steps = 100;
  double dt = 1.0;
  double sigma_r = 5.0;
  double lambda_fa = 10.0;
  double sigma_s = 1000.0;
  double sigma_q = 5.0;          ///< filter process noise
  double truth_sigma_q = 0.5;    ///< process noise of the simulated targets
  double lambda_b = 0.3;         ///< case B births per step
  double sigma_v = 3.0;          ///< case B initial speed spread
  int birth_cutoff = 30;         ///< case B: no births after this step
  int mc_runs = 100;
  std::uint64_t seed = 1;

  // case A layout
  std::vector<int> birth_times = {1, 10, 20};
  int death_step = 50;           ///< the first target is gone from this step on
  double target_speed = 10.0;

  // case B sensors
  int sensor_count = 4;
  double sensor_speed = 50.0;

  // filter
  double lambda_s = 1.0;
  double lambda_d = 0.05;
  double gamma_b = 1e-3;
  double tau_b = 1.0;
  double birth_velocity_std = 10.0;
  double usage_threshold = 0.9;
  bool birth_in_area = true;        ///< births only from measurements inside the area
  double clutter_volume = 0.0;   ///< 0 selects 2 pi sigma_s^2
  double gate_threshold = 1e-4;
  std::size_t max_hypotheses = 100;
  double existence_threshold = 1e-3;
  std::size_t max_tracks = 100;
  double association_threshold = 1e-2;
  double miss_r1 = 1.0;             ///< gamma of a track no sensor holds, centralized birth fold
  double consensus_miss_r1 = 0.0;   ///< the same between consensus neighbours; 0 selects gamma_b
  bool discount_prior = true;
  int consensus_iterations = 3;
  double consensus_discount = 0.0;  ///< 0 selects 1 / |V_i|
  std::string topology;             ///< path of a topology file; empty selects a ring

  // evaluation
  double ospa_c = 100.0;
  double ospa_p = 2.0;
  int ospa2_window = 10;
  int threads = 0;                  ///< 0 selects the hardware concurrency

  /// Throws ConfigError on a non-positive dimensional value or steps < 1.
  void validate() const;
};

/// Defaults of the given case (sigma_s 1000 for A, 500 for B).
[[nodiscard]] ScenarioConfig default_config(ScenarioCase c);

/// Applies "key = value" lines to `base`. Blank lines and '#' comments are
/// skipped. Throws ConfigError on an unknown key or a malformed value.
void apply_config(std::istream& in, ScenarioConfig& base);
void apply_config_file(const std::filesystem::path& path, ScenarioConfig& base);
/// Every field as "key = value", one per line, in declaration order.
void write_config(std::ostream& out, const ScenarioConfig& cfg);

struct TruthTarget {
  int id = 0;
  int birth_step = 1;  ///< first step the target exists
  int death_step = 0;  ///< first step it no longer exists; 0 means it survives the run
  std::vector<Vector> states;  ///< one per step from birth_step on
};

struct GroundTruth {
  int steps = 0;
  std::vector<TruthTarget> targets;

  /// (id, state) of every target alive at step k (1-based).
  [[nodiscard]] std::vector<std::pair<int, Vector>> at(int k) const;
  [[nodiscard]] std::size_t cardinality(int k) const;
};

[[nodiscard]] GroundTruth generate_truth(const ScenarioConfig& cfg, std::mt19937_64& rng);

/// Sensor positions per step: result[k - 1][s].
[[nodiscard]] std::vector<std::vector<Vector>> generate_sensor_paths(const ScenarioConfig& cfg, std::mt19937_64& rng);

/// Sensor models at one step.
[[nodiscard]] std::vector<SensorModel> sensor_models(const ScenarioConfig& cfg, const std::vector<Vector>& positions);

/// Per step, per sensor: detections with probability N(Hx; p_s, sigma_s^2 I)
/// and Poisson(lambda_fa) clutter drawn from N(p_s, sigma_s^2 I), shuffled.
using MeasurementFrame = std::vector<MeasurementSet>;
[[nodiscard]] std::vector<MeasurementFrame> generate_measurements(const GroundTruth& truth,
                                                                  const std::vector<std::vector<Vector>>& sensor_paths,
                                                                  const ScenarioConfig& cfg, std::mt19937_64& rng);

[[nodiscard]] TrackerConfig tracker_config(const ScenarioConfig& cfg);
[[nodiscard]] SensorGraph scenario_graph(const ScenarioConfig& cfg);

}  // namespace plmb
