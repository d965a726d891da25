#pragma once

// Sensor networks: topology, Metropolis consensus weights and the
// centralized and distributed multi-sensor filter steps.

#include "plmb/filter.hpp"
#include "plmb/fusion.hpp"
#include "plmb/labeled_ufs.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace plmb {

/// Undirected graph over nodes 0..n-1. Self-loops are implicit: every
/// neighbourhood contains its own node.
class SensorGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  /// Throws TopologyError on n == 0, an out-of-range endpoint, a self-loop
  /// or a repeated edge.
  explicit SensorGraph(std::size_t nodes, const std::vector<Edge>& edges = {});

  static SensorGraph ring(std::size_t n);
  static SensorGraph line(std::size_t n);
  static SensorGraph complete(std::size_t n);
  /// Node 0 is the hub.
  static SensorGraph star(std::size_t n);

  /// Reads the topology text format (docs/topology_format.md).
  static SensorGraph parse(std::istream& in);
  static SensorGraph read(const std::filesystem::path& path);
  /// Writes the canonical form: the node count, then "i j" with i < j in ascending order.
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  [[nodiscard]] std::size_t size() const noexcept { return adjacency_.size(); }
  /// Sorted, each edge once with i < j.
  [[nodiscard]] std::vector<Edge> edges() const;
  /// V_i: sorted, includes i.
  [[nodiscard]] const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_.at(i); }
  [[nodiscard]] bool has_edge(std::size_t i, std::size_t j) const;
  [[nodiscard]] bool is_connected() const;

 private:
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// w_ij = 1 / (1 + max(|V_i|, |V_j|)) on edges, w_ii = 1 - sum_j w_ij.
/// Throws TopologyError if the graph is disconnected.
[[nodiscard]] Matrix metropolis_weights(const SensorGraph& g);

enum class FusionScheme { centralized, distributed };

struct ConsensusConfig {
  std::size_t iterations = 3;
  /// Prediction discount; unset selects 1 / |V_i| at node i.
  std::optional<double> discount;
  /// Existence a node assigns to a track it does not hold; unset selects
  /// TrackerConfig::miss_r1.
  std::optional<double> miss_r1;
  FusionScheme mode = FusionScheme::distributed;

  void validate() const;
};

struct TrackerConfig {
  MotionModel motion = MotionModel::constant_velocity(1.0, 5.0);
  BirthModel birth;
  FilterParams filter;
  double existence_threshold = 1e-3;
  std::size_t max_tracks = 100;
  double association_threshold = 1e-2;
  double miss_r0 = 1.0;
  double miss_r1 = 1.0;
  /// Centralized: every sensor updates the prior raised to 1/N so that the
  /// unit-weight product of the local posteriors counts the prior once.
  bool discount_prior = true;
  ConsensusConfig consensus;
  /// Called with every intermediate density: "predict", "update", "fuse", "consensus".
  std::function<void(const char* stage, const LmbDensity&)> observer;

  void validate() const;
};

/// Previous scan of one sensor, kept for measurement-driven births.
struct ScanMemory {
  MeasurementSet z;
  std::vector<double> usage;
};

inline constexpr std::uint32_t kSensorLabelBand = 100000;
inline constexpr std::uint32_t kIssuerLabelBand = 10000000;
/// Sensor and issuer label bands leave room for this many nodes.
inline constexpr std::size_t kMaxNetworkNodes = 99;

struct CentralizedState {
  LmbDensity density;
  std::vector<ScanMemory> memory;
  LabelIssuer issuer{kIssuerLabelBand};
};

/// One predict at the centre, independent updates at each sensor, label-wise
/// fusion with unit weights. Newborn tracks of different sensors are matched
/// with match_and_fuse. The fused posterior replaces state.density.
/// Throws ArgumentError if z and sensors differ in size or exceed kMaxNetworkNodes.
const LmbDensity& centralized_step(CentralizedState& state, const std::vector<MeasurementSet>& z,
                                   const std::vector<SensorModel>& sensors, const TrackerConfig& cfg,
                                   std::uint32_t time);

struct DistributedState {
  std::vector<LmbDensity> nodes;
  std::vector<ScanMemory> memory;
  std::vector<LabelIssuer> issuers;

  explicit DistributedState(std::size_t n);
};

/// Discounted prediction and a local update at every node, then
/// cfg.consensus.iterations synchronous sweeps of Metropolis-weighted fusion
/// with the neighbours' previous-sweep densities.
const std::vector<LmbDensity>& distributed_step(DistributedState& state, const std::vector<MeasurementSet>& z,
                                                const std::vector<SensorModel>& sensors, const SensorGraph& g,
                                                const TrackerConfig& cfg, std::uint32_t time);

/// One consensus fusion of node densities a and b with weights (wa, wb):
/// shared labels fuse directly, the rest go through match_and_fuse keeping
/// the smaller label of each matched pair.
[[nodiscard]] LmbDensity consensus_pair(const LmbDensity& a, const LmbDensity& b, double wa, double wb,
                                        const SensorModel& sensor_a, const SensorModel& sensor_b,
                                        const TrackerConfig& cfg, LabelIssuer& issuer);

/// One synchronous sweep: node i folds its neighbours' densities into its own,
/// starting with weights (w_ii, w_ij) and continuing with (1, w_ik). All
/// nodes read `local` and the results are returned together.
[[nodiscard]] std::vector<LmbDensity> consensus_sweep(const std::vector<LmbDensity>& local, const SensorGraph& g,
                                                      const Matrix& w, const std::vector<SensorModel>& sensors,
                                                      const TrackerConfig& cfg, std::vector<LabelIssuer>& issuers);

}  // namespace plmb
