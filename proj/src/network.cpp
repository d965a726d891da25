#include "plmb/network.hpp"

#include "plmb/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

namespace plmb {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
      ++i;
    }
    if (i > start) {
      out.push_back(line.substr(start, i - start));
    }
  }
  return out;
}

std::size_t parse_index(std::string_view field, std::size_t line_no) {
  std::size_t value = 0;
  const bool digits = !field.empty() && std::all_of(field.begin(), field.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (!digits || ec != std::errc() || ptr != field.data() + field.size()) {
    throw TopologyError("line " + std::to_string(line_no) + ": expected a non-negative integer, got '" +
                        std::string(field) + "'");
  }
  return value;
}

MissedDetectionModel miss_model(const TrackerConfig& cfg, std::vector<SensorModel> sensors, double r1) {
  MissedDetectionModel m;
  m.r0 = cfg.miss_r0;
  m.r1 = r1;
  m.detection_failure = [sensors = std::move(sensors)](const Vector& x) {
    double df = 1.0;
    for (const auto& s : sensors) {
      df *= s.detection_failure(x);
    }
    return df;
  };
  return m;
}

// Births a node contributes at `time` from its previous scan, already moved
// one step forward.
LmbDensity scan_births(const TrackerConfig& cfg, const SensorModel& sensor, const ScanMemory& mem,
                       std::uint32_t time, std::uint32_t offset) {
  if (cfg.birth.mode != BirthMode::measurement_driven || mem.z.empty()) {
    return {};
  }
  const LmbDensity born = adaptive_birth(mem.z, mem.usage, cfg.birth, sensor, time, offset);
  return predict(born, cfg.motion, {});
}

LmbDensity fixed_births(const TrackerConfig& cfg, std::uint32_t time) {
  return cfg.birth.mode == BirthMode::fixed ? fixed_birth(cfg.birth, time) : LmbDensity{};
}

void check_inputs(std::size_t measurements, std::size_t sensors) {
  if (measurements != sensors) {
    throw ArgumentError("got " + std::to_string(measurements) + " measurement sets for " + std::to_string(sensors) +
                        " sensors");
  }
  if (sensors == 0 || sensors > kMaxNetworkNodes) {
    throw ArgumentError("a network needs between 1 and " + std::to_string(kMaxNetworkNodes) + " sensors");
  }
}

void observe(const TrackerConfig& cfg, const char* stage, const LmbDensity& d) {
  if (cfg.observer) {
    cfg.observer(stage, d);
  }
}

std::uint32_t sensor_band(std::size_t i) { return static_cast<std::uint32_t>(i + 1) * kSensorLabelBand; }

}  // namespace

SensorGraph::SensorGraph(std::size_t nodes, const std::vector<Edge>& edges) {
  if (nodes == 0) {
    throw TopologyError("a sensor graph needs at least one node");
  }
  adjacency_.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    adjacency_[i].push_back(i);
  }
  std::set<Edge> seen;
  for (auto [i, j] : edges) {
    if (i >= nodes || j >= nodes) {
      throw TopologyError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") is outside 0.." +
                          std::to_string(nodes - 1));
    }
    if (i == j) {
      throw TopologyError("self-loop on node " + std::to_string(i) + "; self-loops are implicit");
    }
    if (!seen.insert(std::minmax(i, j)).second) {
      throw TopologyError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") is repeated");
    }
    adjacency_[i].push_back(j);
    adjacency_[j].push_back(i);
  }
  for (auto& nb : adjacency_) {
    std::sort(nb.begin(), nb.end());
  }
}

SensorGraph SensorGraph::ring(std::size_t n) {
  std::vector<Edge> e;
  if (n == 2) {
    e.emplace_back(0, 1);
  } else if (n > 2) {
    for (std::size_t i = 0; i < n; ++i) {
      e.emplace_back(i, (i + 1) % n);
    }
  }
  return SensorGraph(n, e);
}

SensorGraph SensorGraph::line(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 1; i < n; ++i) {
    e.emplace_back(i - 1, i);
  }
  return SensorGraph(n, e);
}

SensorGraph SensorGraph::complete(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      e.emplace_back(i, j);
    }
  }
  return SensorGraph(n, e);
}

SensorGraph SensorGraph::star(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 1; i < n; ++i) {
    e.emplace_back(0, i);
  }
  return SensorGraph(n, e);
}

SensorGraph SensorGraph::parse(std::istream& in) {
  std::optional<std::size_t> nodes;
  std::vector<Edge> edges;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') {
      continue;
    }
    if (!nodes) {
      if (fields.size() != 1) {
        throw TopologyError("line " + std::to_string(line_no) + ": the header holds only the node count");
      }
      nodes = parse_index(fields[0], line_no);
      continue;
    }
    if (fields.size() != 2) {
      throw TopologyError("line " + std::to_string(line_no) + ": an edge line holds exactly two node indices");
    }
    edges.emplace_back(parse_index(fields[0], line_no), parse_index(fields[1], line_no));
  }
  if (!nodes) {
    throw TopologyError("topology file has no node count header");
  }
  return SensorGraph(*nodes, edges);
}

SensorGraph SensorGraph::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("cannot open topology file " + path.string());
  }
  return parse(in);
}

void SensorGraph::write(std::ostream& out) const {
  out << size() << '\n';
  for (const auto& [i, j] : edges()) {
    out << i << ' ' << j << '\n';
  }
}

void SensorGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw FileError("cannot write topology file " + path.string());
  }
  write(out);
}

std::vector<SensorGraph::Edge> SensorGraph::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j : adjacency_[i]) {
      if (j > i) {
        out.emplace_back(i, j);
      }
    }
  }
  return out;
}

bool SensorGraph::has_edge(std::size_t i, std::size_t j) const {
  if (i == j || i >= size() || j >= size()) {
    return false;
  }
  return std::binary_search(adjacency_[i].begin(), adjacency_[i].end(), j);
}

bool SensorGraph::is_connected() const {
  std::vector<bool> seen(size(), false);
  std::queue<std::size_t> todo;
  todo.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!todo.empty()) {
    const std::size_t i = todo.front();
    todo.pop();
    for (std::size_t j : adjacency_[i]) {
      if (!seen[j]) {
        seen[j] = true;
        ++count;
        todo.push(j);
      }
    }
  }
  return count == size();
}

Matrix metropolis_weights(const SensorGraph& g) {
  if (!g.is_connected()) {
    throw TopologyError("Metropolis weights need a connected graph");
  }
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix w = Matrix::Zero(n, n);
  for (const auto& [i, j] : g.edges()) {
    const double deg = static_cast<double>(std::max(g.neighbors(i).size(), g.neighbors(j).size()));
    const double v = 1.0 / (1.0 + deg);
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = 1.0 - w.row(i).sum();
  }
  return w;
}

void ConsensusConfig::validate() const {
  if (iterations < 1) {
    throw ConfigError("consensus needs at least one iteration");
  }
  if (discount && !(*discount > 0.0 && *discount <= 1.0)) {
    throw ConfigError("consensus discount must lie in (0, 1]");
  }
  if (miss_r1 && !(*miss_r1 > 0.0 && *miss_r1 <= 1.0)) {
    throw ConfigError("consensus miss_r1 must lie in (0, 1]");
  }
}

void TrackerConfig::validate() const {
  motion.validate();
  birth.validate();
  consensus.validate();
  if (!(existence_threshold >= 0.0 && existence_threshold < 1.0)) {
    throw ConfigError("existence threshold must lie in [0, 1)");
  }
  if (max_tracks == 0) {
    throw ConfigError("max_tracks must be positive");
  }
  if (!(association_threshold > 0.0 && association_threshold < 1.0)) {
    throw ConfigError("association threshold must lie in (0, 1)");
  }
  if (!(miss_r0 > 0.0 && miss_r0 <= 1.0 && miss_r1 > 0.0 && miss_r1 <= 1.0) || std::max(miss_r0, miss_r1) != 1.0) {
    throw ConfigError("missed-detection r0, r1 must lie in (0, 1] with maximum 1");
  }
}

const LmbDensity& centralized_step(CentralizedState& state, const std::vector<MeasurementSet>& z,
                                   const std::vector<SensorModel>& sensors, const TrackerConfig& cfg,
                                   std::uint32_t time) {
  check_inputs(z.size(), sensors.size());
  const std::size_t n = sensors.size();
  state.memory.resize(n);
  const LmbDensity predicted = predict(state.density, cfg.motion, fixed_births(cfg, time));
  observe(cfg, "predict", predicted);
  const LmbDensity prior = cfg.discount_prior && n > 1 ? discount(predicted, 1.0 / static_cast<double>(n)) : predicted;

  std::vector<LmbDensity> shared(n);
  std::vector<LmbDensity> born(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LmbDensity births = scan_births(cfg, sensors[i], state.memory[i], time, sensor_band(i));
    UpdateResult res = update_direct(merge_disjoint(prior, births), z[i], sensors[i], cfg.filter);
    observe(cfg, "update", res.posterior);
    state.memory[i] = {z[i], std::move(res.usage)};
    std::vector<BernoulliTrack> s;
    std::vector<BernoulliTrack> b;
    for (const auto& t : res.posterior) {
      (predicted.contains(t.label) ? s : b).push_back(t);
    }
    shared[i] = LmbDensity(std::move(s));
    born[i] = LmbDensity(std::move(b));
  }

  LmbDensity fused = fuse_lmb_shared_labels(shared, FusionWeightVector::independent(n), cfg.filter.reduction);
  LmbDensity newborn = born[0];
  for (std::size_t i = 1; i < n; ++i) {
    MatchConfig mc;
    mc.association_threshold = cfg.association_threshold;
    mc.missed_by_a = miss_model(cfg, {sensors.begin(), sensors.begin() + static_cast<std::ptrdiff_t>(i)}, cfg.miss_r1);
    mc.missed_by_b = miss_model(cfg, {sensors[i]}, cfg.miss_r1);
    mc.labels = LabelPolicy::keep_left;
    mc.reduction = cfg.filter.reduction;
    newborn = match_and_fuse(newborn, born[i], mc, state.issuer);
  }
  state.density = prune_tracks(merge_disjoint(fused, newborn), cfg.existence_threshold, cfg.max_tracks);
  observe(cfg, "fuse", state.density);
  return state.density;
}

DistributedState::DistributedState(std::size_t n) : nodes(n), memory(n) {
  issuers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    issuers.emplace_back(static_cast<std::uint32_t>(i + 1) * kIssuerLabelBand);
  }
}

LmbDensity consensus_pair(const LmbDensity& a, const LmbDensity& b, double wa, double wb,
                          const SensorModel& sensor_a, const SensorModel& sensor_b, const TrackerConfig& cfg,
                          LabelIssuer& issuer) {
  std::vector<BernoulliTrack> fused;
  std::vector<BernoulliTrack> rest_a;
  std::vector<BernoulliTrack> rest_b;
  for (const auto& t : a) {
    if (const auto* other = b.find(t.label)) {
      fused.push_back(fuse_tracks_detailed(t, *other, wa, wb, cfg.filter.reduction).track);
    } else {
      rest_a.push_back(t);
    }
  }
  for (const auto& t : b) {
    if (!a.contains(t.label)) {
      rest_b.push_back(t);
    }
  }
  MatchConfig mc;
  mc.omega_a = wa;
  mc.omega_b = wb;
  mc.association_threshold = cfg.association_threshold;
  const double r1 = cfg.consensus.miss_r1.value_or(cfg.miss_r1);
  mc.missed_by_a = miss_model(cfg, {sensor_a}, r1);
  mc.missed_by_b = miss_model(cfg, {sensor_b}, r1);
  mc.labels = LabelPolicy::smallest;
  mc.reduction = cfg.filter.reduction;
  const LmbDensity matched = match_and_fuse(LmbDensity(std::move(rest_a)), LmbDensity(std::move(rest_b)), mc, issuer);
  return merge_disjoint(LmbDensity(std::move(fused)), matched);
}

std::vector<LmbDensity> consensus_sweep(const std::vector<LmbDensity>& local, const SensorGraph& g, const Matrix& w,
                                        const std::vector<SensorModel>& sensors, const TrackerConfig& cfg,
                                        std::vector<LabelIssuer>& issuers) {
  const std::size_t n = g.size();
  if (local.size() != n || sensors.size() != n || issuers.size() != n) {
    throw ArgumentError("consensus sweep inputs disagree on the number of nodes");
  }
  std::vector<LmbDensity> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    LmbDensity acc = local[i];
    bool first = true;
    for (std::size_t j : g.neighbors(i)) {
      if (j == i) {
        continue;
      }
      const double wa = first ? w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) : 1.0;
      const double wb = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      acc = consensus_pair(acc, local[j], wa, wb, sensors[i], sensors[j], cfg, issuers[i]);
      first = false;
    }
    next[i] = prune_tracks(acc, cfg.existence_threshold, cfg.max_tracks);
    observe(cfg, "consensus", next[i]);
  }
  return next;
}

const std::vector<LmbDensity>& distributed_step(DistributedState& state, const std::vector<MeasurementSet>& z,
                                                const std::vector<SensorModel>& sensors, const SensorGraph& g,
                                                const TrackerConfig& cfg, std::uint32_t time) {
  check_inputs(z.size(), sensors.size());
  const std::size_t n = sensors.size();
  if (g.size() != n || state.nodes.size() != n) {
    throw ArgumentError("graph, state and sensors disagree on the number of nodes");
  }
  cfg.consensus.validate();
  const Matrix w = metropolis_weights(g);

  std::vector<LmbDensity> local(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double omega = cfg.consensus.discount.value_or(1.0 / static_cast<double>(g.neighbors(i).size()));
    const LmbDensity predicted = predict(state.nodes[i], cfg.motion, fixed_births(cfg, time), omega);
    observe(cfg, "predict", predicted);
    const LmbDensity births = scan_births(cfg, sensors[i], state.memory[i], time, sensor_band(i));
    UpdateResult res = update_direct(merge_disjoint(predicted, births), z[i], sensors[i], cfg.filter);
    observe(cfg, "update", res.posterior);
    state.memory[i] = {z[i], std::move(res.usage)};
    local[i] = std::move(res.posterior);
  }

  for (std::size_t sweep = 0; sweep < cfg.consensus.iterations; ++sweep) {
    local = consensus_sweep(local, g, w, sensors, cfg, state.issuers);
  }
  state.nodes = std::move(local);
  return state.nodes;
}

}  // namespace plmb
