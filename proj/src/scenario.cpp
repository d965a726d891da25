#include "plmb/scenario.hpp"

#include "plmb/errors.hpp"

#include <algorithm>
#include <charconv>
#include <concepts>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace plmb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) {
    bad_value(key, value);
  }
  return out;
}

void parse_into(const std::string& key, const std::string& v, double& out) { out = parse_number<double>(key, v); }
void parse_into(const std::string& key, const std::string& v, int& out) { out = parse_number<int>(key, v); }
template <std::unsigned_integral T>
void parse_into(const std::string& key, const std::string& v, T& out) {
  out = parse_number<T>(key, v);
}
void parse_into(const std::string&, const std::string& v, std::string& out) { out = v; }
void parse_into(const std::string& key, const std::string& v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
  } else if (v == "false" || v == "0") {
    out = false;
  } else {
    bad_value(key, v);
  }
}
void parse_into(const std::string& key, const std::string& v, std::vector<int>& out) {
  out.clear();
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_number<int>(key, trim(item)));
  }
}
void parse_into(const std::string&, const std::string& v, ScenarioCase& out) { out = parse_case(v); }

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string format(int v) { return std::to_string(v); }
template <std::unsigned_integral T>
std::string format(T v) {
  return std::to_string(v);
}
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(ScenarioCase v) { return to_string(v); }
std::string format(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += (i ? "," : "") + std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <class T>
Field field(std::string key, T ScenarioConfig::*member) {
  return {key, [key, member](ScenarioConfig& c, const std::string& v) { parse_into(key, v, c.*member); },
          [member](const ScenarioConfig& c) { return format(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      field("case", &ScenarioConfig::case_id),
      field("area_min", &ScenarioConfig::area_min),
      field("area_max", &ScenarioConfig::area_max),
      field("steps", &ScenarioConfig::steps),
      field("dt", &ScenarioConfig::dt),
      field("sigma_r", &ScenarioConfig::sigma_r),
      field("lambda_fa", &ScenarioConfig::lambda_fa),
      field("sigma_s", &ScenarioConfig::sigma_s),
      field("sigma_q", &ScenarioConfig::sigma_q),
      field("truth_sigma_q", &ScenarioConfig::truth_sigma_q),
      field("lambda_b", &ScenarioConfig::lambda_b),
      field("sigma_v", &ScenarioConfig::sigma_v),
      field("birth_cutoff", &ScenarioConfig::birth_cutoff),
      field("mc_runs", &ScenarioConfig::mc_runs),
      field("seed", &ScenarioConfig::seed),
      field("birth_times", &ScenarioConfig::birth_times),
      field("death_step", &ScenarioConfig::death_step),
      field("target_speed", &ScenarioConfig::target_speed),
      field("sensor_count", &ScenarioConfig::sensor_count),
      field("sensor_speed", &ScenarioConfig::sensor_speed),
      field("lambda_s", &ScenarioConfig::lambda_s),
      field("lambda_d", &ScenarioConfig::lambda_d),
      field("gamma_b", &ScenarioConfig::gamma_b),
      field("tau_b", &ScenarioConfig::tau_b),
      field("birth_velocity_std", &ScenarioConfig::birth_velocity_std),
      field("usage_threshold", &ScenarioConfig::usage_threshold),
      field("birth_in_area", &ScenarioConfig::birth_in_area),
      field("clutter_volume", &ScenarioConfig::clutter_volume),
      field("gate_threshold", &ScenarioConfig::gate_threshold),
      field("max_hypotheses", &ScenarioConfig::max_hypotheses),
      field("existence_threshold", &ScenarioConfig::existence_threshold),
      field("max_tracks", &ScenarioConfig::max_tracks),
      field("association_threshold", &ScenarioConfig::association_threshold),
      field("miss_r1", &ScenarioConfig::miss_r1),
      field("consensus_miss_r1", &ScenarioConfig::consensus_miss_r1),
      field("discount_prior", &ScenarioConfig::discount_prior),
      field("consensus_iterations", &ScenarioConfig::consensus_iterations),
      field("consensus_discount", &ScenarioConfig::consensus_discount),
      field("topology", &ScenarioConfig::topology),
      field("ospa_c", &ScenarioConfig::ospa_c),
      field("ospa_p", &ScenarioConfig::ospa_p),
      field("ospa2_window", &ScenarioConfig::ospa2_window),
      field("threads", &ScenarioConfig::threads),
  };
  return all;
}

Vector xy(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

// x_{k+1} = F x_k + G a with a ~ N(0, sigma^2 I2), G = [dt^2/2; dt] per axis.
Vector propagate(const Vector& x, double dt, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector out(4);
  const double ax = sigma > 0.0 ? sigma * n(rng) : 0.0;
  const double ay = sigma > 0.0 ? sigma * n(rng) : 0.0;
  out(0) = x(0) + dt * x(1) + 0.5 * dt * dt * ax;
  out(1) = x(1) + dt * ax;
  out(2) = x(2) + dt * x(3) + 0.5 * dt * dt * ay;
  out(3) = x(3) + dt * ay;
  return out;
}

bool inside(const ScenarioConfig& cfg, double x, double y) {
  return x >= cfg.area_min && x <= cfg.area_max && y >= cfg.area_min && y <= cfg.area_max;
}

}  // namespace

std::string to_string(ScenarioCase c) { return c == ScenarioCase::A ? "A" : "B"; }

ScenarioCase parse_case(const std::string& s) {
  if (s == "A" || s == "a") {
    return ScenarioCase::A;
  }
  if (s == "B" || s == "b") {
    return ScenarioCase::B;
  }
  throw ConfigError("unknown case '" + s + "', expected A or B");
}

void ScenarioConfig::validate() const {
  const auto need = [](bool ok, const char* what) {
    if (!ok) {
      throw ConfigError(what);
    }
  };
  need(steps >= 1, "steps must be at least 1");
  need(area_max > area_min, "area_max must exceed area_min");
  need(dt > 0.0 && sigma_r > 0.0 && sigma_s > 0.0 && sigma_q > 0.0, "dt, sigma_r, sigma_s and sigma_q must be positive");
  need(truth_sigma_q >= 0.0 && lambda_fa >= 0.0 && lambda_b >= 0.0 && sigma_v >= 0.0,
       "truth_sigma_q, lambda_fa, lambda_b and sigma_v must be non-negative");
  need(mc_runs >= 1, "mc_runs must be at least 1");
  need(sensor_count >= 1 && static_cast<std::size_t>(sensor_count) <= kMaxNetworkNodes, "sensor_count out of range");
  need(case_id == ScenarioCase::B || sensor_count <= 4, "case A has at most 4 sensors");
  need(target_speed >= 0.0 && sensor_speed >= 0.0, "speeds must be non-negative");
  need(birth_velocity_std > 0.0, "birth_velocity_std must be positive");
  need(clutter_volume >= 0.0, "clutter_volume must be non-negative");
  need(ospa_c > 0.0 && ospa_p >= 1.0, "OSPA needs c > 0 and p >= 1");
  need(ospa2_window >= 1, "ospa2_window must be at least 1");
  need(threads >= 0, "threads must be non-negative");
  need(consensus_iterations >= 1, "consensus_iterations must be at least 1");
  need(consensus_discount >= 0.0 && consensus_discount <= 1.0, "consensus_discount must lie in [0, 1]");
  need(miss_r1 > 0.0 && miss_r1 <= 1.0, "miss_r1 must lie in (0, 1]");
  need(consensus_miss_r1 >= 0.0 && consensus_miss_r1 <= 1.0, "consensus_miss_r1 must lie in [0, 1]");
  need(max_hypotheses >= 1 && max_tracks >= 1, "max_hypotheses and max_tracks must be positive");
}

ScenarioConfig default_config(ScenarioCase c) {
  ScenarioConfig cfg;
  cfg.case_id = c;
  if (c == ScenarioCase::B) {
    cfg.sigma_s = 500.0;
  }
  return cfg;
}

void apply_config(std::istream& in, ScenarioConfig& base) {
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& all = fields();
    const auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return f.key == key; });
    if (it == all.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->set(base, value);
  }
}

void apply_config_file(const std::filesystem::path& path, ScenarioConfig& base) {
  std::ifstream in(path);
  if (!in) {
    throw FileError("cannot open config file " + path.string());
  }
  apply_config(in, base);
}

void write_config(std::ostream& out, const ScenarioConfig& cfg) {
  for (const auto& f : fields()) {
    out << f.key << " = " << f.get(cfg) << '\n';
  }
}

std::vector<std::pair<int, Vector>> GroundTruth::at(int k) const {
  std::vector<std::pair<int, Vector>> out;
  for (const auto& t : targets) {
    if (k >= t.birth_step && (t.death_step == 0 || k < t.death_step)) {
      out.emplace_back(t.id, t.states[static_cast<std::size_t>(k - t.birth_step)]);
    }
  }
  return out;
}

std::size_t GroundTruth::cardinality(int k) const { return at(k).size(); }

GroundTruth generate_truth(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  GroundTruth truth;
  truth.steps = cfg.steps;
  const auto run = [&](TruthTarget t, Vector x) {
    for (int k = t.birth_step; k <= cfg.steps && (t.death_step == 0 || k < t.death_step); ++k) {
      if (k > t.birth_step) {
        x = propagate(x, cfg.dt, cfg.truth_sigma_q, rng);
      }
      if (cfg.case_id == ScenarioCase::B && !inside(cfg, x(0), x(2))) {
        t.death_step = k;
        break;
      }
      t.states.push_back(x);
    }
    if (!t.states.empty()) {
      truth.targets.push_back(std::move(t));
    }
  };

  if (cfg.case_id == ScenarioCase::A) {
    const std::vector<Vector> origins = {xy(800.0, 500.0), xy(-800.0, 500.0), xy(0.0, -800.0)};
    for (std::size_t i = 0; i < cfg.birth_times.size(); ++i) {
      const Vector& p = origins[i % origins.size()];
      const Vector heading = -p / p.norm();
      Vector x(4);
      x << p(0), cfg.target_speed * heading(0), p(1), cfg.target_speed * heading(1);
      TruthTarget t;
      t.id = static_cast<int>(i);
      t.birth_step = cfg.birth_times[i];
      t.death_step = i == 0 && cfg.death_step > 0 ? cfg.death_step : 0;
      run(t, x);
    }
    return truth;
  }

  std::poisson_distribution<int> births(cfg.lambda_b);
  std::uniform_real_distribution<double> pos(cfg.area_min, cfg.area_max);
  std::normal_distribution<double> vel(0.0, cfg.sigma_v);
  int next_id = 0;
  for (int k = 1; k <= std::min(cfg.birth_cutoff, cfg.steps); ++k) {
    const int n = cfg.lambda_b > 0.0 ? births(rng) : 0;
    for (int j = 0; j < n; ++j) {
      Vector x(4);
      x(0) = pos(rng);
      x(2) = pos(rng);
      x(1) = vel(rng);
      x(3) = vel(rng);
      TruthTarget t;
      t.id = next_id++;
      t.birth_step = k;
      run(t, x);
    }
  }
  return truth;
}

std::vector<std::vector<Vector>> generate_sensor_paths(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.sensor_count);
  std::vector<std::vector<Vector>> paths(static_cast<std::size_t>(cfg.steps));
  if (cfg.case_id == ScenarioCase::A) {
    const std::vector<Vector> corners = {xy(-1000.0, -1000.0), xy(-1000.0, 1000.0), xy(1000.0, -1000.0),
                                         xy(1000.0, 1000.0)};
    for (auto& step : paths) {
      step.assign(corners.begin(), corners.begin() + static_cast<std::ptrdiff_t>(n));
    }
    return paths;
  }
  std::uniform_real_distribution<double> pos(cfg.area_min, cfg.area_max);
  std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
  std::bernoulli_distribution turn_left(0.5);
  std::vector<Vector> p(n);
  std::vector<Vector> v(n);
  for (std::size_t s = 0; s < n; ++s) {
    p[s] = xy(pos(rng), pos(rng));
    const double h = heading(rng);
    v[s] = xy(cfg.sensor_speed * std::cos(h), cfg.sensor_speed * std::sin(h));
  }
  const auto rotate = [](const Vector& u, double sign) { return xy(-sign * u(1), sign * u(0)); };
  for (int k = 0; k < cfg.steps; ++k) {
    paths[static_cast<std::size_t>(k)] = p;
    for (std::size_t s = 0; s < n; ++s) {
      Vector next = p[s] + cfg.dt * v[s];
      if (!inside(cfg, next(0), next(1))) {
        const double first = turn_left(rng) ? 1.0 : -1.0;
        bool turned = false;
        for (double sign : {first, -first}) {
          const Vector u = rotate(v[s], sign);
          const Vector cand = p[s] + cfg.dt * u;
          if (inside(cfg, cand(0), cand(1))) {
            v[s] = u;
            next = cand;
            turned = true;
            break;
          }
        }
        if (!turned) {
          v[s] = -v[s];
          next = p[s] + cfg.dt * v[s];
        }
        next(0) = std::clamp(next(0), cfg.area_min, cfg.area_max);
        next(1) = std::clamp(next(1), cfg.area_min, cfg.area_max);
      }
      p[s] = next;
    }
  }
  return paths;
}

std::vector<SensorModel> sensor_models(const ScenarioConfig& cfg, const std::vector<Vector>& positions) {
  std::vector<SensorModel> out;
  out.reserve(positions.size());
  for (std::size_t s = 0; s < positions.size(); ++s) {
    out.push_back(SensorModel::position_sensor(static_cast<int>(s), positions[s], cfg.sigma_r, cfg.sigma_s,
                                               cfg.lambda_fa, cfg.clutter_volume));
  }
  return out;
}

std::vector<MeasurementFrame> generate_measurements(const GroundTruth& truth,
                                                    const std::vector<std::vector<Vector>>& sensor_paths,
                                                    const ScenarioConfig& cfg, std::mt19937_64& rng) {
  if (sensor_paths.size() < static_cast<std::size_t>(truth.steps)) {
    throw ArgumentError("sensor paths are shorter than the truth");
  }
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::poisson_distribution<int> clutter(cfg.lambda_fa > 0.0 ? cfg.lambda_fa : 1.0);
  std::vector<MeasurementFrame> frames(static_cast<std::size_t>(truth.steps));
  for (int k = 1; k <= truth.steps; ++k) {
    const auto alive = truth.at(k);
    const auto& sensors = sensor_paths[static_cast<std::size_t>(k - 1)];
    auto& frame = frames[static_cast<std::size_t>(k - 1)];
    frame.resize(sensors.size());
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      const Vector& ps = sensors[s];
      MeasurementSet& z = frame[s];
      for (const auto& [id, x] : alive) {
        const Vector hx = xy(x(0), x(2));
        const double pd = std::exp(-0.5 * (hx - ps).squaredNorm() / (cfg.sigma_s * cfg.sigma_s));
        if (u(rng) < pd) {
          z.push_back(xy(hx(0) + cfg.sigma_r * n(rng), hx(1) + cfg.sigma_r * n(rng)));
        }
      }
      const int count = cfg.lambda_fa > 0.0 ? clutter(rng) : 0;
      for (int c = 0; c < count; ++c) {
        z.push_back(xy(ps(0) + cfg.sigma_s * n(rng), ps(1) + cfg.sigma_s * n(rng)));
      }
      std::shuffle(z.begin(), z.end(), rng);
    }
  }
  return frames;
}

TrackerConfig tracker_config(const ScenarioConfig& cfg) {
  cfg.validate();
  TrackerConfig t;
  t.motion = MotionModel::constant_velocity(cfg.dt, cfg.sigma_q, cfg.lambda_s, cfg.lambda_d);
  t.birth.gamma_b = cfg.gamma_b;
  t.birth.tau_b = cfg.tau_b;
  t.birth.mode = BirthMode::measurement_driven;
  t.birth.usage_threshold = cfg.usage_threshold;
  if (cfg.birth_in_area) {
    t.birth.region_min = xy(cfg.area_min, cfg.area_min);
    t.birth.region_max = xy(cfg.area_max, cfg.area_max);
  }
  const double v2 = cfg.birth_velocity_std * cfg.birth_velocity_std;
  t.birth.velocity_prior_cov = Matrix::Zero(4, 4);
  t.birth.velocity_prior_cov(1, 1) = v2;
  t.birth.velocity_prior_cov(3, 3) = v2;
  t.filter.max_hypotheses = cfg.max_hypotheses;
  t.filter.gate_threshold = cfg.gate_threshold;
  t.existence_threshold = cfg.existence_threshold;
  t.max_tracks = cfg.max_tracks;
  t.association_threshold = cfg.association_threshold;
  t.miss_r1 = cfg.miss_r1;
  t.consensus.miss_r1 = cfg.consensus_miss_r1 > 0.0 ? cfg.consensus_miss_r1 : cfg.gamma_b;
  t.discount_prior = cfg.discount_prior;
  t.consensus.iterations = static_cast<std::size_t>(cfg.consensus_iterations);
  if (cfg.consensus_discount > 0.0) {
    t.consensus.discount = cfg.consensus_discount;
  }
  t.validate();
  return t;
}

SensorGraph scenario_graph(const ScenarioConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.sensor_count);
  if (cfg.topology.empty()) {
    return SensorGraph::ring(n);
  }
  SensorGraph g = SensorGraph::read(cfg.topology);
  if (g.size() != n) {
    throw ConfigError("topology has " + std::to_string(g.size()) + " nodes for " + std::to_string(n) + " sensors");
  }
  return g;
}

}  // namespace plmb
