#include "plmb/filter.hpp"

#include "plmb/assignment.hpp"
#include "plmb/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>

namespace plmb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
const double kLogTiny = std::log(std::numeric_limits<double>::min());

bool is_psd(const Matrix& m) {
  if (m.rows() != m.cols() || !m.allFinite()) {
    return false;
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff());
}

// Per-track association terms: log eta and the normalised posterior mixture
// for a miss (slot 0) and for each measurement (slot j, 1-based).
struct TrackTerms {
  std::vector<double> log_eta;
  std::vector<std::shared_ptr<const MaxMixture>> f;
};

struct WeightedComponent {
  double log_weight;
  Vector mean;
  Matrix cov;
};

void store_slot(TrackTerms& terms, std::size_t slot, std::vector<WeightedComponent>& comps) {
  if (comps.empty()) {
    return;
  }
  double best = -kInf;
  for (const auto& c : comps) {
    best = std::max(best, c.log_weight);
  }
  if (best == -kInf) {
    return;
  }
  std::vector<GaussianComponent> out;
  out.reserve(comps.size());
  for (auto& c : comps) {
    const double w = std::exp(c.log_weight - best);
    if (w >= std::numeric_limits<double>::min()) {
      out.emplace_back(w, std::move(c.mean), std::move(c.cov));
    }
  }
  terms.log_eta[slot] = best;
  terms.f[slot] = std::make_shared<const MaxMixture>(std::move(out));
}

TrackTerms track_terms(const BernoulliTrack& track, const MeasurementSet& z, const SensorModel& sensor,
                       const std::vector<double>& log_kappa, const FilterParams& params) {
  const std::size_t m = z.size();
  TrackTerms terms;
  terms.log_eta.assign(m + 1, -kInf);
  terms.f.assign(m + 1, nullptr);

  std::vector<WeightedComponent> miss;
  for (const auto& c : track.f.components()) {
    const double df = sensor.detection_failure(c.mean());
    if (df > 0.0) {
      miss.push_back({std::log(c.weight()) + std::log(df), c.mean(), c.cov()});
    }
  }
  store_slot(terms, 0, miss);
  if (m == 0) {
    return terms;
  }

  const Matrix& h = sensor.H;
  const double log_ds = std::log(sensor.detect_success);
  const auto d = static_cast<Eigen::Index>(track.f.dim());
  const Matrix eye = Matrix::Identity(d, d);
  std::vector<std::vector<WeightedComponent>> detections(m);
  for (const auto& c : track.f.components()) {
    const Vector z_hat = h * c.mean();
    const Matrix s = h * c.cov() * h.transpose() + sensor.R;
    const Eigen::LLT<Matrix> s_llt(s);
    if (s_llt.info() != Eigen::Success) {
      throw InvalidModelError("innovation covariance is not positive definite");
    }
    const Matrix gain = s_llt.solve(h * c.cov()).transpose();
    const Matrix i_kh = eye - gain * h;
    const Matrix post_cov = i_kh * c.cov() * i_kh.transpose() + gain * sensor.R * gain.transpose();
    const double log_w = std::log(c.weight());
    for (std::size_t j = 0; j < m; ++j) {
      const Vector r = z[j] - z_hat;
      const double maha = s_llt.matrixL().solve(r).squaredNorm();
      if (std::exp(-0.5 * maha) <= params.gate_threshold) {
        continue;
      }
      detections[j].push_back({log_w + log_ds - 0.5 * maha - log_kappa[j], c.mean() + gain * r, post_cov});
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    store_slot(terms, j + 1, detections[j]);
  }
  return terms;
}

std::vector<double> clutter_logs(const MeasurementSet& z, const SensorModel& sensor) {
  std::vector<double> out;
  out.reserve(z.size());
  for (const auto& zj : z) {
    if (zj.size() != sensor.H.rows()) {
      throw ShapeError("measurement has length " + std::to_string(zj.size()) + ", sensor expects " +
                       std::to_string(sensor.H.rows()));
    }
    out.push_back(std::max(sensor.log_clutter_possibility(zj), kLogTiny));
  }
  return out;
}

std::size_t scaled_budget(std::size_t total, double share) {
  const double b = static_cast<double>(total) * share;
  if (!(b < 1e18)) {
    return std::numeric_limits<std::size_t>::max();
  }
  return std::max<std::size_t>(1, static_cast<std::size_t>(b));
}

// delta-GLMB to LMB back-conversion for one label, given the largest normalised weight
// of each (label, association) pair.
MaxMixture combine_parts(const std::vector<std::pair<const MaxMixture*, double>>& parts, double gamma) {
  std::vector<GaussianComponent> comps;
  for (const auto& [mix, w] : parts) {
    const double scale = w / gamma;
    for (const auto& c : mix->components()) {
      const double cw = c.weight() * scale;
      if (cw >= std::numeric_limits<double>::min()) {
        comps.push_back(c.with_weight(cw));
      }
    }
  }
  return normalize(MaxMixture(std::move(comps))).mixture;
}

LmbDensity reduce_tracks(const LmbDensity& d, const MixtureReduction& reduction) {
  std::vector<BernoulliTrack> out(d.begin(), d.end());
  for (auto& t : out) {
    t.f = reduce(t.f, reduction);
  }
  return LmbDensity(std::move(out));
}

}  // namespace

Matrix constant_velocity_noise(double dt, double sigma_q) {
  Matrix block(2, 2);
  block << std::pow(dt, 4) / 4.0, std::pow(dt, 3) / 2.0, std::pow(dt, 3) / 2.0, dt * dt;
  Matrix q = Matrix::Zero(4, 4);
  q.block(0, 0, 2, 2) = block;
  q.block(2, 2, 2, 2) = block;
  return sigma_q * sigma_q * q;
}

MotionModel MotionModel::constant_velocity(double dt, double sigma_q, double survival, double death) {
  MotionModel m;
  m.F = Matrix::Identity(4, 4);
  m.F(0, 1) = dt;
  m.F(2, 3) = dt;
  m.Q = constant_velocity_noise(dt, sigma_q);
  m.survival = survival;
  m.death = death;
  m.validate();
  return m;
}

void MotionModel::validate() const {
  if (F.rows() != F.cols() || Q.rows() != F.rows() || Q.cols() != F.cols()) {
    throw ShapeError("motion model F and Q must be square and of equal size");
  }
  if (!is_psd(Q)) {
    throw InvalidModelError("process noise Q must be symmetric positive semi-definite");
  }
  if (!(survival > 0.0 && survival <= 1.0) || !(death >= 0.0 && death <= 1.0)) {
    throw InvalidModelError("survival must lie in (0, 1] and death in [0, 1]");
  }
  if (std::abs(std::max(survival, death) - 1.0) > 1e-12) {
    throw InvalidModelError("max(survival, death) must equal 1");
  }
}

SensorModel SensorModel::position_sensor(int id, const Vector& position, double sigma_r, double sigma_s,
                                         double clutter_rate, double clutter_volume) {
  SensorModel s;
  s.id = id;
  s.H = Matrix::Zero(2, 4);
  s.H(0, 0) = 1.0;
  s.H(1, 2) = 1.0;
  s.R = sigma_r * sigma_r * Matrix::Identity(2, 2);
  s.position = position;
  s.sigma_s = sigma_s;
  s.clutter_rate = clutter_rate;
  s.clutter_volume = clutter_volume;
  s.validate();
  return s;
}

double SensorModel::detection_failure(const Vector& x) const {
  if (fixed_detection_failure) {
    return *fixed_detection_failure;
  }
  const double dist2 = (H * x - position).squaredNorm();
  return 1.0 - std::exp(-0.5 * dist2 / (sigma_s * sigma_s));
}

double SensorModel::log_clutter_possibility(const Vector& z) const {
  const double volume = clutter_volume > 0.0 ? clutter_volume : 2.0 * kPi * sigma_s * sigma_s;
  const Eigen::LLT<Matrix> r_llt(R);
  const double half_log_det_r = r_llt.matrixLLT().diagonal().array().log().sum();
  const double m = static_cast<double>(R.rows());
  return -std::log(volume) + 0.5 * m * std::log(2.0 * kPi) + half_log_det_r + std::log(clutter_rate) -
         0.5 * (z - position).squaredNorm() / (sigma_s * sigma_s);
}

double SensorModel::clutter_possibility(const Vector& z) const { return std::exp(log_clutter_possibility(z)); }

void SensorModel::validate() const {
  if (H.rows() == 0 || R.rows() != H.rows() || R.cols() != H.rows() || position.size() != H.rows()) {
    throw ShapeError("sensor H, R and position sizes disagree");
  }
  if (!is_spd(R)) {
    throw InvalidModelError("measurement noise R must be symmetric positive definite");
  }
  if (!(sigma_s > 0.0) || !(detect_success > 0.0 && detect_success <= 1.0) || !(clutter_rate >= 0.0) ||
      !(clutter_volume >= 0.0)) {
    throw InvalidModelError("sensor parameters out of range");
  }
  if (fixed_detection_failure && !(*fixed_detection_failure >= 0.0 && *fixed_detection_failure <= 1.0)) {
    throw InvalidModelError("detection failure must lie in [0, 1]");
  }
}

void BirthModel::validate() const {
  if (region_min.size() != region_max.size() || (region_min.array() > region_max.array()).any()) {
    throw InvalidModelError("birth region bounds must have equal sizes with min <= max");
  }
  if (!(gamma_b > 0.0 && gamma_b <= 1.0) || !(tau_b > 0.0 && tau_b <= 1.0) ||
      std::abs(std::max(gamma_b, tau_b) - 1.0) > 1e-12) {
    throw InvalidModelError("birth possibilities must lie in (0, 1] with max(gamma_b, tau_b) = 1");
  }
}

LmbDensity predict(const LmbDensity& d, const MotionModel& motion, const LmbDensity& birth, double omega) {
  motion.validate();
  if (!(omega > 0.0 && omega <= 1.0)) {
    throw InvalidWeightError("prediction discount must lie in (0, 1], got " + std::to_string(omega));
  }
  const double survival = std::pow(motion.survival, omega);
  const double death = std::pow(motion.death, omega);
  const Matrix q = motion.Q / omega;
  std::vector<BernoulliTrack> out;
  out.reserve(d.size() + birth.size());
  for (const auto& t : d) {
    BernoulliTrack p;
    p.label = t.label;
    p.tau = std::max(t.tau, death * t.gamma);
    p.gamma = survival * t.gamma;
    std::vector<GaussianComponent> comps;
    comps.reserve(t.f.size());
    for (const auto& c : t.f.components()) {
      if (static_cast<Eigen::Index>(c.dim()) != motion.F.cols()) {
        throw ShapeError("track state dimension does not match the motion model");
      }
      comps.emplace_back(c.weight(), motion.F * c.mean(), motion.F * c.cov() * motion.F.transpose() + q);
    }
    p.f = MaxMixture(std::move(comps));
    out.push_back(std::move(p));
  }
  LmbDensity predicted(std::move(out));
  for (const auto& b : birth) {
    predicted.insert(b);
  }
  return predicted;
}

UpdateResult update_detailed(const LmbDensity& d, const MeasurementSet& z, const SensorModel& sensor,
                             const FilterParams& params) {
  sensor.validate();
  const std::size_t m = z.size();
  const auto log_kappa = clutter_logs(z, sensor);
  std::vector<TrackTerms> terms;
  terms.reserve(d.size());
  for (const auto& t : d) {
    terms.push_back(track_terms(t, z, sensor, log_kappa, params));
  }
  const auto labels = d.labels();
  const auto index_of = [&](const Label& l) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), l) - labels.begin());
  };

  const DeltaGlmb prior = lmb_to_delta_glmb(d, params.max_hypotheses);
  double prior_total = 0.0;
  for (const auto& h : prior.hypotheses()) {
    prior_total += h.weight;
  }

  std::vector<GlmbHypothesis> post;
  std::vector<double> log_weights;
  for (const auto& h : prior.hypotheses()) {
    const std::size_t n = h.entries.size();
    const double log_prior = std::log(h.weight);
    if (n == 0) {
      post.push_back({{}, 1.0});
      log_weights.push_back(log_prior);
      continue;
    }
    AssociationCostMatrix cost = AssociationCostMatrix::Constant(
        static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m + n), kInf);
    std::vector<std::size_t> rows(n);
    for (std::size_t r = 0; r < n; ++r) {
      rows[r] = index_of(h.entries[r].label);
      const auto& tt = terms[rows[r]];
      for (std::size_t j = 0; j < m; ++j) {
        cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = -tt.log_eta[j + 1];
      }
      cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m + r)) = -tt.log_eta[0];
    }
    const std::size_t budget = scaled_budget(params.max_hypotheses, h.weight / prior_total);
    for (const auto& a : ranked_assignments(cost, budget)) {
      GlmbHypothesis ph;
      ph.entries.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        const int col = a.row_to_col[r];
        const auto& tt = terms[rows[r]];
        if (col < static_cast<int>(m)) {
          ph.entries.push_back({h.entries[r].label, col + 1, tt.f[static_cast<std::size_t>(col) + 1]});
        } else {
          ph.entries.push_back({h.entries[r].label, kMissed, tt.f[0]});
        }
      }
      post.push_back(std::move(ph));
      log_weights.push_back(log_prior - a.cost);
    }
  }
  if (post.empty()) {
    throw DegenerateUpdateError("no posterior hypothesis has positive possibility");
  }
  const double best = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<GlmbHypothesis> kept;
  kept.reserve(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    const double w = std::exp(log_weights[i] - best);
    if (w > 0.0) {
      post[i].weight = w;
      kept.push_back(std::move(post[i]));
    }
  }
  const DeltaGlmb g(std::move(kept));

  UpdateResult result;
  result.usage.assign(m, 0.0);
  for (const auto& h : g.hypotheses()) {
    for (const auto& e : h.entries) {
      if (e.measurement != kMissed) {
        auto& u = result.usage[static_cast<std::size_t>(e.measurement) - 1];
        u = std::max(u, h.weight);
      }
    }
  }
  result.posterior = reduce_tracks(delta_glmb_to_lmb(g), params.reduction);
  return result;
}

LmbDensity update(const LmbDensity& d, const MeasurementSet& z, const SensorModel& sensor,
                  const FilterParams& params) {
  return update_detailed(d, z, sensor, params).posterior;
}

UpdateResult update_direct(const LmbDensity& d, const MeasurementSet& z, const SensorModel& sensor,
                           const FilterParams& params) {
  sensor.validate();
  const std::size_t m = z.size();
  const std::size_t n = d.size();
  const auto log_kappa = clutter_logs(z, sensor);
  std::vector<TrackTerms> terms;
  terms.reserve(n);
  for (const auto& t : d) {
    terms.push_back(track_terms(t, z, sensor, log_kappa, params));
  }

  // Tracks that can claim the same measurement must be solved together.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto root = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (std::size_t j = 1; j <= m; ++j) {
    std::optional<std::size_t> first;
    for (std::size_t t = 0; t < n; ++t) {
      if (terms[t].log_eta[j] == -kInf) {
        continue;
      }
      if (!first) {
        first = t;
      } else {
        const std::size_t a = root(*first);
        const std::size_t b = root(t);
        if (a != b) {
          parent[std::max(a, b)] = std::min(a, b);
        }
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t t = 0; t < n; ++t) {
    clusters[root(t)].push_back(t);
  }

  UpdateResult result;
  result.usage.assign(m, 0.0);
  std::vector<BernoulliTrack> out;
  out.reserve(n);
  for (const auto& [key, members] : clusters) {
    const std::size_t nc = members.size();
    std::vector<std::size_t> meas;
    for (std::size_t j = 1; j <= m; ++j) {
      for (std::size_t t : members) {
        if (terms[t].log_eta[j] != -kInf) {
          meas.push_back(j);
          break;
        }
      }
    }
    const std::size_t mc = meas.size();
    AssociationCostMatrix cost = AssociationCostMatrix::Constant(
        static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(mc + 2 * nc), kInf);
    for (std::size_t r = 0; r < nc; ++r) {
      const auto& track = d[members[r]];
      const auto& tt = terms[members[r]];
      const double log_gamma = std::log(track.gamma);
      const auto row = static_cast<Eigen::Index>(r);
      for (std::size_t q = 0; q < mc; ++q) {
        cost(row, static_cast<Eigen::Index>(q)) = -log_gamma - tt.log_eta[meas[q]];
      }
      cost(row, static_cast<Eigen::Index>(mc + r)) = -log_gamma - tt.log_eta[0];
      cost(row, static_cast<Eigen::Index>(mc + nc + r)) = -std::log(track.tau);
    }
    const auto solutions = ranked_assignments(cost, params.max_hypotheses);
    if (solutions.empty()) {
      throw DegenerateUpdateError("no posterior hypothesis has positive possibility");
    }
    const double best = solutions.front().cost;
    std::vector<double> tau(nc, 0.0);
    std::vector<double> gamma(nc, 0.0);
    std::vector<std::vector<double>> part(nc, std::vector<double>(m + 1, 0.0));
    for (const auto& s : solutions) {
      const double w = std::exp(best - s.cost);
      for (std::size_t r = 0; r < nc; ++r) {
        const auto col = static_cast<std::size_t>(s.row_to_col[r]);
        if (col < mc) {
          const std::size_t j = meas[col];
          part[r][j] = std::max(part[r][j], w);
          gamma[r] = std::max(gamma[r], w);
          result.usage[j - 1] = std::max(result.usage[j - 1], w);
        } else if (col < mc + nc) {
          part[r][0] = std::max(part[r][0], w);
          gamma[r] = std::max(gamma[r], w);
        } else {
          tau[r] = std::max(tau[r], w);
        }
      }
    }
    for (std::size_t r = 0; r < nc; ++r) {
      const auto& track = d[members[r]];
      BernoulliTrack t;
      t.label = track.label;
      t.tau = std::max(tau[r], kPossibilityFloor);
      t.gamma = std::max(gamma[r], kPossibilityFloor);
      if (gamma[r] > 0.0) {
        std::vector<std::pair<const MaxMixture*, double>> parts;
        for (std::size_t j = 0; j <= m; ++j) {
          if (part[r][j] > 0.0) {
            parts.emplace_back(terms[members[r]].f[j].get(), part[r][j]);
          }
        }
        t.f = reduce(combine_parts(parts, gamma[r]), params.reduction);
      } else {
        t.f = reduce(track.f, params.reduction);
      }
      out.push_back(std::move(t));
    }
  }
  result.posterior = LmbDensity(std::move(out));
  return result;
}

UpdateResult joint_predict_update_detailed(const LmbDensity& d, const MeasurementSet& z, const MotionModel& motion,
                                           const LmbDensity& birth, const SensorModel& sensor,
                                           const FilterParams& params, double omega) {
  return update_direct(predict(d, motion, birth, omega), z, sensor, params);
}

LmbDensity joint_predict_update(const LmbDensity& d, const MeasurementSet& z, const MotionModel& motion,
                                const LmbDensity& birth, const SensorModel& sensor, const FilterParams& params) {
  return joint_predict_update_detailed(d, z, motion, birth, sensor, params).posterior;
}

LmbDensity adaptive_birth(const MeasurementSet& z_prev, const std::vector<double>& usage, const BirthModel& birth,
                          const SensorModel& sensor, std::uint32_t time, std::uint32_t index_offset) {
  birth.validate();
  if (usage.size() != z_prev.size()) {
    throw ShapeError("usage has " + std::to_string(usage.size()) + " entries for " +
                     std::to_string(z_prev.size()) + " measurements");
  }
  if (z_prev.empty()) {
    return {};
  }
  const Matrix& h = sensor.H;
  const Matrix back = h.transpose() * (h * h.transpose()).inverse();
  const Matrix cov = back * sensor.R * back.transpose() + birth.velocity_prior_cov;
  std::vector<BernoulliTrack> out;
  for (std::size_t j = 0; j < z_prev.size(); ++j) {
    if (usage[j] >= birth.usage_threshold) {
      continue;
    }
    if (birth.region_min.size() == z_prev[j].size() &&
        ((z_prev[j].array() < birth.region_min.array()).any() || (z_prev[j].array() > birth.region_max.array()).any())) {
      continue;
    }
    BernoulliTrack t;
    t.label = {time, index_offset + static_cast<std::uint32_t>(j)};
    t.tau = birth.tau_b;
    t.gamma = birth.gamma_b;
    t.f = MaxMixture(GaussianComponent(1.0, back * z_prev[j], cov));
    out.push_back(std::move(t));
  }
  return LmbDensity(std::move(out));
}

LmbDensity fixed_birth(const BirthModel& birth, std::uint32_t time) {
  birth.validate();
  std::vector<BernoulliTrack> out;
  for (std::size_t j = 0; j < birth.locations.size(); ++j) {
    BernoulliTrack t;
    t.label = {time, static_cast<std::uint32_t>(j)};
    t.tau = birth.tau_b;
    t.gamma = birth.gamma_b;
    t.f = MaxMixture(GaussianComponent(1.0, birth.locations[j], birth.location_cov));
    out.push_back(std::move(t));
  }
  return LmbDensity(std::move(out));
}

LmbDensity discount(const LmbDensity& d, double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw InvalidWeightError("discount exponent must be positive, got " + std::to_string(omega));
  }
  std::vector<BernoulliTrack> out(d.begin(), d.end());
  for (auto& t : out) {
    t.tau = std::pow(t.tau, omega);
    t.gamma = std::pow(t.gamma, omega);
    t.f = mixture_power(t.f, omega);
  }
  return LmbDensity(std::move(out));
}

LmbDensity prune_tracks(const LmbDensity& d, double existence_threshold, std::size_t max_tracks) {
  std::vector<BernoulliTrack> kept;
  for (const auto& t : d) {
    if (t.gamma >= existence_threshold) {
      kept.push_back(t);
    }
  }
  if (kept.size() > max_tracks) {
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return std::log(a.gamma) - std::log(a.tau) > std::log(b.gamma) - std::log(b.tau);
    });
    kept.resize(max_tracks);
  }
  return LmbDensity(std::move(kept));
}

}  // namespace plmb
