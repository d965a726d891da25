#include "plmb/fusion.hpp"

#include "plmb/assignment.hpp"
#include "plmb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>

namespace plmb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_weight(double w) {
  if (!(w >= 0.0 && w <= 1.0 + 1e-12)) {
    throw InvalidWeightError("fusion weight must lie in [0, 1], got " + std::to_string(w));
  }
}

// Normalised (tau, gamma) from their unnormalised logs.
std::pair<double, double> normalise_existence(double log_tau, double log_gamma) {
  const double top = std::max(log_tau, log_gamma);
  return {std::max(std::exp(log_tau - top), kPossibilityFloor), std::max(std::exp(log_gamma - top), kPossibilityFloor)};
}

MaxMixture inflate(const MaxMixture& m, double factor) {
  std::vector<GaussianComponent> out;
  out.reserve(m.size());
  for (const auto& c : m.components()) {
    out.emplace_back(c.weight(), c.mean(), c.cov() * factor);
  }
  return MaxMixture(std::move(out));
}

}  // namespace

FusionWeightVector::FusionWeightVector(std::vector<double> weights, WeightMode mode)
    : weights_(std::move(weights)), mode_(mode) {
  if (weights_.empty()) {
    throw InvalidWeightError("fusion weight vector is empty");
  }
  for (double w : weights_) {
    check_weight(w);
  }
  if (mode_ == WeightMode::max_one) {
    const double top = *std::max_element(weights_.begin(), weights_.end());
    if (std::abs(top - 1.0) > 1e-12) {
      throw InvalidWeightError("max-one fusion weights must have maximum 1");
    }
  } else {
    const double sum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-12) {
      throw InvalidWeightError("sum-one fusion weights must sum to 1, got " + std::to_string(sum));
    }
  }
}

FusionWeightVector FusionWeightVector::independent(std::size_t n) {
  return {std::vector<double>(n, 1.0), WeightMode::max_one};
}

FusionWeightVector FusionWeightVector::uniform(std::size_t n) {
  return {std::vector<double>(n, 1.0 / static_cast<double>(n)), WeightMode::sum_one};
}

FusedTrack fuse_tracks_detailed(const BernoulliTrack& a, const BernoulliTrack& b, double omega_a, double omega_b,
                                const std::optional<MixtureReduction>& reduction) {
  check_weight(omega_a);
  check_weight(omega_b);
  if (omega_a == 0.0 && omega_b == 0.0) {
    throw InvalidWeightError("at least one fusion weight must be positive");
  }
  MaxMixture f;
  double eta = 1.0;
  if (omega_a > 0.0 && omega_b > 0.0 && reduction) {
    auto p = pruned_product(mixture_power(a.f, omega_a), mixture_power(b.f, omega_b), reduction->prune_threshold);
    f = cap(merge(p.mixture, reduction->merge_threshold), reduction->max_components);
    eta = p.factor;
  } else {
    MaxMixture product;
    if (omega_a == 0.0) {
      product = mixture_power(b.f, omega_b);
    } else if (omega_b == 0.0) {
      product = mixture_power(a.f, omega_a);
    } else {
      product = mixture_product(mixture_power(a.f, omega_a), mixture_power(b.f, omega_b));
    }
    auto n = normalize(product);
    f = reduction ? reduce(n.mixture, *reduction) : std::move(n.mixture);
    eta = n.factor;
  }
  const double log_tau = omega_a * std::log(a.tau) + omega_b * std::log(b.tau);
  const double log_gamma = omega_a * std::log(a.gamma) + omega_b * std::log(b.gamma) + std::log(eta);
  const auto [tau, gamma] = normalise_existence(log_tau, log_gamma);
  return {{a.label, tau, gamma, std::move(f)}, eta};
}

BernoulliTrack fuse_tracks(const BernoulliTrack& a, const BernoulliTrack& b, double omega_a, double omega_b) {
  return fuse_tracks_detailed(a, b, omega_a, omega_b).track;
}

LmbDensity fuse_lmb_shared_labels(const std::vector<LmbDensity>& ds, const FusionWeightVector& w,
                                  const std::optional<MixtureReduction>& reduction) {
  if (ds.empty()) {
    throw ArgumentError("fuse_lmb_shared_labels needs at least one density");
  }
  if (w.size() != ds.size()) {
    throw ArgumentError("got " + std::to_string(w.size()) + " weights for " + std::to_string(ds.size()) +
                        " densities");
  }
  if (ds.size() == 1) {
    return ds.front();
  }
  std::map<Label, const BernoulliTrack*> first_seen;
  for (const auto& d : ds) {
    for (const auto& t : d) {
      first_seen.emplace(t.label, &t);
    }
  }
  std::vector<BernoulliTrack> out;
  out.reserve(first_seen.size());
  for (const auto& [label, seen] : first_seen) {
    const auto track_in = [&](std::size_t i) {
      if (const auto* t = ds[i].find(label)) {
        return *t;
      }
      return BernoulliTrack{label, 1.0, kPossibilityFloor, inflate(seen->f, 10.0)};
    };
    BernoulliTrack acc = track_in(0);
    double acc_weight = w[0];
    for (std::size_t i = 1; i < ds.size(); ++i) {
      acc = fuse_tracks_detailed(acc, track_in(i), acc_weight, w[i], reduction).track;
      acc_weight = 1.0;
    }
    out.push_back(std::move(acc));
  }
  return LmbDensity(std::move(out));
}

double MissedDetectionModel::gamma_at(const Vector& x) const {
  const double df = detection_failure ? detection_failure(x) : 1.0;
  return r1 * df;
}

BernoulliTrack fuse_with_miss(const BernoulliTrack& t, const MissedDetectionModel& miss, double omega_track,
                              double omega_miss) {
  check_weight(omega_track);
  check_weight(omega_miss);
  if (omega_track == 0.0) {
    throw InvalidWeightError("the track side of a missed-detection fusion needs a positive weight");
  }
  // f_phi is identically one, so the spatial product is f^omega with supremum 1.
  const double gamma_phi = std::max(miss.gamma_at(t.f.dominant().mean()), kPossibilityFloor);
  const double log_tau = omega_track * std::log(t.tau) + omega_miss * std::log(miss.r0);
  const double log_gamma = omega_track * std::log(t.gamma) + omega_miss * std::log(gamma_phi);
  const auto [tau, gamma] = normalise_existence(log_tau, log_gamma);
  return {t.label, tau, gamma, mixture_power(t.f, omega_track)};
}

AssociationSolution associate_tracks(const LmbDensity& a, const LmbDensity& b, const MatchConfig& cfg) {
  if (!(cfg.association_threshold > 0.0 && cfg.association_threshold < 1.0)) {
    throw ArgumentError("association threshold must lie in (0, 1)");
  }
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  AssociationSolution sol;
  if (m == 0) {
    sol.unmatched_right.resize(n);
    std::iota(sol.unmatched_right.begin(), sol.unmatched_right.end(), 0);
    return sol;
  }
  AssociationCostMatrix cost = AssociationCostMatrix::Constant(static_cast<Eigen::Index>(m),
                                                               static_cast<Eigen::Index>(n + m), kInf);
  std::vector<MaxMixture> powered_b;
  powered_b.reserve(n);
  for (const auto& t : b) {
    powered_b.push_back(cfg.omega_b > 0.0 ? mixture_power(t.f, cfg.omega_b) : t.f);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const MaxMixture fa = cfg.omega_a > 0.0 ? mixture_power(a[i].f, cfg.omega_a) : a[i].f;
    const double log_ga = cfg.omega_a * std::log(a[i].gamma);
    for (std::size_t j = 0; j < n; ++j) {
      double eta = 0.0;
      for (const auto& ca : fa.components()) {
        for (const auto& cb : powered_b[j].components()) {
          // tr(Pa + Pb) bounds the largest eigenvalue, so this bounds the product's peak from above
          const double spread = ca.cov().trace() + cb.cov().trace();
          const double bound =
              ca.weight() * cb.weight() * std::exp(-0.5 * (ca.mean() - cb.mean()).squaredNorm() / spread);
          if (bound < std::max(eta, cfg.association_threshold)) {
            continue;
          }
          eta = std::max(eta, gaussian_product_weight(ca, cb));
        }
      }
      if (eta >= cfg.association_threshold) {
        cost(row, static_cast<Eigen::Index>(j)) = -(log_ga + cfg.omega_b * std::log(b[j].gamma) + std::log(eta));
      }
    }
    const double gamma_phi = std::max(cfg.missed_by_b.gamma_at(a[i].f.dominant().mean()), kPossibilityFloor);
    cost(row, static_cast<Eigen::Index>(n + i)) = -(log_ga + cfg.omega_b * std::log(gamma_phi));
  }
  const auto best = solve_assignment(cost);
  if (!best) {
    throw DegenerateUpdateError("track association has no feasible solution");
  }
  std::vector<bool> right_used(n, false);
  for (std::size_t i = 0; i < m; ++i) {
    const auto col = static_cast<std::size_t>(best->row_to_col[i]);
    if (col < n) {
      sol.pairs.emplace_back(i, col);
      right_used[col] = true;
    } else {
      sol.unmatched_left.push_back(i);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!right_used[j]) {
      sol.unmatched_right.push_back(j);
    }
  }
  return sol;
}

LmbDensity match_and_fuse(const LmbDensity& a, const LmbDensity& b, const MatchConfig& cfg, LabelIssuer& issuer) {
  const AssociationSolution sol = associate_tracks(a, b, cfg);
  std::vector<BernoulliTrack> out;
  out.reserve(sol.pairs.size() + sol.unmatched_left.size() + sol.unmatched_right.size());
  // Left-side tracks first, in left order, so issued labels follow a deterministic order.
  std::vector<std::optional<std::size_t>> partner(a.size());
  for (const auto& [i, j] : sol.pairs) {
    partner[i] = j;
  }
  std::set<Label> taken;
  const auto assign = [&](BernoulliTrack& t, std::optional<Label> wanted, std::uint32_t birth_time) {
    t.label = wanted && !taken.contains(*wanted) ? *wanted : issuer.next(birth_time);
    taken.insert(t.label);
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::optional<Label> wanted;
    BernoulliTrack t;
    if (partner[i]) {
      const auto& other = b[*partner[i]];
      t = fuse_tracks_detailed(a[i], other, cfg.omega_a, cfg.omega_b, cfg.reduction).track;
      if (cfg.labels == LabelPolicy::keep_left) {
        wanted = a[i].label;
      } else if (cfg.labels == LabelPolicy::smallest) {
        wanted = std::min(a[i].label, other.label);
      }
    } else {
      t = fuse_with_miss(a[i], cfg.missed_by_b, cfg.omega_a, cfg.omega_b);
      if (cfg.labels != LabelPolicy::fresh) {
        wanted = a[i].label;
      }
    }
    assign(t, wanted, a[i].label.birth_time);
    out.push_back(std::move(t));
  }
  for (std::size_t j : sol.unmatched_right) {
    BernoulliTrack t = fuse_with_miss(b[j], cfg.missed_by_a, cfg.omega_b, cfg.omega_a);
    std::optional<Label> wanted;
    if (cfg.labels == LabelPolicy::smallest) {
      wanted = b[j].label;
    }
    assign(t, wanted, b[j].label.birth_time);
    out.push_back(std::move(t));
  }
  return LmbDensity(std::move(out));
}

}  // namespace plmb
