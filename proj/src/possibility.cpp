#include "plmb/possibility.hpp"

#include "plmb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace plmb {

namespace {

// Weights of products can underflow; keep them strictly positive so the
// component invariant (0, 1] holds. Rounding can also push a weight a hair above one.
double clamp_weight(double w) {
  return std::clamp(w, std::numeric_limits<double>::min(), 1.0);
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

bool is_spd(const Matrix& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0 || !cov.allFinite()) {
    return false;
  }
  Eigen::LLT<Matrix> llt(symmetrized(cov));
  if (llt.info() != Eigen::Success) {
    return false;
  }
  const Matrix& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (l(i, i) * l(i, i) < kMinCovariancePivot) {
      return false;
    }
  }
  return true;
}

GaussianComponent::GaussianComponent(double weight, Vector mean, Matrix cov)
    : weight_(weight), mean_(std::move(mean)), cov_(std::move(cov)) {
  if (!(weight_ > 0.0) || weight_ > 1.0 + 1e-9 || !std::isfinite(weight_)) {
    throw InvalidModelError("component weight must lie in (0, 1], got " + std::to_string(weight_));
  }
  weight_ = std::min(weight_, 1.0);
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size()) {
    throw ShapeError("covariance is " + std::to_string(cov_.rows()) + "x" + std::to_string(cov_.cols()) +
                     " but mean has length " + std::to_string(mean_.size()));
  }
  if (!mean_.allFinite()) {
    throw InvalidModelError("component mean is not finite");
  }
  cov_ = symmetrized(cov_);
  if (!is_spd(cov_)) {
    throw InvalidModelError("covariance is not symmetric positive definite");
  }
  llt_.compute(cov_);
}

double GaussianComponent::mahalanobis_sq(const Vector& x) const {
  if (x.size() != mean_.size()) {
    throw ShapeError("state has length " + std::to_string(x.size()) + ", component expects " +
                     std::to_string(mean_.size()));
  }
  const Vector diff = x - mean_;
  const Vector solved = llt_.matrixL().solve(diff);
  return solved.squaredNorm();
}

double GaussianComponent::eval(const Vector& x) const { return weight_ * std::exp(-0.5 * mahalanobis_sq(x)); }

double GaussianComponent::log_det_cov() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

GaussianComponent GaussianComponent::with_weight(double weight) const {
  GaussianComponent copy = *this;
  if (!(weight > 0.0) || weight > 1.0 + 1e-9) {
    throw InvalidModelError("component weight must lie in (0, 1], got " + std::to_string(weight));
  }
  copy.weight_ = std::min(weight, 1.0);
  return copy;
}

MaxMixture::MaxMixture(std::vector<GaussianComponent> components) : components_(std::move(components)) {
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) {
      throw ShapeError("max-mixture components have different dimensions");
    }
  }
}

MaxMixture::MaxMixture(GaussianComponent component) { components_.push_back(std::move(component)); }

std::size_t MaxMixture::dim() const {
  if (components_.empty()) {
    throw EmptyMixtureError("empty max-mixture has no dimension");
  }
  return components_.front().dim();
}

const GaussianComponent& MaxMixture::dominant() const {
  if (components_.empty()) {
    throw EmptyMixtureError("empty max-mixture has no dominant component");
  }
  return *std::max_element(components_.begin(), components_.end(),
                           [](const auto& a, const auto& b) { return a.weight() < b.weight(); });
}

double eval_gaussian(const Vector& x, const Vector& mean, const Matrix& cov) {
  return GaussianComponent(1.0, mean, cov).eval(x);
}

double mixture_eval(const MaxMixture& m, const Vector& x) {
  if (m.empty()) {
    throw EmptyMixtureError("cannot evaluate an empty max-mixture");
  }
  double best = 0.0;
  for (const auto& c : m.components()) {
    best = std::max(best, c.eval(x));
  }
  return best;
}

MaxMixture mixture_power(const MaxMixture& m, double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw InvalidWeightError("mixture exponent must be positive, got " + std::to_string(omega));
  }
  if (omega == 1.0) {
    return m;
  }
  std::vector<GaussianComponent> out;
  out.reserve(m.size());
  for (const auto& c : m.components()) {
    out.emplace_back(clamp_weight(std::pow(c.weight(), omega)), c.mean(), c.cov() / omega);
  }
  return MaxMixture(std::move(out));
}

GaussianComponent gaussian_product(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("cannot multiply components of dimension " + std::to_string(a.dim()) + " and " +
                     std::to_string(b.dim()));
  }
  // S12 = S1 (S1+S2)^-1 S2 and mu12 = S2 (S1+S2)^-1 mu1 + S1 (S1+S2)^-1 mu2
  // are the information-form identities rewritten to avoid inverting S1, S2.
  const Matrix sum = a.cov() + b.cov();
  const Eigen::LLT<Matrix> sum_llt(sum);
  if (sum_llt.info() != Eigen::Success) {
    throw InvalidModelError("sum of covariances is not positive definite");
  }
  const Vector diff = a.mean() - b.mean();
  const double maha = sum_llt.matrixL().solve(diff).squaredNorm();
  const double weight = a.weight() * b.weight() * std::exp(-0.5 * maha);

  const Matrix gain = a.cov() * sum_llt.solve(Matrix::Identity(sum.rows(), sum.cols()));
  const Matrix cov = gain * b.cov();
  const Vector mean = a.mean() - gain * diff;
  return {clamp_weight(weight), mean, cov};
}

double gaussian_product_weight(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("cannot multiply components of dimension " + std::to_string(a.dim()) + " and " +
                     std::to_string(b.dim()));
  }
  const Eigen::LLT<Matrix> sum_llt(a.cov() + b.cov());
  if (sum_llt.info() != Eigen::Success) {
    throw InvalidModelError("sum of covariances is not positive definite");
  }
  const double maha = sum_llt.matrixL().solve(a.mean() - b.mean()).squaredNorm();
  return clamp_weight(a.weight() * b.weight() * std::exp(-0.5 * maha));
}

MaxMixture mixture_product(const MaxMixture& a, const MaxMixture& b) {
  std::vector<GaussianComponent> out;
  out.reserve(a.size() * b.size());
  for (const auto& ca : a.components()) {
    for (const auto& cb : b.components()) {
      out.push_back(gaussian_product(ca, cb));
    }
  }
  return MaxMixture(std::move(out));
}

double supremum(const MaxMixture& m) {
  if (m.empty()) {
    throw EmptyMixtureError("supremum of an empty max-mixture is undefined");
  }
  return m.dominant().weight();
}

NormalizedMixture normalize(const MaxMixture& m) {
  const double sup = supremum(m);
  std::vector<GaussianComponent> out;
  out.reserve(m.size());
  for (const auto& c : m.components()) {
    out.push_back(c.with_weight(clamp_weight(c.weight() / sup)));
  }
  return {MaxMixture(std::move(out)), sup};
}

NormalizedMixture pruned_product(const MaxMixture& a, const MaxMixture& b, double threshold) {
  if (a.empty() || b.empty()) {
    throw EmptyMixtureError("product with an empty max-mixture");
  }
  std::vector<double> w;
  w.reserve(a.size() * b.size());
  for (const auto& ca : a.components()) {
    for (const auto& cb : b.components()) {
      w.push_back(gaussian_product_weight(ca, cb));
    }
  }
  const double sup = *std::max_element(w.begin(), w.end());
  std::vector<GaussianComponent> out;
  std::size_t idx = 0;
  for (const auto& ca : a.components()) {
    for (const auto& cb : b.components()) {
      const double rel = clamp_weight(w[idx++] / sup);
      if (rel >= threshold || rel == 1.0) {
        out.push_back(gaussian_product(ca, cb).with_weight(rel));
      }
    }
  }
  return {MaxMixture(std::move(out)), sup};
}

MaxMixture prune(const MaxMixture& m, double threshold) {
  if (m.empty()) {
    return m;
  }
  const GaussianComponent* keep = &m.dominant();
  std::vector<GaussianComponent> out;
  for (const auto& c : m.components()) {
    if (&c == keep || c.weight() >= threshold) {
      out.push_back(c);
    }
  }
  return MaxMixture(std::move(out));
}

double hellinger_distance(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("Hellinger distance between components of different dimension");
  }
  const Matrix avg = 0.5 * (a.cov() + b.cov());
  const Eigen::LLT<Matrix> avg_llt(avg);
  const double log_det_avg = 2.0 * avg_llt.matrixLLT().diagonal().array().log().sum();
  const Vector diff = a.mean() - b.mean();
  const double maha = avg_llt.matrixL().solve(diff).squaredNorm();
  const double log_bc = 0.25 * a.log_det_cov() + 0.25 * b.log_det_cov() - 0.5 * log_det_avg - 0.125 * maha;
  const double bc = std::exp(log_bc);
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

MaxMixture merge(const MaxMixture& m, double threshold) {
  if (m.size() < 2) {
    return m;
  }
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return m[i].weight() > m[j].weight(); });

  // The Bhattacharyya coefficient is at most exp(-|dmu|^2 / (8 tr avg)), so
  // pairs whose bound leaves it below 1 - threshold^2 cannot merge.
  const double bc_needed = 1.0 - threshold * threshold;
  std::vector<double> trace(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    trace[i] = m[i].cov().trace();
  }
  std::vector<bool> used(m.size(), false);
  std::vector<GaussianComponent> out;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t pivot = order[oi];
    if (used[pivot]) {
      continue;
    }
    std::vector<std::size_t> group{pivot};
    used[pivot] = true;
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t other = order[oj];
      if (used[other]) {
        continue;
      }
      const double gap = (m[pivot].mean() - m[other].mean()).squaredNorm();
      if (bc_needed > 0.0 && std::exp(-gap / (4.0 * (trace[pivot] + trace[other]))) <= bc_needed) {
        continue;
      }
      if (hellinger_distance(m[pivot], m[other]) < threshold) {
        group.push_back(other);
        used[other] = true;
      }
    }
    if (group.size() == 1) {
      out.push_back(m[pivot]);
      continue;
    }
    double mass = 0.0;
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(m.dim()));
    for (std::size_t idx : group) {
      mass += m[idx].weight();
      mean += m[idx].weight() * m[idx].mean();
    }
    mean /= mass;
    Matrix cov = Matrix::Zero(mean.size(), mean.size());
    for (std::size_t idx : group) {
      const Vector d = m[idx].mean() - mean;
      cov += m[idx].weight() * (m[idx].cov() + d * d.transpose());
    }
    cov /= mass;
    out.emplace_back(m[pivot].weight(), std::move(mean), std::move(cov));
  }
  return MaxMixture(std::move(out));
}

MaxMixture cap(const MaxMixture& m, std::size_t max_components) {
  if (m.size() <= max_components || max_components == 0) {
    return m;
  }
  std::vector<GaussianComponent> sorted(m.components().begin(), m.components().end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.weight() > b.weight(); });
  sorted.erase(sorted.begin() + static_cast<std::ptrdiff_t>(max_components), sorted.end());
  return MaxMixture(std::move(sorted));
}

MaxMixture reduce(const MaxMixture& m, const MixtureReduction& settings) {
  return cap(merge(prune(m, settings.prune_threshold), settings.merge_threshold), settings.max_components);
}

}  // namespace plmb
