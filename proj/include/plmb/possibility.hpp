#pragma once

// Gaussian possibility functions and Gaussian max-mixtures.
//
// A Gaussian possibility function is the unnormalised Gaussian shape
//   N(x; mu, S) = exp(-0.5 (x - mu)^T S^-1 (x - mu)),
// which peaks at 1 on its mean. A max-mixture takes the pointwise maximum
// of weighted components instead of their sum, so its supremum is exactly
// the largest component weight.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace plmb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest admissible Cholesky pivot (squared diagonal of L) for a covariance.
inline constexpr double kMinCovariancePivot = 1e-12;

/// One weighted Gaussian possibility component. Immutable once built.
///
/// The covariance is symmetrised on construction and factorised once; the
/// factor is reused for every evaluation.
class GaussianComponent {
 public:
  /// Throws InvalidModelError if the weight is outside (0, 1] or the
  /// covariance is not symmetric positive definite, ShapeError on a
  /// dimension mismatch.
  GaussianComponent(double weight, Vector mean, Matrix cov);

  [[nodiscard]] double weight() const noexcept { return weight_; }
  [[nodiscard]] const Vector& mean() const noexcept { return mean_; }
  [[nodiscard]] const Matrix& cov() const noexcept { return cov_; }
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }

  /// (x - mean)^T cov^-1 (x - mean)
  [[nodiscard]] double mahalanobis_sq(const Vector& x) const;

  /// weight * N(x; mean, cov)
  [[nodiscard]] double eval(const Vector& x) const;

  [[nodiscard]] double log_det_cov() const;

  [[nodiscard]] const Eigen::LLT<Matrix>& factor() const noexcept { return llt_; }

  [[nodiscard]] GaussianComponent with_weight(double weight) const;

 private:
  double weight_;
  Vector mean_;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
};

/// Weighted maximum of Gaussian possibility components.
///
/// An empty mixture is allowed only as a "no information" placeholder;
/// evaluation and supremum reject it.
class MaxMixture {
 public:
  MaxMixture() = default;
  explicit MaxMixture(std::vector<GaussianComponent> components);
  explicit MaxMixture(GaussianComponent component);

  [[nodiscard]] bool empty() const noexcept { return components_.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return components_.size(); }
  [[nodiscard]] std::size_t dim() const;
  [[nodiscard]] std::span<const GaussianComponent> components() const noexcept { return components_; }
  [[nodiscard]] const GaussianComponent& operator[](std::size_t i) const { return components_[i]; }

  /// Component with the largest weight (first one on ties).
  [[nodiscard]] const GaussianComponent& dominant() const;

 private:
  std::vector<GaussianComponent> components_;
};

/// Settings for the prune / merge / cap reduction applied after each filter stage.
struct MixtureReduction {
  double prune_threshold = 1e-3;
  double merge_threshold = 0.1;
  std::size_t max_components = 30;
};

struct NormalizedMixture {
  MaxMixture mixture;
  double factor = 1.0;  ///< supremum of the input
};

/// prune(normalize(mixture_product(a, b)), threshold) without forming the
/// components the pruning would drop.
[[nodiscard]] NormalizedMixture pruned_product(const MaxMixture& a, const MaxMixture& b, double threshold);

/// exp(-0.5 (x-mean)^T cov^-1 (x-mean)). Throws on a non-SPD covariance or shape mismatch.
[[nodiscard]] double eval_gaussian(const Vector& x, const Vector& mean, const Matrix& cov);

/// max_i w_i N(x; mu_i, S_i). Throws EmptyMixtureError on an empty mixture.
[[nodiscard]] double mixture_eval(const MaxMixture& m, const Vector& x);

/// Pointwise power of a max-mixture: w -> w^omega, S -> S / omega. Exact, no approximation.
[[nodiscard]] MaxMixture mixture_power(const MaxMixture& m, double omega);

/// Product of two weighted Gaussian possibility functions, itself a weighted Gaussian.
[[nodiscard]] GaussianComponent gaussian_product(const GaussianComponent& a, const GaussianComponent& b);
/// Weight of gaussian_product(a, b) alone.
[[nodiscard]] double gaussian_product_weight(const GaussianComponent& a, const GaussianComponent& b);

/// All pairwise component products (|a|*|b| components, not normalised).
[[nodiscard]] MaxMixture mixture_product(const MaxMixture& a, const MaxMixture& b);

/// sup_x m(x), which for a max-mixture is the largest weight.
[[nodiscard]] double supremum(const MaxMixture& m);

[[nodiscard]] NormalizedMixture normalize(const MaxMixture& m);

/// Drops components lighter than `threshold`; the heaviest component always survives.
[[nodiscard]] MaxMixture prune(const MaxMixture& m, double threshold);

/// Hellinger distance between the normalised Gaussian densities behind two components.
[[nodiscard]] double hellinger_distance(const GaussianComponent& a, const GaussianComponent& b);

/// Greedy merge from the heaviest component down. Each group keeps its
/// maximal weight; mean and covariance are weight-proportional moment matches.
[[nodiscard]] MaxMixture merge(const MaxMixture& m, double threshold);

/// Keeps the `max_components` heaviest components.
[[nodiscard]] MaxMixture cap(const MaxMixture& m, std::size_t max_components);

/// prune, then merge, then cap.
[[nodiscard]] MaxMixture reduce(const MaxMixture& m, const MixtureReduction& settings);

/// Symmetrises `cov` and checks it factorises with pivots above kMinCovariancePivot.
[[nodiscard]] bool is_spd(const Matrix& cov);

}  // namespace plmb
