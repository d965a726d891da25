#pragma once

// Fusion of LMB densities: track-wise weighted products, shared-label
// fusion and association-based fusion of tracks with unrelated labels.

#include "plmb/labeled_ufs.hpp"
#include "plmb/possibility.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace plmb {

/// max_one: the largest weight is 1 (independent evidence).
/// sum_one: the weights sum to 1 (consensus averaging).
enum class WeightMode { max_one, sum_one };

class FusionWeightVector {
 public:
  /// Throws InvalidWeightError unless every weight lies in [0, 1] and the
  /// mode's normalisation holds within 1e-12.
  FusionWeightVector(std::vector<double> weights, WeightMode mode);

  static FusionWeightVector independent(std::size_t n);
  static FusionWeightVector uniform(std::size_t n);

  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
  [[nodiscard]] WeightMode mode() const noexcept { return mode_; }
  [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return weights_[i]; }

 private:
  std::vector<double> weights_;
  WeightMode mode_;
};

struct FusedTrack {
  BernoulliTrack track;
  double eta_f = 1.0;  ///< supremum of the unnormalised spatial product
};

/// Weighted product of two Bernoulli tracks, renormalised. The result keeps
/// a's label. A zero weight removes that side's spatial factor.
[[nodiscard]] FusedTrack fuse_tracks_detailed(const BernoulliTrack& a, const BernoulliTrack& b, double omega_a,
                                              double omega_b,
                                              const std::optional<MixtureReduction>& reduction = std::nullopt);
[[nodiscard]] BernoulliTrack fuse_tracks(const BernoulliTrack& a, const BernoulliTrack& b, double omega_a,
                                         double omega_b);

/// Label-wise fusion of densities over one label space, folded left to right.
/// A label missing from a density is padded with tau = 1, gamma = kPossibilityFloor
/// and the first available mixture with its covariances inflated tenfold.
/// Throws ArgumentError on an empty input or a weight count mismatch.
[[nodiscard]] LmbDensity fuse_lmb_shared_labels(const std::vector<LmbDensity>& ds, const FusionWeightVector& w,
                                                const std::optional<MixtureReduction>& reduction = std::nullopt);

/// Bernoulli model of a track the other side failed to report:
/// tau = r0, gamma(x) = r1 d_f(x), uniform spatial possibility.
struct MissedDetectionModel {
  double r0 = 1.0;
  double r1 = 1.0;
  /// d_f(x); an empty function means d_f = 1.
  std::function<double(const Vector&)> detection_failure;

  [[nodiscard]] double gamma_at(const Vector& x) const;
};

/// Fuses a track with the missed-detection Bernoulli of the other side.
[[nodiscard]] BernoulliTrack fuse_with_miss(const BernoulliTrack& t, const MissedDetectionModel& miss,
                                            double omega_track, double omega_miss);

struct AssociationSolution {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  ///< (left index, right index)
  std::vector<std::size_t> unmatched_left;
  std::vector<std::size_t> unmatched_right;
};

enum class LabelPolicy {
  fresh,      ///< every output track gets a newly issued label
  keep_left,  ///< matched and left-only tracks keep the left label
  smallest,   ///< matched tracks keep the smaller label, unmatched ones their own
};

/// Hands out distinct labels (birth_time, base + counter).
class LabelIssuer {
 public:
  explicit LabelIssuer(std::uint32_t base = 0) : base_(base) {}
  Label next(std::uint32_t birth_time) { return {birth_time, base_ + counter_++}; }
  [[nodiscard]] std::uint32_t issued() const noexcept { return counter_; }

 private:
  std::uint32_t base_;
  std::uint32_t counter_ = 0;
};

struct MatchConfig {
  double omega_a = 1.0;
  double omega_b = 1.0;
  double association_threshold = 1e-2;  ///< T_n: pairs with eta_f below it never match
  MissedDetectionModel missed_by_a;     ///< stands in for a when a right track is unmatched
  MissedDetectionModel missed_by_b;     ///< stands in for b when a left track is unmatched
  LabelPolicy labels = LabelPolicy::fresh;
  std::optional<MixtureReduction> reduction;
};

/// Optimal assignment on the |a| x (|b| + |a|) cost matrix
/// C(i, j) = -ln(gamma_i gamma_j eta_f(i, j)) and C(i, |b| + i) = -ln(gamma_i gamma_phi).
[[nodiscard]] AssociationSolution associate_tracks(const LmbDensity& a, const LmbDensity& b,
                                                   const MatchConfig& cfg);

/// Fuses matched pairs, fuses unmatched tracks with the other side's
/// missed-detection Bernoulli, then labels the union per cfg.labels. Any
/// label the policy would repeat is replaced by one from `issuer`.
[[nodiscard]] LmbDensity match_and_fuse(const LmbDensity& a, const LmbDensity& b, const MatchConfig& cfg,
                                        LabelIssuer& issuer);

}  // namespace plmb
