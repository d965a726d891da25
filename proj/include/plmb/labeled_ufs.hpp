#pragma once

// Labeled uncertain finite sets: LMB and delta-GLMB possibility functions.

#include "plmb/possibility.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plmb {

/// Possibility assigned to an empty max; keeps tau/gamma strictly positive.
inline constexpr double kPossibilityFloor = 1e-9;

/// Track identity: birth time step and index among births of that step.
struct Label {
  std::uint32_t birth_time = 0;
  std::uint32_t index = 0;

  auto operator<=>(const Label&) const = default;
};

std::string to_string(const Label& label);

/// One labeled Bernoulli component.
///
/// tau is the possibility that the track does not exist and gamma the
/// possibility that it does; together they bound the existence probability
/// to [1 - tau, gamma]. A well-formed track has max(tau, gamma) = 1 and a
/// normalised spatial possibility f.
struct BernoulliTrack {
  Label label;
  double tau = 1.0;
  double gamma = 1.0;
  MaxMixture f;
};

/// Throws InvalidModelError unless tau, gamma lie in (0, 1], max(tau, gamma) = 1
/// within `tol` and f is non-empty with supremum 1 within `tol`.
void validate_track(const BernoulliTrack& track, double tol = 1e-12);

/// Label-keyed collection of Bernoulli tracks, iterated in label order.
class LmbDensity {
 public:
  LmbDensity() = default;
  /// Throws DuplicateLabelError if two tracks share a label.
  explicit LmbDensity(std::vector<BernoulliTrack> tracks);

  /// Throws DuplicateLabelError if the label is already present.
  void insert(BernoulliTrack track);

  [[nodiscard]] const BernoulliTrack* find(const Label& label) const;
  [[nodiscard]] bool contains(const Label& label) const { return find(label) != nullptr; }

  [[nodiscard]] std::size_t size() const noexcept { return tracks_.size(); }
  [[nodiscard]] bool empty() const noexcept { return tracks_.empty(); }
  [[nodiscard]] std::span<const BernoulliTrack> tracks() const noexcept { return tracks_; }
  [[nodiscard]] auto begin() const noexcept { return tracks_.begin(); }
  [[nodiscard]] auto end() const noexcept { return tracks_.end(); }
  [[nodiscard]] const BernoulliTrack& operator[](std::size_t i) const { return tracks_[i]; }

  [[nodiscard]] std::vector<Label> labels() const;

 private:
  std::vector<BernoulliTrack> tracks_;
};

/// Union of two densities with disjoint label sets.
[[nodiscard]] LmbDensity merge_disjoint(const LmbDensity& a, const LmbDensity& b);

/// Measurement index used by association maps for a missed detection.
inline constexpr int kMissed = 0;

/// One label inside a delta-GLMB hypothesis with its association and spatial
/// possibility. Mixtures are shared between hypotheses that agree on them.
struct LabelEntry {
  Label label;
  int measurement = kMissed;  ///< 1-based measurement index, kMissed for a miss
  std::shared_ptr<const MaxMixture> f;
};

/// Weighted (label set, association map) hypothesis.
struct GlmbHypothesis {
  std::vector<LabelEntry> entries;  ///< sorted by label, labels distinct
  double weight = 1.0;

  [[nodiscard]] std::vector<Label> label_set() const;
  [[nodiscard]] bool contains(const Label& label) const;
  [[nodiscard]] const LabelEntry* entry(const Label& label) const;
};

class DeltaGlmb {
 public:
  DeltaGlmb() = default;
  /// Sorts entries by label and checks distinct labels, positive weights and an
  /// injective association on detections. Throws InvalidModelError otherwise.
  explicit DeltaGlmb(std::vector<GlmbHypothesis> hypotheses);

  [[nodiscard]] std::span<const GlmbHypothesis> hypotheses() const noexcept { return hypotheses_; }
  [[nodiscard]] std::size_t size() const noexcept { return hypotheses_.size(); }
  [[nodiscard]] bool empty() const noexcept { return hypotheses_.empty(); }

  /// Scales weights so the heaviest hypothesis has weight 1.
  [[nodiscard]] DeltaGlmb normalized() const;

 private:
  std::vector<GlmbHypothesis> hypotheses_;
};

/// The `max_hypotheses` heaviest label subsets of an LMB, as a normalised delta-GLMB.
///
/// Subset weights factorise over tracks, so the subsets are produced in
/// exact non-increasing weight order by a best-first walk over sorted
/// per-track deviation costs.
[[nodiscard]] DeltaGlmb lmb_to_delta_glmb(const LmbDensity& d, std::size_t max_hypotheses);

/// LMB approximation of a delta-GLMB by per-label maxima over hypotheses.
/// Empty maxima are replaced by kPossibilityFloor.
[[nodiscard]] LmbDensity delta_glmb_to_lmb(const DeltaGlmb& g);

/// max_l gamma_l f_l(x)
[[nodiscard]] double presence_function(const LmbDensity& d, const Vector& x);

/// max over hypotheses and labels of weight * f(x)
[[nodiscard]] double presence_function(const DeltaGlmb& g, const Vector& x);

/// max weight over hypotheses of cardinality n (0 if none).
[[nodiscard]] double cardinality_possibility(const DeltaGlmb& g, std::size_t n);

/// Exact cardinality possibility of the full delta-GLMB expansion of an LMB,
/// for n = 0..|d|.
[[nodiscard]] std::vector<double> cardinality_possibility(const LmbDensity& d);

struct TrackEstimate {
  Label label;
  Vector state;
};

/// MAP cardinality estimate: picks n* maximising the cardinality possibility
/// (smaller n on ties), then reports the dominant mean of each track in the
/// heaviest hypothesis of that size.
[[nodiscard]] std::vector<TrackEstimate> map_estimate(const LmbDensity& d);

}  // namespace plmb
