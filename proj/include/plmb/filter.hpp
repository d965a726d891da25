#pragma once

// Possibility LMB filter: prediction, measurement update, joint
// predict-update and birth models, all with Gaussian max-mixture tracks.

#include "plmb/labeled_ufs.hpp"
#include "plmb/possibility.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace plmb {

using MeasurementSet = std::vector<Vector>;

struct MotionModel {
  Matrix F;
  Matrix Q;                ///< may be positive semi-definite (zero for a deterministic model)
  double survival = 1.0;   ///< lambda_s
  double death = 0.05;     ///< lambda_d; 0 makes death impossible

  /// Constant-velocity model on the state [x, vx, y, vy].
  static MotionModel constant_velocity(double dt, double sigma_q, double survival = 1.0, double death = 0.05);

  /// Throws InvalidModelError / ShapeError if the model is malformed or max(lambda_s, lambda_d) != 1.
  void validate() const;
};

/// Per-axis block sigma_q^2 [[dt^4/4, dt^3/2], [dt^3/2, dt^2]] laid out for [x, vx, y, vy].
[[nodiscard]] Matrix constant_velocity_noise(double dt, double sigma_q);

/// Linear-Gaussian sensor with a Gaussian detection profile around its position.
struct SensorModel {
  int id = 0;
  Matrix H;
  Matrix R;
  Vector position;                ///< sensor location in measurement space
  double sigma_s = 1000.0;        ///< width of the detection profile
  double detect_success = 1.0;    ///< d_s
  double clutter_rate = 10.0;     ///< lambda_fa
  double clutter_volume = 0.0;    ///< V; 0 selects 2 pi sigma_s^2
  /// Overrides the state-dependent detection failure when set.
  std::optional<double> fixed_detection_failure;

  /// Position sensor on [x, vx, y, vy] with R = sigma_r^2 I.
  static SensorModel position_sensor(int id, const Vector& position, double sigma_r, double sigma_s,
                                     double clutter_rate, double clutter_volume = 0.0);

  /// d_f(x) = 1 - N(Hx; position, sigma_s^2 I)
  [[nodiscard]] double detection_failure(const Vector& x) const;

  /// kappa(z) = (1/V) (2 pi)^{m/2} sqrt(det R) lambda_fa N(z; position, sigma_s^2 I)
  [[nodiscard]] double clutter_possibility(const Vector& z) const;
  [[nodiscard]] double log_clutter_possibility(const Vector& z) const;

  void validate() const;
};

enum class BirthMode { fixed, measurement_driven };

struct BirthModel {
  double gamma_b = 1e-3;
  double tau_b = 1.0;
  /// State-space covariance added to the back-projected measurement noise for
  /// measurement-driven births; it must cover the unobserved components.
  Matrix velocity_prior_cov;
  BirthMode mode = BirthMode::measurement_driven;
  double usage_threshold = 0.9;
  /// Measurement-driven births only from measurements inside this box;
  /// empty bounds admit every measurement.
  Vector region_min;
  Vector region_max;
  /// Fixed mode: full state means and their shared covariance.
  std::vector<Vector> locations;
  Matrix location_cov;

  void validate() const;
};

struct FilterParams {
  std::size_t max_hypotheses = 100;
  double gate_threshold = 1e-4;
  MixtureReduction reduction;
};

/// Prediction of an LMB. `omega` < 1 gives the discounted transition
/// (lambda^omega, Q / omega). Births are added as given.
/// Throws DuplicateLabelError if a birth label collides with a survivor.
[[nodiscard]] LmbDensity predict(const LmbDensity& d, const MotionModel& motion, const LmbDensity& birth,
                                 double omega = 1.0);

struct UpdateResult {
  LmbDensity posterior;
  /// Per measurement, the largest normalised weight of a posterior hypothesis assigning it.
  std::vector<double> usage;
};

/// Update through the delta-GLMB expansion: K-best label subsets, then ranked
/// associations per subset with a budget proportional to its weight.
/// Throws DegenerateUpdateError if no hypothesis survives.
[[nodiscard]] UpdateResult update_detailed(const LmbDensity& d, const MeasurementSet& z, const SensorModel& sensor,
                                           const FilterParams& params);
[[nodiscard]] LmbDensity update(const LmbDensity& d, const MeasurementSet& z, const SensorModel& sensor,
                                const FilterParams& params);

/// Update that treats the LMB as a single hypothesis: each track picks a
/// measurement, a miss or absence in one ranked assignment. Tracks are split
/// into clusters that share no gated measurement and solved independently.
[[nodiscard]] UpdateResult update_direct(const LmbDensity& d, const MeasurementSet& z, const SensorModel& sensor,
                                         const FilterParams& params);

[[nodiscard]] UpdateResult joint_predict_update_detailed(const LmbDensity& d, const MeasurementSet& z,
                                                         const MotionModel& motion, const LmbDensity& birth,
                                                         const SensorModel& sensor, const FilterParams& params,
                                                         double omega = 1.0);
[[nodiscard]] LmbDensity joint_predict_update(const LmbDensity& d, const MeasurementSet& z, const MotionModel& motion,
                                              const LmbDensity& birth, const SensorModel& sensor,
                                              const FilterParams& params);

/// One birth track per measurement with usage below the threshold (and inside
/// the birth region, if set), labeled (time, index_offset + j) for the j-th measurement.
[[nodiscard]] LmbDensity adaptive_birth(const MeasurementSet& z_prev, const std::vector<double>& usage,
                                        const BirthModel& birth, const SensorModel& sensor, std::uint32_t time,
                                        std::uint32_t index_offset = 0);

/// One birth track per fixed location, labeled (time, j).
[[nodiscard]] LmbDensity fixed_birth(const BirthModel& birth, std::uint32_t time);

/// Raises every track to the power omega: tau^omega, gamma^omega, f^omega.
[[nodiscard]] LmbDensity discount(const LmbDensity& d, double omega);

/// Drops tracks with gamma below `existence_threshold`, then keeps the
/// `max_tracks` most likely ones.
[[nodiscard]] LmbDensity prune_tracks(const LmbDensity& d, double existence_threshold, std::size_t max_tracks);

}  // namespace plmb
