#pragma once

// OSPA and its windowed track-level variant.

#include "plmb/possibility.hpp"

#include <optional>
#include <vector>

namespace plmb {

/// OSPA of order p with cutoff c. Both sets empty gives 0.
/// Throws ArgumentError unless c > 0 and p >= 1.
[[nodiscard]] double ospa(const std::vector<Vector>& x, const std::vector<Vector>& y, double c, double p);

/// OSPA from base distances d(i, j) between m and n items; entries are cut at c.
[[nodiscard]] double ospa_from_distances(const Matrix& d, double c, double p);

/// Position of one track at every step; empty where the track does not exist.
using TrackHistory = std::vector<std::optional<Vector>>;

/// OSPA(2): at step k, tracks seen in the trailing window of `window` steps
/// are compared through d(i, j) = (mean over the window of d_c(t)^p)^(1/p),
/// with d_c(t) = min(c, |x_i(t) - y_j(t)|) when both exist, c when one does
/// and 0 when neither does. window = 1 reduces to ospa at every step.
[[nodiscard]] std::vector<double> ospa2_windowed(const std::vector<TrackHistory>& estimated,
                                                 const std::vector<TrackHistory>& truth, int window, double c,
                                                 double p);

}  // namespace plmb
