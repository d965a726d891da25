#include "plmb/metrics.hpp"

#include "plmb/assignment.hpp"
#include "plmb/errors.hpp"

#include <algorithm>
#include <cmath>

namespace plmb {

namespace {

void check(double c, double p) {
  if (!(c > 0.0) || !(p >= 1.0)) {
    throw ArgumentError("OSPA needs c > 0 and p >= 1");
  }
}

double point_distance(const std::optional<Vector>& a, const std::optional<Vector>& b, double c) {
  if (a && b) {
    return std::min(c, (*a - *b).norm());
  }
  return a || b ? c : 0.0;
}

}  // namespace

double ospa_from_distances(const Matrix& d, double c, double p) {
  check(c, p);
  const Eigen::Index m = d.rows();
  const Eigen::Index n = d.cols();
  if (m == 0 && n == 0) {
    return 0.0;
  }
  if (m == 0 || n == 0) {
    return c;
  }
  Matrix cost = d.cwiseMin(c).array().pow(p).matrix();
  if (m > n) {
    cost.transposeInPlace();
  }
  const auto best = solve_assignment(cost);
  const double total = best->cost + std::pow(c, p) * static_cast<double>(std::abs(m - n));
  return std::pow(total / static_cast<double>(std::max(m, n)), 1.0 / p);
}

double ospa(const std::vector<Vector>& x, const std::vector<Vector>& y, double c, double p) {
  Matrix d(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (x[i] - y[j]).norm();
    }
  }
  return ospa_from_distances(d, c, p);
}

std::vector<double> ospa2_windowed(const std::vector<TrackHistory>& estimated, const std::vector<TrackHistory>& truth,
                                   int window, double c, double p) {
  check(c, p);
  if (window < 1) {
    throw ArgumentError("OSPA(2) window must be at least 1");
  }
  std::size_t steps = 0;
  for (const auto* set : {&estimated, &truth}) {
    for (const auto& h : *set) {
      steps = std::max(steps, h.size());
    }
  }
  const auto at = [](const TrackHistory& h, std::size_t t) -> const std::optional<Vector>& {
    static const std::optional<Vector> none;
    return t < h.size() ? h[t] : none;
  };
  const auto seen = [&](const TrackHistory& h, std::size_t from, std::size_t to) {
    for (std::size_t t = from; t <= to; ++t) {
      if (at(h, t)) {
        return true;
      }
    }
    return false;
  };
  std::vector<double> out(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t from = k + 1 >= static_cast<std::size_t>(window) ? k + 1 - static_cast<std::size_t>(window) : 0;
    std::vector<const TrackHistory*> xs;
    std::vector<const TrackHistory*> ys;
    for (const auto& h : estimated) {
      if (seen(h, from, k)) {
        xs.push_back(&h);
      }
    }
    for (const auto& h : truth) {
      if (seen(h, from, k)) {
        ys.push_back(&h);
      }
    }
    Matrix d(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ys.size()));
    const auto span = static_cast<double>(k - from + 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = 0; j < ys.size(); ++j) {
        double acc = 0.0;
        for (std::size_t t = from; t <= k; ++t) {
          acc += std::pow(point_distance(at(*xs[i], t), at(*ys[j], t), c), p);
        }
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::pow(acc / span, 1.0 / p);
      }
    }
    out[k] = ospa_from_distances(d, c, p);
  }
  return out;
}

}  // namespace plmb
