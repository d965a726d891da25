#include "plmb/assignment.hpp"

#include "plmb/errors.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <utility>

namespace plmb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_costs(const AssociationCostMatrix& cost) {
  if (cost.rows() > cost.cols()) {
    throw ArgumentError("assignment needs rows <= cols, got " + std::to_string(cost.rows()) + "x" +
                        std::to_string(cost.cols()));
  }
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      const double c = cost(i, j);
      if (std::isnan(c) || c == -kInf) {
        throw ArgumentError("assignment cost must be finite or +inf");
      }
    }
  }
}

// Shortest augmenting path with row/column potentials (Kuhn-Munkres in its
// O(n^2 m) form). Forbidden entries are skipped; a row whose search reaches
// no column makes the instance infeasible.
std::optional<Assignment> solve_unchecked(const AssociationCostMatrix& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  if (n == 0) {
    return Assignment{};
  }
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0);
  std::vector<std::size_t> way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) {
          continue;
        }
        const double c = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1));
        if (c != kInf) {
          const double cur = c - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0) {
        return std::nullopt;
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.row_to_col.assign(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) {
      out.row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.cost += cost(static_cast<Eigen::Index>(i), out.row_to_col[i]);
  }
  return out;
}

}  // namespace

std::optional<Assignment> solve_assignment(const AssociationCostMatrix& cost) {
  check_costs(cost);
  return solve_unchecked(cost);
}

std::vector<Assignment> ranked_assignments(const AssociationCostMatrix& cost, std::size_t k) {
  if (k < 1) {
    throw ArgumentError("ranked_assignments needs k >= 1");
  }
  check_costs(cost);
  std::vector<Assignment> out;
  auto best = solve_unchecked(cost);
  if (!best) {
    return out;
  }

  // Each node owns a constrained copy of the cost matrix: rows before
  // `fixed` are locked to their columns of `solution`.
  struct Node {
    Assignment solution;
    AssociationCostMatrix constrained;
    std::size_t fixed = 0;
    std::size_t seq = 0;
  };
  struct Later {
    bool operator()(const Node& a, const Node& b) const {
      if (a.solution.cost != b.solution.cost) {
        return a.solution.cost > b.solution.cost;
      }
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Node, std::vector<Node>, Later> queue;
  std::size_t seq = 0;
  queue.push({std::move(*best), cost, 0, seq++});

  const auto rows = static_cast<std::size_t>(cost.rows());
  while (!queue.empty() && out.size() < k) {
    Node node = queue.top();
    queue.pop();
    AssociationCostMatrix work = node.constrained;
    for (std::size_t r = node.fixed; r < rows; ++r) {
      const int col = node.solution.row_to_col[r];
      AssociationCostMatrix child = work;
      child(static_cast<Eigen::Index>(r), col) = kInf;
      if (auto sol = solve_unchecked(child)) {
        sol->cost = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          sol->cost += cost(static_cast<Eigen::Index>(i), sol->row_to_col[i]);
        }
        queue.push({std::move(*sol), std::move(child), r, seq++});
      }
      // Lock row r to its column for the remaining children.
      for (Eigen::Index j = 0; j < work.cols(); ++j) {
        if (j != col) {
          work(static_cast<Eigen::Index>(r), j) = kInf;
        }
      }
      for (Eigen::Index i = 0; i < work.rows(); ++i) {
        if (i != static_cast<Eigen::Index>(r)) {
          work(i, col) = kInf;
        }
      }
    }
    out.push_back(std::move(node.solution));
  }
  return out;
}

}  // namespace plmb
