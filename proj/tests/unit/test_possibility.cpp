#include "plmb/errors.hpp"
#include "plmb/possibility.hpp"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace plmb;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) {
    out(i++) = x;
  }
  return out;
}

Matrix random_spd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      a(i, j) = n(rng);
    }
  }
  return a * a.transpose() + 0.3 * Matrix::Identity(d, d);
}

Vector random_vec(std::mt19937_64& rng, int d, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(d);
  for (int i = 0; i < d; ++i) {
    v(i) = n(rng);
  }
  return v;
}

// Direct evaluation, independent of the cached factor inside GaussianComponent.
double direct_eval(double w, const Vector& mean, const Matrix& cov, const Vector& x) {
  const Vector diff = x - mean;
  return w * std::exp(-0.5 * diff.dot(cov.inverse() * diff));
}

}  // namespace

TEST(Possibility, EvalAtMeanIsOne) {
  EXPECT_DOUBLE_EQ(eval_gaussian(vec({1, 2}), vec({1, 2}), Matrix::Identity(2, 2) * 3.0), 1.0);
}

TEST(Possibility, ScalarEvaluation) {
  EXPECT_NEAR(eval_gaussian(vec({1}), vec({0}), Matrix::Identity(1, 1)), 0.6065306597126334, 1e-15);
}

TEST(Possibility, EvaluationIsSymmetric) {
  std::mt19937_64 rng(3);
  const Matrix cov = random_spd(rng, 3);
  const Vector mean = random_vec(rng, 3, 1.0);
  const Vector v = random_vec(rng, 3, 1.0);
  EXPECT_NEAR(eval_gaussian(mean + v, mean, cov), eval_gaussian(mean - v, mean, cov), 1e-15);
}

TEST(Possibility, RejectsBadInputs) {
  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  EXPECT_THROW((void)eval_gaussian(vec({0, 0}), vec({0, 0}), bad), InvalidModelError);
  EXPECT_THROW((void)eval_gaussian(vec({0, 0}), vec({0}), Matrix::Identity(1, 1)), ShapeError);
  EXPECT_THROW(GaussianComponent(0.0, vec({0}), Matrix::Identity(1, 1)), InvalidModelError);
  EXPECT_THROW(GaussianComponent(1.5, vec({0}), Matrix::Identity(1, 1)), InvalidModelError);
  Matrix tiny = Matrix::Identity(2, 2);
  tiny(1, 1) = 1e-14;
  EXPECT_THROW(GaussianComponent(1.0, vec({0, 0}), tiny), InvalidModelError);
}

TEST(Possibility, MixtureEvalTakesTheMax) {
  const MaxMixture m({GaussianComponent(1.0, vec({0}), Matrix::Identity(1, 1)),
                      GaussianComponent(0.5, vec({100}), Matrix::Identity(1, 1))});
  EXPECT_DOUBLE_EQ(mixture_eval(m, vec({0})), 1.0);
  EXPECT_NEAR(mixture_eval(m, vec({100})), 0.5, 1e-12);
  for (double x = -5; x < 105; x += 0.5) {
    EXPECT_GE(mixture_eval(m, vec({x})), m[1].eval(vec({x})));
    EXPECT_GE(mixture_eval(m, vec({x})), m[0].eval(vec({x})));
  }
  EXPECT_THROW((void)mixture_eval(MaxMixture(), vec({0})), EmptyMixtureError);
}

TEST(Possibility, PowerMatchesPointwisePower) {
  std::mt19937_64 rng(11);
  const MaxMixture m({GaussianComponent(1.0, random_vec(rng, 2, 2.0), random_spd(rng, 2)),
                      GaussianComponent(0.4, random_vec(rng, 2, 2.0), random_spd(rng, 2))});
  for (double omega : {0.25, 0.5, 1.0, 2.0}) {
    const MaxMixture p = mixture_power(m, omega);
    for (int k = 0; k < 100; ++k) {
      const Vector x = random_vec(rng, 2, 3.0);
      EXPECT_NEAR(mixture_eval(p, x), std::pow(mixture_eval(m, x), omega), 1e-10);
    }
    EXPECT_DOUBLE_EQ(supremum(p), 1.0);
  }
  const MaxMixture single(GaussianComponent(0.5, vec({1}), Matrix::Identity(1, 1) * 4.0));
  const MaxMixture sq = mixture_power(single, 2.0);
  EXPECT_DOUBLE_EQ(sq[0].weight(), 0.25);
  EXPECT_DOUBLE_EQ(sq[0].cov()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(sq[0].mean()(0), 1.0);
  EXPECT_THROW((void)mixture_power(single, 0.0), InvalidWeightError);
  EXPECT_THROW((void)mixture_power(single, -1.0), InvalidWeightError);
}

TEST(Possibility, ProductOfScalarGaussians) {
  const GaussianComponent a(1.0, vec({0}), Matrix::Identity(1, 1));
  const GaussianComponent b(1.0, vec({2}), Matrix::Identity(1, 1));
  const GaussianComponent p = gaussian_product(a, b);
  EXPECT_NEAR(p.weight(), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(p.mean()(0), 1.0, 1e-15);
  EXPECT_NEAR(p.cov()(0, 0), 0.5, 1e-15);
  // grid oracle
  double worst = 0.0;
  for (double x = -6; x <= 8; x += 0.01) {
    worst = std::max(worst, std::abs(a.eval(vec({x})) * b.eval(vec({x})) - p.eval(vec({x}))));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Possibility, ProductOfIdenticalComponents) {
  std::mt19937_64 rng(5);
  const Matrix cov = random_spd(rng, 3);
  const Vector mean = random_vec(rng, 3, 1.0);
  const GaussianComponent a(1.0, mean, cov);
  const GaussianComponent p = gaussian_product(a, a);
  EXPECT_NEAR(p.weight(), 1.0, 1e-15);
  EXPECT_LT((p.mean() - mean).norm(), 1e-12);
  EXPECT_LT((p.cov() - cov / 2.0).norm(), 1e-12);
}

TEST(Possibility, ProductPointwiseIdentity) {
  std::mt19937_64 rng(17);
  for (int d : {1, 2, 4}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix c1 = random_spd(rng, d);
      const Matrix c2 = random_spd(rng, d);
      const Vector m1 = random_vec(rng, d, 1.0);
      const Vector m2 = random_vec(rng, d, 1.0);
      const GaussianComponent p = gaussian_product(GaussianComponent(0.8, m1, c1), GaussianComponent(0.6, m2, c2));
      for (int k = 0; k < 100; ++k) {
        const Vector x = random_vec(rng, d, 2.0);
        const double lhs = direct_eval(0.8, m1, c1, x) * direct_eval(0.6, m2, c2, x);
        EXPECT_NEAR(lhs, direct_eval(p.weight(), p.mean(), p.cov(), x), 1e-10);
      }
    }
  }
  EXPECT_THROW((void)gaussian_product(GaussianComponent(1.0, vec({0}), Matrix::Identity(1, 1)),
                                      GaussianComponent(1.0, vec({0, 0}), Matrix::Identity(2, 2))),
               ShapeError);
}

TEST(Possibility, MixtureProductAndSupremum) {
  std::mt19937_64 rng(23);
  std::vector<GaussianComponent> ca;
  std::vector<GaussianComponent> cb;
  ca.emplace_back(1.0, random_vec(rng, 2, 1.0), random_spd(rng, 2));
  ca.emplace_back(0.7, random_vec(rng, 2, 1.0), random_spd(rng, 2));
  cb.emplace_back(1.0, random_vec(rng, 2, 1.0), random_spd(rng, 2));
  cb.emplace_back(0.2, random_vec(rng, 2, 1.0), random_spd(rng, 2));
  cb.emplace_back(0.9, random_vec(rng, 2, 1.0), random_spd(rng, 2));
  const MaxMixture a(ca);
  const MaxMixture b(cb);
  const MaxMixture p = mixture_product(a, b);
  ASSERT_EQ(p.size(), 6u);
  for (int k = 0; k < 100; ++k) {
    const Vector x = random_vec(rng, 2, 2.0);
    EXPECT_NEAR(mixture_eval(p, x), mixture_eval(a, x) * mixture_eval(b, x), 1e-10);
  }
  // The supremum is exact: a fine lattice never beats it and gets close to it.
  const double sup = supremum(p);
  double grid_max = 0.0;
  for (double x = -6; x <= 6; x += 0.01) {
    for (double y = -6; y <= 6; y += 0.01) {
      grid_max = std::max(grid_max, mixture_eval(p, vec({x, y})));
    }
  }
  EXPECT_LE(grid_max, sup + 1e-9);
  EXPECT_GT(grid_max, sup - 1e-3);
}

TEST(Possibility, SupremumAndNormalize) {
  const MaxMixture m({GaussianComponent(0.2, vec({0}), Matrix::Identity(1, 1)),
                      GaussianComponent(1.0, vec({5}), Matrix::Identity(1, 1)),
                      GaussianComponent(0.7, vec({9}), Matrix::Identity(1, 1))});
  EXPECT_DOUBLE_EQ(supremum(m), 1.0);
  const auto same = normalize(m);
  EXPECT_DOUBLE_EQ(same.factor, 1.0);
  EXPECT_DOUBLE_EQ(same.mixture[2].weight(), 0.7);

  const MaxMixture half({GaussianComponent(0.5, vec({0}), Matrix::Identity(1, 1)),
                         GaussianComponent(0.25, vec({3}), Matrix::Identity(1, 1))});
  const auto n = normalize(half);
  EXPECT_DOUBLE_EQ(n.factor, 0.5);
  EXPECT_DOUBLE_EQ(n.mixture[0].weight(), 1.0);
  EXPECT_DOUBLE_EQ(n.mixture[1].weight(), 0.5);
  const auto twice = normalize(n.mixture);
  EXPECT_DOUBLE_EQ(twice.factor, 1.0);
  EXPECT_DOUBLE_EQ(twice.mixture[1].weight(), 0.5);
  EXPECT_THROW((void)supremum(MaxMixture()), EmptyMixtureError);
}

TEST(Possibility, PruneKeepsDominant) {
  const MaxMixture m({GaussianComponent(1.0, vec({0}), Matrix::Identity(1, 1)),
                      GaussianComponent(1e-4, vec({5}), Matrix::Identity(1, 1))});
  EXPECT_EQ(prune(m, 1e-3).size(), 1u);
  EXPECT_EQ(prune(m, 1e-5).size(), 2u);
  const MaxMixture low(GaussianComponent(1e-5, vec({0}), Matrix::Identity(1, 1)));
  EXPECT_EQ(prune(low, 1e-3).size(), 1u);
  EXPECT_DOUBLE_EQ(supremum(prune(m, 1e-3)), supremum(m));
}

TEST(Possibility, HellingerDistance) {
  const GaussianComponent a(1.0, vec({0, 0}), Matrix::Identity(2, 2));
  EXPECT_NEAR(hellinger_distance(a, a), 0.0, 1e-12);
  const GaussianComponent far(0.3, vec({100, 0}), Matrix::Identity(2, 2));
  EXPECT_NEAR(hellinger_distance(a, far), 1.0, 1e-12);
  // 1-d closed form: BC = sqrt(2 s1 s2 / (s1^2 + s2^2)) exp(-(m1-m2)^2 / (4 (s1^2 + s2^2)))
  const GaussianComponent b(1.0, vec({1}), Matrix::Identity(1, 1) * 4.0);
  const GaussianComponent c(1.0, vec({0}), Matrix::Identity(1, 1));
  const double bc = std::sqrt(2.0 * 2.0 * 1.0 / 5.0) * std::exp(-1.0 / 20.0);
  EXPECT_NEAR(hellinger_distance(b, c), std::sqrt(1.0 - bc), 1e-12);
}

TEST(Possibility, MergeBehaviour) {
  const GaussianComponent a(1.0, vec({0}), Matrix::Identity(1, 1));
  const MaxMixture twins({a, a.with_weight(0.5)});
  const MaxMixture merged = merge(twins, 0.1);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_DOUBLE_EQ(merged[0].weight(), 1.0);
  EXPECT_NEAR(merged[0].mean()(0), 0.0, 1e-15);
  EXPECT_NEAR(merged[0].cov()(0, 0), 1.0, 1e-15);

  const MaxMixture apart({a, GaussianComponent(0.5, vec({50}), Matrix::Identity(1, 1))});
  EXPECT_EQ(merge(apart, 0.1).size(), 2u);

  // Moment match of two close components, masses 1 and 0.5.
  const MaxMixture close({a, GaussianComponent(0.5, vec({0.1}), Matrix::Identity(1, 1))});
  const MaxMixture mc = merge(close, 0.1);
  ASSERT_EQ(mc.size(), 1u);
  const double mean = 0.5 * 0.1 / 1.5;
  EXPECT_NEAR(mc[0].mean()(0), mean, 1e-14);
  const double var = (1.0 * (1.0 + mean * mean) + 0.5 * (1.0 + (0.1 - mean) * (0.1 - mean))) / 1.5;
  EXPECT_NEAR(mc[0].cov()(0, 0), var, 1e-14);

  std::mt19937_64 rng(2);
  std::vector<GaussianComponent> many;
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 20; ++i) {
    many.emplace_back(u(rng), random_vec(rng, 2, 0.3), random_spd(rng, 2));
  }
  const MaxMixture big(many);
  const MaxMixture r = merge(big, 0.1);
  EXPECT_LE(r.size(), big.size());
  EXPECT_DOUBLE_EQ(supremum(r), supremum(big));
}

TEST(Possibility, CapKeepsHeaviest) {
  std::vector<GaussianComponent> comps;
  for (int i = 0; i < 40; ++i) {
    comps.emplace_back(1.0 / (1.0 + i), vec({10.0 * i}), Matrix::Identity(1, 1));
  }
  const MaxMixture capped = cap(MaxMixture(comps), 30);
  ASSERT_EQ(capped.size(), 30u);
  EXPECT_DOUBLE_EQ(capped[29].weight(), 1.0 / 30.0);
  const MaxMixture reduced = reduce(MaxMixture(comps), MixtureReduction{});
  EXPECT_LE(reduced.size(), 30u);
}

TEST(Possibility, MergeGroupsMatchPlainGreedyPass) {
  // reference: the greedy pass with the Hellinger test on every pair
  const auto reference = [](const MaxMixture& m, double t) {
    std::vector<std::size_t> order(m.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return m[i].weight() > m[j].weight(); });
    std::vector<bool> used(m.size(), false);
    std::vector<std::size_t> sizes;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      if (used[order[oi]]) continue;
      used[order[oi]] = true;
      std::size_t n = 1;
      for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
        if (!used[order[oj]] && hellinger_distance(m[order[oi]], m[order[oj]]) < t) {
          used[order[oj]] = true;
          ++n;
        }
      }
      sizes.push_back(n);
    }
    return sizes;
  };
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<GaussianComponent> comps;
    for (int i = 0; i < 25; ++i) {
      comps.emplace_back(u(rng), random_vec(rng, 4, trial % 3 == 0 ? 0.2 : 3.0), random_spd(rng, 4));
    }
    const MaxMixture m(comps);
    for (double t : {0.1, 0.5, 0.9}) {
      EXPECT_EQ(merge(m, t).size(), reference(m, t).size()) << trial << " " << t;
    }
  }
}

TEST(Possibility, PrunedProductMatchesFullProduct) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<GaussianComponent> ca, cb;
    for (int i = 0; i < 6; ++i) {
      ca.emplace_back(u(rng), random_vec(rng, 2, 4.0), random_spd(rng, 2));
      cb.emplace_back(u(rng), random_vec(rng, 2, 4.0), random_spd(rng, 2));
    }
    const MaxMixture a(ca), b(cb);
    const NormalizedMixture full = normalize(mixture_product(a, b));
    const MaxMixture expected = prune(full.mixture, 1e-2);
    const NormalizedMixture got = pruned_product(a, b, 1e-2);
    EXPECT_EQ(got.factor, full.factor);
    ASSERT_EQ(got.mixture.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_EQ(got.mixture[i].weight(), expected[i].weight());
      EXPECT_EQ(got.mixture[i].mean(), expected[i].mean());
      EXPECT_EQ(got.mixture[i].cov(), expected[i].cov());
    }
    for (std::size_t i = 0; i < ca.size(); ++i) {
      EXPECT_EQ(gaussian_product_weight(ca[i], cb[i]), gaussian_product(ca[i], cb[i]).weight());
    }
  }
}
