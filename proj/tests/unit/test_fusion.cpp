#include "plmb/errors.hpp"
#include "plmb/fusion.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace plmb;
using plmb::oracle::vec;

namespace {

MaxMixture random_mixture(std::mt19937_64& rng, int d, int comps) {
  std::normal_distribution<double> n(0.0, 1.5);
  std::uniform_real_distribution<double> w(0.2, 1.0);
  std::vector<GaussianComponent> out;
  for (int k = 0; k < comps; ++k) {
    Matrix a(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        a(i, j) = 0.6 * n(rng);
      }
    }
    Vector mean(d);
    for (int i = 0; i < d; ++i) {
      mean(i) = n(rng);
    }
    out.emplace_back(k == 0 ? 1.0 : w(rng), mean, a * a.transpose() + 0.4 * Matrix::Identity(d, d));
  }
  return MaxMixture(std::move(out));
}

BernoulliTrack random_track(std::mt19937_64& rng, std::uint32_t index, int d) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::bernoulli_distribution coin(0.5);
  const bool exists = coin(rng);
  return {{0, index}, exists ? u(rng) : 1.0, exists ? 1.0 : u(rng), random_mixture(rng, d, 1 + static_cast<int>(index % 2))};
}

// Grid over [-8, 8]^d with the given step.
template <typename F>
void for_grid(int d, double step, F&& fn) {
  Vector x(d);
  if (d == 1) {
    for (double a = -8; a <= 8; a += step) {
      x << a;
      fn(x);
    }
  } else {
    for (double a = -8; a <= 8; a += step) {
      for (double b = -8; b <= 8; b += step) {
        x << a, b;
        fn(x);
      }
    }
  }
}

}  // namespace

TEST(Fusion, WeightVectorModes) {
  EXPECT_NO_THROW(FusionWeightVector({1.0, 0.3}, WeightMode::max_one));
  EXPECT_NO_THROW(FusionWeightVector({0.25, 0.75}, WeightMode::sum_one));
  EXPECT_THROW(FusionWeightVector({0.5, 0.3}, WeightMode::max_one), InvalidWeightError);
  EXPECT_THROW(FusionWeightVector({0.5, 0.3}, WeightMode::sum_one), InvalidWeightError);
  EXPECT_THROW(FusionWeightVector({1.5, 1.0}, WeightMode::max_one), InvalidWeightError);
  EXPECT_EQ(FusionWeightVector::uniform(4)[2], 0.25);
}

TEST(Fusion, ConsensusOfIdenticalTracksIsIdentity) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const BernoulliTrack t = random_track(rng, static_cast<std::uint32_t>(trial), 2);
    const FusedTrack f = fuse_tracks_detailed(t, t, 0.3, 0.7);
    EXPECT_NEAR(f.eta_f, 1.0, 1e-12);
    EXPECT_NEAR(f.track.tau, t.tau, 1e-12);
    EXPECT_NEAR(f.track.gamma, t.gamma, 1e-12);
    EXPECT_LT(oracle::mixture_gap(f.track.f, t.f, rng), 1e-12);
  }
}

TEST(Fusion, IndependentFusionOfIdenticalTracks) {
  const BernoulliTrack t{{0, 0}, 0.5, 1.0, MaxMixture(GaussianComponent(1.0, vec({2.0}), Matrix::Identity(1, 1) * 4.0))};
  const BernoulliTrack f = fuse_tracks(t, t, 1.0, 1.0);
  EXPECT_NEAR(f.f[0].mean()(0), 2.0, 1e-15);
  EXPECT_NEAR(f.f[0].cov()(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(f.tau, 0.25, 1e-15);
  EXPECT_NEAR(f.gamma, 1.0, 1e-15);
}

TEST(Fusion, DisagreementDampsExistence) {
  const auto at = [](double mean) {
    return BernoulliTrack{{0, 0}, 0.5, 1.0, MaxMixture(GaussianComponent(1.0, vec({mean}), Matrix::Identity(1, 1)))};
  };
  const FusedTrack agree = fuse_tracks_detailed(at(0.0), at(0.0), 1.0, 1.0);
  const FusedTrack apart = fuse_tracks_detailed(at(0.0), at(4.0), 1.0, 1.0);
  // eta_f = N(0; 4, 2) = exp(-4)
  EXPECT_NEAR(apart.eta_f, std::exp(-4.0), 1e-15);
  EXPECT_LT(apart.eta_f, 0.1);
  EXPECT_LT(apart.track.gamma / apart.track.tau, agree.track.gamma / agree.track.tau);
}

TEST(Fusion, FusedMixtureMatchesGrid) {
  std::mt19937_64 rng(43);
  for (int d : {1, 2}) {
    for (int trial = 0; trial < 6; ++trial) {
      const BernoulliTrack a = random_track(rng, 0, d);
      const BernoulliTrack b = random_track(rng, 1, d);
      for (const auto& [wa, wb] : {std::pair{1.0, 1.0}, std::pair{0.4, 0.6}, std::pair{1.0, 0.3}}) {
        const FusedTrack f = fuse_tracks_detailed(a, b, wa, wb);
        double worst = 0.0;
        double grid_sup = 0.0;
        for_grid(d, d == 1 ? 0.002 : 0.02, [&](const Vector& x) {
          const double raw = std::pow(mixture_eval(a.f, x), wa) * std::pow(mixture_eval(b.f, x), wb);
          grid_sup = std::max(grid_sup, raw);
          worst = std::max(worst, std::abs(raw / f.eta_f - mixture_eval(f.track.f, x)));
        });
        EXPECT_LT(worst, 1e-8);
        EXPECT_LE(grid_sup, f.eta_f + 1e-12);
        EXPECT_NEAR(grid_sup, f.eta_f, 1e-3);
      }
    }
  }
}

TEST(Fusion, LabeledProductIdentity) {
  // pi(X) = prod_{l in X} gamma_l f_l(x_l) prod_{l not in X} tau_l, fused pointwise.
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  const auto pi = [](const LmbDensity& d, const std::vector<std::optional<double>>& x) {
    double v = 1.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      v *= x[i] ? d[i].gamma * mixture_eval(d[i].f, vec({*x[i]})) : d[i].tau;
    }
    return v;
  };
  for (int trial = 0; trial < 10; ++trial) {
    const LmbDensity a({random_track(rng, 0, 1), random_track(rng, 1, 1)});
    const LmbDensity b({random_track(rng, 0, 1), random_track(rng, 1, 1)});
    const double wa = 0.6;
    const double wb = 0.4;
    const LmbDensity fused = fuse_lmb_shared_labels({a, b}, FusionWeightVector({wa, wb}, WeightMode::sum_one));
    // Normaliser: per-label sup via a fine grid.
    double norm = 1.0;
    for (std::size_t i = 0; i < 2; ++i) {
      double sup_f = 0.0;
      for (double x = -10; x <= 10; x += 0.001) {
        sup_f = std::max(sup_f, std::pow(mixture_eval(a[i].f, vec({x})), wa) *
                                    std::pow(mixture_eval(b[i].f, vec({x})), wb));
      }
      norm *= std::max(std::pow(a[i].tau, wa) * std::pow(b[i].tau, wb),
                       std::pow(a[i].gamma, wa) * std::pow(b[i].gamma, wb) * sup_f);
    }
    for (int k = 0; k < 50; ++k) {
      std::vector<std::optional<double>> x(2);
      for (auto& xi : x) {
        if (rng() % 2) {
          xi = pos(rng);
        }
      }
      const double expected = std::pow(pi(a, x), wa) * std::pow(pi(b, x), wb) / norm;
      EXPECT_NEAR(pi(fused, x), expected, 1e-6);
    }
  }
}

TEST(Fusion, SharedLabelFusion) {
  std::mt19937_64 rng(53);
  const LmbDensity d({random_track(rng, 0, 2), random_track(rng, 1, 2)});
  EXPECT_THROW((void)fuse_lmb_shared_labels({}, FusionWeightVector::independent(1)), ArgumentError);
  EXPECT_THROW((void)fuse_lmb_shared_labels({d}, FusionWeightVector::independent(2)), ArgumentError);

  const LmbDensity same = fuse_lmb_shared_labels({d}, FusionWeightVector({1.0}, WeightMode::max_one));
  EXPECT_DOUBLE_EQ(same[0].tau, d[0].tau);

  const LmbDensity avg = fuse_lmb_shared_labels({d, d, d}, FusionWeightVector::uniform(3));
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(avg[i].tau, d[i].tau, 1e-12);
    EXPECT_NEAR(avg[i].gamma, d[i].gamma, 1e-12);
    EXPECT_LT(oracle::mixture_gap(avg[i].f, d[i].f, rng), 1e-12);
  }

  const LmbDensity one_a({random_track(rng, 0, 2)});
  const LmbDensity one_b({random_track(rng, 0, 2)});
  const LmbDensity both = fuse_lmb_shared_labels({one_a, one_b}, FusionWeightVector::independent(2));
  const BernoulliTrack direct = fuse_tracks(one_a[0], one_b[0], 1.0, 1.0);
  EXPECT_DOUBLE_EQ(both[0].tau, direct.tau);
  EXPECT_DOUBLE_EQ(both[0].gamma, direct.gamma);

  // A label known to one node only is padded as nearly certainly absent elsewhere.
  const LmbDensity only({BernoulliTrack{{5, 0}, 1e-3, 1.0, random_mixture(rng, 2, 1)}});
  const LmbDensity padded = fuse_lmb_shared_labels({only, one_b}, FusionWeightVector::independent(2));
  ASSERT_EQ(padded.size(), 2u);
  const auto* t = padded.find({5, 0});
  ASSERT_NE(t, nullptr);
  EXPECT_DOUBLE_EQ(t->tau, 1.0);
  EXPECT_LT(t->gamma, 1e-5);
}

TEST(Fusion, MatchFarApartTracks) {
  const auto at = [](std::uint32_t idx, double x) {
    return BernoulliTrack{{1, idx}, 0.1, 1.0, MaxMixture(GaussianComponent(1.0, vec({x, 0}), Matrix::Identity(2, 2)))};
  };
  const LmbDensity a({at(0, 0.0), at(1, 100.0)});
  const LmbDensity b({at(0, 300.0)});
  MatchConfig cfg;
  LabelIssuer issuer(1000);
  const LmbDensity out = match_and_fuse(a, b, cfg, issuer);
  EXPECT_EQ(out.size(), 3u);
  for (const auto& t : out) {
    EXPECT_GE(t.label.index, 1000u);
    EXPECT_NO_THROW(validate_track(t, 1e-12));
  }
  const AssociationSolution sol = associate_tracks(a, b, cfg);
  EXPECT_TRUE(sol.pairs.empty());
  EXPECT_EQ(sol.unmatched_left.size(), 2u);
  EXPECT_EQ(sol.unmatched_right.size(), 1u);
}

TEST(Fusion, MatchIdenticalTracks) {
  const BernoulliTrack t{{2, 0}, 0.2, 1.0, MaxMixture(GaussianComponent(1.0, vec({3, 4}), Matrix::Identity(2, 2)))};
  MatchConfig cfg;
  cfg.missed_by_b.detection_failure = [](const Vector&) { return 0.5; };
  LabelIssuer issuer;
  const LmbDensity out = match_and_fuse(LmbDensity({t}), LmbDensity({t}), cfg, issuer);
  ASSERT_EQ(out.size(), 1u);
  const BernoulliTrack expected = fuse_tracks(t, t, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(out[0].tau, expected.tau);
  EXPECT_DOUBLE_EQ(out[0].gamma, expected.gamma);
  EXPECT_EQ(out[0].label, (Label{2, 0}));
  EXPECT_EQ(issuer.issued(), 1u);
}

TEST(Fusion, MatchMatchesExhaustiveAssignment) {
  std::mt19937_64 rng(59);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<BernoulliTrack> ta;
    std::vector<BernoulliTrack> tb;
    for (std::uint32_t i = 0; i < 2; ++i) {
      ta.push_back({{0, i}, 0.3, 1.0, MaxMixture(GaussianComponent(1.0, vec({n(rng), n(rng)}), Matrix::Identity(2, 2)))});
      tb.push_back({{0, i}, 1.0, 0.8, MaxMixture(GaussianComponent(1.0, vec({n(rng), n(rng)}), Matrix::Identity(2, 2)))});
    }
    const LmbDensity a(ta);
    const LmbDensity b(tb);
    MatchConfig cfg;
    cfg.missed_by_b.detection_failure = [](const Vector&) { return 0.3; };
    // Exhaustive: each left track picks a distinct right track or its miss.
    const auto cost = [&](std::size_t i, int j) {
      if (j < 0) {
        return -std::log(a[i].gamma * 0.3);
      }
      const double eta = fuse_tracks_detailed(a[i], b[static_cast<std::size_t>(j)], 1.0, 1.0).eta_f;
      if (eta < cfg.association_threshold) {
        return std::numeric_limits<double>::infinity();
      }
      return -std::log(a[i].gamma * b[static_cast<std::size_t>(j)].gamma * eta);
    };
    double best = std::numeric_limits<double>::infinity();
    for (int j0 = -1; j0 < 2; ++j0) {
      for (int j1 = -1; j1 < 2; ++j1) {
        if (j0 >= 0 && j0 == j1) {
          continue;
        }
        best = std::min(best, cost(0, j0) + cost(1, j1));
      }
    }
    const AssociationSolution sol = associate_tracks(a, b, cfg);
    double got = 0.0;
    for (const auto& [i, j] : sol.pairs) {
      got += cost(i, static_cast<int>(j));
    }
    for (std::size_t i : sol.unmatched_left) {
      got += cost(i, -1);
    }
    EXPECT_NEAR(got, best, 1e-12);
  }
}

TEST(Fusion, KeepLeftLabels) {
  const BernoulliTrack t{{2, 7}, 0.2, 1.0, MaxMixture(GaussianComponent(1.0, vec({3, 4}), Matrix::Identity(2, 2)))};
  const BernoulliTrack far{{2, 9}, 0.2, 1.0, MaxMixture(GaussianComponent(1.0, vec({300, 4}), Matrix::Identity(2, 2)))};
  MatchConfig cfg;
  cfg.labels = LabelPolicy::keep_left;
  cfg.omega_a = 0.5;
  cfg.omega_b = 0.5;
  LabelIssuer issuer(50);
  const LmbDensity out = match_and_fuse(LmbDensity({t}), LmbDensity({t, far}), cfg, issuer);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out.contains({2, 7}));
  EXPECT_TRUE(out.contains({2, 50}));
}

TEST(Fusion, MissFusion) {
  const BernoulliTrack t{{0, 0}, 1e-3, 1.0, MaxMixture(GaussianComponent(1.0, vec({0, 0}), Matrix::Identity(2, 2)))};
  MissedDetectionModel miss;
  miss.detection_failure = [](const Vector&) { return 0.25; };
  const BernoulliTrack f = fuse_with_miss(t, miss, 1.0, 1.0);
  EXPECT_NEAR(f.gamma, 1.0, 1e-15);
  EXPECT_NEAR(f.tau, 4e-3, 1e-15);
  EXPECT_DOUBLE_EQ(MissedDetectionModel{}.gamma_at(vec({0, 0})), 1.0);
}
