#include "plmb/errors.hpp"
#include "plmb/network.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace plmb;
using plmb::oracle::vec;

namespace {

BernoulliTrack track(Label l, double tau, double gamma, const Vector& mean, double var = 100.0) {
  return {l, tau, gamma, MaxMixture({GaussianComponent(1.0, mean, Matrix::Identity(4, 4) * var)})};
}

SensorGraph random_connected(std::mt19937_64& rng, std::size_t n) {
  // random spanning tree plus extra edges
  std::vector<SensorGraph::Edge> e;
  for (std::size_t i = 1; i < n; ++i) {
    e.emplace_back(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i);
  }
  std::bernoulli_distribution extra(0.3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool present = std::any_of(e.begin(), e.end(), [&](const auto& p) {
        return std::min(p.first, p.second) == i && std::max(p.first, p.second) == j;
      });
      if (!present && extra(rng)) {
        e.emplace_back(i, j);
      }
    }
  }
  return SensorGraph(n, e);
}

TrackerConfig quiet_config() {
  TrackerConfig cfg;
  cfg.existence_threshold = 0.0;
  cfg.birth.velocity_prior_cov = Matrix::Identity(4, 4) * 100.0;
  return cfg;
}

std::vector<SensorModel> sensors_at(std::size_t n) {
  std::vector<SensorModel> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(SensorModel::position_sensor(static_cast<int>(i), vec({100.0 * static_cast<double>(i), 0.0}), 5.0,
                                               500.0, 2.0));
  }
  return out;
}

}  // namespace

TEST(Graph, Constructors) {
  EXPECT_EQ(SensorGraph::ring(4).edges().size(), 4u);
  EXPECT_EQ(SensorGraph::ring(2).edges().size(), 1u);
  EXPECT_EQ(SensorGraph::line(4).edges().size(), 3u);
  EXPECT_EQ(SensorGraph::complete(5).edges().size(), 10u);
  EXPECT_EQ(SensorGraph::star(5).neighbors(0).size(), 5u);
  EXPECT_EQ(SensorGraph::star(5).neighbors(3), (std::vector<std::size_t>{0, 3}));
  EXPECT_TRUE(SensorGraph::ring(6).has_edge(5, 0));
  EXPECT_FALSE(SensorGraph::line(3).has_edge(0, 2));
  EXPECT_FALSE(SensorGraph(3, {{0, 1}}).is_connected());
  EXPECT_THROW(SensorGraph(0), TopologyError);
  EXPECT_THROW(SensorGraph(2, {{0, 0}}), TopologyError);
  EXPECT_THROW(SensorGraph(2, {{0, 2}}), TopologyError);
  EXPECT_THROW(SensorGraph(2, {{0, 1}, {1, 0}}), TopologyError);
}

TEST(Graph, FileRoundTrip) {
  std::mt19937_64 rng(3);
  for (std::size_t n = 1; n < 9; ++n) {
    const SensorGraph g = random_connected(rng, n);
    std::stringstream ss;
    g.write(ss);
    const SensorGraph back = SensorGraph::parse(ss);
    EXPECT_EQ(back.size(), g.size());
    EXPECT_EQ(back.edges(), g.edges());
  }
  std::stringstream canonical;
  SensorGraph::ring(3).write(canonical);
  EXPECT_EQ(canonical.str(), "3\n0 1\n0 2\n1 2\n");
}

TEST(Graph, ParseTolerance) {
  std::istringstream in("# comment\r\n\n 4 \n0\t1\n  2 1\r\n# edge 3\n3 0\n");
  const SensorGraph g = SensorGraph::parse(in);
  EXPECT_EQ(g.size(), 4u);
  EXPECT_EQ(g.edges(), (std::vector<SensorGraph::Edge>{{0, 1}, {0, 3}, {1, 2}}));
}

TEST(Graph, ParseErrors) {
  for (const char* bad : {"", "# only\n", "3 1\n", "x\n", "3\n0\n", "3\n0 1 2\n", "3\n0 -1\n", "3\n0 3\n",
                          "3\n1 1\n", "3\n0 1\n1 0\n", "3\n0 1x\n", "+3\n"}) {
    std::istringstream in(bad);
    EXPECT_THROW((void)SensorGraph::parse(in), TopologyError) << bad;
  }
  EXPECT_THROW((void)SensorGraph::read("/nonexistent/topology.txt"), FileError);
}

TEST(Metropolis, TwoNodes) {
  const Matrix w = metropolis_weights(SensorGraph::line(2));
  EXPECT_DOUBLE_EQ(w(0, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(w(0, 0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(w(1, 1), 2.0 / 3.0);
}

TEST(Metropolis, SingleNode) {
  const Matrix w = metropolis_weights(SensorGraph(1));
  ASSERT_EQ(w.rows(), 1);
  EXPECT_EQ(w(0, 0), 1.0);
}

TEST(Metropolis, Star) {
  // hub has |V| = 5, leaves 2: every spoke weighs 1/6
  const Matrix w = metropolis_weights(SensorGraph::star(5));
  for (int i = 1; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(w(0, i), 1.0 / 6.0);
    EXPECT_DOUBLE_EQ(w(i, i), 5.0 / 6.0);
  }
  EXPECT_NEAR(w(0, 0), 1.0 / 3.0, 1e-15);
}

TEST(Metropolis, DoublyStochasticOnRandomGraphs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const SensorGraph g = random_connected(rng, 1 + static_cast<std::size_t>(trial % 10));
    const Matrix w = metropolis_weights(g);
    EXPECT_LT((w - w.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LT((w.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LT((w.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (i != j && !g.has_edge(i, j)) {
          EXPECT_EQ(w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 0.0);
        }
      }
    }
  }
}

TEST(Metropolis, DisconnectedThrows) {
  EXPECT_THROW((void)metropolis_weights(SensorGraph(3, {{0, 1}})), TopologyError);
}

TEST(Consensus, ScalarContraction) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const SensorGraph g = random_connected(rng, 2 + static_cast<std::size_t>(trial % 7));
    const Matrix w = metropolis_weights(g);
    Vector x(static_cast<Eigen::Index>(g.size()));
    for (auto& v : x) {
      v = u(rng);
    }
    for (int sweep = 0; sweep < 10; ++sweep) {
      const Vector next = w * x;
      EXPECT_LE(next.maxCoeff() - next.minCoeff(), x.maxCoeff() - x.minCoeff() + 1e-12);
      x = next;
    }
  }
}

TEST(Consensus, IdenticalPosteriorsAreFixed) {
  const std::size_t n = 4;
  const SensorGraph g = SensorGraph::complete(n);
  const auto sensors = sensors_at(n);
  const TrackerConfig cfg = quiet_config();
  const LmbDensity d({track({1, 0}, 0.3, 1.0, vec({0, 1, 0, 1})), track({2, 0}, 1.0, 0.2, vec({50, 0, 9, 0}))});
  std::vector<LabelIssuer> issuers(n);
  const auto out = consensus_sweep(std::vector<LmbDensity>(n, d), g, metropolis_weights(g), sensors, cfg, issuers);
  for (const auto& node : out) {
    ASSERT_EQ(node.size(), d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      EXPECT_EQ(node[k].label, d[k].label);
      EXPECT_NEAR(node[k].tau, d[k].tau, 1e-12);
      EXPECT_NEAR(node[k].gamma, d[k].gamma, 1e-12);
      const Vector x = vec({3, 0, -2, 1});
      EXPECT_NEAR(mixture_eval(node[k].f, x), mixture_eval(d[k].f, x), 1e-12);
    }
  }
}

TEST(Consensus, LineGraphConverges) {
  const std::size_t n = 3;
  const SensorGraph g = SensorGraph::line(n);
  const auto sensors = sensors_at(n);
  const TrackerConfig cfg = quiet_config();
  const Label l{1, 0};
  std::vector<LmbDensity> nodes = {LmbDensity({track(l, 1.0, 0.1, vec({0, 0, 0, 0}))}),
                                   LmbDensity({track(l, 0.5, 1.0, vec({30, 0, 0, 0}))}),
                                   LmbDensity({track(l, 1.0, 0.9, vec({60, 0, 10, 0}))})};
  std::vector<LabelIssuer> issuers(n);
  const Matrix w = metropolis_weights(g);
  const auto spread = [&](const std::vector<LmbDensity>& ds) {
    double lo_r = 1e300, hi_r = -1e300, lo_x = 1e300, hi_x = -1e300;
    for (const auto& d : ds) {
      const auto& t = d[0];
      const double r = std::log(t.gamma) - std::log(t.tau);
      lo_r = std::min(lo_r, r);
      hi_r = std::max(hi_r, r);
      lo_x = std::min(lo_x, t.f.dominant().mean()(0));
      hi_x = std::max(hi_x, t.f.dominant().mean()(0));
    }
    return std::make_pair(hi_r - lo_r, hi_x - lo_x);
  };
  auto [r0, x0] = spread(nodes);
  const auto [r_start, x_start] = spread(nodes);
  // second eigenvalue of the line-of-3 Metropolis matrix is 3/4
  for (int sweep = 0; sweep < 40; ++sweep) {
    nodes = consensus_sweep(nodes, g, w, sensors, cfg, issuers);
    ASSERT_EQ(nodes[0].size(), 1u);
    const auto [r, x] = spread(nodes);
    EXPECT_LE(r, r0 + 1e-9);
    EXPECT_LE(x, x0 + 1e-9);
    r0 = r;
    x0 = x;
  }
  EXPECT_LT(r0, 1e-3 * r_start);
  EXPECT_LT(x0, 1e-3 * x_start);
}

TEST(Consensus, UnsharedTracksMeetUnderTheSmallerLabel) {
  const std::size_t n = 2;
  const SensorGraph g = SensorGraph::line(n);
  const auto sensors = sensors_at(n);
  const TrackerConfig cfg = quiet_config();
  std::vector<LmbDensity> nodes = {LmbDensity({track({3, 100000}, 0.2, 1.0, vec({10, 0, 10, 0}))}),
                                   LmbDensity({track({3, 200000}, 0.2, 1.0, vec({12, 0, 9, 0}))})};
  std::vector<LabelIssuer> issuers = {LabelIssuer(kIssuerLabelBand), LabelIssuer(2 * kIssuerLabelBand)};
  nodes = consensus_sweep(nodes, g, metropolis_weights(g), sensors, cfg, issuers);
  for (const auto& d : nodes) {
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].label, (Label{3, 100000}));
  }
}

TEST(Centralized, SingleSensorEqualsPlainStep) {
  std::mt19937_64 rng(21);
  TrackerConfig cfg = quiet_config();
  cfg.existence_threshold = 1e-4;
  const auto sensors = sensors_at(1);
  const MotionModel& motion = cfg.motion;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = oracle::random_instance(rng, false);
    CentralizedState state;
    state.density = inst.prior;
    std::vector<MeasurementSet> z = {inst.z};
    const LmbDensity& out = centralized_step(state, z, {inst.sensor}, cfg, 5);
    const LmbDensity plain = prune_tracks(update_direct(predict(inst.prior, motion, {}), inst.z, inst.sensor,
                                                        cfg.filter).posterior,
                                          cfg.existence_threshold, cfg.max_tracks);
    ASSERT_EQ(out.size(), plain.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      EXPECT_EQ(out[k].label, plain[k].label);
      EXPECT_NEAR(out[k].tau, plain[k].tau, 1e-12);
      EXPECT_NEAR(out[k].gamma, plain[k].gamma, 1e-12);
    }
  }
  (void)sensors;
}

TEST(Centralized, IdenticalSensorsMatchRepeatedUpdate) {
  // Discounted prior: the product of the N local posteriors is the prior
  // updated N times with the same scan.
  TrackerConfig cfg = quiet_config();
  cfg.filter.reduction.merge_threshold = 0.0;
  cfg.filter.reduction.prune_threshold = 1e-12;
  const SensorModel s = SensorModel::position_sensor(0, vec({0, 0}), 5.0, 500.0, 2.0);
  const LmbDensity prior({track({1, 0}, 0.4, 1.0, vec({20, 1, -10, 0}), 50.0)});
  const MeasurementSet z = {vec({24, -8}), vec({300, 200})};
  CentralizedState state;
  state.density = prior;
  const LmbDensity& fused = centralized_step(state, {z, z}, {s, s}, cfg, 2);

  const LmbDensity predicted = predict(prior, cfg.motion, {});
  const LmbDensity once = update_direct(predicted, z, s, cfg.filter).posterior;
  const LmbDensity twice = update_direct(once, z, s, cfg.filter).posterior;
  ASSERT_EQ(fused.size(), 1u);
  EXPECT_NEAR(fused[0].tau, twice[0].tau, 1e-9);
  EXPECT_NEAR(fused[0].gamma, twice[0].gamma, 1e-9);
  EXPECT_GE(fused[0].gamma, once[0].gamma - 1e-12);
  for (const Vector& x : {vec({24, 0, -8, 0}), vec({20, 1, -10, 0}), vec({22, 2, -9, -1})}) {
    EXPECT_NEAR(mixture_eval(fused[0].f, x), mixture_eval(twice[0].f, x), 1e-8);
  }
}

TEST(Centralized, SilentSensorOnlyContributesMisses) {
  TrackerConfig cfg = quiet_config();
  const auto sensors = sensors_at(2);
  CentralizedState state;
  state.density = LmbDensity({track({1, 0}, 0.1, 1.0, vec({0, 0, 0, 0}))});
  const LmbDensity& out = centralized_step(state, {{vec({1, 1})}, {}}, sensors, cfg, 2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NO_THROW(validate_track(out[0]));
  EXPECT_EQ(state.memory.size(), 2u);
  EXPECT_TRUE(state.memory[1].z.empty());
}

TEST(Centralized, BirthsFromTwoSensorsMerge) {
  TrackerConfig cfg = quiet_config();
  cfg.existence_threshold = 1e-4;
  const auto sensors = sensors_at(2);
  CentralizedState state;
  // both sensors see one target twice; the two newborn tracks should fuse into one
  (void)centralized_step(state, {{vec({50, 50})}, {vec({51, 49})}}, sensors, cfg, 1);
  const LmbDensity& out = centralized_step(state, {{vec({50, 50})}, {vec({50, 51})}}, sensors, cfg, 2);
  const auto est = map_estimate(out);
  ASSERT_EQ(est.size(), 1u);
  EXPECT_NEAR(est[0].state(0), 50.0, 3.0);
  EXPECT_NEAR(est[0].state(2), 50.0, 3.0);
  EXPECT_THROW((void)centralized_step(state, {{}}, sensors, cfg, 3), ArgumentError);
}

TEST(Distributed, SingleNodeIsLocalStep) {
  std::mt19937_64 rng(31);
  TrackerConfig cfg = quiet_config();
  cfg.existence_threshold = 1e-4;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = oracle::random_instance(rng, false);
    DistributedState state(1);
    state.nodes[0] = inst.prior;
    const auto& out = distributed_step(state, {inst.z}, {inst.sensor}, SensorGraph(1), cfg, 5);
    const LmbDensity plain = prune_tracks(update_direct(predict(inst.prior, cfg.motion, {}), inst.z, inst.sensor,
                                                        cfg.filter).posterior,
                                          cfg.existence_threshold, cfg.max_tracks);
    ASSERT_EQ(out[0].size(), plain.size());
    for (std::size_t k = 0; k < plain.size(); ++k) {
      EXPECT_EQ(out[0][k].label, plain[k].label);
      EXPECT_NEAR(out[0][k].tau, plain[k].tau, 1e-12);
      EXPECT_NEAR(out[0][k].gamma, plain[k].gamma, 1e-12);
    }
  }
}

TEST(Distributed, RingTracksOneTarget) {
  TrackerConfig cfg = quiet_config();
  cfg.existence_threshold = 1e-4;
  const std::size_t n = 4;
  const auto sensors = sensors_at(n);
  const SensorGraph g = SensorGraph::ring(n);
  DistributedState state(n);
  for (std::uint32_t k = 1; k <= 8; ++k) {
    const double x = 40.0 + 3.0 * k;
    std::vector<MeasurementSet> z(n, MeasurementSet{vec({x, 20.0})});
    (void)distributed_step(state, z, sensors, g, cfg, k);
  }
  for (const auto& node : state.nodes) {
    const auto est = map_estimate(node);
    ASSERT_EQ(est.size(), 1u);
    EXPECT_NEAR(est[0].state(0), 64.0, 5.0);
    EXPECT_NEAR(est[0].state(2), 20.0, 5.0);
  }
  EXPECT_THROW((void)distributed_step(state, std::vector<MeasurementSet>(n), sensors, SensorGraph::ring(3), cfg, 9),
               ArgumentError);
}

TEST(Config, Validation) {
  TrackerConfig cfg = quiet_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.consensus.iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.consensus.iterations = 1;
  cfg.consensus.discount = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.consensus.discount.reset();
  cfg.miss_r0 = 0.5;
  cfg.miss_r1 = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
