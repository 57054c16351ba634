#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mtdc/errors.hpp"
#include "mtdc/stability.hpp"
#include "oracles.hpp"

using namespace mtdc;

namespace {

GridTopology four_lines() { return GridTopology(4, oracle::four_terminal_lines()); }

ConverterParams four_params() { return ConverterParams::uniform(4, 123.79e-6, 10.0, 1e5, 0); }

const Eigen::Vector4d kPre(300, 200, -100, -400);
const Eigen::Vector4d kPost(300, 200, -300, -400);

ClosedLoopSystem four_distributed(const ConverterParams& p, const Eigen::VectorXd& inj) {
  return assemble_distributed_loop(four_lines(), four_lines(), p, 0.005, inj);
}

}  // namespace

TEST(Hurwitz, KnownMatrices) {
  Eigen::Matrix2d stable;
  stable << -1, 5, 0, -2;
  EXPECT_TRUE(hurwitz_check(stable).hurwitz);
  EXPECT_NEAR(hurwitz_check(stable).spectral_abscissa, -1.0, 1e-12);
  Eigen::Matrix2d rotation;
  rotation << 0, 1, -1, 0;
  EXPECT_FALSE(hurwitz_check(rotation).hurwitz);
  Eigen::Matrix2d unstable;
  unstable << 0.1, 0, 0, -3;
  EXPECT_FALSE(hurwitz_check(unstable).hurwitz);
  EXPECT_THROW(hurwitz_check(Eigen::MatrixXd(2, 3)), ValidationError);
}

// Randomized droop systems: stable, and the injected current is exactly absorbed.
TEST(DroopTheorem, RandomInstancesStableAndBalanced) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 7;
    const auto edges = oracle::random_connected_edges(n, rng);
    const ConverterParams p = oracle::random_params(n, rng);
    const Eigen::VectorXd inj = oracle::random_vector(n, rng, -500, 500);
    const ClosedLoopSystem sys = assemble_droop_loop(GridTopology(n, edges), p, inj);
    EXPECT_TRUE(hurwitz_check(sys.state_matrix).hurwitz);
    const EquilibriumReport eq = droop_equilibrium(sys);
    EXPECT_LT(std::abs((eq.currents + inj).sum()), 1e-9 * inj.cwiseAbs().sum());

    // Independent solve of (L + K) V = K V^nom 1 + I.
    oracle::Mat M = oracle::laplacian(n, edges);
    oracle::Vec rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      M[i][i] += p.droop_gain(static_cast<Eigen::Index>(i));
      rhs[i] = p.droop_gain(static_cast<Eigen::Index>(i)) * 1e5 + inj(static_cast<Eigen::Index>(i));
    }
    const oracle::Vec V = oracle::solve(M, rhs);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(eq.voltages(static_cast<Eigen::Index>(i)), V[i], 1e-6);
  }
}

TEST(DroopEquilibrium, FourTerminalContrast) {
  const ClosedLoopSystem sys = assemble_droop_loop(four_lines(), four_params(), kPost);
  const EquilibriumReport eq = equilibrium(sys);
  const Eigen::Vector4d dv(-4.419200472, -5.134149404, -4.865850596, -5.580799528);
  EXPECT_LT((eq.voltages.array() - 1e5 - dv.array()).abs().maxCoeff(), 1e-6);
  EXPECT_TRUE((eq.voltages.array() < 1e5).all());
  EXPECT_GT(eq.currents.maxCoeff() - eq.currents.minCoeff(), 1.0);
  EXPECT_FALSE(eq.references.has_value());
}

TEST(DistributedEquilibrium, FourTerminalPostStep) {
  const ClosedLoopSystem sys = four_distributed(four_params(), kPost);
  const EquilibriumReport eq = equilibrium(sys);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(eq.currents(i), 50.0, 1e-6);
  EXPECT_NEAR(eq.voltages(0), 1e5, 1e-6);
  EXPECT_NEAR(eq.voltages(1) - 1e5, -0.77, 1e-6);
  EXPECT_NEAR(eq.voltages(2) - 1e5, -0.45, 1e-6);
  EXPECT_NEAR(eq.voltages(3) - 1e5, -1.22, 1e-6);
  EXPECT_NEAR(eq.offset, 5.0, 1e-9);
  EXPECT_LT((eq.total_currents - Eigen::Vector4d(350, 250, -250, -350)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(eq.max_total_current, 350.0, 1e-6);
  const BoundResult b = voltage_bound(sys, eq);
  EXPECT_TRUE(b.holds);
  EXPECT_NEAR(b.lhs, 1.22, 1e-6);
  const double inv = 1.0 / 129.87012987012987 + 1.0 / 1333.3333333333333 + 1.0 / 1463.2034632034633;
  EXPECT_NEAR(b.rhs, 2.0 * 350.0 * inv, 1e-9);
}

TEST(DistributedEquilibrium, FourTerminalPreStep) {
  const EquilibriumReport eq = equilibrium(four_distributed(four_params(), kPre));
  EXPECT_LT(eq.currents.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(eq.voltages(1) - 1e5, -1.4716568047, 1e-6);
  EXPECT_NEAR(eq.voltages(3) - 1e5, -1.915, 1e-6);
}

TEST(DistributedEquilibrium, HeterogeneousGainsShareProportionally) {
  ConverterParams p = four_params();
  p.droop_gain = Eigen::Vector4d(1, 2, 3, 4);
  const EquilibriumReport eq = equilibrium(four_distributed(p, kPost));
  EXPECT_LT((eq.currents - Eigen::Vector4d(20, 40, 60, 80)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(DistributedEquilibrium, RandomInstancesIdentities) {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 7;
    const auto line_edges = oracle::random_connected_edges(n, rng);
    const auto comm_edges = oracle::random_connected_edges(n, rng);
    const ConverterParams p = oracle::random_params(n, rng);
    std::uniform_real_distribution<double> g(1e-3, 1.0);
    const Eigen::VectorXd inj = oracle::random_vector(n, rng, -500, 500);
    const ClosedLoopSystem sys =
        assemble_distributed_loop(GridTopology(n, line_edges), GridTopology(n, comm_edges), p, g(rng), inj);
    const EquilibriumReport eq = equilibrium(sys);
    const double k = -inj.sum() / p.droop_gain.sum();
    EXPECT_NEAR(eq.offset, k, 1e-9 * std::abs(k) + 1e-12);
    for (Eigen::Index i = 0; i < p.droop_gain.size(); ++i) {
      EXPECT_NEAR(eq.currents(i), k * p.droop_gain(i), 1e-9 * inj.cwiseAbs().maxCoeff());
      if (p.regulator(i) == 1.0) EXPECT_NEAR(eq.voltages(i), 1e5, 1e-9 * 1e5);
    }
    // Same state from an independent elimination of A x = −b.
    oracle::Vec rhs = oracle::from_eigen(Eigen::VectorXd(-sys.forcing));
    const oracle::Vec x = oracle::solve(oracle::from_eigen(sys.state_matrix), rhs);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(eq.voltages(static_cast<Eigen::Index>(i)), x[n + i], 1e-6);
      EXPECT_NEAR((*eq.references)(static_cast<Eigen::Index>(i)), x[i], 1e-6);
    }
  }
}

TEST(Conditions, FourTerminalPreset) {
  const StabilityReport r = analyze_distributed(four_lines(), four_lines(), four_params(), 0.005);
  EXPECT_TRUE(r.hurwitz);
  EXPECT_NEAR(r.spectral_abscissa, -0.2382, 1e-3);
  EXPECT_TRUE(r.condition8_holds);
  EXPECT_NEAR(r.condition8_value, 1.0, 1e-3);
  EXPECT_TRUE(r.condition9_holds);
}

TEST(Conditions, ProportionalTopologySatisfiesCondition9) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 7;
    const auto edges = oracle::random_connected_edges(n, rng);
    const GridTopology lines(n, edges);
    std::uniform_real_distribution<double> k(1e-3, 1e3);
    const GridTopology comm = lines.scaled(k(rng));
    ConverterParams p = oracle::random_params(n, rng);
    EXPECT_TRUE(check_condition_9(lines, comm, p).holds) << "heterogeneous gains, trial " << trial;
    p.droop_gain.setConstant(p.droop_gain(0));
    EXPECT_TRUE(check_condition_9(lines, comm, p).holds) << "uniform gains, trial " << trial;
  }
}

TEST(Conditions, Condition9CanFailForUnrelatedTopologies) {
  std::mt19937 rng(41);
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial) % 5;
    const GridTopology lines(n, oracle::random_connected_edges(n, rng));
    const GridTopology comm(n, oracle::random_connected_edges(n, rng));
    if (!check_condition_9(lines, comm, oracle::random_params(n, rng)).holds) ++violations;
  }
  EXPECT_GT(violations, 0);
}

// Wherever the sufficient conditions hold, the steady-state voltage bound holds as well.
TEST(Conditions, VoltageBoundOnRandomInstances) {
  std::mt19937 rng(53);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 7;
    const GridTopology lines(n, oracle::random_connected_edges(n, rng));
    std::bernoulli_distribution proportional(0.5);
    std::uniform_real_distribution<double> k(0.1, 10.0);
    const GridTopology comm =
        proportional(rng) ? lines.scaled(k(rng)) : GridTopology(n, oracle::random_connected_edges(n, rng));
    const ConverterParams p = oracle::random_params(n, rng);
    std::uniform_real_distribution<double> g(1e-4, 1e-1);
    const double gamma = g(rng);
    const StabilityReport s = analyze_distributed(lines, comm, p, gamma);
    if (!(s.condition8_holds && s.condition9_holds)) continue;
    ++checked;
    EXPECT_TRUE(s.hurwitz);
    const ClosedLoopSystem sys =
        assemble_distributed_loop(lines, comm, p, gamma, oracle::random_vector(n, rng, -500, 500));
    const EquilibriumReport eq = equilibrium(sys);
    EXPECT_TRUE(voltage_bound(sys, eq).holds);
  }
  EXPECT_GT(checked, 50);
}

TEST(InverseSpectrum, PathGraph) {
  // Path on three nodes with unit weights: eigenvalues 0, 1, 3.
  const Eigen::MatrixXd L = build_laplacian(GridTopology(3, {{0, 1, 1.0}, {1, 2, 1.0}})).matrix();
  EXPECT_NEAR(inverse_spectrum_sum(L), 1.0 + 1.0 / 3.0, 1e-12);
}

TEST(DroopLimits, FourTerminalScaling) {
  const LimitTable t = droop_limits(four_lines(), four_params(), kPost, {1e6, 1e-6, 1.0, 1e-2, 1e-4});
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_DOUBLE_EQ(t.injection_sum, -200.0);
  EXPECT_LT(t.rows[0].max_voltage_deviation, 1e-3);
  EXPECT_LT(t.rows[0].max_injection_mismatch, 0.4);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(t.rows[1].currents(i), 50.0, 1e-3);
  EXPECT_GT(t.rows[4].spread, t.rows[3].spread);
  EXPECT_GT(t.rows[3].spread, t.rows[2].spread);
  EXPECT_GT(t.rows[1].spread, t.rows[4].spread);
  const LimitTrends tr = assess_limit_trends(t);
  EXPECT_TRUE(tr.voltage_converges_at_high_gain);
  EXPECT_TRUE(tr.current_converges_at_high_gain);
  EXPECT_TRUE(tr.sharing_converges_at_low_gain);
  EXPECT_TRUE(tr.spread_grows_at_low_gain);
  EXPECT_TRUE(tr.mean_diverges_with_injection_sign);
  EXPECT_THROW(droop_limits(four_lines(), four_params(), kPost, {0.0}), ValidationError);
}

namespace {

Trajectory synthetic(double growth, bool cutoff = false) {
  Trajectory t;
  t.node_count = 1;
  for (int k = 0; k <= 100; ++k) {
    const double time = 0.1 * k;
    t.times.push_back(time);
    t.voltages.push_back(Eigen::VectorXd::Constant(1, 100.0 + std::exp(growth * time)));
    t.currents.push_back(Eigen::VectorXd::Zero(1));
  }
  t.diverged = cutoff;
  return t;
}

}  // namespace

TEST(DivergenceClassifier, RatioAndCutoff) {
  const Eigen::VectorXd eq = Eigen::VectorXd::Constant(1, 100.0);
  EXPECT_FALSE(classify_diverged(synthetic(-1.0), eq, 0.0));
  EXPECT_FALSE(classify_diverged(synthetic(0.1), eq, 0.0));  // ratio e^0.9 < 10
  EXPECT_TRUE(classify_diverged(synthetic(0.5), eq, 0.0));
  EXPECT_TRUE(classify_diverged(synthetic(-1.0, true), eq, 0.0));
}

namespace {

// Small, non-stiff loop so a full bisection runs quickly.
struct SmallGrid {
  GridTopology lines{2, {{0, 1, 1.0}}};
  ConverterParams params = ConverterParams::uniform(2, 1e-3, 1.0, 100.0);
  DistributedController ctrl = DistributedController::from_params(params, lines, 1.0, 0.0);
  Scenario scenario;
  SmallGrid() {
    scenario.pre_injections = Eigen::Vector2d(1.0, -1.0);
    scenario.post_injections = Eigen::Vector2d(2.0, -1.0);
    scenario.horizon = 30.0;
    scenario.sample_interval = 1e-2;
  }
};

}  // namespace

TEST(DelaySearch, SmallGridBracket) {
  const SmallGrid g;
  EXPECT_FALSE(delay_diverges(g.lines, g.params, g.ctrl, g.scenario, 0.0));
  const DelaySearchResult r = critical_delay_search(g.lines, g.params, g.ctrl, g.scenario, 0.1, 3.0, 1e-2);
  EXPECT_LE(r.unstable_delay - r.stable_delay, 1e-2);
  EXPECT_GT(r.critical_delay, 0.3);
  EXPECT_LT(r.critical_delay, 2.0);
  EXPECT_FALSE(delay_diverges(g.lines, g.params, g.ctrl, g.scenario, r.stable_delay));
  EXPECT_TRUE(delay_diverges(g.lines, g.params, g.ctrl, g.scenario, r.unstable_delay));
  EXPECT_GT(r.simulations, 2);
}

TEST(DelaySearch, RangeErrors) {
  const SmallGrid g;
  EXPECT_THROW(critical_delay_search(g.lines, g.params, g.ctrl, g.scenario, 0.0, 0.05, 1e-2), SearchRangeError);
  EXPECT_THROW(critical_delay_search(g.lines, g.params, g.ctrl, g.scenario, 2.5, 3.0, 1e-2), SearchRangeError);
  EXPECT_THROW(critical_delay_search(g.lines, g.params, g.ctrl, g.scenario, 1.0, 0.5, 1e-2), ValidationError);
}
