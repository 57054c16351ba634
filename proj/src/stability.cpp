#include "mtdc/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mtdc/errors.hpp"
#include "mtdc/linalg.hpp"

namespace mtdc {
namespace {

double min_symmetric_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return solver.eigenvalues()(0);
}

void require_same_size(const GridTopology& lines, const GridTopology& comm,
                       const ConverterParams& params) {
  if (comm.node_count() != lines.node_count() || params.size() != lines.node_count()) {
    throw ValidationError("line graph, communication graph and converter parameters disagree on n");
  }
}

void fill_totals(const ClosedLoopSystem& system, EquilibriumReport& eq) {
  eq.total_currents = system.injections + eq.currents;
  eq.max_total_current = eq.total_currents.cwiseAbs().maxCoeff();
  eq.bound_rhs = system.node_count() > 1
                     ? 2.0 * eq.max_total_current * inverse_spectrum_sum(system.line_laplacian)
                     : 0.0;
}

template <typename Key>
bool strictly_monotone(const std::vector<LimitRow>& ascending, Key key, bool increasing) {
  for (std::size_t i = 1; i < ascending.size(); ++i) {
    const double prev = key(ascending[i - 1]);
    const double next = key(ascending[i]);
    if (increasing ? !(next > prev) : !(next < prev)) return false;
  }
  return true;
}

}  // namespace

HurwitzResult hurwitz_check(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw ValidationError("Hurwitz check needs a square matrix");
  if (!A.allFinite()) throw NumericalError("Hurwitz check: non-finite matrix");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(A, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed to converge");
  HurwitzResult out;
  out.spectral_abscissa = solver.eigenvalues().real().maxCoeff();
  out.hurwitz = out.spectral_abscissa < 0.0;
  return out;
}

ConditionResult check_condition_8(const GridTopology& lines, const GridTopology& comm,
                                  const ConverterParams& params, double gamma) {
  require_same_size(lines, comm, params);
  params.validate(false);
  const Eigen::MatrixXd LR = build_laplacian(lines).matrix();
  const Eigen::MatrixXd LC = build_laplacian(comm).matrix();
  const Eigen::VectorXd k_inv = params.droop_gain.cwiseInverse();

  const Eigen::MatrixXd line_term = k_inv.asDiagonal() * LR + LR * k_inv.asDiagonal();
  const Eigen::VectorXd kc = k_inv.cwiseProduct(params.capacitance);
  const Eigen::MatrixXd comm_term = LC * kc.asDiagonal() + kc.asDiagonal() * LC;

  ConditionResult out;
  out.value = 0.5 * min_symmetric_eigenvalue(line_term) + 1.0 +
              0.5 * gamma * min_symmetric_eigenvalue(comm_term);
  out.holds = out.value > kCondition8Tolerance;
  return out;
}

ConditionResult check_condition_9(const GridTopology& lines, const GridTopology& comm,
                                  const ConverterParams& params) {
  require_same_size(lines, comm, params);
  params.validate(false);
  const Eigen::MatrixXd LR = build_laplacian(lines).matrix();
  const Eigen::MatrixXd LC = build_laplacian(comm).matrix();
  const Eigen::VectorXd k_inv = params.droop_gain.cwiseInverse();
  const Eigen::MatrixXd cross = LC * k_inv.asDiagonal() * LR;
  const Eigen::MatrixXd M = cross + cross.transpose();

  ConditionResult out;
  out.value = min_symmetric_eigenvalue(M);
  out.holds = out.value >= -kCondition9RelativeTolerance * M.cwiseAbs().maxCoeff();
  return out;
}

StabilityReport analyze_distributed(const GridTopology& lines, const GridTopology& comm,
                                    const ConverterParams& params, double gamma) {
  const auto n = static_cast<Eigen::Index>(lines.node_count());
  const ClosedLoopSystem sys =
      assemble_distributed_loop(lines, comm, params, gamma, Eigen::VectorXd::Zero(n));
  const HurwitzResult h = hurwitz_check(sys.state_matrix);
  const ConditionResult c8 = check_condition_8(lines, comm, params, gamma);
  const ConditionResult c9 = check_condition_9(lines, comm, params);
  return StabilityReport{h.hurwitz, h.spectral_abscissa, c8.value, c8.holds, c9.value, c9.holds};
}

double inverse_spectrum_sum(const Eigen::MatrixXd& laplacian) {
  const auto pairs = spectral_decomposition(LaplacianMatrix(laplacian));
  double sum = 0.0;
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (!(pairs[i].value > 0.0)) throw NumericalError("Laplacian has more than one zero eigenvalue");
    sum += 1.0 / pairs[i].value;
  }
  return sum;
}

EquilibriumReport droop_equilibrium(const ClosedLoopSystem& system) {
  if (system.kind != ControllerKind::kDroop) throw ValidationError("expected a droop closed loop");
  // Deviation from V^nom·1 solves (L_R + K^P) z = I^inj.
  const Eigen::VectorXd z =
      solve_equilibrated(system.state_matrix, -(system.injection_map * system.injections));
  EquilibriumReport eq;
  eq.voltages = z.array() + system.params.nominal_voltage;
  eq.currents = -system.params.droop_gain.cwiseProduct(z);
  fill_totals(system, eq);
  return eq;
}

EquilibriumReport distributed_equilibrium(const ClosedLoopSystem& system) {
  if (system.kind != ControllerKind::kDistributed) {
    throw ValidationError("expected a distributed closed loop");
  }
  const Eigen::Index m = system.state_size();
  const auto n = static_cast<Eigen::Index>(system.node_count());
  if (inverse_condition(system.state_matrix) <=
      static_cast<double>(m) * std::numeric_limits<double>::epsilon()) {
    throw NumericalError("closed-loop matrix is rank deficient; no unique equilibrium");
  }
  const Eigen::VectorXd z =
      solve_equilibrated(system.state_matrix, -(system.injection_map * system.injections));
  const double vnom = system.params.nominal_voltage;
  EquilibriumReport eq;
  eq.references = Eigen::VectorXd(z.head(n).array() + vnom);
  eq.voltages = z.tail(n).array() + vnom;
  eq.currents = system.params.droop_gain.cwiseProduct(z.head(n) - z.tail(n));
  eq.offset = -system.injections.sum() / system.params.droop_gain.sum();
  fill_totals(system, eq);
  return eq;
}

EquilibriumReport equilibrium(const ClosedLoopSystem& system) {
  return system.kind == ControllerKind::kDroop ? droop_equilibrium(system)
                                               : distributed_equilibrium(system);
}

BoundResult voltage_bound(const ClosedLoopSystem& system, const EquilibriumReport& eq) {
  BoundResult out;
  out.lhs = (eq.voltages.array() - system.params.nominal_voltage).abs().maxCoeff();
  out.rhs = eq.bound_rhs;
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

LimitTable droop_limits(const GridTopology& lines, const ConverterParams& params,
                        const Eigen::VectorXd& injections, const std::vector<double>& scales) {
  LimitTable table;
  table.injection_sum = injections.sum();
  for (double s : scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("gain scales must be positive");
    ConverterParams scaled = params;
    scaled.droop_gain *= s;
    const ClosedLoopSystem sys = assemble_droop_loop(lines, scaled, injections);
    const EquilibriumReport eq = droop_equilibrium(sys);

    LimitRow row;
    row.scale = s;
    row.voltages = eq.voltages;
    row.currents = eq.currents;
    const Eigen::VectorXd deviation = eq.voltages.array() - params.nominal_voltage;
    row.max_voltage_deviation = deviation.cwiseAbs().maxCoeff();
    row.max_injection_mismatch = (eq.currents + injections).cwiseAbs().maxCoeff();
    const Eigen::VectorXd sharing = -(table.injection_sum / scaled.droop_gain.sum()) * scaled.droop_gain;
    row.max_sharing_error = (eq.currents - sharing).cwiseAbs().maxCoeff();
    row.mean_deviation = deviation.mean();
    row.spread = (deviation.array() - row.mean_deviation).matrix().norm();
    table.rows.push_back(std::move(row));
  }
  return table;
}

LimitTrends assess_limit_trends(const LimitTable& table) {
  std::vector<LimitRow> rows = table.rows;
  std::sort(rows.begin(), rows.end(), [](const LimitRow& a, const LimitRow& b) { return a.scale < b.scale; });
  LimitTrends t;
  if (rows.size() < 2) return t;
  t.voltage_converges_at_high_gain =
      strictly_monotone(rows, [](const LimitRow& r) { return r.max_voltage_deviation; }, false);
  t.current_converges_at_high_gain =
      strictly_monotone(rows, [](const LimitRow& r) { return r.max_injection_mismatch; }, false);
  t.sharing_converges_at_low_gain =
      strictly_monotone(rows, [](const LimitRow& r) { return r.max_sharing_error; }, true);
  t.spread_grows_at_low_gain = strictly_monotone(rows, [](const LimitRow& r) { return r.spread; }, false);
  const double sign = table.injection_sum > 0.0 ? 1.0 : (table.injection_sum < 0.0 ? -1.0 : 0.0);
  t.mean_diverges_with_injection_sign =
      sign != 0.0 &&
      strictly_monotone(rows, [sign](const LimitRow& r) { return sign * r.mean_deviation; }, false) &&
      sign * rows.front().mean_deviation > 0.0;
  return t;
}

bool classify_diverged(const Trajectory& trajectory, const Eigen::VectorXd& voltage_eq,
                       double step_time) {
  if (trajectory.diverged) return true;
  if (trajectory.empty()) return false;
  const double t_end = trajectory.times.back();
  const double window = t_end - step_time;
  if (!(window > 0.0)) return false;
  double early = 0.0;
  double late = 0.0;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const double t = trajectory.times[k];
    if (t < step_time) continue;
    const double dev = (trajectory.voltages[k] - voltage_eq).cwiseAbs().maxCoeff();
    if (t <= step_time + 0.1 * window) early = std::max(early, dev);
    if (t >= t_end - 0.1 * window) late = std::max(late, dev);
  }
  return late > 10.0 * early;
}

bool delay_diverges(const GridTopology& lines, const ConverterParams& params,
                    const DistributedController& controller, const Scenario& scenario, double delay) {
  DistributedController ctrl = controller;
  ctrl.delay = delay;
  Scenario sc = scenario;
  sc.delay = delay;
  const ClosedLoopSystem system = close_loop(lines, params, ctrl, sc.pre_injections);
  const Trajectory traj = integrate_dde(system, ctrl, sc);
  const Eigen::VectorXd eq = system.voltages(steady_state(system, sc.post_injections));
  return classify_diverged(traj, eq, sc.step_time);
}

DelaySearchResult critical_delay_search(const GridTopology& lines, const ConverterParams& params,
                                        const DistributedController& controller,
                                        const Scenario& scenario, double tau_low, double tau_high,
                                        double tolerance) {
  if (!(tau_low >= 0.0) || !(tau_high > tau_low) || !(tolerance > 0.0)) {
    throw ValidationError("delay search needs 0 <= tau_low < tau_high and a positive tolerance");
  }
  DelaySearchResult out;
  const auto diverges = [&](double tau) {
    ++out.simulations;
    return delay_diverges(lines, params, controller, scenario, tau);
  };
  if (diverges(tau_low)) {
    throw SearchRangeError("delay " + std::to_string(tau_low) + " s is already unstable");
  }
  if (!diverges(tau_high)) {
    throw SearchRangeError("delay " + std::to_string(tau_high) + " s is still stable");
  }
  double lo = tau_low;
  double hi = tau_high;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    (diverges(mid) ? hi : lo) = mid;
  }
  out.stable_delay = lo;
  out.unstable_delay = hi;
  out.critical_delay = 0.5 * (lo + hi);
  return out;
}

}  // namespace mtdc
