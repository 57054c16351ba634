#include "mtdc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "mtdc/errors.hpp"
#include "mtdc/linalg.hpp"

namespace mtdc {
namespace {

std::size_t sample_count(const Scenario& s) {
  return static_cast<std::size_t>(std::floor(s.horizon / s.sample_interval + 1e-9)) + 1;
}

bool has_delay(const DelayCoupling& coupling, double delay) { return !coupling.empty() && delay > 0.0; }

/// Ring buffer of the communicated signal q = Q x, indexed by global step number.
/// Indices before the start return the constant initial history.
class DelayHistory {
 public:
  DelayHistory(Eigen::VectorXd initial, double delay_steps)
      : initial_(std::move(initial)),
        capacity_(static_cast<Eigen::Index>(std::ceil(delay_steps)) + 8),
        ring_(initial_.size(), capacity_) {}

  void store(long index, const Eigen::VectorXd& q) { ring_.col(slot(index)) = q; }

  /// Value at fractional step index `s` (s ≤ latest stored index − 2).
  void interpolate(double s, Eigen::VectorXd& out) const {
    const double base = std::floor(s);
    const double theta = s - base;
    const long j = static_cast<long>(base);
    if (theta < 1e-9) {
      out = at(j);
      return;
    }
    if (theta > 1.0 - 1e-9) {
      out = at(j + 1);
      return;
    }
    // Cubic Lagrange on nodes j-1, j, j+1, j+2.
    const double wm = -theta * (theta - 1.0) * (theta - 2.0) / 6.0;
    const double w0 = (theta + 1.0) * (theta - 1.0) * (theta - 2.0) / 2.0;
    const double w1 = -(theta + 1.0) * theta * (theta - 2.0) / 2.0;
    const double w2 = (theta + 1.0) * theta * (theta - 1.0) / 6.0;
    out = wm * at(j - 1) + w0 * at(j) + w1 * at(j + 1) + w2 * at(j + 2);
  }

 private:
  Eigen::Index slot(long index) const { return static_cast<Eigen::Index>(index % capacity_); }

  Eigen::Ref<const Eigen::VectorXd> at(long index) const {
    if (index < 0) return initial_;
    return ring_.col(slot(index));
  }

  Eigen::VectorXd initial_;
  Eigen::Index capacity_;
  Eigen::MatrixXd ring_;
};

void record_sample(const ClosedLoopSystem& system, const Eigen::VectorXd& deviation, double t,
                   Trajectory& out) {
  const Eigen::VectorXd x = deviation + system.nominal_state();
  NetworkState state = system.unpack(x);
  out.times.push_back(t);
  out.currents.push_back(controlled_current(system.params, state, system.kind));
  out.voltages.push_back(std::move(state.voltage));
  if (state.reference) out.references.push_back(std::move(*state.reference));
}

Trajectory empty_trajectory(const ClosedLoopSystem& system, std::size_t reserve) {
  Trajectory out;
  out.node_count = system.node_count();
  out.has_references = system.kind == ControllerKind::kDistributed;
  out.times.reserve(reserve);
  out.voltages.reserve(reserve);
  out.currents.reserve(reserve);
  if (out.has_references) out.references.reserve(reserve);
  return out;
}

bool beyond_cutoff(const ClosedLoopSystem& system, const Eigen::VectorXd& deviation) {
  const double vnom = system.params.nominal_voltage;
  const auto v = deviation.segment(system.voltage_offset(),
                                   static_cast<Eigen::Index>(system.node_count()));
  return ((v.array() + vnom).abs() > kDivergenceVoltageFactor * vnom).any();
}

}  // namespace

void Scenario::validate(std::size_t node_count) const {
  const auto n = static_cast<Eigen::Index>(node_count);
  if (pre_injections.size() != n || post_injections.size() != n) {
    throw ValidationError("scenario injections must have one entry per converter (" +
                          std::to_string(node_count) + ")");
  }
  if (!pre_injections.allFinite() || !post_injections.allFinite()) {
    throw ValidationError("scenario injections must be finite");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon must be positive");
  if (!(step_time >= 0.0) || !(step_time < horizon)) {
    throw ValidationError("step time must satisfy 0 <= step_time < horizon");
  }
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) {
    throw ValidationError("sample interval must be positive");
  }
  if (sample_interval > horizon) throw ValidationError("sample interval exceeds the horizon");
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw ValidationError("delay must be non-negative");
}

ExactStepper::ExactStepper(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double h) : h_(h) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    throw ValidationError("exact step: dimension mismatch");
  }
  if (!(h > 0.0)) throw ValidationError("exact step: step size must be positive");
  const Eigen::Index m = A.rows();
  Eigen::MatrixXd augmented = Eigen::MatrixXd::Zero(m + 1, m + 1);
  augmented.topLeftCorner(m, m) = A * h;
  augmented.topRightCorner(m, 1) = b * h;
  const Eigen::MatrixXd E = augmented.exp();
  if (!E.allFinite()) throw NumericalError("matrix exponential produced non-finite values");
  transition_ = E.topLeftCorner(m, m);
  offset_ = E.topRightCorner(m, 1);
}

Eigen::VectorXd lti_step_exact(const ClosedLoopSystem& system, const Eigen::VectorXd& state, double h) {
  if (state.size() != system.state_size()) throw ValidationError("exact step: state size mismatch");
  const Eigen::VectorXd nominal = system.nominal_state();
  const ExactStepper stepper(system.state_matrix, system.injection_map * system.injections, h);
  return nominal + stepper.step(state - nominal);
}

Eigen::VectorXd steady_state(const ClosedLoopSystem& system, const Eigen::VectorXd& injections) {
  return system.nominal_state() +
         solve_equilibrated(system.state_matrix, -(system.injection_map * injections));
}

double integration_step(const ClosedLoopSystem& system, const Scenario& scenario,
                        const IntegratorOptions& options) {
  const auto& p = system.params;
  const double converter_time_constant = (p.capacitance.array() / p.droop_gain.array()).minCoeff();
  double h_max = std::min({converter_time_constant / 5.0, 1e-3, scenario.sample_interval});
  if (system.kind == ControllerKind::kDistributed && scenario.delay > 0.0) {
    h_max = std::min(h_max, scenario.delay / 20.0);
  }
  if (options.max_step > 0.0) h_max = std::min(h_max, options.max_step);
  const double per_sample = std::ceil(scenario.sample_interval / h_max - 1e-9);
  return scenario.sample_interval / per_sample;
}

Trajectory integrate_dde(const ClosedLoopSystem& system, const Controller& controller,
                         const Scenario& scenario, const IntegratorOptions& options) {
  const std::size_t n = system.node_count();
  scenario.validate(n);
  if (kind_of(controller) != system.kind) {
    throw ValidationError("controller kind does not match the assembled closed loop");
  }
  const Eigen::Index m = system.state_size();
  const DelayCoupling coupling = delay_coupling(controller, m);
  const bool delayed = has_delay(coupling, scenario.delay);

  const double h = integration_step(system, scenario, options);
  const auto steps_per_sample =
      static_cast<long>(std::llround(scenario.sample_interval / h));
  const std::size_t samples = sample_count(scenario);
  const long total_steps = static_cast<long>(samples - 1) * steps_per_sample;
  const long switch_step = std::llround(scenario.step_time / h);

  Eigen::MatrixXd A_now = system.state_matrix;
  if (delayed) A_now -= coupling.input * coupling.output;

  const Eigen::VectorXd f_pre = system.injection_map * scenario.pre_injections;
  const Eigen::VectorXd f_post = system.injection_map * scenario.post_injections;

  // Deviation coordinates z = x − V^nom·1; the constant terms cancel exactly.
  Eigen::VectorXd z = solve_equilibrated(system.state_matrix, -f_pre);

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  const Eigen::PartialPivLU<Eigen::MatrixXd> implicit_part(I - 0.5 * h * A_now);
  const Eigen::MatrixXd propagate = implicit_part.solve(I + 0.5 * h * A_now);
  const Eigen::VectorXd drive_pre = implicit_part.solve(f_pre) * h;
  const Eigen::VectorXd drive_post = implicit_part.solve(f_post) * h;
  Eigen::MatrixXd delayed_gain;
  if (delayed) delayed_gain = implicit_part.solve(coupling.input) * (0.5 * h);

  const double delay_steps = delayed ? scenario.delay / h : 0.0;
  DelayHistory history(delayed ? Eigen::VectorXd(coupling.output * z) : Eigen::VectorXd(),
                       delay_steps);
  Eigen::VectorXd q_delayed_now;
  Eigen::VectorXd q_delayed_next;
  Eigen::VectorXd q_sum;
  if (delayed) {
    history.interpolate(-delay_steps, q_delayed_now);
    history.store(0, coupling.output * z);
  }

  Trajectory out = empty_trajectory(system, samples);
  record_sample(system, z, 0.0, out);

  Eigen::VectorXd z_next(m);
  for (long k = 0; k < total_steps; ++k) {
    const Eigen::VectorXd& drive = k >= switch_step ? drive_post : drive_pre;
    z_next.noalias() = propagate * z;
    z_next += drive;
    if (delayed) {
      history.interpolate(static_cast<double>(k + 1) - delay_steps, q_delayed_next);
      q_sum = q_delayed_now + q_delayed_next;
      z_next.noalias() += delayed_gain * q_sum;
      q_delayed_now.swap(q_delayed_next);
    }
    z.swap(z_next);
    if (delayed) history.store(k + 1, coupling.output * z);

    const bool sample_due = (k + 1) % steps_per_sample == 0;
    if (sample_due && !z.allFinite()) {
      throw NumericalError("integration produced non-finite state at t = " +
                           std::to_string(static_cast<double>(k + 1) * h));
    }
    if (beyond_cutoff(system, z)) {
      out.diverged = true;
      if (options.stop_on_divergence) break;
    }
    if (sample_due) {
      const auto index = static_cast<double>((k + 1) / steps_per_sample);
      record_sample(system, z, index * scenario.sample_interval, out);
    }
  }
  return out;
}

Trajectory simulate_exact(const ClosedLoopSystem& system, const Controller& controller,
                          const Scenario& scenario) {
  const std::size_t n = system.node_count();
  scenario.validate(n);
  if (kind_of(controller) != system.kind) {
    throw ValidationError("controller kind does not match the assembled closed loop");
  }
  const DelayCoupling coupling = delay_coupling(controller, system.state_size());
  if (has_delay(coupling, scenario.delay)) {
    throw ValidationError("exact stepping requires a delay-free loop");
  }
  const Eigen::MatrixXd& A = system.state_matrix;
  const Eigen::VectorXd f_pre = system.injection_map * scenario.pre_injections;
  const Eigen::VectorXd f_post = system.injection_map * scenario.post_injections;
  const double dt = scenario.sample_interval;
  const ExactStepper pre(A, f_pre, dt);
  const ExactStepper post(A, f_post, dt);

  Eigen::VectorXd z = solve_equilibrated(A, -f_pre);
  const std::size_t samples = sample_count(scenario);
  Trajectory out = empty_trajectory(system, samples);
  record_sample(system, z, 0.0, out);
  for (std::size_t k = 1; k < samples; ++k) {
    const double t0 = static_cast<double>(k - 1) * dt;
    const double t1 = static_cast<double>(k) * dt;
    if (t1 <= scenario.step_time + 1e-12 * dt) {
      z = pre.step(z);
    } else if (t0 >= scenario.step_time - 1e-12 * dt) {
      z = post.step(z);
    } else {
      z = ExactStepper(A, f_pre, scenario.step_time - t0).step(z);
      z = ExactStepper(A, f_post, t1 - scenario.step_time).step(z);
    }
    if (!z.allFinite()) throw NumericalError("exact stepping produced non-finite state");
    if (beyond_cutoff(system, z)) {
      out.diverged = true;
      break;
    }
    record_sample(system, z, t1, out);
  }
  return out;
}

Trajectory run_scenario(const GridTopology& lines, const ConverterParams& params,
                        const Controller& controller, const Scenario& scenario,
                        const IntegratorOptions& options) {
  scenario.validate(lines.node_count());
  const ClosedLoopSystem system = close_loop(lines, params, controller, scenario.pre_injections);
  return integrate_dde(system, controller, scenario, options);
}

SettlingTimes settling_times(const Trajectory& trajectory, double step_time,
                             const Eigen::VectorXd& voltage_eq, double voltage_band,
                             const Eigen::VectorXd& current_eq, double current_band) {
  SettlingTimes out;
  if (trajectory.empty()) return out;
  std::size_t first = 0;
  while (first < trajectory.size() && trajectory.times[first] < step_time) ++first;

  long last_voltage_violation = -1;
  long last_current_violation = -1;
  for (std::size_t k = first; k < trajectory.size(); ++k) {
    if ((trajectory.voltages[k] - voltage_eq).cwiseAbs().maxCoeff() >= voltage_band) {
      last_voltage_violation = static_cast<long>(k);
    }
    if ((trajectory.currents[k] - current_eq).cwiseAbs().maxCoeff() >= current_band) {
      last_current_violation = static_cast<long>(k);
    }
  }
  const auto settle = [&](long last, bool& settled) {
    const auto next = static_cast<std::size_t>(last + 1);
    if (trajectory.diverged || next >= trajectory.size()) {
      settled = false;
      return -1.0;
    }
    settled = true;
    return std::max(0.0, trajectory.times[std::max(next, first)] - step_time);
  };
  out.voltage = settle(last_voltage_violation, out.voltage_settled);
  out.current = settle(last_current_violation, out.current_settled);
  return out;
}

}  // namespace mtdc
