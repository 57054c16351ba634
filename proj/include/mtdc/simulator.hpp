#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mtdc/controllers.hpp"
#include "mtdc/model.hpp"

namespace mtdc {

/// A single injection step experiment.
struct Scenario {
  Eigen::VectorXd pre_injections;   ///< amperes, held before step_time
  Eigen::VectorXd post_injections;  ///< amperes, from step_time on
  double step_time = 0.0;           ///< seconds
  double horizon = 60.0;            ///< seconds
  double delay = 0.0;               ///< τ, seconds
  double sample_interval = 1e-3;    ///< seconds

  void validate(std::size_t node_count) const;
};

/// Uniformly sampled simulation output.
struct Trajectory {
  std::size_t node_count = 0;
  bool has_references = false;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> voltages;    ///< V(t), volts
  std::vector<Eigen::VectorXd> currents;    ///< u(t), amperes
  std::vector<Eigen::VectorXd> references;  ///< V̂(t), distributed only
  bool diverged = false;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

/// Any |V_i| above this multiple of V^nom stops an integration as diverged.
inline constexpr double kDivergenceVoltageFactor = 10.0;

/// Exact propagation x ← e^{Ah}x + ∫_0^h e^{As} ds · b, computed through the
/// exponential of the augmented matrix [[A, b], [0, 0]]·h (A is never inverted).
class ExactStepper {
 public:
  ExactStepper(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double h);

  Eigen::VectorXd step(const Eigen::VectorXd& x) const { return transition_ * x + offset_; }
  double step_size() const { return h_; }

 private:
  double h_;
  Eigen::MatrixXd transition_;
  Eigen::VectorXd offset_;
};

/// One exact step of the delay-free closed loop `system` from `state`, taken in
/// deviation coordinates about V^nom·1.
Eigen::VectorXd lti_step_exact(const ClosedLoopSystem& system, const Eigen::VectorXd& state, double h);

struct IntegratorOptions {
  /// Upper bound on the integration step; 0 selects the automatic rule
  /// h ≤ min(τ/20, min_i C_i/K^P_i / 5, 1 ms, sample interval).
  double max_step = 0.0;
  bool stop_on_divergence = true;
};

/// Step size the integrator will use for this configuration.
double integration_step(const ClosedLoopSystem& system, const Scenario& scenario,
                        const IntegratorOptions& options = {});

/// Fixed-step integration of the (possibly delayed) closed loop.
///
/// The instantaneous linear dynamics advance with the implicit trapezoidal
/// rule; delayed consensus terms enter explicitly, read back from a history
/// ring through 4-point Lagrange interpolation. The history on [−τ, 0] and the
/// initial state are the steady state for the pre-step injections. The forcing
/// switches to the post-step injections at `scenario.step_time`; the delay used
/// is `scenario.delay`.
Trajectory integrate_dde(const ClosedLoopSystem& system, const Controller& controller,
                         const Scenario& scenario, const IntegratorOptions& options = {});

/// Same experiment propagated with exact exponential steps of one sample interval.
/// Only valid without delay.
Trajectory simulate_exact(const ClosedLoopSystem& system, const Controller& controller,
                          const Scenario& scenario);

/// Builds the loop for the pre-step injections and integrates the scenario.
Trajectory run_scenario(const GridTopology& lines, const ConverterParams& params,
                        const Controller& controller, const Scenario& scenario,
                        const IntegratorOptions& options = {});

/// Delay-free steady state for the given injections, in the system's state layout.
Eigen::VectorXd steady_state(const ClosedLoopSystem& system, const Eigen::VectorXd& injections);

struct SettlingTimes {
  double voltage = 0.0;  ///< seconds after the step; negative when never settled
  double current = 0.0;
  bool voltage_settled = false;
  bool current_settled = false;
};

/// First time after which every later sample stays inside the bands
/// |V_i − V_eq,i| < voltage_band and |u_i − u_eq,i| < current_band.
SettlingTimes settling_times(const Trajectory& trajectory, double step_time,
                             const Eigen::VectorXd& voltage_eq, double voltage_band,
                             const Eigen::VectorXd& current_eq, double current_band);

}  // namespace mtdc
