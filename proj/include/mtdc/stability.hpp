#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mtdc/controllers.hpp"
#include "mtdc/grid_graph.hpp"
#include "mtdc/model.hpp"
#include "mtdc/simulator.hpp"

namespace mtdc {

struct HurwitzResult {
  double spectral_abscissa = 0.0;  ///< max Re λ(A), 1/s
  bool hurwitz = false;            ///< abscissa < 0
};

HurwitzResult hurwitz_check(const Eigen::MatrixXd& A);

struct ConditionResult {
  double value = 0.0;
  bool holds = false;
};

/// ½λmin(K⁻¹L_R + L_R K⁻¹) + 1 + (γ/2)λmin(L_C K⁻¹ C_d + C_d K⁻¹ L_C) with
/// C_d = diag(C_i) the physical capacitances; holds when value > 1e-12.
ConditionResult check_condition_8(const GridTopology& lines, const GridTopology& comm,
                                  const ConverterParams& params, double gamma);

/// λmin(L_C K⁻¹ L_R + L_R K⁻¹ L_C); holds when value ≥ −1e-9·max|entry|.
ConditionResult check_condition_9(const GridTopology& lines, const GridTopology& comm,
                                  const ConverterParams& params);

inline constexpr double kCondition8Tolerance = 1e-12;
inline constexpr double kCondition9RelativeTolerance = 1e-9;

struct StabilityReport {
  bool hurwitz = false;
  double spectral_abscissa = 0.0;
  double condition8_value = 0.0;
  bool condition8_holds = false;
  double condition9_value = 0.0;
  bool condition9_holds = false;
};

/// Sufficient conditions plus the numeric Hurwitz check of the delay-free loop.
StabilityReport analyze_distributed(const GridTopology& lines, const GridTopology& comm,
                                    const ConverterParams& params, double gamma);

struct EquilibriumReport {
  Eigen::VectorXd voltages;                   ///< V_eq, volts
  std::optional<Eigen::VectorXd> references;  ///< V̂_eq, distributed only
  Eigen::VectorXd currents;                   ///< u_eq, amperes
  double offset = 0.0;                        ///< k with u_eq = k·K^P·1 (distributed), volts
  Eigen::VectorXd total_currents;             ///< I^tot = I^inj + u_eq
  double max_total_current = 0.0;             ///< I^max
  double bound_rhs = 0.0;                     ///< 2·I^max·Σ_{i≥2} 1/λ_i(L_R)
};

/// V_eq = (L_R + K^P)⁻¹(K^P V^nom 1 + I^inj), u_eq = K^P(V^nom 1 − V_eq).
EquilibriumReport droop_equilibrium(const ClosedLoopSystem& system);

/// Solves A x = −b; requires A to be full rank (NumericalError otherwise).
EquilibriumReport distributed_equilibrium(const ClosedLoopSystem& system);

/// Dispatches on the system layout.
EquilibriumReport equilibrium(const ClosedLoopSystem& system);

struct BoundResult {
  double lhs = 0.0;  ///< max_i |V_eq,i − V^nom|
  double rhs = 0.0;  ///< 2·I^max·Σ_{i≥2} 1/λ_i(L_R)
  bool holds = false;
};

BoundResult voltage_bound(const ClosedLoopSystem& system, const EquilibriumReport& eq);

/// Σ_{i≥2} 1/λ_i of a connected graph's Laplacian.
double inverse_spectrum_sum(const Eigen::MatrixXd& laplacian);

struct LimitRow {
  double scale = 0.0;
  Eigen::VectorXd voltages;
  Eigen::VectorXd currents;
  double max_voltage_deviation = 0.0;   ///< max|V_eq − V^nom|
  double max_injection_mismatch = 0.0;  ///< max|u_eq + I^inj|
  double max_sharing_error = 0.0;       ///< max|u_eq − (−ΣI/ΣK^P)·K^P|
  double spread = 0.0;                  ///< ‖V_eq − mean(V_eq)‖₂
  double mean_deviation = 0.0;          ///< mean(V_eq) − V^nom
};

struct LimitTable {
  std::vector<LimitRow> rows;  ///< in the order the scales were given
  double injection_sum = 0.0;
};

/// Droop equilibria with every K^P_i multiplied by each scale.
LimitTable droop_limits(const GridTopology& lines, const ConverterParams& params,
                        const Eigen::VectorXd& injections, const std::vector<double>& scales);

struct LimitTrends {
  bool voltage_converges_at_high_gain = false;  ///< max|V−V^nom| decreases as the scale grows
  bool current_converges_at_high_gain = false;  ///< max|u+I| decreases as the scale grows
  bool sharing_converges_at_low_gain = false;   ///< sharing error decreases as the scale shrinks
  bool spread_grows_at_low_gain = false;        ///< ‖V−mean‖ grows as the scale shrinks
  bool mean_diverges_with_injection_sign = false;
};

LimitTrends assess_limit_trends(const LimitTable& table);

/// Divergence classifier: diverged if the integrator stopped on the
/// voltage cutoff, or max|V − V_eq| over the last 10% of the post-step window
/// exceeds 10× its value over the first 10%.
bool classify_diverged(const Trajectory& trajectory, const Eigen::VectorXd& voltage_eq,
                       double step_time);

struct DelaySearchResult {
  double stable_delay = 0.0;    ///< largest delay classified stable
  double unstable_delay = 0.0;  ///< smallest delay classified diverged
  double critical_delay = 0.0;  ///< bracket midpoint
  int simulations = 0;
};

/// Bisection on τ ∈ [tau_low, tau_high] using simulate-and-classify until the
/// bracket is at most `tolerance` wide. Throws SearchRangeError when tau_low is
/// not stable or tau_high is not diverged.
DelaySearchResult critical_delay_search(const GridTopology& lines, const ConverterParams& params,
                                        const DistributedController& controller,
                                        const Scenario& scenario, double tau_low, double tau_high,
                                        double tolerance = 1e-3);

/// Runs the scenario at `delay` and applies classify_diverged.
bool delay_diverges(const GridTopology& lines, const ConverterParams& params,
                    const DistributedController& controller, const Scenario& scenario, double delay);

}  // namespace mtdc
