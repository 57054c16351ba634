#include "mtdc/controllers.hpp"

#include <cmath>
#include <string>

#include "mtdc/errors.hpp"

namespace mtdc {
namespace {

void require_length(const Eigen::VectorXd& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) +
                          ", expected " + std::to_string(n));
  }
}

}  // namespace

DroopController DroopController::from_params(const ConverterParams& params) {
  DroopController c{params.droop_gain, params.nominal_voltage};
  c.validate();
  return c;
}

void DroopController::validate() const {
  if (gain.size() == 0) throw ValidationError("droop controller has no gains");
  if ((gain.array() <= 0.0).any() || !gain.allFinite()) {
    throw ValidationError("droop gains K^P must be positive");
  }
  if (!(nominal_voltage > 0.0)) throw ValidationError("nominal voltage must be positive");
}

DistributedController DistributedController::from_params(const ConverterParams& params,
                                                         GridTopology comm, double gamma,
                                                         double delay) {
  DistributedController c{params.droop_gain, params.regulator, gamma, std::move(comm),
                          params.nominal_voltage, delay};
  c.validate();
  return c;
}

void DistributedController::validate() const {
  const auto n = static_cast<Eigen::Index>(comm.node_count());
  require_length(gain, n, "droop gain vector");
  require_length(regulator, n, "regulator flag vector");
  if ((gain.array() <= 0.0).any() || !gain.allFinite()) {
    throw ValidationError("droop gains K^P must be positive");
  }
  if (((regulator.array() != 0.0) && (regulator.array() != 1.0)).any() || regulator.sum() != 1.0) {
    throw ValidationError("exactly one converter must carry the regulator flag");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be positive");
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw ValidationError("delay must be non-negative");
  if (!(nominal_voltage > 0.0)) throw ValidationError("nominal voltage must be positive");
}

ControllerKind kind_of(const Controller& controller) {
  return std::holds_alternative<DroopController>(controller) ? ControllerKind::kDroop
                                                             : ControllerKind::kDistributed;
}

double delay_of(const Controller& controller) {
  if (const auto* d = std::get_if<DistributedController>(&controller)) return d->delay;
  return 0.0;
}

Eigen::VectorXd droop_output(const DroopController& ctrl, const Eigen::VectorXd& voltage) {
  require_length(voltage, ctrl.gain.size(), "voltage vector");
  return ctrl.gain.cwiseProduct(Eigen::VectorXd::Constant(voltage.size(), ctrl.nominal_voltage) -
                                voltage);
}

DistributedRates distributed_rhs(const DistributedController& ctrl, const Eigen::VectorXd& voltage,
                                 const Eigen::VectorXd& reference,
                                 const Eigen::VectorXd& delayed_voltage,
                                 const Eigen::VectorXd& delayed_reference) {
  const auto n = static_cast<Eigen::Index>(ctrl.comm.node_count());
  require_length(voltage, n, "voltage vector");
  require_length(reference, n, "reference vector");
  require_length(delayed_voltage, n, "delayed voltage vector");
  require_length(delayed_reference, n, "delayed reference vector");

  DistributedRates out;
  out.current = ctrl.gain.cwiseProduct(reference - voltage);
  out.reference_rate = ctrl.regulator.cwiseProduct(
      Eigen::VectorXd::Constant(n, ctrl.nominal_voltage) - voltage);

  const Eigen::VectorXd error = delayed_reference - delayed_voltage;
  for (const Edge& e : ctrl.comm.edges()) {
    const auto i = static_cast<Eigen::Index>(e.from);
    const auto j = static_cast<Eigen::Index>(e.to);
    const double flow = ctrl.gamma * e.weight * (error(i) - error(j));
    out.reference_rate(i) -= flow;
    out.reference_rate(j) += flow;
  }
  return out;
}

DelayCoupling delay_coupling(const Controller& controller, Eigen::Index state_size) {
  DelayCoupling coupling;
  const auto* dist = std::get_if<DistributedController>(&controller);
  if (dist == nullptr) {
    coupling.input.resize(state_size, 0);
    coupling.output.resize(0, state_size);
    return coupling;
  }
  const auto n = static_cast<Eigen::Index>(dist->comm.node_count());
  if (state_size != 2 * n) {
    throw ValidationError("distributed controller expects a state of size " +
                          std::to_string(2 * n));
  }
  coupling.delay = dist->delay;
  coupling.input = Eigen::MatrixXd::Zero(2 * n, n);
  coupling.input.topRows(n) = -dist->gamma * build_laplacian(dist->comm).matrix();
  coupling.output = Eigen::MatrixXd::Zero(n, 2 * n);
  coupling.output.leftCols(n) = Eigen::MatrixXd::Identity(n, n);
  coupling.output.rightCols(n) = -Eigen::MatrixXd::Identity(n, n);
  return coupling;
}

ConverterParams params_with_controller(const ConverterParams& params, const Controller& controller) {
  ConverterParams p = params;
  if (const auto* d = std::get_if<DroopController>(&controller)) {
    p.droop_gain = d->gain;
    p.nominal_voltage = d->nominal_voltage;
  } else {
    const auto& dist = std::get<DistributedController>(controller);
    p.droop_gain = dist.gain;
    p.regulator = dist.regulator;
    p.nominal_voltage = dist.nominal_voltage;
  }
  return p;
}

ClosedLoopSystem close_loop(const GridTopology& lines, const ConverterParams& params,
                            const Controller& controller, const Eigen::VectorXd& injections) {
  const ConverterParams p = params_with_controller(params, controller);
  if (const auto* dist = std::get_if<DistributedController>(&controller)) {
    dist->validate();
    return assemble_distributed_loop(lines, dist->comm, p, dist->gamma, injections);
  }
  std::get<DroopController>(controller).validate();
  return assemble_droop_loop(lines, p, injections);
}

}  // namespace mtdc
