#include "mtdc/model.hpp"

#include <cmath>
#include <string>

#include "mtdc/errors.hpp"

namespace mtdc {
namespace {

void require_size(const Eigen::VectorXd& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) +
                          ", expected " + std::to_string(n));
  }
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

}  // namespace

ConverterParams ConverterParams::uniform(std::size_t n, double capacitance, double droop_gain,
                                         double nominal_voltage, std::size_t regulator_node) {
  const auto size = static_cast<Eigen::Index>(n);
  ConverterParams p;
  p.capacitance = Eigen::VectorXd::Constant(size, capacitance);
  p.droop_gain = Eigen::VectorXd::Constant(size, droop_gain);
  p.regulator = Eigen::VectorXd::Zero(size);
  if (regulator_node < n) p.regulator(static_cast<Eigen::Index>(regulator_node)) = 1.0;
  p.nominal_voltage = nominal_voltage;
  return p;
}

void ConverterParams::validate(bool require_regulator) const {
  const std::size_t n = size();
  if (n == 0) throw ValidationError("no converters");
  require_size(droop_gain, n, "droop gain vector");
  require_size(regulator, n, "regulator flag vector");
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (!(capacitance(k) > 0.0) || !std::isfinite(capacitance(k))) {
      throw ValidationError("converter " + std::to_string(i + 1) + ": capacitance must be positive");
    }
    if (!(droop_gain(k) > 0.0) || !std::isfinite(droop_gain(k))) {
      throw ValidationError("converter " + std::to_string(i + 1) + ": droop gain K^P must be positive");
    }
    if (regulator(k) != 0.0 && regulator(k) != 1.0) {
      throw ValidationError("converter " + std::to_string(i + 1) + ": regulator flag must be 0 or 1");
    }
  }
  if (!(nominal_voltage > 0.0) || !std::isfinite(nominal_voltage)) {
    throw ValidationError("nominal voltage must be positive");
  }
  if (require_regulator && regulator.sum() != 1.0) {
    throw ValidationError("exactly one converter must act as voltage regulator, found " +
                          std::to_string(static_cast<int>(regulator.sum())));
  }
}

Eigen::VectorXd ClosedLoopSystem::forcing_for(const Eigen::VectorXd& inj) const {
  require_size(inj, node_count(), "injection vector");
  return forcing + injection_map * (inj - injections);
}

Eigen::VectorXd ClosedLoopSystem::nominal_state() const {
  return Eigen::VectorXd::Constant(state_size(), params.nominal_voltage);
}

Eigen::VectorXd ClosedLoopSystem::voltages(const Eigen::VectorXd& state) const {
  return state.segment(voltage_offset(), static_cast<Eigen::Index>(node_count()));
}

std::optional<Eigen::VectorXd> ClosedLoopSystem::references(const Eigen::VectorXd& state) const {
  if (kind != ControllerKind::kDistributed) return std::nullopt;
  return Eigen::VectorXd(state.head(static_cast<Eigen::Index>(node_count())));
}

NetworkState ClosedLoopSystem::unpack(const Eigen::VectorXd& state) const {
  if (state.size() != state_size()) {
    throw ValidationError("state has length " + std::to_string(state.size()) + ", expected " +
                          std::to_string(state_size()));
  }
  return NetworkState{voltages(state), references(state)};
}

OpenLoop assemble_open_loop(const GridTopology& lines, const ConverterParams& params,
                            const Eigen::VectorXd& injections) {
  const std::size_t n = lines.node_count();
  require_size(params.capacitance, n, "capacitance vector");
  require_size(injections, n, "injection vector");
  require_finite(injections, "injection vector");
  for (Eigen::Index i = 0; i < params.capacitance.size(); ++i) {
    if (!(params.capacitance(i) > 0.0)) throw ValidationError("capacitance must be positive");
  }
  const Eigen::VectorXd c_inv = params.inverse_capacitance();
  OpenLoop out;
  out.state_matrix = -(c_inv.asDiagonal() * build_laplacian(lines).matrix());
  out.forcing = c_inv.cwiseProduct(injections);
  return out;
}

ClosedLoopSystem assemble_droop_loop(const GridTopology& lines, const ConverterParams& params,
                                     const Eigen::VectorXd& injections) {
  const std::size_t n = lines.node_count();
  require_size(params.capacitance, n, "capacitance vector");
  params.validate(false);
  require_size(injections, n, "injection vector");
  require_finite(injections, "injection vector");

  const Eigen::VectorXd c_inv = params.inverse_capacitance();
  const Eigen::MatrixXd L = build_laplacian(lines).matrix();
  Eigen::MatrixXd loaded = L;
  loaded.diagonal() += params.droop_gain;

  ClosedLoopSystem sys;
  sys.kind = ControllerKind::kDroop;
  sys.params = params;
  sys.line_laplacian = L;
  sys.state_matrix = -(c_inv.asDiagonal() * loaded);
  sys.injection_map = c_inv.asDiagonal();
  sys.forcing = c_inv.cwiseProduct(params.droop_gain * params.nominal_voltage + injections);
  sys.injections = injections;
  return sys;
}

ClosedLoopSystem assemble_distributed_loop(const GridTopology& lines, const GridTopology& comm,
                                           const ConverterParams& params, double gamma,
                                           const Eigen::VectorXd& injections) {
  const std::size_t n = lines.node_count();
  if (comm.node_count() != n) {
    throw ValidationError("communication graph has " + std::to_string(comm.node_count()) +
                          " nodes, line graph has " + std::to_string(n));
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ValidationError("gamma must be positive");
  }
  require_size(params.capacitance, n, "capacitance vector");
  params.validate(true);
  require_size(injections, n, "injection vector");
  require_finite(injections, "injection vector");

  const auto N = static_cast<Eigen::Index>(n);
  const Eigen::VectorXd c_inv = params.inverse_capacitance();
  const Eigen::MatrixXd LR = build_laplacian(lines).matrix();
  const Eigen::MatrixXd LC = build_laplacian(comm).matrix();
  Eigen::MatrixXd loaded = LR;
  loaded.diagonal() += params.droop_gain;

  ClosedLoopSystem sys;
  sys.kind = ControllerKind::kDistributed;
  sys.params = params;
  sys.gamma = gamma;
  sys.line_laplacian = LR;
  sys.state_matrix.resize(2 * N, 2 * N);
  sys.state_matrix.topLeftCorner(N, N) = -gamma * LC;
  sys.state_matrix.topRightCorner(N, N) = gamma * LC;
  sys.state_matrix.topRightCorner(N, N).diagonal() -= params.regulator;
  sys.state_matrix.bottomLeftCorner(N, N) = c_inv.cwiseProduct(params.droop_gain).asDiagonal();
  sys.state_matrix.bottomRightCorner(N, N) = -(c_inv.asDiagonal() * loaded);

  sys.injection_map = Eigen::MatrixXd::Zero(2 * N, N);
  sys.injection_map.bottomRows(N) = c_inv.asDiagonal();
  sys.forcing.resize(2 * N);
  sys.forcing.head(N) = params.regulator * params.nominal_voltage;
  sys.forcing.tail(N) = c_inv.cwiseProduct(injections);
  sys.injections = injections;
  return sys;
}

Eigen::VectorXd controlled_current(const ConverterParams& params, const NetworkState& state,
                                   ControllerKind kind) {
  require_size(state.voltage, params.size(), "voltage vector");
  if (kind == ControllerKind::kDroop) {
    return params.droop_gain.cwiseProduct(
        Eigen::VectorXd::Constant(state.voltage.size(), params.nominal_voltage) - state.voltage);
  }
  if (!state.reference) throw ValidationError("distributed controller needs reference voltages");
  require_size(*state.reference, params.size(), "reference vector");
  return params.droop_gain.cwiseProduct(*state.reference - state.voltage);
}

}  // namespace mtdc
