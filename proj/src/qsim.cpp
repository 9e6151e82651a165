#include "madqrl/qsim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "madqrl/errors.hpp"

namespace madqrl::qsim {

namespace {

void check_wire(int wire, int n_qubits, const char* what) {
  if (wire < 0 || wire >= n_qubits) {
    throw IndexError(std::string(what) + " qubit " + std::to_string(wire) + " out of range for " +
                     std::to_string(n_qubits) + "-qubit state");
  }
}

void apply_rx(std::span<Amplitude> amps, int target, double angle) {
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const Amplitude mis(0.0, -s);
  const std::size_t bit = std::size_t{1} << target;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if (i & bit) continue;
    const Amplitude a = amps[i];
    const Amplitude b = amps[i | bit];
    amps[i] = c * a + mis * b;
    amps[i | bit] = mis * a + c * b;
  }
}

void apply_rz(std::span<Amplitude> amps, int target, double angle) {
  const Amplitude phase0 = std::polar(1.0, -angle / 2.0);
  const Amplitude phase1 = std::polar(1.0, angle / 2.0);
  const std::size_t bit = std::size_t{1} << target;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    amps[i] *= (i & bit) ? phase1 : phase0;
  }
}

void apply_cnot(std::span<Amplitude> amps, int control, int target) {
  const std::size_t cbit = std::size_t{1} << control;
  const std::size_t tbit = std::size_t{1} << target;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if ((i & cbit) && !(i & tbit)) std::swap(amps[i], amps[i | tbit]);
  }
}

void check_lengths(std::span<const double> features, std::span<const double> params,
                   const AnsatzConfig& config) {
  if (features.size() != static_cast<std::size_t>(config.n_qubits)) {
    throw ShapeError("VQC expects " + std::to_string(config.n_qubits) + " features, got " +
                     std::to_string(features.size()));
  }
  if (params.size() != config.parameter_count()) {
    throw ShapeError("VQC expects " + std::to_string(config.parameter_count()) +
                     " ansatz parameters, got " + std::to_string(params.size()));
  }
}

double contract(std::span<const double> upstream, const std::vector<double>& plus,
                const std::vector<double>& minus) {
  double acc = 0.0;
  for (std::size_t i = 0; i < upstream.size(); ++i) acc += upstream[i] * (plus[i] - minus[i]);
  return 0.5 * acc;
}

}  // namespace

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw CapacityError("state vector supports 1.." + std::to_string(kMaxQubits) +
                        " qubits, requested " + std::to_string(n_qubits));
  }
  amplitudes_.assign(std::size_t{1} << n_qubits, Amplitude(0.0, 0.0));
  amplitudes_[0] = 1.0;
}

double StateVector::norm_squared() const {
  double acc = 0.0;
  for (const auto& a : amplitudes_) acc += std::norm(a);
  return acc;
}

StateVector new_state(int n_qubits) { return StateVector(n_qubits); }

void apply_gate(StateVector& state, const GateOp& gate) {
  const int n = state.n_qubits();
  check_wire(gate.target, n, "target");
  switch (gate.kind) {
    case GateKind::Rx:
      apply_rx(state.amplitudes(), gate.target, gate.angle);
      break;
    case GateKind::Rz:
      apply_rz(state.amplitudes(), gate.target, gate.angle);
      break;
    case GateKind::Cnot:
      if (!gate.control) throw IndexError("CNOT requires a control qubit");
      check_wire(*gate.control, n, "control");
      if (*gate.control == gate.target) throw IndexError("CNOT control equals target");
      apply_cnot(state.amplitudes(), *gate.control, gate.target);
      break;
  }
}

void encode_angles(StateVector& state, std::span<const double> features) {
  if (features.size() != static_cast<std::size_t>(state.n_qubits())) {
    throw ShapeError("encoding expects " + std::to_string(state.n_qubits()) + " features, got " +
                     std::to_string(features.size()));
  }
  for (int q = 0; q < state.n_qubits(); ++q) apply_rx(state.amplitudes(), q, features[q]);
}

void AnsatzConfig::validate() const {
  if (n_qubits < 2) throw ValidationError("ansatz needs at least 2 qubits");
  if (n_qubits > kMaxQubits) throw ValidationError("ansatz exceeds simulator capacity");
  if (n_layers < 1) throw ValidationError("ansatz needs at least 1 layer");
}

int entangler_range(const AnsatzConfig& config, int layer) {
  if (config.entanglement == Entanglement::Basic) return 1;
  return layer % (config.n_qubits - 1) + 1;
}

std::vector<GateOp> build_ansatz(const AnsatzConfig& config, std::span<const double> params) {
  config.validate();
  if (params.size() != config.parameter_count()) {
    throw ShapeError("ansatz expects " + std::to_string(config.parameter_count()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  const int n = config.n_qubits;
  const bool strong = config.entanglement == Entanglement::Strong;
  std::vector<GateOp> gates;
  gates.reserve(params.size() + static_cast<std::size_t>(n * config.n_layers));
  std::size_t k = 0;
  for (int layer = 0; layer < config.n_layers; ++layer) {
    for (int q = 0; q < n; ++q) {
      gates.push_back(GateOp::rx(q, params[k++]));
      if (strong) gates.push_back(GateOp::rz(q, params[k++]));
    }
    const int r = entangler_range(config, layer);
    for (int q = 0; q < n; ++q) gates.push_back(GateOp::cnot(q, (q + r) % n));
  }
  return gates;
}

std::vector<double> expectations_z(const StateVector& state) {
  const int n = state.n_qubits();
  std::vector<double> out(n, 0.0);
  const auto amps = state.amplitudes();
  for (std::size_t b = 0; b < amps.size(); ++b) {
    const double p = std::norm(amps[b]);
    for (int q = 0; q < n; ++q) out[q] += ((b >> q) & 1U) ? -p : p;
  }
  return out;
}

std::vector<double> run_vqc(std::span<const double> features, std::span<const double> params,
                            const AnsatzConfig& config) {
  config.validate();
  check_lengths(features, params, config);
  StateVector state(config.n_qubits);
  encode_angles(state, features);
  for (const auto& gate : build_ansatz(config, params)) apply_gate(state, gate);
  return expectations_z(state);
}

VqcGradient vqc_gradient(std::span<const double> features, std::span<const double> params,
                         const AnsatzConfig& config, std::span<const double> upstream) {
  config.validate();
  check_lengths(features, params, config);
  if (upstream.size() != static_cast<std::size_t>(config.n_qubits)) {
    throw ShapeError("upstream gradient must have one entry per qubit");
  }
  VqcGradient grad;
  grad.params.assign(params.size(), 0.0);
  grad.features.assign(features.size(), 0.0);
  bool any = false;
  for (double u : upstream) any = any || u != 0.0;
  if (!any) return grad;

  constexpr double kShift = std::numbers::pi / 2.0;
  std::vector<double> shifted(params.begin(), params.end());
  for (std::size_t k = 0; k < params.size(); ++k) {
    shifted[k] = params[k] + kShift;
    const auto plus = run_vqc(features, shifted, config);
    shifted[k] = params[k] - kShift;
    const auto minus = run_vqc(features, shifted, config);
    shifted[k] = params[k];
    grad.params[k] = contract(upstream, plus, minus);
  }
  std::vector<double> shifted_features(features.begin(), features.end());
  for (std::size_t k = 0; k < features.size(); ++k) {
    shifted_features[k] = features[k] + kShift;
    const auto plus = run_vqc(shifted_features, params, config);
    shifted_features[k] = features[k] - kShift;
    const auto minus = run_vqc(shifted_features, params, config);
    shifted_features[k] = features[k];
    grad.features[k] = contract(upstream, plus, minus);
  }
  return grad;
}

std::vector<double> parameter_shift_gradient(std::span<const double> features,
                                             std::span<const double> params,
                                             const AnsatzConfig& config,
                                             std::span<const double> upstream) {
  return vqc_gradient(features, params, config, upstream).params;
}

}  // namespace madqrl::qsim
