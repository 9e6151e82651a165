#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace madqrl::qsim {

using Amplitude = std::complex<double>;

inline constexpr int kMaxQubits = 24;

// Pure n-qubit register. Basis index bit i holds the value of qubit i.
class StateVector {
 public:
  // |0...0>; throws CapacityError outside [1, kMaxQubits].
  explicit StateVector(int n_qubits);

  int n_qubits() const { return n_qubits_; }
  std::size_t dimension() const { return amplitudes_.size(); }

  std::span<const Amplitude> amplitudes() const { return amplitudes_; }
  std::span<Amplitude> amplitudes() { return amplitudes_; }

  double norm_squared() const;

 private:
  int n_qubits_;
  std::vector<Amplitude> amplitudes_;
};

StateVector new_state(int n_qubits);

enum class GateKind { Rx, Rz, Cnot };

struct GateOp {
  GateKind kind = GateKind::Rx;
  int target = 0;
  std::optional<int> control;  // Cnot only
  double angle = 0.0;          // radians, Rx/Rz only

  static GateOp rx(int target, double angle) { return {GateKind::Rx, target, std::nullopt, angle}; }
  static GateOp rz(int target, double angle) { return {GateKind::Rz, target, std::nullopt, angle}; }
  static GateOp cnot(int control, int target) { return {GateKind::Cnot, target, control, 0.0}; }
};

// Rx(t) = exp(-i t X / 2), Rz(t) = exp(-i t Z / 2), CNOT flips target when
// control is 1. Throws IndexError on bad wires.
void apply_gate(StateVector& state, const GateOp& gate);

// Rx(features[i]) on qubit i. Features are expected in [-pi, pi]; only the
// length is checked.
void encode_angles(StateVector& state, std::span<const double> features);

enum class Entanglement { Basic, Strong };

struct AnsatzConfig {
  int n_qubits = 4;
  int n_layers = 1;
  Entanglement entanglement = Entanglement::Strong;

  int rotations_per_qubit_layer() const { return entanglement == Entanglement::Strong ? 2 : 1; }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(n_qubits) * n_layers * rotations_per_qubit_layer();
  }
  // Throws ValidationError unless n_qubits >= 2 and n_layers >= 1.
  void validate() const;

  bool operator==(const AnsatzConfig&) const = default;
};

// CNOT reach for ring `layer`: (layer mod (n-1)) + 1 for Strong, 1 for Basic.
int entangler_range(const AnsatzConfig& config, int layer);

// Layer-major gate list: rotation block (Rx [, Rz] per qubit), then
// CNOT(i, (i + r) mod n) for every i.
std::vector<GateOp> build_ansatz(const AnsatzConfig& config, std::span<const double> params);

// Exact <Z_i> for every qubit; +1 contribution when bit i is 0.
std::vector<double> expectations_z(const StateVector& state);

// encode -> ansatz -> <Z>. Pure function of its arguments.
std::vector<double> run_vqc(std::span<const double> features, std::span<const double> params,
                            const AnsatzConfig& config);

struct VqcGradient {
  std::vector<double> params;    // d(upstream . <Z>) / d params
  std::vector<double> features;  // d(upstream . <Z>) / d encoding angles
};

// Parameter-shift rule, (f(p + pi/2) - f(p - pi/2)) / 2, contracted with
// `upstream` (length n_qubits). Encoding angles use the same rule.
VqcGradient vqc_gradient(std::span<const double> features, std::span<const double> params,
                         const AnsatzConfig& config, std::span<const double> upstream);

// Ansatz-parameter part of vqc_gradient only.
std::vector<double> parameter_shift_gradient(std::span<const double> features,
                                             std::span<const double> params,
                                             const AnsatzConfig& config,
                                             std::span<const double> upstream);

}  // namespace madqrl::qsim
