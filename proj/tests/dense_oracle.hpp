#pragma once

// Brute-force reference for the statevector kernels: every gate becomes a
// dense 2^n x 2^n matrix assembled element by element, and circuits are plain
// matrix products. Shares no code with src/qsim.cpp.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using cd = std::complex<double>;

inline Mat single_qubit(int n, int q, const Eigen::Matrix2cd& u) {
  const int dim = 1 << n;
  Mat m = Mat::Zero(dim, dim);
  const int mask = ~(1 << q);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      if ((i & mask) != (j & mask)) continue;
      m(i, j) = u((i >> q) & 1, (j >> q) & 1);
    }
  }
  return m;
}

inline Mat rx(int n, int q, double t) {
  Eigen::Matrix2cd u;
  u << cd(std::cos(t / 2), 0), cd(0, -std::sin(t / 2)), cd(0, -std::sin(t / 2)),
      cd(std::cos(t / 2), 0);
  return single_qubit(n, q, u);
}

inline Mat rz(int n, int q, double t) {
  Eigen::Matrix2cd u;
  u << std::exp(cd(0, -t / 2)), 0, 0, std::exp(cd(0, t / 2));
  return single_qubit(n, q, u);
}

inline Mat cnot(int n, int c, int t) {
  const int dim = 1 << n;
  Mat m = Mat::Zero(dim, dim);
  for (int j = 0; j < dim; ++j) {
    const int i = ((j >> c) & 1) ? (j ^ (1 << t)) : j;
    m(i, j) = 1.0;
  }
  return m;
}

// Full VQC: Rx encoding, then per layer rotations and a CNOT ring of reach
// (layer mod (n-1)) + 1 (strong) or 1 (basic).
inline std::vector<double> vqc(const std::vector<double>& features, const std::vector<double>& params,
                               int n, int layers, bool strong) {
  const int dim = 1 << n;
  Mat u = Mat::Identity(dim, dim);
  for (int q = 0; q < n; ++q) u = rx(n, q, features[q]) * u;
  std::size_t k = 0;
  for (int l = 0; l < layers; ++l) {
    for (int q = 0; q < n; ++q) {
      u = rx(n, q, params[k++]) * u;
      if (strong) u = rz(n, q, params[k++]) * u;
    }
    const int r = strong ? (l % (n - 1)) + 1 : 1;
    for (int q = 0; q < n; ++q) u = cnot(n, q, (q + r) % n) * u;
  }
  Vec psi = Vec::Zero(dim);
  psi(0) = 1.0;
  psi = u * psi;
  std::vector<double> z(n, 0.0);
  for (int b = 0; b < dim; ++b) {
    const double p = std::norm(psi(b));
    for (int q = 0; q < n; ++q) z[q] += ((b >> q) & 1) ? -p : p;
  }
  return z;
}

}  // namespace oracle
