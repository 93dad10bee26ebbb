// Copyright 2026 The bdcz-node Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Hand-rolled generators for randomized property tests.

#include <Eigen/QR>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bdcz/qstate.hpp"

namespace bdcz::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(BDCZ_FIXTURE_DIR) / name;
}

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  CMatrix ginibre(Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> n;
    CMatrix g(rows, cols);
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = Complex(n(rng_), n(rng_));
    return g;
  }

  /// Register of 1..max_modes modes, mixed kinds, total dimension <= max_dim.
  Register reg(int max_modes = 3, Eigen::Index max_dim = 27) {
    while (true) {
      std::vector<ModeLabel> modes;
      const int n = integer(1, max_modes);
      for (int k = 0; k < n; ++k) {
        const std::string name = "m" + std::to_string(k);
        modes.push_back(coin() ? ModeLabel::polarization(name) : ModeLabel::bosonic(name, integer(1, 2)));
      }
      Register r(std::move(modes));
      if (r.dim() <= max_dim) return r;
    }
  }

  /// Random mixed state of random rank.
  DensityOperator rho(const Register& r) {
    const CMatrix g = ginibre(r.dim(), integer(1, static_cast<int>(r.dim())));
    CMatrix m = g * g.adjoint();
    m /= m.trace().real();
    return DensityOperator(r, (m + m.adjoint()) / 2.0);
  }

  LabeledState pure(const Register& r) {
    CVector v = ginibre(r.dim(), 1);
    v.normalize();
    return LabeledState(r, v);
  }

  CMatrix unitary(Eigen::Index d) {
    Eigen::HouseholderQR<CMatrix> qr(ginibre(d, d));
    return qr.householderQ() * CMatrix::Identity(d, d);
  }

  /// Kraus operators from a random isometry C^d -> C^(k d).
  std::vector<CMatrix> kraus(Eigen::Index d, int k) {
    Eigen::HouseholderQR<CMatrix> qr(ginibre(k * d, d));
    const CMatrix v = qr.householderQ() * CMatrix::Identity(k * d, d);
    std::vector<CMatrix> out;
    for (int j = 0; j < k; ++j) out.push_back(v.middleRows(j * d, d));
    return out;
  }

  /// Random subset of register names, at least one.
  std::vector<std::string> subset(const Register& r) {
    std::vector<std::string> out;
    while (out.empty()) {
      for (const auto& m : r) {
        if (coin()) out.push_back(m.name);
      }
    }
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

/// (|00> + |11>)/sqrt2 over two polarization modes.
inline LabeledState phi_plus(const std::string& a = "A", const std::string& b = "B") {
  Register r({ModeLabel::polarization(a), ModeLabel::polarization(b)});
  CVector v = CVector::Zero(4);
  v(0) = v(3) = 1.0 / std::sqrt(2.0);
  return LabeledState(r, v);
}

inline CMatrix pauli(char which) {
  CMatrix p(2, 2);
  switch (which) {
    case 'x': p << 0, 1, 1, 0; break;
    case 'y': p << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case 'z': p << 1, 0, 0, -1; break;
    default: p = CMatrix::Identity(2, 2);
  }
  return p;
}

}  // namespace bdcz::testing
