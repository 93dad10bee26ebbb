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

/**
 * @file qstate.hpp
 * Dense states and operators over small registers of labeled modes.
 *
 * A Register is an ordered list of modes; the first mode is the most
 * significant digit of the mixed-radix basis index, so tensor() is the
 * ordinary Kronecker product. Every state and operator carries its register,
 * and functions address modes by name.
 */

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bdcz/errors.hpp"

namespace bdcz {

inline constexpr double kOperatorTolerance = 1e-10;
inline constexpr double kNormTolerance = 1e-12;

enum class ModeKind { kPolarization, kBosonic };

struct ModeLabel {
  std::string name;
  ModeKind kind = ModeKind::kBosonic;
  int n_max = 1;

  static ModeLabel polarization(std::string name) {
    return {std::move(name), ModeKind::kPolarization, 1};
  }
  static ModeLabel bosonic(std::string name, int n_max) {
    if (n_max < 1) {
      throw std::invalid_argument("bosonic mode '" + name + "' needs n_max >= 1");
    }
    return {std::move(name), ModeKind::kBosonic, n_max};
  }

  int dim() const { return kind == ModeKind::kPolarization ? 2 : n_max + 1; }

  bool operator==(const ModeLabel&) const = default;
};

class Register {
 public:
  Register() = default;
  explicit Register(std::vector<ModeLabel> modes) : modes_(std::move(modes)) {
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      for (std::size_t j = i + 1; j < modes_.size(); ++j) {
        if (modes_[i].name == modes_[j].name) {
          throw std::invalid_argument("duplicate mode name '" + modes_[i].name + "'");
        }
      }
    }
  }

  std::size_t size() const { return modes_.size(); }
  const ModeLabel& operator[](std::size_t i) const { return modes_[i]; }
  auto begin() const { return modes_.begin(); }
  auto end() const { return modes_.end(); }
  const std::vector<ModeLabel>& modes() const { return modes_; }

  Eigen::Index dim() const {
    Eigen::Index d = 1;
    for (const auto& m : modes_) d *= m.dim();
    return d;
  }

  bool contains(std::string_view name) const {
    return std::any_of(modes_.begin(), modes_.end(),
                       [&](const ModeLabel& m) { return m.name == name; });
  }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      if (modes_[i].name == name) return i;
    }
    throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
  }

  const ModeLabel& mode(std::string_view name) const { return modes_[index_of(name)]; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(modes_.size());
    for (const auto& m : modes_) out.push_back(m.name);
    return out;
  }

  /// Basis-index stride of mode i (product of the dimensions after it).
  Eigen::Index stride(std::size_t i) const {
    Eigen::Index s = 1;
    for (std::size_t k = i + 1; k < modes_.size(); ++k) s *= modes_[k].dim();
    return s;
  }

  int occupation(Eigen::Index basis, std::size_t i) const {
    return static_cast<int>((basis / stride(i)) % modes_[i].dim());
  }

  std::vector<int> occupations(Eigen::Index basis) const {
    std::vector<int> occ(modes_.size());
    for (std::size_t i = modes_.size(); i-- > 0;) {
      occ[i] = static_cast<int>(basis % modes_[i].dim());
      basis /= modes_[i].dim();
    }
    return occ;
  }

  Eigen::Index basis_index(std::span<const int> occ) const {
    if (occ.size() != modes_.size()) {
      throw std::invalid_argument("occupation list length does not match register");
    }
    Eigen::Index idx = 0;
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      if (occ[i] < 0 || occ[i] >= modes_[i].dim()) {
        throw std::invalid_argument("occupation out of range for mode '" + modes_[i].name + "'");
      }
      idx = idx * modes_[i].dim() + occ[i];
    }
    return idx;
  }

  /// Modes named in `names`, in that order.
  Register subset(std::span<const std::string> names) const {
    std::vector<ModeLabel> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(mode(n));
    return Register(std::move(out));
  }

  /// Concatenation; rejects shared names.
  Register operator+(const Register& other) const {
    std::vector<ModeLabel> all = modes_;
    all.insert(all.end(), other.modes_.begin(), other.modes_.end());
    return Register(std::move(all));
  }

  Register renamed(std::string_view from, std::string to) const {
    std::vector<ModeLabel> out = modes_;
    out[index_of(from)].name = std::move(to);
    return Register(std::move(out));
  }

  bool operator==(const Register&) const = default;

 private:
  std::vector<ModeLabel> modes_;
};

namespace detail {

/// For each basis index of `to` (a reordering of `from`), the matching index in `from`.
inline std::vector<Eigen::Index> permutation_indices(const Register& from, const Register& to) {
  if (from.size() != to.size()) {
    throw std::invalid_argument("register permutation changes the number of modes");
  }
  std::vector<Eigen::Index> from_stride(to.size());
  for (std::size_t k = 0; k < to.size(); ++k) {
    const std::size_t pos = from.index_of(to[k].name);
    if (!(from[pos] == to[k])) {
      throw std::invalid_argument("mode '" + to[k].name + "' changed shape in permutation");
    }
    from_stride[k] = from.stride(pos);
  }
  const Eigen::Index dim = to.dim();
  std::vector<Eigen::Index> out(static_cast<std::size_t>(dim));
  std::vector<int> occ(to.size(), 0);
  Eigen::Index src = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    out[static_cast<std::size_t>(i)] = src;
    // odometer increment, least significant mode last
    for (std::size_t k = to.size(); k-- > 0;) {
      if (++occ[k] < to[k].dim()) {
        src += from_stride[k];
        break;
      }
      src -= from_stride[k] * (occ[k] - 1);
      occ[k] = 0;
    }
  }
  return out;
}

inline std::vector<std::string> leading_order(const Register& reg, std::span<const std::string> first) {
  std::vector<std::string> order(first.begin(), first.end());
  for (const auto& m : reg) {
    if (std::find(first.begin(), first.end(), m.name) == first.end()) order.push_back(m.name);
  }
  return order;
}

/// (K ⊗ I) X where the leading factor of X's row index has dimension K.rows().
template <typename Matrix>
Matrix left_apply(const Matrix& op, const Matrix& x) {
  const Eigen::Index da = op.cols();
  const Eigen::Index dr = x.rows() / da;
  Matrix out(op.rows() * dr, x.cols());
  const Matrix op_t = op.transpose();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::Map<const Matrix> in_block(x.col(j).data(), dr, da);
    Eigen::Map<Matrix> out_block(out.col(j).data(), dr, op.rows());
    out_block.noalias() = in_block * op_t;
  }
  return out;
}

template <typename Matrix>
double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : static_cast<double>(m.cwiseAbs().maxCoeff());
}

}  // namespace detail

template <typename Scalar>
using CMatrixT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using CVectorT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
class BasicLabeledState {
 public:
  using Complex = std::complex<Scalar>;
  using Vector = CVectorT<Scalar>;

  BasicLabeledState() = default;
  BasicLabeledState(Register reg, Vector amplitudes, bool normalized = true)
      : reg_(std::move(reg)), amps_(std::move(amplitudes)), normalized_(normalized) {
    if (amps_.size() != reg_.dim()) {
      throw std::invalid_argument("amplitude vector length does not match register dimension");
    }
    if (normalized_ && std::abs(static_cast<double>(amps_.norm()) - 1.0) >= kNormTolerance) {
      throw NumericalError("state flagged normalized has norm " +
                           std::to_string(static_cast<double>(amps_.norm())));
    }
  }

  static BasicLabeledState basis(Register reg, std::span<const int> occupation) {
    Vector v = Vector::Zero(reg.dim());
    v(reg.basis_index(occupation)) = Complex(1);
    return BasicLabeledState(std::move(reg), std::move(v));
  }

  const Register& reg() const { return reg_; }
  const Vector& amplitudes() const { return amps_; }
  bool is_normalized() const { return normalized_; }
  Scalar norm() const { return amps_.norm(); }

  BasicLabeledState normalized() const {
    const Scalar n = amps_.norm();
    if (n <= Scalar(0)) throw NoEventError("cannot normalize the zero vector");
    return BasicLabeledState(reg_, amps_ / n, true);
  }

 private:
  Register reg_;
  Vector amps_;
  bool normalized_ = false;
};

template <typename Scalar>
class BasicDensityOperator {
 public:
  using Complex = std::complex<Scalar>;
  using Matrix = CMatrixT<Scalar>;

  BasicDensityOperator() = default;
  BasicDensityOperator(Register reg, Matrix matrix, bool normalized = true)
      : reg_(std::move(reg)), m_(std::move(matrix)), normalized_(normalized) {
    validate();
  }

  static BasicDensityOperator from_state(const BasicLabeledState<Scalar>& s) {
    return BasicDensityOperator(s.reg(), s.amplitudes() * s.amplitudes().adjoint(), s.is_normalized());
  }

  static BasicDensityOperator maximally_mixed(Register reg) {
    const Eigen::Index d = reg.dim();
    return BasicDensityOperator(std::move(reg), Matrix::Identity(d, d) / Scalar(d));
  }

  const Register& reg() const { return reg_; }
  const Matrix& matrix() const { return m_; }
  bool is_normalized() const { return normalized_; }
  Scalar trace() const { return m_.trace().real(); }
  Scalar purity() const { return (m_ * m_).trace().real(); }

  BasicDensityOperator normalized() const {
    const Scalar t = trace();
    if (t <= Scalar(0)) throw NoEventError("cannot normalize an operator with zero trace");
    return BasicDensityOperator(reg_, m_ / t, true);
  }

  /// Hermiticity, positivity and (when flagged) unit trace.
  void validate() const {
    if (m_.rows() != m_.cols() || m_.rows() != reg_.dim()) {
      throw std::invalid_argument("density matrix shape does not match register dimension");
    }
    const double asym = detail::max_abs(Matrix(m_ - m_.adjoint()));
    if (asym > kOperatorTolerance) {
      throw NumericalError("density operator is not Hermitian (deviation " + std::to_string(asym) + ")");
    }
    if (m_.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es((m_ + m_.adjoint()) / Scalar(2), Eigen::EigenvaluesOnly);
      const double lo = static_cast<double>(es.eigenvalues().minCoeff());
      if (lo < -kOperatorTolerance) {
        throw NumericalError("density operator has negative eigenvalue " + std::to_string(lo));
      }
    }
    if (normalized_ && std::abs(static_cast<double>(trace()) - 1.0) >= kOperatorTolerance) {
      throw NumericalError("density operator flagged normalized has trace " +
                           std::to_string(static_cast<double>(trace())));
    }
  }

 private:
  Register reg_;
  Matrix m_;
  bool normalized_ = false;
};

enum class MapKind { kUnitary, kKrausChannel, kPovmElement };

template <typename Scalar>
class BasicLinearMap {
 public:
  using Matrix = CMatrixT<Scalar>;

  static BasicLinearMap unitary(Matrix u, std::vector<std::string> acts_on) {
    BasicLinearMap m(MapKind::kUnitary, {std::move(u)}, std::move(acts_on));
    const Matrix& op = m.ops_.front();
    if (detail::max_abs(Matrix(op.adjoint() * op - Matrix::Identity(op.rows(), op.cols()))) >
        kOperatorTolerance) {
      throw NumericalError("operator is not unitary");
    }
    return m;
  }

  static BasicLinearMap kraus(std::vector<Matrix> ops, std::vector<std::string> acts_on) {
    BasicLinearMap m(MapKind::kKrausChannel, std::move(ops), std::move(acts_on));
    const Eigen::Index d = m.dim();
    Matrix sum = Matrix::Zero(d, d);
    for (const auto& k : m.ops_) sum += k.adjoint() * k;
    if (detail::max_abs(Matrix(sum - Matrix::Identity(d, d))) > kOperatorTolerance) {
      throw NumericalError("Kraus operators are not trace preserving");
    }
    return m;
  }

  static BasicLinearMap povm_element(Matrix e, std::vector<std::string> acts_on) {
    BasicLinearMap m(MapKind::kPovmElement, {std::move(e)}, std::move(acts_on));
    const Matrix& op = m.ops_.front();
    if (detail::max_abs(Matrix(op - op.adjoint())) > kOperatorTolerance) {
      throw NumericalError("POVM element is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es((op + op.adjoint()) / Scalar(2), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kOperatorTolerance ||
        es.eigenvalues().maxCoeff() > 1.0 + kOperatorTolerance) {
      throw NumericalError("POVM element eigenvalues leave [0, 1]");
    }
    return m;
  }

  MapKind kind() const { return kind_; }
  const std::vector<Matrix>& operands() const { return ops_; }
  const Matrix& op() const { return ops_.front(); }
  const std::vector<std::string>& acts_on() const { return acts_on_; }
  Eigen::Index dim() const { return ops_.front().cols(); }

 private:
  BasicLinearMap(MapKind kind, std::vector<Matrix> ops, std::vector<std::string> acts_on)
      : kind_(kind), ops_(std::move(ops)), acts_on_(std::move(acts_on)) {
    if (ops_.empty()) throw std::invalid_argument("linear map needs at least one operand");
    const Eigen::Index d = ops_.front().rows();
    for (const auto& o : ops_) {
      if (o.rows() != d || o.cols() != d) {
        throw std::invalid_argument("linear map operands must be square and of equal size");
      }
    }
  }

  MapKind kind_;
  std::vector<Matrix> ops_;
  std::vector<std::string> acts_on_;
};

using LabeledState = BasicLabeledState<double>;
using DensityOperator = BasicDensityOperator<double>;
using LinearMap = BasicLinearMap<double>;
using CMatrix = CMatrixT<double>;
using CVector = CVectorT<double>;
using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Composition and reordering

template <typename Scalar>
BasicLabeledState<Scalar> tensor(const BasicLabeledState<Scalar>& a, const BasicLabeledState<Scalar>& b) {
  Register reg = a.reg() + b.reg();
  CVectorT<Scalar> v = Eigen::kroneckerProduct(a.amplitudes(), b.amplitudes()).eval();
  return BasicLabeledState<Scalar>(std::move(reg), std::move(v), a.is_normalized() && b.is_normalized());
}

template <typename Scalar>
BasicDensityOperator<Scalar> tensor(const BasicDensityOperator<Scalar>& a, const BasicDensityOperator<Scalar>& b) {
  Register reg = a.reg() + b.reg();
  CMatrixT<Scalar> m = Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval();
  return BasicDensityOperator<Scalar>(std::move(reg), std::move(m), a.is_normalized() && b.is_normalized());
}

template <typename Scalar>
BasicLabeledState<Scalar> permute(const BasicLabeledState<Scalar>& s, std::span<const std::string> order) {
  Register to = s.reg().subset(order);
  const auto idx = detail::permutation_indices(s.reg(), to);
  CVectorT<Scalar> v(to.dim());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = s.amplitudes()(idx[static_cast<std::size_t>(i)]);
  return BasicLabeledState<Scalar>(std::move(to), std::move(v), s.is_normalized());
}

template <typename Scalar>
BasicDensityOperator<Scalar> permute(const BasicDensityOperator<Scalar>& rho, std::span<const std::string> order) {
  Register to = rho.reg().subset(order);
  const auto idx = detail::permutation_indices(rho.reg(), to);
  CMatrixT<Scalar> m = rho.matrix()(idx, idx);
  return BasicDensityOperator<Scalar>(std::move(to), std::move(m), rho.is_normalized());
}

/// Reduced operator on `keep`; the result lists the kept modes in their original order.
template <typename Scalar>
BasicDensityOperator<Scalar> partial_trace(const BasicDensityOperator<Scalar>& rho,
                                           std::span<const std::string> keep) {
  for (const auto& k : keep) rho.reg().index_of(k);
  std::vector<std::string> kept;
  for (const auto& m : rho.reg()) {
    if (std::find(keep.begin(), keep.end(), m.name) != keep.end()) kept.push_back(m.name);
  }
  const auto order = detail::leading_order(rho.reg(), kept);
  const auto p = permute(rho, order);
  const Register out_reg = rho.reg().subset(kept);
  const Eigen::Index dk = out_reg.dim();
  const Eigen::Index dr = rho.reg().dim() / dk;
  CMatrixT<Scalar> out = CMatrixT<Scalar>::Zero(dk, dk);
  const auto& m = p.matrix();
  for (Eigen::Index b = 0; b < dk; ++b) {
    for (Eigen::Index a = 0; a < dk; ++a) {
      std::complex<Scalar> acc(0);
      for (Eigen::Index r = 0; r < dr; ++r) acc += m(a * dr + r, b * dr + r);
      out(a, b) = acc;
    }
  }
  return BasicDensityOperator<Scalar>(out_reg, std::move(out), rho.is_normalized());
}

// ---------------------------------------------------------------------------
// Maps

namespace detail {

template <typename Scalar>
void check_acts_on(const Register& reg, const BasicLinearMap<Scalar>& map) {
  Eigen::Index d = 1;
  for (const auto& n : map.acts_on()) d *= reg.mode(n).dim();
  if (d != map.dim()) {
    throw std::invalid_argument("linear map dimension " + std::to_string(map.dim()) +
                                " does not match the addressed modes (" + std::to_string(d) + ")");
  }
}

/// sum_k K_k rho K_k^dagger with the K_k acting on the leading factor.
template <typename Matrix>
Matrix sandwich_leading(const std::vector<Matrix>& ops, const Matrix& rho) {
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& k : ops) {
    const Matrix left = left_apply(k, rho);
    out += left_apply(k, Matrix(left.adjoint())).adjoint();
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
BasicLabeledState<Scalar> apply(const BasicLinearMap<Scalar>& map, const BasicLabeledState<Scalar>& s) {
  if (map.operands().size() != 1) {
    throw std::invalid_argument("a multi-operator channel cannot act on a pure state");
  }
  detail::check_acts_on(s.reg(), map);
  const auto order = detail::leading_order(s.reg(), map.acts_on());
  const auto p = permute(s, order);
  CMatrixT<Scalar> col = p.amplitudes();
  CVectorT<Scalar> v = detail::left_apply(map.op(), col).col(0);
  const bool keeps_norm = s.is_normalized() && map.kind() == MapKind::kUnitary;
  BasicLabeledState<Scalar> out(p.reg(), std::move(v), false);
  out = permute(out, s.reg().names());
  if (keeps_norm) return BasicLabeledState<Scalar>(out.reg(), out.amplitudes() / out.norm(), true);
  return out;
}

template <typename Scalar>
BasicDensityOperator<Scalar> apply(const BasicLinearMap<Scalar>& map, const BasicDensityOperator<Scalar>& rho) {
  detail::check_acts_on(rho.reg(), map);
  const auto order = detail::leading_order(rho.reg(), map.acts_on());
  const auto p = permute(rho, order);
  CMatrixT<Scalar> m = detail::sandwich_leading(map.operands(), p.matrix());
  m = (m + m.adjoint()).eval() / Scalar(2);
  const bool keeps_trace = rho.is_normalized() && map.kind() != MapKind::kPovmElement;
  BasicDensityOperator<Scalar> out(p.reg(), std::move(m), keeps_trace);
  return permute(out, rho.reg().names());
}

// ---------------------------------------------------------------------------
// Measurement

template <typename Scalar>
struct ProjectionResult {
  Scalar probability;
  BasicDensityOperator<Scalar> post_state;  // unnormalized, trace == probability
};

template <typename Scalar>
CMatrixT<Scalar> psd_sqrt(const CMatrixT<Scalar>& e) {
  Eigen::SelfAdjointEigenSolver<CMatrixT<Scalar>> es((e + e.adjoint()) / Scalar(2));
  // Eigenvalues below the operator tolerance are zero; sqrt would amplify their noise.
  const auto vals = es.eigenvalues()
                        .unaryExpr([](Scalar x) { return x < Scalar(kOperatorTolerance) ? Scalar(0) : x; })
                        .cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
}

template <typename Scalar>
ProjectionResult<Scalar> measure_project(const BasicDensityOperator<Scalar>& rho,
                                         const BasicLinearMap<Scalar>& element) {
  if (element.kind() != MapKind::kPovmElement) {
    throw std::invalid_argument("measure_project needs a POVM element");
  }
  detail::check_acts_on(rho.reg(), element);
  const auto order = detail::leading_order(rho.reg(), element.acts_on());
  const auto p = permute(rho, order);
  const std::vector<CMatrixT<Scalar>> root{psd_sqrt<Scalar>(element.op())};
  CMatrixT<Scalar> post = detail::sandwich_leading(root, p.matrix());
  post = (post + post.adjoint()).eval() / Scalar(2);
  const Scalar prob = post.trace().real();
  if (prob < -kOperatorTolerance) {
    throw NumericalError("measurement probability is negative: " + std::to_string(static_cast<double>(prob)));
  }
  BasicDensityOperator<Scalar> out(p.reg(), std::move(post), false);
  return {std::max(prob, Scalar(0)), permute(out, rho.reg().names())};
}

template <typename Scalar>
ProjectionResult<Scalar> measure_project(const BasicLabeledState<Scalar>& s, const BasicLinearMap<Scalar>& element) {
  return measure_project(BasicDensityOperator<Scalar>::from_state(s), element);
}

/// Tr[(E ⊗ I)|s><s|] over the modes E does not touch. Never forms the full
/// density matrix, so it scales to joint states of both sites.
template <typename Scalar>
BasicDensityOperator<Scalar> condition_and_trace(const BasicLabeledState<Scalar>& s,
                                                 const BasicLinearMap<Scalar>& element) {
  detail::check_acts_on(s.reg(), element);
  const auto order = detail::leading_order(s.reg(), element.acts_on());
  const auto p = permute(s, order);
  const Eigen::Index da = element.dim();
  const Eigen::Index dr = p.reg().dim() / da;
  Eigen::Map<const CMatrixT<Scalar>> psi(p.amplitudes().data(), dr, da);
  CMatrixT<Scalar> out = psi * element.op().transpose() * psi.adjoint();
  out = (out + out.adjoint()).eval() / Scalar(2);
  std::vector<std::string> rest(order.begin() + static_cast<std::ptrdiff_t>(element.acts_on().size()), order.end());
  return BasicDensityOperator<Scalar>(s.reg().subset(rest), std::move(out), false);
}

template <typename Scalar>
Scalar expectation(const BasicDensityOperator<Scalar>& rho, const CMatrixT<Scalar>& obs,
                   std::span<const std::string> acts_on) {
  if (detail::max_abs(CMatrixT<Scalar>(obs - obs.adjoint())) > kOperatorTolerance) {
    throw std::invalid_argument("observable is not Hermitian");
  }
  const auto reduced = permute(partial_trace(rho, acts_on), acts_on);
  if (reduced.reg().dim() != obs.rows()) {
    throw std::invalid_argument("observable dimension does not match the addressed modes");
  }
  const std::complex<Scalar> v = (reduced.matrix() * obs).trace();
  if (std::abs(static_cast<double>(v.imag())) > kOperatorTolerance) {
    throw NumericalError("expectation value has an imaginary part");
  }
  return v.real();
}

template <typename Scalar>
Scalar expectation(const BasicDensityOperator<Scalar>& rho, const BasicLinearMap<Scalar>& obs) {
  if (obs.operands().size() != 1) throw std::invalid_argument("observable must be a single operator");
  return expectation(rho, obs.op(), std::span<const std::string>(obs.acts_on()));
}

template <typename Scalar>
Scalar fidelity_pure(const BasicDensityOperator<Scalar>& rho, const BasicLabeledState<Scalar>& target) {
  if (!(rho.reg() == target.reg())) {
    throw std::invalid_argument("fidelity_pure: register mismatch");
  }
  if (!target.is_normalized()) throw std::invalid_argument("fidelity_pure: target must be normalized");
  const auto& t = target.amplitudes();
  return (t.adjoint() * rho.matrix() * t)(0, 0).real();
}

// ---------------------------------------------------------------------------
// Fock-space helpers

/// Random-phase channel: averages exp(i·θ·g) over θ ~ N(0, variance), where
/// g = Σ c_m n_m. Element (i,j) is scaled by exp(-variance (g_i - g_j)^2 / 2).
/// An infinite variance keeps only the blocks with g_i == g_j.
template <typename Scalar>
BasicDensityOperator<Scalar> phase_diffuse(const BasicDensityOperator<Scalar>& rho,
                                           const std::vector<std::pair<std::string, double>>& generator,
                                           double variance) {
  if (variance < 0) throw std::invalid_argument("phase variance must be >= 0");
  const Register& reg = rho.reg();
  std::vector<std::pair<std::size_t, double>> gen;
  for (const auto& [name, c] : generator) gen.emplace_back(reg.index_of(name), c);
  const Eigen::Index d = reg.dim();
  std::vector<double> g(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (const auto& [pos, c] : gen) g[static_cast<std::size_t>(i)] += c * reg.occupation(i, pos);
  }
  CMatrixT<Scalar> m = rho.matrix();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double diff = g[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(j)];
      double w = 1.0;
      if (std::isinf(variance)) {
        w = std::abs(diff) < 1e-12 ? 1.0 : 0.0;
      } else if (variance > 0) {
        w = std::exp(-0.5 * variance * diff * diff);
      }
      m(i, j) *= Scalar(w);
    }
  }
  return BasicDensityOperator<Scalar>(reg, std::move(m), rho.is_normalized());
}

/// Pure loss with transmission eta on one bosonic mode truncated at n_max.
/// Kraus operator k removes k photons: A_k|n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k)|n-k>.
template <typename Scalar = double>
std::vector<CMatrixT<Scalar>> loss_kraus(int n_max, double eta) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("loss transmission must lie in [0, 1]");
  std::vector<CMatrixT<Scalar>> ops;
  for (int k = 0; k <= n_max; ++k) {
    CMatrixT<Scalar> a = CMatrixT<Scalar>::Zero(n_max + 1, n_max + 1);
    for (int n = k; n <= n_max; ++n) {
      const double binom = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
      const double w = binom * std::pow(eta, n - k) * std::pow(1.0 - eta, k);
      a(n - k, n) = Scalar(std::sqrt(w));
    }
    ops.push_back(std::move(a));
  }
  return ops;
}

template <typename Scalar = double>
BasicLinearMap<Scalar> loss_channel(const ModeLabel& mode, double eta) {
  if (mode.kind != ModeKind::kBosonic) throw std::invalid_argument("loss acts on bosonic modes");
  return BasicLinearMap<Scalar>::kraus(loss_kraus<Scalar>(mode.n_max, eta), {mode.name});
}

/// exp(i·phi·n) on one mode.
template <typename Scalar = double>
BasicLinearMap<Scalar> number_phase(const ModeLabel& mode, double phi) {
  CMatrixT<Scalar> u = CMatrixT<Scalar>::Zero(mode.dim(), mode.dim());
  for (int n = 0; n < mode.dim(); ++n) u(n, n) = std::polar(Scalar(1), Scalar(phi * n));
  return BasicLinearMap<Scalar>::unitary(std::move(u), {mode.name});
}

/// Σ K_k^† op K_k with the Kraus operators of `channel` embedded on their
/// modes of `reg`: the Heisenberg-picture action on an effect operator.
template <typename Scalar>
CMatrixT<Scalar> adjoint_apply(const BasicLinearMap<Scalar>& channel, const CMatrixT<Scalar>& op, const Register& reg) {
  detail::check_acts_on(reg, channel);
  const auto order = detail::leading_order(reg, channel.acts_on());
  const Register permuted = reg.subset(order);
  const auto fwd = detail::permutation_indices(reg, permuted);
  std::vector<Eigen::Index> back(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) back[static_cast<std::size_t>(fwd[i])] = static_cast<Eigen::Index>(i);
  std::vector<CMatrixT<Scalar>> adj;
  for (const auto& k : channel.operands()) adj.push_back(k.adjoint());
  const CMatrixT<Scalar> p = op(fwd, fwd);
  CMatrixT<Scalar> out = detail::sandwich_leading(adj, p);
  return out(back, back);
}

/// Restriction to "exactly one excitation in each rail pair", as qubits.
/// Qubit j is |0> when rails[j].first holds the excitation and |1> when
/// rails[j].second does. All other modes are traced out. The result is
/// unnormalized: its trace is the probability of the dual-rail subspace.
template <typename Scalar>
BasicDensityOperator<Scalar> dual_rail_projection(const BasicDensityOperator<Scalar>& rho,
                                                  const std::vector<std::pair<std::string, std::string>>& rails,
                                                  const std::vector<std::string>& qubit_names) {
  if (rails.size() != qubit_names.size()) throw std::invalid_argument("one qubit name per rail pair");
  std::vector<std::string> keep;
  for (const auto& [a, b] : rails) {
    keep.push_back(a);
    keep.push_back(b);
  }
  const auto reduced = permute(partial_trace(rho, keep), keep);
  const std::size_t k = rails.size();
  const Eigen::Index dq = Eigen::Index(1) << k;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(dq));
  std::vector<int> occ(2 * k);
  for (Eigen::Index q = 0; q < dq; ++q) {
    for (std::size_t j = 0; j < k; ++j) {
      const bool second = ((q >> (k - 1 - j)) & 1) != 0;
      occ[2 * j] = second ? 0 : 1;
      occ[2 * j + 1] = second ? 1 : 0;
    }
    idx[static_cast<std::size_t>(q)] = reduced.reg().basis_index(occ);
  }
  std::vector<ModeLabel> qubits;
  for (const auto& n : qubit_names) qubits.push_back(ModeLabel::polarization(n));
  CMatrixT<Scalar> m = reduced.matrix()(idx, idx);
  return BasicDensityOperator<Scalar>(Register(std::move(qubits)), std::move(m), false);
}

}  // namespace bdcz
