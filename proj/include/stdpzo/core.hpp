#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stdpzo {

// All parameter, noise and data vectors are dense column vectors of doubles.
using RealVector = Eigen::VectorXd;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(const std::string& what, Eigen::Index lhs, Eigen::Index rhs)
      : std::invalid_argument(what + ": dimension mismatch (" +
                              std::to_string(lhs) + " vs " +
                              std::to_string(rhs) + ")") {}
};

// Raised when a component leaves the finite range; carries the offending index.
class NonFiniteComponent : public std::overflow_error {
 public:
  NonFiniteComponent(const std::string& what, Eigen::Index index)
      : std::overflow_error(what + ": non-finite component at index " +
                            std::to_string(index)),
        index_(index) {}

  Eigen::Index index() const noexcept { return index_; }

 private:
  Eigen::Index index_;
};

template <typename DerivedA, typename DerivedB>
void require_same_dim(const Eigen::MatrixBase<DerivedA>& a,
                      const Eigen::MatrixBase<DerivedB>& b,
                      const std::string& what) {
  if (a.size() != b.size()) throw DimensionMismatch(what, a.size(), b.size());
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v,
                    const std::string& what) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (!std::isfinite(v[j])) throw NonFiniteComponent(what, j);
  }
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

// Componentwise product a ⊙ b.
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> hadamard(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
  require_same_dim(a, b, "hadamard");
  return a.cwiseProduct(b);
}

enum class ExpSign : int { positive = 1, negative = -1 };

// Componentwise x -> e^{±x}. Throws NonFiniteComponent naming the first
// component that is non-finite on input or overflows on output.
template <typename Derived>
Vector<typename Derived::Scalar> exp_map(const Eigen::MatrixBase<Derived>& v,
                                         ExpSign sign) {
  using Scalar = typename Derived::Scalar;
  const Scalar s = static_cast<Scalar>(static_cast<int>(sign));
  Vector<Scalar> out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (!std::isfinite(v[j])) throw NonFiniteComponent("exp_map", j);
    out[j] = std::exp(s * v[j]);
    if (!std::isfinite(out[j])) throw NonFiniteComponent("exp_map", j);
  }
  return out;
}

// e^{-U} - e^{U}, the spike-timing factor of the plasticity update.
template <typename Derived>
Vector<typename Derived::Scalar> timing_factor(const Eigen::MatrixBase<Derived>& u) {
  return exp_map(u, ExpSign::negative) - exp_map(u, ExpSign::positive);
}

}  // namespace stdpzo
