#pragma once

// Dense kernels shared by the transformer forward and backward passes.
// Written against Eigen::MatrixBase so they accept blocks and expressions.

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Core>

namespace gem {

template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kLayerNormEps = 1e-5;

/// tanh-approximated GELU, as used by the GPT-2 family.
template <typename Derived>
auto gelu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  return x.unaryExpr([c](Scalar v) {
    return Scalar(0.5) * v * (Scalar(1) + std::tanh(c * (v + Scalar(0.044715) * v * v * v)));
  });
}

template <typename Derived>
auto gelu_derivative(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  return x.unaryExpr([c](Scalar v) {
    const Scalar t = std::tanh(c * (v + Scalar(0.044715) * v * v * v));
    return Scalar(0.5) * (Scalar(1) + t) +
           Scalar(0.5) * v * (Scalar(1) - t * t) * c * (Scalar(1) + Scalar(3 * 0.044715) * v * v);
  });
}

/// Row-wise layer normalization. Writes the normalized input and the
/// reciprocal standard deviation so the backward pass can reuse them.
template <typename DerivedX, typename DerivedG, typename DerivedB, typename DerivedY,
          typename DerivedXhat, typename DerivedR>
void layer_norm(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedG>& gamma,
                const Eigen::MatrixBase<DerivedB>& beta, Eigen::MatrixBase<DerivedY> const& y_,
                Eigen::MatrixBase<DerivedXhat> const& xhat_, Eigen::MatrixBase<DerivedR> const& rstd_) {
  using Scalar = typename DerivedX::Scalar;
  auto& y = const_cast<Eigen::MatrixBase<DerivedY>&>(y_);
  auto& xhat = const_cast<Eigen::MatrixBase<DerivedXhat>&>(xhat_);
  auto& rstd = const_cast<Eigen::MatrixBase<DerivedR>&>(rstd_);
  const auto cols = static_cast<Scalar>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).sum() / cols;
    const Scalar var = (x.row(r).array() - mean).square().sum() / cols;
    const Scalar inv = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
    rstd(r) = inv;
    xhat.row(r) = (x.row(r).array() - mean) * inv;
    y.row(r) = xhat.row(r).cwiseProduct(gamma) + beta;
  }
}

/// Gradient of layer_norm with respect to its input, given the upstream
/// gradient already multiplied by gamma.
template <typename DerivedD, typename DerivedXhat, typename DerivedR>
MatrixR<typename DerivedD::Scalar> layer_norm_input_grad(const Eigen::MatrixBase<DerivedD>& dxhat,
                                                         const Eigen::MatrixBase<DerivedXhat>& xhat,
                                                         const Eigen::MatrixBase<DerivedR>& rstd) {
  using Scalar = typename DerivedD::Scalar;
  MatrixR<Scalar> dx(dxhat.rows(), dxhat.cols());
  const auto cols = static_cast<Scalar>(dxhat.cols());
  for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
    const Scalar mean_d = dxhat.row(r).sum() / cols;
    const Scalar mean_dx = dxhat.row(r).dot(xhat.row(r)) / cols;
    dx.row(r) = rstd(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
  }
  return dx;
}

/// Numerically stable softmax of a row vector or of every row of a matrix.
template <typename Derived>
MatrixR<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixR<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    if (m == -std::numeric_limits<Scalar>::infinity()) {
      out.row(r).setZero();
      continue;
    }
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// log(sum(exp(row))) for one row.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& row) {
  const auto m = row.maxCoeff();
  return m + std::log((row.array() - m).exp().sum());
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
Eigen::Index argmax_lowest(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

}  // namespace gem
