#pragma once

#include <cmath>

#include <Eigen/Cholesky>

#include "pgcn/rng.hpp"
#include "pgcn/types.hpp"

namespace pgcn {

template <typename DerivedA, typename DerivedB>
DenseMatrix<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ");
  DenseMatrix<typename DerivedA::Scalar> out = a * b;
  return out;
}

/// Solves G·X = B for symmetric positive definite G with a Cholesky
/// factorization. A failed factorization is retried once with diagonal jitter
/// 1e-10·trace(G)/n; a second failure raises SingularityError.
template <typename DerivedG, typename DerivedB>
DenseMatrix<typename DerivedG::Scalar> solve_spd(const Eigen::MatrixBase<DerivedG>& g,
                                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedG::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require_shape(g.rows() == g.cols(), "solve_spd: G must be square");
  require_shape(g.rows() == b.rows(), "solve_spd: rows of B must match G");
  const Index n = g.rows();
  if (n == 0) return DenseMatrix<Scalar>(0, b.cols());

  const Scalar scale = std::max(Scalar(1), g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale) {
    throw InputError("solve_spd: G is not symmetric");
  }

  Dense gm = g;
  Eigen::LLT<Dense> llt(gm);
  if (llt.info() != Eigen::Success) {
    const Scalar jitter = Scalar(1e-10) * gm.trace() / Scalar(n);
    gm.diagonal().array() += jitter;
    llt.compute(gm);
    if (llt.info() != Eigen::Success || !(jitter > Scalar(0))) {
      throw SingularityError("solve_spd: Cholesky factorization failed after jitter");
    }
  }
  const Dense rhs = b;
  Dense x = llt.solve(rhs);
  // One step of iterative refinement tightens the residual on poorly scaled systems.
  const Dense residual = rhs - gm * x;
  x += llt.solve(residual);
  if (!x.allFinite()) throw SingularityError("solve_spd: non-finite solution");
  return DenseMatrix<Scalar>(x);
}

/// Matrix with entries drawn from U[lo, hi).
inline DenseMat uniform_init(Index rows, Index cols, double lo, double hi, SeededRng& rng) {
  if (lo > hi) throw InputError("uniform_init: lo must not exceed hi");
  DenseMat out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = rng.uniform(lo, hi);
  }
  return out;
}

/// Half-width sqrt(6 / (fan_in + fan_out)) of the Glorot uniform range.
inline double glorot_limit(Index fan_in, Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace pgcn
