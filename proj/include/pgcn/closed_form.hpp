#pragma once

#include "pgcn/dense.hpp"
#include "pgcn/graph.hpp"

namespace pgcn {

/// Weights of the graph-regularized ridge objective
///   J2(O) = 1/2 Tr(OᵀO) + λ1/2 ‖H_L O − T_L‖²_F + λ2/(2N²) Tr(Oᵀ Hᵀ L̃ H O).
/// λ2 is dimensionless; the 1/N² scale is applied here.
struct RegressionConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  Index n_total = 0;  // N; 0 means "all rows of H"

  void validate() const {
    if (!(lambda1 > 0.0)) throw InputError("lambda1 must be positive");
    if (!(lambda2 >= 0.0)) throw InputError("lambda2 must be non-negative");
    if (n_total < 0) throw InputError("n_total must be non-negative");
  }
};

template <typename Derived>
DenseMatrix<typename Derived::Scalar> gather_rows(const Eigen::MatrixBase<Derived>& m, const IndexList& idx) {
  DenseMatrix<typename Derived::Scalar> out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index r = idx[k];
    if (r < 0 || r >= m.rows()) throw InputError("gather_rows: index out of range");
    out.row(static_cast<Index>(k)) = m.row(r);
  }
  return out;
}

/// Tr(Oᵀ Hᵀ L̃ H O), evaluated as Σ F ⊙ (L̃ F) with F = H·O.
template <typename Scalar>
Scalar laplacian_penalty(const DenseMatrix<Scalar>& h, const DenseMatrix<Scalar>& o,
                         const SparseMatrix<Scalar>& lap) {
  require_shape(h.cols() == o.rows(), "laplacian_penalty: H and O do not chain");
  require_shape(lap.rows() == h.rows() && lap.cols() == h.rows(), "laplacian_penalty: L̃ must be N×N");
  const DenseMatrix<Scalar> f = h * o;
  const DenseMatrix<Scalar> lf = lap * f;
  return (f.array() * lf.array()).sum();
}

namespace detail {

inline Index resolve_n(const RegressionConfig& cfg, Index rows) {
  const Index n = cfg.n_total == 0 ? rows : cfg.n_total;
  require_shape(n == rows, "regression: rows(H) must equal N");
  return n;
}

}  // namespace detail

template <typename Scalar>
Scalar objective_j2(const DenseMatrix<Scalar>& h_all, const DenseMatrix<Scalar>& o,
                    const DenseMatrix<Scalar>& t_labeled, const IndexList& labeled_idx,
                    const SparseMatrix<Scalar>& lap, const RegressionConfig& cfg) {
  cfg.validate();
  const Index n = detail::resolve_n(cfg, h_all.rows());
  require_shape(t_labeled.rows() == static_cast<Index>(labeled_idx.size()), "objective_j2: one target row per label");
  require_shape(t_labeled.cols() == o.cols(), "objective_j2: target width must match O");
  const DenseMatrix<Scalar> h_l = gather_rows(h_all, labeled_idx);
  require_shape(h_l.cols() == o.rows(), "objective_j2: H and O do not chain");
  const Scalar ridge = Scalar(0.5) * o.squaredNorm();
  const Scalar fit = Scalar(0.5 * cfg.lambda1) * (h_l * o - t_labeled).squaredNorm();
  const Scalar nn = static_cast<Scalar>(n) * static_cast<Scalar>(n);
  const Scalar smooth = Scalar(cfg.lambda2) / (Scalar(2) * nn) * laplacian_penalty(h_all, o, lap);
  return ridge + fit + smooth;
}

/// Exact minimizer of objective_j2:
///   O = (H_LᵀH_L + c·HᵀL̃H + (1/λ1)·I)⁻¹ H_LᵀT_L,  c = λ2/(λ1·N²),
/// solved through the D×D Gram system (never an explicit inverse).
template <typename Scalar>
DenseMatrix<Scalar> solve_output_weights(const DenseMatrix<Scalar>& h_all, const IndexList& labeled_idx,
                                         const DenseMatrix<Scalar>& t_labeled,
                                         const SparseMatrix<Scalar>& lap, const RegressionConfig& cfg) {
  cfg.validate();
  const Index n = detail::resolve_n(cfg, h_all.rows());
  if (labeled_idx.empty()) throw InputError("solve_output_weights: labeled set is empty");
  require_shape(t_labeled.rows() == static_cast<Index>(labeled_idx.size()),
                "solve_output_weights: one target row per label");
  require_shape(lap.rows() == n && lap.cols() == n, "solve_output_weights: L̃ must be N×N");

  const DenseMatrix<Scalar> h_l = gather_rows(h_all, labeled_idx);
  const Index width = h_all.cols();
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Dense gram = h_l.transpose() * h_l;
  if (cfg.lambda2 > 0.0) {
    const Scalar c = Scalar(cfg.lambda2) / (Scalar(cfg.lambda1) * static_cast<Scalar>(n) * static_cast<Scalar>(n));
    const DenseMatrix<Scalar> lh = lap * h_all;
    gram.noalias() += c * (h_all.transpose() * lh);
  }
  gram.diagonal().array() += Scalar(1.0 / cfg.lambda1);
  // HᵀL̃H is symmetric only up to rounding.
  const Dense sym = Scalar(0.5) * (gram + gram.transpose());
  const Dense rhs = h_l.transpose() * t_labeled;
  DenseMatrix<Scalar> o = solve_spd(sym, rhs);
  require_shape(o.rows() == width, "solve_output_weights: unexpected solution shape");
  return o;
}

}  // namespace pgcn
