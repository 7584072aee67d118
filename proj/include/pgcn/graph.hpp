#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "pgcn/types.hpp"

namespace pgcn {

/// Undirected edge list over nodes [0, n).
struct EdgeList {
  Index n = 0;
  std::vector<std::pair<Index, Index>> edges;
};

/// Entry-by-entry symmetry check: (i,j) stored iff (j,i) stored, with equal values.
template <typename Scalar>
bool is_symmetric(const SparseMatrix<Scalar>& s) {
  if (s.rows() != s.cols()) return false;
  SparseMatrix<Scalar> t = s.transpose();
  if (t.nonZeros() != s.nonZeros()) return false;
  for (Index r = 0; r < s.outerSize(); ++r) {
    typename SparseMatrix<Scalar>::InnerIterator a(s, r), b(t, r);
    for (; a && b; ++a, ++b) {
      if (a.col() != b.col() || a.value() != b.value()) return false;
    }
    if (a || b) return false;
  }
  return true;
}

template <typename Scalar>
DenseMatrix<Scalar> to_dense(const SparseMatrix<Scalar>& s) {
  return DenseMatrix<Scalar>(s);
}

/// Binary symmetric adjacency. Self-loops are dropped and repeated or reversed
/// edges collapse to a single pair of entries.
template <typename Scalar = Real>
SparseMatrix<Scalar> build_adjacency(const EdgeList& list) {
  if (list.n < 1) throw InputError("adjacency: node count must be >= 1");
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(2 * list.edges.size());
  for (const auto& [u, v] : list.edges) {
    if (u < 0 || v < 0 || u >= list.n || v >= list.n) {
      throw InputError("adjacency: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") out of range for n = " + std::to_string(list.n));
    }
    if (u == v) continue;
    pairs.emplace_back(u, v);
    pairs.emplace_back(v, u);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<Eigen::Triplet<Scalar, int>> triplets;
  triplets.reserve(pairs.size());
  for (const auto& [u, v] : pairs) {
    triplets.emplace_back(static_cast<int>(u), static_cast<int>(v), Scalar(1));
  }
  SparseMatrix<Scalar> a(list.n, list.n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

namespace detail {

template <typename Scalar>
void validate_adjacency(const SparseMatrix<Scalar>& a) {
  if (a.rows() < 1 || a.rows() != a.cols()) throw ShapeError("adjacency must be square and non-empty");
  for (Index r = 0; r < a.outerSize(); ++r) {
    for (typename SparseMatrix<Scalar>::InnerIterator it(a, r); it; ++it) {
      if (it.col() == r && it.value() != Scalar(0)) throw InputError("adjacency must have a zero diagonal");
      if (it.value() < Scalar(0)) throw InputError("adjacency entries must be non-negative");
    }
  }
  if (!is_symmetric(a)) throw InputError("adjacency must be symmetric");
}

// Self-loop-augmented degrees: 1 + sum_j A_ij.
template <typename Scalar>
std::vector<Scalar> augmented_degrees(const SparseMatrix<Scalar>& a) {
  std::vector<Scalar> deg(static_cast<std::size_t>(a.rows()), Scalar(1));
  for (Index r = 0; r < a.outerSize(); ++r) {
    for (typename SparseMatrix<Scalar>::InnerIterator it(a, r); it; ++it) {
      if (it.col() != r) deg[static_cast<std::size_t>(r)] += it.value();
    }
  }
  return deg;
}

// Assembles D^{-1/2} (I + A) D^{-1/2} with the diagonal mapped through `diag`
// and off-diagonal values through `off`.
template <typename Scalar, typename DiagFn, typename OffFn>
SparseMatrix<Scalar> assemble_normalized(const SparseMatrix<Scalar>& a, DiagFn diag, OffFn off) {
  validate_adjacency(a);
  const auto deg = augmented_degrees(a);
  const Index n = a.rows();
  std::vector<Eigen::Triplet<Scalar, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(a.nonZeros() + n));
  for (Index r = 0; r < n; ++r) {
    const Scalar dr = deg[static_cast<std::size_t>(r)];
    triplets.emplace_back(static_cast<int>(r), static_cast<int>(r), diag(Scalar(1) / dr));
    for (typename SparseMatrix<Scalar>::InnerIterator it(a, r); it; ++it) {
      if (it.col() == r || it.value() == Scalar(0)) continue;
      const Scalar dc = deg[static_cast<std::size_t>(it.col())];
      // d_r * d_c is commutative in floating point, so (r,c) and (c,r) get identical bits.
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()),
                            off(it.value() / std::sqrt(dr * dc)));
    }
  }
  SparseMatrix<Scalar> out(n, n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

}  // namespace detail

/// Â = D̃^{-1/2} (I + A) D̃^{-1/2}, where D̃ holds the row sums of I + A.
template <typename Scalar>
SparseMatrix<Scalar> normalize_adjacency(const SparseMatrix<Scalar>& a) {
  return detail::assemble_normalized(
      a, [](Scalar v) { return v; }, [](Scalar v) { return v; });
}

/// L̃ = I − Â, stored on the same pattern as Â (isolated nodes keep an explicit zero).
template <typename Scalar>
SparseMatrix<Scalar> normalized_laplacian(const SparseMatrix<Scalar>& a) {
  return detail::assemble_normalized(
      a, [](Scalar v) { return Scalar(1) - v; }, [](Scalar v) { return -v; });
}

/// Sparse-dense product S·M. Serial row-wise accumulation, so results are reproducible.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> spmm(const SparseMatrix<Scalar>& s, const Eigen::MatrixBase<Derived>& m) {
  require_shape(s.cols() == m.rows(), "spmm: inner dimensions differ");
  DenseMatrix<Scalar> out = s * m;
  return out;
}

}  // namespace pgcn
