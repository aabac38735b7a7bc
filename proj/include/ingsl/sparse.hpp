#pragma once

#include "ingsl/tensor.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <utility>
#include <vector>

namespace ingsl {

/// Compressed row storage; column indices sorted within each row.
/// Stored entry k (in row-major order) is valuePtr()[k].
using CsrMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// A fixed CSR structure whose stored values live on a tape as an [nnz x 1]
/// tensor, so gradients can reach individual edge weights.
struct SparseAdjacency {
    std::shared_ptr<const CsrMatrix> structure;
    Tensor values;

    Index rows() const { return structure->rows(); }
    Index nnz() const { return structure->nonZeros(); }
    /// Structure with the current tape values written in.
    CsrMatrix materialize() const;
};

/// Builds a compressed matrix from (row, col, value) triplets. Duplicates are summed.
CsrMatrix csr_from_triplets(Index rows, Index cols, const std::vector<Eigen::Triplet<double, int>>& triplets);

/// Row index of every stored entry, in storage order.
std::vector<Index> entry_rows(const CsrMatrix& m);
/// Column index of every stored entry, in storage order.
std::vector<Index> entry_cols(const CsrMatrix& m);
/// Storage position of (row, col), or -1 when absent.
Index find_entry(const CsrMatrix& m, Index row, Index col);

/// Places the structure's stored values on `tape` as a constant (or leaf, if requires_grad).
SparseAdjacency lift(Tape& tape, const CsrMatrix& m, bool requires_grad = false);

/// Sparse-dense product. Gradients reach both the edge values and x.
Tensor spmm(const SparseAdjacency& a, const Tensor& x);

/// Symmetric degree normalization of stored values that already include the
/// self-loops: out_k = v_k / sqrt(D_row(k) * D_col(k)) with D_i = sum of row i.
Tensor degree_normalize(const CsrMatrix& structure, const Tensor& values);

/// out = base + factor * scatter(src -> positions). Entries of `positions` index into `base`.
Tensor scatter_add(const Vector& base, std::span<const Index> positions, const Tensor& src, double factor);

}  // namespace ingsl
