#pragma once

#include "ingsl/gnn.hpp"
#include "ingsl/graph.hpp"
#include "ingsl/sparse.hpp"

namespace ingsl {

enum class Similarity { kInnerProduct, kCosine };

/// Row-wise top-K similarity graph S. Stored values are differentiable in the
/// embeddings; the kept positions are not.
struct CandidateGraph {
    SparseAdjacency sparse;
    Index k = 0;
    Tensor embeddings;

    Index edge_count() const { return sparse.nnz(); }
};

/// E = GNN_S(A_hat, X): the GCN forward without a classifier.
Tensor encode_structure(const SparseAdjacency& a_norm, const Tensor& x, const GcnVars& params_s);

/// Column indices of the k largest scores in each row, self excluded, ties
/// toward the smaller column. Rows are returned in ascending column order.
std::vector<std::vector<Index>> top_k_indices(const Matrix& scores, Index k);

/// S = TopK(E E^T) (or of cosine similarities), row-wise, not symmetrized.
CandidateGraph build_candidates(const Tensor& e, Index k, Similarity similarity = Similarity::kInnerProduct);

/// task + lambda * reg.
Tensor gsl_objective(const Tensor& task, const Tensor& reg, double lambda);

/// Feature-smoothness regularizer 1/(2n) sum_(i,j) S_ij ||x_i - x_j||^2 over the stored entries of `s`.
Tensor feature_smoothness(const SparseAdjacency& s, const Matrix& x);

/// Normalized adjacency of A + residual_weight * S (see normalize_adjacency).
/// Gradients reach the values of S.
SparseAdjacency fuse_with_original(const Graph& a, const SparseAdjacency& s, double residual_weight = 1.0);

/// Number of stored entries of `s` that are not edges of `a`.
Index additional_edge_count(const Graph& a, const CsrMatrix& s);

}  // namespace ingsl
