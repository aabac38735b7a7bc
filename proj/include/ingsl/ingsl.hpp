#pragma once

#include "ingsl/gsl.hpp"
#include "ingsl/sparse.hpp"
#include "ingsl/tensor.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace ingsl {

enum class ScorerKind { kBilinear, kMlp };

/// Learnable diversity function w_ij = f(E_i, E_j).
///
/// Bilinear: E_i W_1 E_j^T with W_1 [h x h].
/// MLP: relu([E_i, E_j] W_a) W_b with W_a [2h x h], W_b [h x 1], no biases.
struct DiversityScorer {
    ScorerKind kind = ScorerKind::kBilinear;
    Matrix bilinear;
    Matrix mlp_hidden;
    Matrix mlp_out;

    void check() const;
    Index embedding_dim() const;

    static DiversityScorer identity(Index h);
    static DiversityScorer random(ScorerKind kind, Index h, std::mt19937_64& rng);
    /// Parameters in a fixed order (bilinear: {W_1}; mlp: {W_a, W_b}).
    std::vector<Matrix> parameters() const;
    static DiversityScorer from_parameters(ScorerKind kind, std::span<const Matrix> params);
};

struct ScorerVars {
    ScorerKind kind = ScorerKind::kBilinear;
    Tensor first;
    Tensor second;
};

ScorerVars bind(Tape& tape, const DiversityScorer& scorer, bool requires_grad = true);

/// One score per (rows[k], cols[k]) pair, computed edge by edge.
Tensor diversity_scores(const Tensor& e, std::span<const Index> rows, std::span<const Index> cols,
                        const ScorerVars& scorer);
/// Scores aligned with the stored entries of the candidate graph.
Tensor diversity_scores(const Tensor& e, const CandidateGraph& s, const ScorerVars& scorer);

/// Keep rule for adjusted weights x: keep when x > value, and keep the first
/// `ties_kept` entries (by position) with x == value.
struct Threshold {
    double value = -std::numeric_limits<double>::infinity();
    Index ties_kept = std::numeric_limits<Index>::max();

    Threshold() = default;
    Threshold(double v) : value(v) {}  // NOLINT: a bare real keeps every tie
    Threshold(double v, Index ties) : value(v), ties_kept(ties) {}

    static Threshold keep_all() { return Threshold(); }
};

/// ceil((1 - r) * m), guarded against round-off in the product.
Index survivor_count(Index m, double r);

/// Threshold whose keep set has exactly survivor_count(x.size(), r) members:
/// the survivors are the largest x, ties resolved toward the lower position.
Threshold select_threshold(std::span<const double> x, double r);

/// Positions of x that pass the threshold, ascending.
std::vector<Index> surviving_positions(std::span<const double> x, const Threshold& thr);

/// Pruned graph together with the surviving candidate positions.
struct PrunedGraph {
    SparseAdjacency sparse;
    std::vector<Index> kept;
    Tensor adjusted;  ///< x = S * w over all candidates
};

/// S~_ij = sigmoid(S_ij w_ij) where S_ij w_ij passes the threshold, dropped
/// otherwise. The keep decision carries no gradient.
PrunedGraph prune_detailed(const CandidateGraph& s, const Tensor& w, const Threshold& thr);
SparseAdjacency prune(const CandidateGraph& s, const Tensor& w, const Threshold& thr);

/// Node ids drawn uniformly without replacement, ascending.
std::vector<Index> sample_batch(Index n, Index size, std::uint64_t seed);

/// Softmax mutual-information estimate between two views:
/// -(1/n) sum_i log[ exp(cos(Zt_i, Z_i)) / sum_{j in B + {i}} exp(cos(Zt_i, Z_j)) ].
/// Rows with zero norm contribute cosine 0.
Tensor mi_loss(const Tensor& z_tilde, const Tensor& z, std::span<const Index> batch);
Tensor mi_loss(const Tensor& z_tilde, const Tensor& z, Index batch_size, std::uint64_t seed);

/// l_gsl + beta * l_mi.
Tensor total_loss(const Tensor& l_gsl, const Tensor& l_mi, double beta);

}  // namespace ingsl
