#pragma once

#include "ingsl/sparse.hpp"
#include "ingsl/tensor.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ingsl {

/// Trainable weights of a GCN: one matrix per layer and an optional linear
/// classifier (empty when the network only produces embeddings).
struct GcnParams {
    std::vector<Matrix> layers;
    Matrix classifier;

    /// Throws ShapeError unless consecutive dimensions chain.
    void check() const;
    Index input_dim() const { return layers.front().rows(); }
    Index output_dim() const { return layers.back().cols(); }
    bool has_classifier() const { return classifier.size() > 0; }
};

/// Uniform Glorot initialization, +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng);

/// `dims` = {input, hidden_1, ..., hidden_L}; classes == 0 leaves the classifier empty.
GcnParams init_gcn(std::span<const Index> dims, Index classes, std::mt19937_64& rng);

/// GcnParams bound to a tape as leaves.
struct GcnVars {
    std::vector<Tensor> layers;
    Tensor classifier;  ///< invalid when the network has no classifier
};

GcnVars bind(Tape& tape, const GcnParams& params, bool requires_grad = true);

struct GcnOutput {
    Tensor representations;
    Tensor logits;  ///< invalid without a classifier
};

/// Z^(l) = ReLU(A Z^(l-1) W^(l)) for every layer, then logits = Z W_c.
GcnOutput gcn_forward(const SparseAdjacency& adj, const Tensor& x, const GcnVars& params);

/// Mean cross-entropy of the labelled nodes in `mask`, via log-sum-exp.
Tensor task_loss(const Tensor& logits, std::span<const int> labels, std::span<const Index> mask);

/// Fraction of masked nodes whose argmax logit (lowest index on ties) equals the label.
double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const Index> mask);

/// Flat list of parameters with Adam moments. Parameters flagged frozen are never updated.
struct TrainState {
    std::vector<Matrix> params;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::vector<bool> frozen;
    std::int64_t step = 0;

    explicit TrainState(std::vector<Matrix> initial = {});
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One bias-corrected Adam update. NaN gradients throw NumericError before anything changes.
void adam_step(TrainState& state, std::span<const Matrix> grads, double lr, const AdamOptions& opts = {});

/// Multiply-add count of an L-layer GCN: sum_l 2*m*d_l + sum_l 2*n*d_{l-1}*d_l.
/// `layer_dims` = {d_0, d_1, ..., d_L}.
std::int64_t flops_estimate(std::int64_t edge_count, std::span<const Index> layer_dims, std::int64_t n);

/// Largest singular value by power iteration on W^T W.
double spectral_norm(const Matrix& w, int iterations = 100);

}  // namespace ingsl
