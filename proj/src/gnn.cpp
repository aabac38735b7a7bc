#include "ingsl/gnn.hpp"

#include <cmath>
#include <limits>

namespace ingsl {

void GcnParams::check() const {
    if (layers.empty()) throw ShapeError("GcnParams: at least one layer required");
    for (std::size_t l = 1; l < layers.size(); ++l) {
        if (layers[l - 1].cols() != layers[l].rows()) {
            throw ShapeError("GcnParams: layer " + std::to_string(l) + " expects " + std::to_string(layers[l].rows()) +
                             " inputs but previous layer emits " + std::to_string(layers[l - 1].cols()));
        }
    }
    if (has_classifier() && classifier.rows() != layers.back().cols()) {
        throw ShapeError("GcnParams: classifier input " + std::to_string(classifier.rows()) +
                         " does not match final hidden dimension " + std::to_string(layers.back().cols()));
    }
}

Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    return w;
}

GcnParams init_gcn(std::span<const Index> dims, Index classes, std::mt19937_64& rng) {
    if (dims.size() < 2) throw ShapeError("init_gcn: need an input and at least one hidden dimension");
    GcnParams p;
    for (std::size_t l = 1; l < dims.size(); ++l) p.layers.push_back(glorot_uniform(dims[l - 1], dims[l], rng));
    if (classes > 0) p.classifier = glorot_uniform(dims.back(), classes, rng);
    return p;
}

GcnVars bind(Tape& tape, const GcnParams& params, bool requires_grad) {
    params.check();
    GcnVars v;
    for (const auto& w : params.layers) v.layers.push_back(tape.leaf(w, requires_grad));
    if (params.has_classifier()) v.classifier = tape.leaf(params.classifier, requires_grad);
    return v;
}

GcnOutput gcn_forward(const SparseAdjacency& adj, const Tensor& x, const GcnVars& params) {
    if (adj.rows() != x.rows()) {
        throw ShapeError("gcn_forward: adjacency has " + std::to_string(adj.rows()) + " rows but features " +
                         shape_string(x.rows(), x.cols()));
    }
    Tensor z = x;
    for (const auto& w : params.layers) {
        if (z.cols() != w.rows()) {
            throw ShapeError("gcn_forward: representation " + shape_string(z.rows(), z.cols()) +
                             " does not chain into weight " + shape_string(w.rows(), w.cols()));
        }
        // Aggregate at the narrower width.
        if (w.cols() < w.rows()) {
            z = relu(spmm(adj, matmul(z, w)));
        } else {
            z = relu(matmul(spmm(adj, z), w));
        }
    }
    GcnOutput out{z, Tensor()};
    if (params.classifier.valid()) out.logits = matmul(z, params.classifier);
    return out;
}

Tensor task_loss(const Tensor& logits, std::span<const int> labels, std::span<const Index> mask) {
    if (mask.empty()) throw ConfigError("task_loss: empty mask");
    const Matrix& v = logits.value();
    if (static_cast<Index>(labels.size()) != v.rows()) throw ShapeError("task_loss: label count does not match logits");
    Matrix probs(static_cast<Index>(mask.size()), v.cols());
    double total = 0.0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        const Index i = mask[k];
        const double peak = v.row(i).maxCoeff();
        const double lse = peak + std::log((v.row(i).array() - peak).exp().sum());
        total += lse - v(i, labels[static_cast<std::size_t>(i)]);
        probs.row(static_cast<Index>(k)) = (v.row(i).array() - lse).exp().matrix();
    }
    Matrix out(1, 1);
    out(0, 0) = total / static_cast<double>(mask.size());
    std::vector<Index> idx(mask.begin(), mask.end());
    std::vector<int> y(labels.begin(), labels.end());
    return logits.tape().record(
        std::move(out), {logits},
        [logits, idx = std::move(idx), y = std::move(y), probs = std::move(probs)](Tape& tape, const Matrix& g) {
            const double scale = g(0, 0) / static_cast<double>(idx.size());
            Matrix d = Matrix::Zero(logits.rows(), logits.cols());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const Index i = idx[k];
                d.row(i) += scale * probs.row(static_cast<Index>(k));
                d(i, y[static_cast<std::size_t>(i)]) -= scale;
            }
            tape.accumulate(logits, d);
        });
}

double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const Index> mask) {
    if (mask.empty()) throw ConfigError("accuracy: empty mask");
    std::size_t hits = 0;
    for (Index i : mask) {
        Index best = 0;
        for (Index c = 1; c < logits.cols(); ++c) {
            if (logits(i, c) > logits(i, best)) best = c;
        }
        if (best == labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(mask.size());
}

TrainState::TrainState(std::vector<Matrix> initial) : params(std::move(initial)) {
    for (const auto& p : params) {
        first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
        second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
    frozen.assign(params.size(), false);
}

void adam_step(TrainState& state, std::span<const Matrix> grads, double lr, const AdamOptions& opts) {
    if (grads.size() != state.params.size()) throw ShapeError("adam_step: gradient count does not match parameters");
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (grads[k].rows() != state.params[k].rows() || grads[k].cols() != state.params[k].cols()) {
            throw ShapeError("adam_step: gradient " + std::to_string(k) + " has shape " +
                             shape_string(grads[k].rows(), grads[k].cols()) + ", parameter " +
                             shape_string(state.params[k].rows(), state.params[k].cols()));
        }
        if (grads[k].hasNaN()) throw NumericError("adam_step: NaN gradient for parameter " + std::to_string(k));
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(opts.beta1, t);
    const double c2 = 1.0 - std::pow(opts.beta2, t);
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (state.frozen[k]) continue;
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        m = opts.beta1 * m + (1.0 - opts.beta1) * grads[k];
        v = opts.beta2 * v + (1.0 - opts.beta2) * grads[k].cwiseProduct(grads[k]);
        state.params[k].array() -=
            lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opts.epsilon);
    }
}

std::int64_t flops_estimate(std::int64_t edge_count, std::span<const Index> layer_dims, std::int64_t n) {
    std::int64_t total = 0;
    for (std::size_t l = 1; l < layer_dims.size(); ++l) {
        total += 2 * edge_count * layer_dims[l];
        total += 2 * n * layer_dims[l - 1] * layer_dims[l];
    }
    return total;
}

double spectral_norm(const Matrix& w, int iterations) {
    if (w.size() == 0) return 0.0;
    const Matrix gram = w.transpose() * w;
    Vector v = Vector::Ones(gram.cols()) / std::sqrt(static_cast<double>(gram.cols()));
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Vector next = gram * v;
        const double norm = next.norm();
        if (norm == 0.0) return 0.0;
        v = next / norm;
        lambda = v.dot(gram * v);
    }
    return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace ingsl
