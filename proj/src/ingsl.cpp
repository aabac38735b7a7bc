#include "ingsl/ingsl.hpp"

#include "ingsl/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ingsl {

// ---------------------------------------------------------------------------
// Diversity scorer

void DiversityScorer::check() const {
    switch (kind) {
        case ScorerKind::kBilinear:
            if (bilinear.size() == 0 || bilinear.rows() != bilinear.cols()) {
                throw ConfigError("bilinear scorer requires a square W_1");
            }
            if (mlp_hidden.size() != 0 || mlp_out.size() != 0) throw ConfigError("bilinear scorer carries MLP weights");
            break;
        case ScorerKind::kMlp:
            if (mlp_hidden.size() == 0 || mlp_out.size() == 0) throw ConfigError("MLP scorer weights are unpopulated");
            if (bilinear.size() != 0) throw ConfigError("MLP scorer carries a bilinear weight");
            if (mlp_hidden.rows() % 2 != 0 || mlp_hidden.cols() != mlp_out.rows() || mlp_out.cols() != 1) {
                throw ConfigError("MLP scorer expects [2h x h] and [h x 1] weights");
            }
            break;
    }
}

Index DiversityScorer::embedding_dim() const {
    return kind == ScorerKind::kBilinear ? bilinear.rows() : mlp_hidden.rows() / 2;
}

DiversityScorer DiversityScorer::identity(Index h) {
    DiversityScorer s;
    s.kind = ScorerKind::kBilinear;
    s.bilinear = Matrix::Identity(h, h);
    return s;
}

DiversityScorer DiversityScorer::random(ScorerKind kind, Index h, std::mt19937_64& rng) {
    DiversityScorer s;
    s.kind = kind;
    if (kind == ScorerKind::kBilinear) {
        s.bilinear = glorot_uniform(h, h, rng);
    } else {
        s.mlp_hidden = glorot_uniform(2 * h, h, rng);
        s.mlp_out = glorot_uniform(h, 1, rng);
    }
    return s;
}

std::vector<Matrix> DiversityScorer::parameters() const {
    if (kind == ScorerKind::kBilinear) return {bilinear};
    return {mlp_hidden, mlp_out};
}

DiversityScorer DiversityScorer::from_parameters(ScorerKind kind, std::span<const Matrix> params) {
    DiversityScorer s;
    s.kind = kind;
    if (kind == ScorerKind::kBilinear) {
        if (params.size() != 1) throw ConfigError("bilinear scorer takes one parameter");
        s.bilinear = params[0];
    } else {
        if (params.size() != 2) throw ConfigError("MLP scorer takes two parameters");
        s.mlp_hidden = params[0];
        s.mlp_out = params[1];
    }
    s.check();
    return s;
}

ScorerVars bind(Tape& tape, const DiversityScorer& scorer, bool requires_grad) {
    scorer.check();
    ScorerVars v;
    v.kind = scorer.kind;
    if (scorer.kind == ScorerKind::kBilinear) {
        v.first = tape.leaf(scorer.bilinear, requires_grad);
    } else {
        v.first = tape.leaf(scorer.mlp_hidden, requires_grad);
        v.second = tape.leaf(scorer.mlp_out, requires_grad);
    }
    return v;
}

Tensor diversity_scores(const Tensor& e, std::span<const Index> rows, std::span<const Index> cols,
                        const ScorerVars& scorer) {
    if (rows.size() != cols.size()) throw ShapeError("diversity_scores: endpoint lists differ in length");
    if (!scorer.first.valid()) throw ConfigError("diversity_scores: scorer parameters are unpopulated");
    const Index h = e.cols();
    if (scorer.kind == ScorerKind::kBilinear) {
        if (scorer.first.rows() != h || scorer.first.cols() != h) {
            throw ShapeError("diversity_scores: W_1 " + shape_string(scorer.first.rows(), scorer.first.cols()) +
                             " for embeddings of width " + std::to_string(h));
        }
        // (E W_1) is formed once per node; each edge then costs one h-length dot product.
        Tensor ew = matmul(e, scorer.first);
        return row_dot(gather_rows(ew, rows), gather_rows(e, cols));
    }
    if (!scorer.second.valid()) throw ConfigError("diversity_scores: MLP output layer is unpopulated");
    if (scorer.first.rows() != 2 * h) {
        throw ShapeError("diversity_scores: MLP input layer " + shape_string(scorer.first.rows(), scorer.first.cols()) +
                         " for embeddings of width " + std::to_string(h));
    }
    Tensor edge_input = concat_cols(gather_rows(e, rows), gather_rows(e, cols));
    return matmul(relu(matmul(edge_input, scorer.first)), scorer.second);
}

Tensor diversity_scores(const Tensor& e, const CandidateGraph& s, const ScorerVars& scorer) {
    const auto rows = entry_rows(*s.sparse.structure);
    const auto cols = entry_cols(*s.sparse.structure);
    return diversity_scores(e, rows, cols, scorer);
}

// ---------------------------------------------------------------------------
// Threshold selection and pruning

Index survivor_count(Index m, double r) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("reduction level must lie in [0, 1)");
    const double target = (1.0 - r) * static_cast<double>(m);
    return static_cast<Index>(std::ceil(target - 1e-9 * std::max(1.0, target)));
}

Threshold select_threshold(std::span<const double> x, double r) {
    if (x.empty()) throw ConfigError("select_threshold: no candidate weights");
    const Index m = static_cast<Index>(x.size());
    const Index keep = survivor_count(m, r);
    std::vector<Index> order(x.size());
    std::iota(order.begin(), order.end(), Index{0});
    auto before = [&](Index a, Index b) {
        return x[static_cast<std::size_t>(a)] > x[static_cast<std::size_t>(b)] ||
               (x[static_cast<std::size_t>(a)] == x[static_cast<std::size_t>(b)] && a < b);
    };
    std::nth_element(order.begin(), order.begin() + (keep - 1), order.end(), before);
    const double value = x[static_cast<std::size_t>(order[static_cast<std::size_t>(keep - 1)])];
    Index strictly_above = 0;
    for (double v : x) {
        if (v > value) ++strictly_above;
    }
    return Threshold(value, keep - strictly_above);
}

std::vector<Index> surviving_positions(std::span<const double> x, const Threshold& thr) {
    std::vector<Index> out;
    Index ties = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] > thr.value) {
            out.push_back(static_cast<Index>(k));
        } else if (x[k] == thr.value && ties < thr.ties_kept) {
            ++ties;
            out.push_back(static_cast<Index>(k));
        }
    }
    return out;
}

PrunedGraph prune_detailed(const CandidateGraph& s, const Tensor& w, const Threshold& thr) {
    const Index m = s.edge_count();
    if (w.rows() != m || w.cols() != 1) {
        throw ShapeError("prune: " + std::to_string(m) + " candidate edges but scores " + shape_string(w.rows(), w.cols()));
    }
    Tensor x = hadamard(s.sparse.values, w);
    const Matrix& xv = x.value();
    const auto kept = surviving_positions(std::span<const double>(xv.data(), static_cast<std::size_t>(m)), thr);

    const CsrMatrix& st = *s.sparse.structure;
    const auto rows = entry_rows(st);
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(kept.size());
    for (Index k : kept) {
        trip.emplace_back(static_cast<int>(rows[static_cast<std::size_t>(k)]), st.innerIndexPtr()[k], 1.0);
    }
    // Kept positions are ascending in storage order, so they map 1:1 onto the new structure.
    auto structure = std::make_shared<CsrMatrix>(csr_from_triplets(st.rows(), st.cols(), trip));
    Tensor values = sigmoid(gather_rows(x, kept));
    return PrunedGraph{SparseAdjacency{std::move(structure), values}, kept, x};
}

SparseAdjacency prune(const CandidateGraph& s, const Tensor& w, const Threshold& thr) {
    return prune_detailed(s, w, thr).sparse;
}

// ---------------------------------------------------------------------------
// Mutual-information objective

std::vector<Index> sample_batch(Index n, Index size, std::uint64_t seed) {
    if (size < 1) throw ConfigError("sample_batch: batch must contain at least one node");
    if (size > n) {
        throw ConfigError("sample_batch: batch of " + std::to_string(size) + " exceeds " + std::to_string(n) + " nodes");
    }
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `size` slots form the sample.
    for (Index k = 0; k < size; ++k) {
        std::uniform_int_distribution<Index> pick(k, n - 1);
        std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Index> out(all.begin(), all.begin() + size);
    std::sort(out.begin(), out.end());
    return out;
}

Tensor mi_loss(const Tensor& z_tilde, const Tensor& z, std::span<const Index> batch) {
    if (z_tilde.rows() != z.rows() || z_tilde.cols() != z.cols()) {
        throw ShapeError("mi_loss: views differ in shape " + shape_string(z_tilde.rows(), z_tilde.cols()) + " vs " +
                         shape_string(z.rows(), z.cols()));
    }
    const Index n = z.rows();
    if (batch.empty()) throw ConfigError("mi_loss: empty negative set");
    if (static_cast<Index>(batch.size()) > n) throw ConfigError("mi_loss: negative set larger than node count");
    std::vector<bool> in_batch(static_cast<std::size_t>(n), false);
    for (Index j : batch) {
        if (j < 0 || j >= n) throw ConfigError("mi_loss: batch node out of range");
        in_batch[static_cast<std::size_t>(j)] = true;
    }

    Tensor a = row_l2_normalize(z_tilde, DegenerateRow::kPassZero);
    Tensor b = row_l2_normalize(z, DegenerateRow::kPassZero);
    Tensor positive = row_dot(a, b);                                       // [n x 1]
    Tensor negatives = matmul(a, transpose(gather_rows(b, batch)));        // [n x |B|]
    Tensor logits = concat_cols(positive, negatives);

    // Column 0 is the anchor's own positive; it is skipped when the anchor is
    // already one of the batch columns so it is counted once.
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> include =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(
            n, static_cast<Index>(batch.size()) + 1, true);
    for (Index i = 0; i < n; ++i) include(i, 0) = !in_batch[static_cast<std::size_t>(i)];

    Tensor per_anchor = sub(row_logsumexp(logits, include), positive);
    return mean(per_anchor);
}

Tensor mi_loss(const Tensor& z_tilde, const Tensor& z, Index batch_size, std::uint64_t seed) {
    const auto batch = sample_batch(z.rows(), batch_size, seed);
    return mi_loss(z_tilde, z, batch);
}

Tensor total_loss(const Tensor& l_gsl, const Tensor& l_mi, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("total_loss: beta must lie in [0, 1]");
    if (beta == 0.0) return l_gsl;
    return add(l_gsl, scale(l_mi, beta));
}

}  // namespace ingsl
