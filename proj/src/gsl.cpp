#include "ingsl/gsl.hpp"

#include <algorithm>
#include <numeric>

namespace ingsl {

Tensor encode_structure(const SparseAdjacency& a_norm, const Tensor& x, const GcnVars& params_s) {
    GcnVars encoder{params_s.layers, Tensor()};
    return gcn_forward(a_norm, x, encoder).representations;
}

std::vector<std::vector<Index>> top_k_indices(const Matrix& scores, Index k) {
    const Index n = scores.rows();
    if (k < 1 || k >= n) {
        throw ConfigError("top-K: k = " + std::to_string(k) + " must satisfy 1 <= k < n = " + std::to_string(n));
    }
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(n));
    std::vector<Index> cand(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (Index j = 0; j < n; ++j) {
            if (j != i) cand[c++] = j;
        }
        auto better = [&](Index a, Index b) {
            const double sa = scores(i, a);
            const double sb = scores(i, b);
            return sa > sb || (sa == sb && a < b);
        };
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), better);
        std::vector<Index> kept(cand.begin(), cand.begin() + k);
        std::sort(kept.begin(), kept.end());
        out[static_cast<std::size_t>(i)] = std::move(kept);
    }
    return out;
}

CandidateGraph build_candidates(const Tensor& e, Index k, Similarity similarity) {
    const Index n = e.rows();
    if (k < 1 || k >= n) {
        throw ConfigError("build_candidates: k = " + std::to_string(k) + " must satisfy 1 <= k < n = " +
                          std::to_string(n));
    }
    Tensor basis = similarity == Similarity::kCosine ? row_l2_normalize(e, DegenerateRow::kPassZero) : e;
    const Matrix& bv = basis.value();
    const Matrix scores = bv * bv.transpose();
    const auto kept = top_k_indices(scores, k);

    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(static_cast<std::size_t>(n * k));
    for (Index i = 0; i < n; ++i) {
        for (Index j : kept[static_cast<std::size_t>(i)]) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
    }
    auto structure = std::make_shared<CsrMatrix>(csr_from_triplets(n, n, trip));
    const auto rows = entry_rows(*structure);
    const auto cols = entry_cols(*structure);
    Tensor values = row_dot(gather_rows(basis, rows), gather_rows(basis, cols));
    return CandidateGraph{SparseAdjacency{std::move(structure), values}, k, e};
}

Tensor gsl_objective(const Tensor& task, const Tensor& reg, double lambda) {
    if (lambda < 0.0) throw ConfigError("gsl_objective: lambda must be non-negative");
    if (lambda == 0.0) return task;
    return add(task, scale(reg, lambda));
}

Tensor feature_smoothness(const SparseAdjacency& s, const Matrix& x) {
    const CsrMatrix& st = *s.structure;
    const auto rows = entry_rows(st);
    Matrix coeff(st.nonZeros(), 1);
    const double norm = 1.0 / (2.0 * static_cast<double>(st.rows()));
    for (Index k = 0; k < st.nonZeros(); ++k) {
        coeff(k, 0) = norm * (x.row(rows[static_cast<std::size_t>(k)]) - x.row(st.innerIndexPtr()[k])).squaredNorm();
    }
    return sum(row_dot(s.values, s.values.tape().constant(std::move(coeff))));
}

SparseAdjacency fuse_with_original(const Graph& a, const SparseAdjacency& s, double residual_weight) {
    if (residual_weight < 0.0) throw ConfigError("fuse_with_original: residual_weight must be non-negative");
    const Index n = a.n;
    if (s.rows() != n) throw ShapeError("fuse_with_original: candidate graph size does not match the graph");

    // Union pattern of A, S and the diagonal; base values hold A + I.
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(a.edges.size() * 2 + static_cast<std::size_t>(n + s.nnz()));
    for (const auto& e : a.edges) {
        trip.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v), 1.0);
        trip.emplace_back(static_cast<int>(e.v), static_cast<int>(e.u), 1.0);
    }
    for (Index i = 0; i < n; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    const CsrMatrix& st = *s.structure;
    const auto s_rows = entry_rows(st);
    for (Index k = 0; k < st.nonZeros(); ++k) {
        trip.emplace_back(static_cast<int>(s_rows[static_cast<std::size_t>(k)]), st.innerIndexPtr()[k], 0.0);
    }
    auto fused = std::make_shared<CsrMatrix>(csr_from_triplets(n, n, trip));

    std::vector<Index> positions(static_cast<std::size_t>(st.nonZeros()));
    for (Index k = 0; k < st.nonZeros(); ++k) {
        positions[static_cast<std::size_t>(k)] = find_entry(*fused, s_rows[static_cast<std::size_t>(k)], st.innerIndexPtr()[k]);
    }
    const Vector base = Eigen::Map<const Vector>(fused->valuePtr(), fused->nonZeros());
    const Matrix& sv = s.values.value();
    if ((sv.array() < 0.0).any()) throw DomainError("fuse_with_original: negative candidate weight");
    Tensor raw = scatter_add(base, positions, s.values, residual_weight);
    Tensor normalized = degree_normalize(*fused, raw);
    return SparseAdjacency{std::move(fused), normalized};
}

Index additional_edge_count(const Graph& a, const CsrMatrix& s) {
    const CsrMatrix adj = adjacency_matrix(a);
    Index extra = 0;
    for (Index r = 0; r < s.rows(); ++r) {
        for (CsrMatrix::InnerIterator it(s, r); it; ++it) {
            if (find_entry(adj, r, it.col()) < 0) ++extra;
        }
    }
    return extra;
}

}  // namespace ingsl
