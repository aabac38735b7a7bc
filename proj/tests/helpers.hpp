#pragma once

#include "ingsl/graph.hpp"
#include "ingsl/tensor.hpp"

#include <random>
#include <vector>

namespace ingsl::test {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

inline Matrix dense(const CsrMatrix& m) { return Matrix(m.toDense()); }

/// Small labelled graph with every split populated.
inline Graph tiny_graph(Index n, std::vector<Edge> edges, Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Graph g;
    g.n = n;
    g.edges = canonical_edges(std::move(edges));
    g.features = random_matrix(n, d, rng);
    g.classes = 2;
    for (Index i = 0; i < n; ++i) {
        g.labels.push_back(static_cast<int>(i % 2));
        g.splits.push_back(i < 2 ? Split::kTrain : (i < 4 ? Split::kVal : Split::kTest));
    }
    return g;
}

}  // namespace ingsl::test
