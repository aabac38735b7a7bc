#include "helpers.hpp"
#include "ingsl/gsl.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace ingsl;
using ingsl::test::random_matrix;
using ingsl::test::tiny_graph;

namespace {

/// Kept columns per row from a full stable sort of every off-diagonal score.
std::vector<std::vector<Index>> sorted_oracle(const Matrix& scores, Index k) {
    const Index n = scores.rows();
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        std::vector<Index> cols;
        for (Index j = 0; j < n; ++j)
            if (j != i) cols.push_back(j);
        std::stable_sort(cols.begin(), cols.end(), [&](Index a, Index b) { return scores(i, a) > scores(i, b); });
        cols.resize(static_cast<std::size_t>(k));
        std::sort(cols.begin(), cols.end());
        out[static_cast<std::size_t>(i)] = cols;
    }
    return out;
}

Matrix dense_fuse(const Matrix& a, const Matrix& s, double w) {
    const Index n = a.rows();
    const Matrix m = a + w * s + Matrix::Identity(n, n);
    const Vector d = m.rowwise().sum();
    Matrix out(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) out(i, j) = m(i, j) / std::sqrt(d(i) * d(j));
    return out;
}

GcnVars encoder(Tape& t, std::vector<Matrix> layers) {
    GcnParams p;
    p.layers = std::move(layers);
    return bind(t, p);
}

}  // namespace

TEST_CASE("encode_structure") {
    std::mt19937_64 rng(1);
    const Graph isolated = tiny_graph(5, {}, 3, 1);
    Tape t;
    const SparseAdjacency eye = lift(t, normalize_adjacency(isolated));
    const Tensor e = encode_structure(eye, t.constant(isolated.features),
                                      encoder(t, {Matrix::Identity(3, 3), Matrix::Identity(3, 3)}));
    CHECK(e.value() == isolated.features.cwiseMax(0.0));
    CHECK(encode_structure(eye, t.constant(Matrix::Zero(5, 3)), encoder(t, {random_matrix(3, 4, rng), random_matrix(4, 2, rng)}))
              .value()
              .isZero());

    const Graph g = tiny_graph(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {2, 6}}, 3, 2);
    const CsrMatrix a = normalize_adjacency(g);
    const Matrix w1 = random_matrix(3, 4, rng), w2 = random_matrix(4, 4, rng);
    const Matrix got = encode_structure(lift(t, a), t.constant(g.features), encoder(t, {w1, w2})).value();
    const Matrix ad = a.toDense();
    const Matrix oracle = (ad * (ad * g.features * w1).cwiseMax(0.0) * w2).cwiseMax(0.0);
    CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("top-K tie-breaking and duplicates") {
    Tape t;
    const Matrix eye = Matrix::Identity(4, 4);
    const CandidateGraph s = build_candidates(t.constant(eye), 1);
    const auto cols = entry_cols(*s.sparse.structure);
    CHECK(cols == std::vector<Index>{1, 0, 0, 0});
    CHECK(s.sparse.values.value().isZero());

    Matrix e(4, 2);
    e << 1, 2, 1, 2, -1, 0.5, 0.3, -0.2;
    const auto kept = top_k_indices(e * e.transpose(), 1);
    CHECK(kept[0] == std::vector<Index>{1});
    CHECK(kept[1] == std::vector<Index>{0});

    CHECK_THROWS_AS(build_candidates(t.constant(eye), 4), ConfigError);
    CHECK_THROWS_AS(build_candidates(t.constant(eye), 0), ConfigError);
}

TEST_CASE("top-K equals a full sort for every k") {
    std::mt19937_64 rng(2);
    for (Index n : {2, 5, 12, 30}) {
        for (int trial = 0; trial < 3; ++trial) {
            Matrix e = random_matrix(n, 4, rng);
            if (trial == 2) e = (e * 2).array().round() / 2;  // forces ties
            const Matrix scores = e * e.transpose();
            for (Index k = 1; k < n; ++k) CHECK(top_k_indices(scores, k) == sorted_oracle(scores, k));
        }
    }
}

TEST_CASE("build_candidates values and gradients") {
    std::mt19937_64 rng(3);
    const Matrix e = random_matrix(12, 4, rng);
    Tape t;
    const CandidateGraph s = build_candidates(t.constant(e), 3);
    CHECK(s.edge_count() == 36);
    const Matrix full = e * e.transpose();
    const auto rows = entry_rows(*s.sparse.structure);
    const auto cols = entry_cols(*s.sparse.structure);
    const auto oracle = sorted_oracle(full, 3);
    for (Index k = 0; k < s.edge_count(); ++k) {
        CHECK(std::abs(s.sparse.values.value()(k, 0) - full(rows[k], cols[k])) < 1e-12);
    }
    for (Index i = 0; i < 12; ++i) {
        std::vector<Index> got;
        for (Index k = 0; k < s.edge_count(); ++k)
            if (rows[k] == i) got.push_back(cols[k]);
        CHECK(got == oracle[static_cast<std::size_t>(i)]);
    }

    Tape c;
    const CandidateGraph cs = build_candidates(c.constant(e), 3, Similarity::kCosine);
    CHECK((cs.sparse.values.value().array().abs() <= 1.0 + 1e-12).all());
}

TEST_CASE("gradient ignores discarded pairs") {
    // Node 3 is nobody's neighbour, so moving it slightly changes nothing kept.
    Matrix e(4, 2);
    e << 1, 0, 0.9, 0.1, 0.8, 0.3, -1, -1;
    Tape t;
    const Tensor x = t.leaf(e);
    const CandidateGraph s = build_candidates(x, 1);
    for (Index c : entry_cols(*s.sparse.structure)) CHECK(c != 3);
    t.backward(sum(s.sparse.values));
    const Matrix g = x.grad();
    // Row 3 contributes only through its own kept entry, E_3 . E_j, so its
    // gradient is the chosen neighbour's embedding.
    const Index j = entry_cols(*s.sparse.structure)[3];
    CHECK((g.row(3) - e.row(j)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gsl_objective arithmetic") {
    Tape t;
    const Tensor task = t.constant(Matrix::Constant(1, 1, 0.7));
    const Tensor reg = t.constant(Matrix::Constant(1, 1, 0.2));
    CHECK(gsl_objective(task, reg, 0.0).item() == 0.7);
    CHECK(gsl_objective(task, t.constant(Matrix::Zero(1, 1)), 0.5).item() == 0.7);
    CHECK(gsl_objective(task, reg, 0.5).item() == doctest::Approx(0.8).epsilon(1e-15));
    CHECK_THROWS_AS(gsl_objective(task, reg, -1.0), ConfigError);
}

TEST_CASE("fuse_with_original") {
    std::mt19937_64 rng(4);
    const Graph g = tiny_graph(5, {{0, 1}, {1, 2}, {3, 4}}, 3, 4);
    const Matrix ahat = normalize_adjacency(g).toDense();
    Tape t;
    const CandidateGraph s = build_candidates(t.constant(random_matrix(5, 3, rng, 0.1, 1.0)), 2);
    CHECK((Matrix(fuse_with_original(g, s.sparse, 0.0).materialize().toDense()) - ahat).cwiseAbs().maxCoeff() < 1e-15);

    const SparseAdjacency empty = lift(t, CsrMatrix(5, 5));
    CHECK((Matrix(fuse_with_original(g, empty).materialize().toDense()) - ahat).cwiseAbs().maxCoeff() < 1e-15);

    const Matrix a = adjacency_matrix(g).toDense();
    const Matrix sd = s.sparse.materialize().toDense();
    for (double w : {1.0, 0.3}) {
        const Matrix got = fuse_with_original(g, s.sparse, w).materialize().toDense();
        CHECK((got - dense_fuse(a, sd, w)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("additional edges by set arithmetic") {
    std::mt19937_64 rng(5);
    const Graph g = tiny_graph(10, {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {0, 9}}, 3, 5);
    Tape t;
    const CandidateGraph s = build_candidates(t.constant(random_matrix(10, 3, rng)), 3);
    std::set<std::pair<Index, Index>> original;
    for (const Edge& e : g.edges) {
        original.insert({e.u, e.v});
        original.insert({e.v, e.u});
    }
    Index overlap = 0;
    const auto rows = entry_rows(*s.sparse.structure);
    const auto cols = entry_cols(*s.sparse.structure);
    for (std::size_t k = 0; k < rows.size(); ++k) overlap += original.count({rows[k], cols[k]});
    CHECK(additional_edge_count(g, *s.sparse.structure) == 10 * 3 - overlap);
}

TEST_CASE("feature smoothness") {
    Matrix x(3, 2);
    x << 0, 0, 1, 0, 0, 2;
    std::vector<Eigen::Triplet<double, int>> trip{{0, 1, 0.5}, {2, 0, 1.0}};
    Tape t;
    const SparseAdjacency s = lift(t, csr_from_triplets(3, 3, trip));
    CHECK(feature_smoothness(s, x).item() == doctest::Approx((0.5 * 1.0 + 1.0 * 4.0) / 6.0).epsilon(1e-15));
}
