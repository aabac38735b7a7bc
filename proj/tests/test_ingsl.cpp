#include "helpers.hpp"
#include "ingsl/ingsl.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace ingsl;
using ingsl::test::random_matrix;

namespace {

double cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    return na == 0.0 || nb == 0.0 ? 0.0 : a.dot(b) / (na * nb);
}

double naive_mi(const Matrix& zt, const Matrix& z, const std::vector<Index>& batch) {
    const Index n = zt.rows();
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        std::set<Index> members(batch.begin(), batch.end());
        members.insert(i);
        double denom = 0.0;
        for (Index j : members) denom += std::exp(cosine(zt.row(i), z.row(j)));
        total += -std::log(std::exp(cosine(zt.row(i), z.row(i))) / denom);
    }
    return total / static_cast<double>(n);
}

/// Survivors of a full descending sort, earlier position first among equals.
std::vector<Index> sort_oracle(const std::vector<double>& x, double r) {
    std::vector<Index> order(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) order[i] = static_cast<Index>(i);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x[a] > x[b]; });
    const auto keep = static_cast<std::size_t>(std::ceil((1.0 - r) * static_cast<double>(x.size()) - 1e-9));
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

CandidateGraph random_candidates(Tape& t, Index n, Index k, std::mt19937_64& rng) {
    return build_candidates(t.constant(random_matrix(n, 4, rng)), k);
}

}  // namespace

TEST_CASE("diversity scores") {
    std::mt19937_64 rng(1);
    const Matrix e = random_matrix(6, 3, rng);
    Tape t;
    const CandidateGraph s = build_candidates(t.constant(e), 2);
    const auto rows = entry_rows(*s.sparse.structure);
    const auto cols = entry_cols(*s.sparse.structure);

    const Matrix w_id = diversity_scores(s.embeddings, s, bind(t, DiversityScorer::identity(3))).value();
    const Matrix w1 = random_matrix(3, 3, rng);
    DiversityScorer bil;
    bil.bilinear = w1;
    const Matrix w_bil = diversity_scores(s.embeddings, s, bind(t, bil)).value();
    const Matrix oracle = e * w1 * e.transpose();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        CHECK(std::abs(w_id(k, 0) - e.row(rows[k]).dot(e.row(cols[k]))) < 1e-12);
        CHECK(std::abs(w_bil(k, 0) - oracle(rows[k], cols[k])) < 1e-12);
    }

    const DiversityScorer mlp = DiversityScorer::random(ScorerKind::kMlp, 3, rng);
    const Matrix w_mlp = diversity_scores(s.embeddings, s, bind(t, mlp)).value();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        Eigen::RowVectorXd cat(6);
        cat << e.row(rows[k]), e.row(cols[k]);
        const double expect = ((cat * mlp.mlp_hidden).cwiseMax(0.0) * mlp.mlp_out)(0, 0);
        CHECK(std::abs(w_mlp(k, 0) - expect) < 1e-12);
    }

    const Tensor zero = t.constant(Matrix::Zero(6, 3));
    CHECK(diversity_scores(zero, rows, cols, bind(t, bil)).value().isZero());
    CHECK(diversity_scores(zero, rows, cols, bind(t, mlp)).value().isZero());

    DiversityScorer empty;
    CHECK_THROWS_AS(empty.check(), ConfigError);
    CHECK_THROWS_AS(diversity_scores(s.embeddings, s, ScorerVars{}), ConfigError);
}

TEST_CASE("select_threshold examples") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(select_threshold(x, 0.0).value <= 1.0);
    CHECK(surviving_positions(x, select_threshold(x, 0.0)).size() == 4);
    const Threshold half = select_threshold(x, 0.5);
    CHECK(half.value == 3.0);
    CHECK(surviving_positions(x, half) == std::vector<Index>{2, 3});

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> big(1000);
    for (double& v : big) v = u(rng);
    const auto kept = surviving_positions(big, select_threshold(big, 0.3));
    CHECK(kept.size() == 700);
    CHECK(kept == sort_oracle(big, 0.3));

    CHECK_THROWS_AS(select_threshold(x, 1.0), ConfigError);
    CHECK_THROWS_AS(select_threshold(std::vector<double>{}, 0.5), ConfigError);
}

TEST_CASE("select_threshold with heavy ties") {
    const std::vector<double> x{2, 1, 2, 2, 0, 2, 1};
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const auto kept = surviving_positions(x, select_threshold(x, r));
        CHECK(kept == sort_oracle(x, r));
        CHECK(static_cast<Index>(kept.size()) == survivor_count(7, r));
    }
}

TEST_CASE("prune") {
    std::mt19937_64 rng(3);
    Tape t;
    const CandidateGraph s = random_candidates(t, 10, 5, rng);
    const Tensor w = t.constant(random_matrix(50, 1, rng));

    const PrunedGraph all = prune_detailed(s, w, Threshold::keep_all());
    CHECK(all.kept.size() == 50);
    const Matrix x = s.sparse.values.value().cwiseProduct(w.value());
    for (Index k = 0; k < 50; ++k) CHECK(all.sparse.values.value()(k, 0) == sigmoid(x(k, 0)));

    const double eps = 0.05;
    const PrunedGraph some = prune_detailed(s, w, Threshold(eps));
    std::vector<Index> scan;
    for (Index k = 0; k < 50; ++k)
        if (x(k, 0) >= eps) scan.push_back(k);
    CHECK(some.kept == scan);
    CHECK(some.sparse.nnz() == static_cast<Index>(scan.size()));
    const Matrix v = some.sparse.values.value();
    CHECK((v.array() > 0.0).all());
    CHECK((v.array() < 1.0).all());

    Tape z;
    std::vector<Eigen::Triplet<double, int>> trip{{0, 1, 0.0}};
    CandidateGraph single;
    single.sparse = lift(z, csr_from_triplets(2, 2, trip));
    single.k = 1;
    const SparseAdjacency half = prune(single, z.constant(Matrix::Ones(1, 1)), Threshold(0.0));
    CHECK(half.nnz() == 1);
    CHECK(half.values.value()(0, 0) == 0.5);

    CHECK_THROWS_AS(prune(s, t.constant(Matrix::Ones(49, 1)), Threshold(0.0)), ShapeError);
}

TEST_CASE("prune survivors are scale invariant and nested") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(40);
        for (double& v : x) v = u(rng);
        const Threshold thr = select_threshold(x, 0.4);
        std::vector<double> scaled = x;
        for (double& v : scaled) v *= 3.5;
        CHECK(surviving_positions(scaled, Threshold(thr.value * 3.5, thr.ties_kept)) == surviving_positions(x, thr));

        std::vector<Index> previous = surviving_positions(x, select_threshold(x, 0.1));
        for (double r : {0.2, 0.4, 0.6, 0.8}) {
            const auto now = surviving_positions(x, select_threshold(x, r));
            CHECK(std::includes(previous.begin(), previous.end(), now.begin(), now.end()));
            previous = now;
        }
    }
}

TEST_CASE("sample_batch") {
    const auto b = sample_batch(20, 7, 5);
    CHECK(b.size() == 7);
    CHECK(std::is_sorted(b.begin(), b.end()));
    CHECK(std::set<Index>(b.begin(), b.end()).size() == 7);
    CHECK(sample_batch(20, 7, 5) == b);
    CHECK(sample_batch(20, 20, 1).size() == 20);
    CHECK_THROWS_AS(sample_batch(5, 6, 1), ConfigError);
}

TEST_CASE("mi_loss") {
    Tape t;
    const Index n = 4;
    const Tensor eye = t.constant(Matrix::Identity(n, n));
    const std::vector<Index> all{0, 1, 2, 3};
    const double closed = -std::log(std::exp(1.0) / (std::exp(1.0) + (n - 1)));
    CHECK(std::abs(mi_loss(eye, eye, all).item() - closed) < 1e-12);

    const Tensor one = t.constant(Matrix::Constant(1, 3, 0.4));
    CHECK(mi_loss(one, one, std::vector<Index>{0}).item() == 0.0);

    std::mt19937_64 rng(6);
    const Matrix zt = random_matrix(10, 4, rng), z = random_matrix(10, 4, rng);
    const auto batch = sample_batch(10, 5, 77);
    const double got = mi_loss(t.constant(zt), t.constant(z), batch).item();
    CHECK(std::abs(got - naive_mi(zt, z, batch)) < 1e-12);
    CHECK(got >= 0.0);
    CHECK(mi_loss(t.constant(zt), t.constant(z), 5, 77).item() == got);

    Matrix with_zero = zt;
    with_zero.row(3).setZero();
    CHECK(std::abs(mi_loss(t.constant(with_zero), t.constant(z), batch).item() - naive_mi(with_zero, z, batch)) < 1e-12);

    CHECK_THROWS_AS(mi_loss(t.constant(zt), t.constant(z), 11, 1), ConfigError);
    CHECK_THROWS_AS(mi_loss(t.constant(zt), t.constant(z), std::vector<Index>{}), ConfigError);
}

TEST_CASE("total_loss") {
    Tape t;
    const Tensor gsl = t.constant(Matrix::Constant(1, 1, 1.0));
    const Tensor mi = t.constant(Matrix::Constant(1, 1, 0.5));
    CHECK(total_loss(gsl, mi, 0.0).item() == 1.0);
    CHECK(total_loss(gsl, t.constant(Matrix::Zero(1, 1)), 0.7).item() == 1.0);
    CHECK(total_loss(gsl, mi, 0.4).item() == doctest::Approx(1.2).epsilon(1e-15));
    CHECK_THROWS_AS(total_loss(gsl, mi, 1.5), ConfigError);
}

TEST_CASE("survivor_count") {
    CHECK(survivor_count(10, 0.0) == 10);
    CHECK(survivor_count(10, 0.3) == 7);
    CHECK(survivor_count(10, 0.25) == 8);
    CHECK(survivor_count(1000, 0.3) == 700);
    CHECK(survivor_count(3, 0.9) == 1);
}
