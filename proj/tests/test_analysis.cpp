#include "helpers.hpp"
#include "ingsl/analysis.hpp"

#include <doctest.h>

#include <cmath>

using namespace ingsl;
using ingsl::test::random_matrix;

TEST_CASE("avg_pairwise_similarity") {
    Matrix same(2, 3);
    same << 0.6, 0.8, 0, 0.6, 0.8, 0;
    CHECK(avg_pairwise_similarity(same) == doctest::Approx(1.0).epsilon(1e-15));
    Matrix orth(2, 2);
    orth << 1, 0, 0, 2;
    CHECK(avg_pairwise_similarity(orth) == 0.0);

    std::mt19937_64 rng(1);
    const Matrix v = random_matrix(8, 3, rng);
    double total = 0.0;
    int pairs = 0;
    for (Index j = 0; j < 8; ++j)
        for (Index k = j + 1; k < 8; ++k, ++pairs) total += v.row(j).dot(v.row(k)) / (v.row(j).norm() * v.row(k).norm());
    CHECK(std::abs(avg_pairwise_similarity(v) - total / pairs) < 1e-12);

    CHECK_THROWS_AS(avg_pairwise_similarity(Matrix(Matrix::Ones(1, 3))), DomainError);
    Matrix zero_row = v;
    zero_row.row(2).setZero();
    CHECK_THROWS_AS(avg_pairwise_similarity(zero_row), DomainError);
}

TEST_CASE("lemma1_bound") {
    CHECK(lemma1_bound(2, 1.0) == 1.0);
    for (Index n : {2, 5, 40}) CHECK(lemma1_bound(n, 0.0) == doctest::Approx(-1.0 / (n - 1)).epsilon(1e-15));
    CHECK(std::abs(lemma1_bound(10, 0.9) - (10 * 0.81 - 1) / 9) < 1e-15);
    CHECK_THROWS_AS(lemma1_bound(1, 0.5), DomainError);
    for (Index n : {2, 7, 30}) {
        double last = lemma1_bound(n, 0.0);
        for (double eps = 0.05; eps <= 1.0; eps += 0.05) {
            CHECK(lemma1_bound(n, eps) > last);
            last = lemma1_bound(n, eps);
        }
    }
}

TEST_CASE("lemma 1 equality case") {
    Matrix copies(5, 4);
    for (Index i = 0; i < 5; ++i) copies.row(i) << 0.5, 0.5, 0.5, 0.5;
    CHECK(avg_pairwise_similarity(copies) >= lemma1_bound(5, 1.0) - kBoundTolerance);
}

TEST_CASE("lemma1_check") {
    Lemma1Config c;
    c.trials = 1000;
    c.seed = 3;
    const LemmaReport r = lemma1_check(c);
    CHECK(r.trials == 1000);
    CHECK(r.violations == 0);
    CHECK(r.max_slack >= -kBoundTolerance);

    Lemma1Config two = c;
    two.n_min = two.n_max = 2;
    two.eps_min = two.eps_max = 0.0;
    CHECK(lemma1_check(two).violations == 0);

    Lemma1Config exact = c;
    exact.trials = 50;
    exact.eps_min = exact.eps_max = 1.0;
    const LemmaReport tight = lemma1_check(exact);
    CHECK(tight.violations == 0);
    CHECK(std::abs(tight.max_slack) < 1e-12);

    Lemma1Config bad = c;
    bad.n_min = 1;
    CHECK_THROWS_AS(lemma1_check(bad), ConfigError);
    bad = c;
    bad.eps_min = 0.5;
    bad.eps_max = 0.2;
    CHECK_THROWS_AS(lemma1_check(bad), ConfigError);
}

TEST_CASE("lemma2_evaluate trivial cases") {
    std::mt19937_64 rng(4);
    const Eigen::RowVectorXd anchor = random_matrix(1, 5, rng);
    Matrix copies(3, 5);
    for (Index i = 0; i < 3; ++i) copies.row(i) = anchor;
    Eigen::VectorXd w(3);
    w << 0.2, 0.3, 0.5;
    const Matrix wc = random_matrix(5, 4, rng);
    const Lemma2Instance same = lemma2_evaluate(anchor, copies, w, wc, 1, 1.0, anchor.norm());
    CHECK(std::abs(same.lhs) < 1e-12);
    CHECK(same.rhs == doctest::Approx(0.0));

    const Matrix others = random_matrix(3, 5, rng);
    const Lemma2Instance flat = lemma2_evaluate(anchor, others, w, Matrix::Zero(5, 4), 2, 0.5, 3.0);
    CHECK(flat.lhs == 0.0);
    CHECK(flat.rhs == 0.0);

    CHECK(lemma2_bound(2.0, 3.0, 0.75) == doctest::Approx(2 * 2.0 * 3.0 * 0.5));
    CHECK_THROWS_AS(lemma2_evaluate(anchor, others, w, wc, 4, 0.5, 3.0), ConfigError);
}

TEST_CASE("lemma2_check") {
    Lemma2Config c;
    c.trials = 1000;
    c.seed = 5;
    const LemmaReport r = lemma2_check(c);
    CHECK(r.trials == 1000);
    CHECK(r.violations == 0);
    CHECK(r.ranges.count("eps") == 1);

    Lemma2Config bad = c;
    bad.b_min = 0.0;
    bad.b_max = -1.0;
    CHECK_THROWS_AS(lemma2_check(bad), ConfigError);
}

TEST_CASE("lemma checks are deterministic") {
    Lemma1Config c;
    c.trials = 200;
    c.seed = 9;
    const LemmaReport a = lemma1_check(c), b = lemma1_check(c);
    CHECK(a.max_slack == b.max_slack);
    Lemma2Config d;
    d.trials = 200;
    d.seed = 9;
    CHECK(lemma2_check(d).max_slack == lemma2_check(d).max_slack);
}

TEST_CASE("redundancy_profile") {
    const std::vector<Index> ks{2, 3, 5};
    const auto same = redundancy_profile(Matrix(Matrix::Ones(6, 3)), ks);
    REQUIRE(same.size() == 3);
    for (const auto& p : same) CHECK(p.avg_similarity == doctest::Approx(1.0).epsilon(1e-12));

    const auto orth = redundancy_profile(Matrix(Matrix::Identity(6, 6)), ks);
    for (const auto& p : orth) CHECK(std::abs(p.avg_similarity) < 1e-15);

    // Three tight clusters of five: small k stays inside a cluster.
    std::mt19937_64 rng(6);
    Matrix e(15, 3);
    for (Index i = 0; i < 15; ++i) e.row(i) = Eigen::RowVector3d::Unit(i / 5) + 0.05 * random_matrix(1, 3, rng);
    const std::vector<Index> sweep{2, 4, 6, 10, 14};
    const auto prof = redundancy_profile(e, sweep);
    for (std::size_t i = 1; i < prof.size(); ++i) CHECK(prof[i].avg_similarity <= prof[i - 1].avg_similarity + 1e-12);
    CHECK(prof.front().avg_similarity > 0.9);

    CHECK_THROWS_AS(redundancy_profile(e, std::vector<Index>{15}), ConfigError);
    CHECK_THROWS_AS(redundancy_profile(e, std::vector<Index>{1}), ConfigError);
}

TEST_CASE("complexity_estimate") {
    CHECK(complexity_estimate(7, 3, 0, 0.0, 0, 0) == 7 * 3 * 4);
    CHECK(complexity_estimate(100, 8, 500, 0.5, 2, 50) == 68500);
    const std::int64_t first = complexity_estimate(100, 8, 0, 0.25, 2, 50);
    const std::int64_t m1 = complexity_estimate(100, 8, 400, 0.25, 2, 50) - first;
    const std::int64_t m2 = complexity_estimate(100, 8, 800, 0.25, 2, 50) - first;
    CHECK(m2 == 2 * m1);
    CHECK_THROWS_AS(complexity_estimate(1, 1, 1, 1.0, 1, 1), ConfigError);
    CHECK_THROWS_AS(complexity_estimate(-1, 1, 1, 0.5, 1, 1), ConfigError);
}
