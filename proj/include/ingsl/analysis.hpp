#pragma once

#include "ingsl/errors.hpp"
#include "ingsl/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ingsl {

/// Mean cosine similarity over all unordered row pairs.
template <typename Derived>
double avg_pairwise_similarity(const Eigen::MatrixBase<Derived>& vectors) {
    const Index n = vectors.rows();
    if (n < 2) throw DomainError("average pairwise similarity needs at least two vectors");
    Eigen::VectorXd norms(n);
    for (Index i = 0; i < n; ++i) {
        norms(i) = vectors.row(i).norm();
        if (!(norms(i) >= 1e-12)) throw DomainError("zero vector at row " + std::to_string(i));
    }
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
        for (Index k = j + 1; k < n; ++k) total += vectors.row(j).dot(vectors.row(k)) / (norms(j) * norms(k));
    }
    return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// (N eps^2 - 1) / (N - 1).
double lemma1_bound(Index n_neighbors, double eps);

/// 2 B ||W_c||_2 sqrt(1 - eps).
double lemma2_bound(double b_norm, double wc_spectral_norm, double eps);

/// Outcome of a batch of randomized bound checks.
struct LemmaReport {
    std::int64_t trials = 0;
    std::int64_t violations = 0;
    /// Smallest margin between the bound and the observed value over all
    /// trials, signed so that negative means the inequality failed.
    double max_slack = 0.0;
    std::map<std::string, std::pair<double, double>> ranges;
};

inline constexpr double kBoundTolerance = 1e-9;

struct Lemma1Config {
    std::int64_t trials = 10000;
    Index dim_min = 2, dim_max = 32;
    Index n_min = 2, n_max = 50;
    double eps_min = 0.0, eps_max = 0.99;
    std::uint64_t seed = 0;

    void check() const;
};

LemmaReport lemma1_check(const Lemma1Config& config);

/// How neighbour norms are drawn in lemma2_check.
enum class NormSampling {
    kMatchAnchor,  ///< every neighbour has the anchor's norm
    kIndependent,  ///< each neighbour norm uniform in [0, B]
};

struct Lemma2Config {
    std::int64_t trials = 10000;
    Index dim_min = 2, dim_max = 32;
    Index classes_min = 2, classes_max = 10;
    Index neighbors_min = 1, neighbors_max = 20;
    double eps_min = 0.0, eps_max = 0.99;
    double b_min = 0.1, b_max = 5.0;
    NormSampling norms = NormSampling::kMatchAnchor;
    std::uint64_t seed = 0;

    void check() const;
};

/// Observed loss change of one aggregation step and its bound.
struct Lemma2Instance {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// |CE(z_next W_c, y) - CE(z W_c, y)| with z_next = sum_j alpha_j neighbors_j,
/// against 2 B ||W_c||_2 sqrt(1 - eps).
Lemma2Instance lemma2_evaluate(const Eigen::RowVectorXd& anchor, const Matrix& neighbors,
                               const Eigen::VectorXd& weights, const Matrix& wc, Index label, double eps,
                               double b_norm);

LemmaReport lemma2_check(const Lemma2Config& config);

struct RedundancyPoint {
    Index k = 0;
    double avg_similarity = 0.0;
    Index nodes = 0;  ///< nodes that contributed (all of them for k >= 2)
};

/// For each k, selects every node's top-k neighbours by cosine similarity and
/// averages avg_pairwise_similarity of those neighbour sets over the nodes.
/// Zero rows act as vectors with cosine 0 to everything.
std::vector<RedundancyPoint> redundancy_profile(const Matrix& e, std::span<const Index> k_values);

/// n d (d + b + L d + 1) + m (L r d + d + 1), with the fractional r term rounded to nearest.
std::int64_t complexity_estimate(std::int64_t n, std::int64_t d, std::int64_t m, double r, std::int64_t layers,
                                 std::int64_t batch);

}  // namespace ingsl
