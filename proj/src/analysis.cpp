#include "ingsl/analysis.hpp"

#include "ingsl/gnn.hpp"
#include "ingsl/gsl.hpp"
#include "ingsl/random.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace ingsl {

double lemma1_bound(Index n_neighbors, double eps) {
    if (n_neighbors < 2) throw DomainError("lemma 1 bound needs N >= 2, got " + std::to_string(n_neighbors));
    const double n = static_cast<double>(n_neighbors);
    return (n * eps * eps - 1.0) / (n - 1.0);
}

double lemma2_bound(double b_norm, double wc_spectral_norm, double eps) {
    return 2.0 * b_norm * wc_spectral_norm * std::sqrt(std::max(0.0, 1.0 - eps));
}

namespace {

void check_range(const char* what, double lo, double hi, double min_allowed, double max_allowed) {
    if (!(lo <= hi) || lo < min_allowed || hi > max_allowed) {
        throw ConfigError(std::string(what) + " range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] is infeasible");
    }
}

Eigen::RowVectorXd random_unit(Index dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Eigen::RowVectorXd v(dim);
    double norm = 0.0;
    do {
        for (Index i = 0; i < dim; ++i) v(i) = gauss(rng);
        norm = v.norm();
    } while (norm < 1e-6);
    return v / norm;
}

// Unit vector u with u . v = c for a random direction orthogonal to v.
Eigen::RowVectorXd unit_with_cosine(const Eigen::RowVectorXd& v, double c, std::mt19937_64& rng) {
    Eigen::RowVectorXd w;
    double norm = 0.0;
    do {
        w = random_unit(v.size(), rng);
        w -= w.dot(v) * v;
        norm = w.norm();
    } while (norm < 1e-6);
    w /= norm;
    return c * v + std::sqrt(std::max(0.0, 1.0 - c * c)) * w;
}

Index uniform_index(Index lo, Index hi, std::mt19937_64& rng) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

double uniform_real(double lo, double hi, std::mt19937_64& rng) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

double cross_entropy(const Eigen::RowVectorXd& logits, Index label) {
    const double top = logits.maxCoeff();
    return top + std::log((logits.array() - top).exp().sum()) - logits(label);
}

void record(LemmaReport& report, double slack) {
    if (report.trials == 0 || slack < report.max_slack) report.max_slack = slack;
    ++report.trials;
    if (slack < -kBoundTolerance) ++report.violations;
}

}  // namespace

void Lemma1Config::check() const {
    if (trials < 1) throw ConfigError("lemma 1: trials must be at least 1");
    check_range("lemma 1 dim", static_cast<double>(dim_min), static_cast<double>(dim_max), 2, 1e6);
    check_range("lemma 1 N", static_cast<double>(n_min), static_cast<double>(n_max), 2, 1e6);
    check_range("lemma 1 eps", eps_min, eps_max, 0.0, 1.0);
}

LemmaReport lemma1_check(const Lemma1Config& config) {
    config.check();
    LemmaReport report;
    report.ranges = {{"dim", {static_cast<double>(config.dim_min), static_cast<double>(config.dim_max)}},
                     {"n_neighbors", {static_cast<double>(config.n_min), static_cast<double>(config.n_max)}},
                     {"eps", {config.eps_min, config.eps_max}}};
    for (std::int64_t t = 0; t < config.trials; ++t) {
        std::mt19937_64 rng(derive_seed(config.seed, 1, static_cast<std::uint64_t>(t)));
        const Index dim = uniform_index(config.dim_min, config.dim_max, rng);
        const Index n = uniform_index(config.n_min, config.n_max, rng);
        const double eps = uniform_real(config.eps_min, config.eps_max, rng);
        const Eigen::RowVectorXd v = random_unit(dim, rng);
        Matrix u(n, dim);
        for (Index j = 0; j < n; ++j) u.row(j) = unit_with_cosine(v, uniform_real(eps, 1.0, rng), rng);
        record(report, avg_pairwise_similarity(u) - lemma1_bound(n, eps));
    }
    return report;
}

void Lemma2Config::check() const {
    if (trials < 1) throw ConfigError("lemma 2: trials must be at least 1");
    check_range("lemma 2 dim", static_cast<double>(dim_min), static_cast<double>(dim_max), 2, 1e6);
    check_range("lemma 2 classes", static_cast<double>(classes_min), static_cast<double>(classes_max), 2, 1e6);
    check_range("lemma 2 neighbours", static_cast<double>(neighbors_min), static_cast<double>(neighbors_max), 1, 1e6);
    check_range("lemma 2 eps", eps_min, eps_max, 0.0, 1.0);
    check_range("lemma 2 B", b_min, b_max, 0.0, std::numeric_limits<double>::max());
}

Lemma2Instance lemma2_evaluate(const Eigen::RowVectorXd& anchor, const Matrix& neighbors,
                               const Eigen::VectorXd& weights, const Matrix& wc, Index label, double eps,
                               double b_norm) {
    if (neighbors.cols() != anchor.size() || wc.rows() != anchor.size() || weights.size() != neighbors.rows()) {
        throw ShapeError("lemma 2: inconsistent instance dimensions");
    }
    if (label < 0 || label >= wc.cols()) throw ConfigError("lemma 2: label out of range");
    const Eigen::RowVectorXd next = weights.transpose() * neighbors;
    const double before = cross_entropy(anchor * wc, label);
    const double after = cross_entropy(next * wc, label);
    return {std::abs(after - before), lemma2_bound(b_norm, spectral_norm(wc), eps)};
}

LemmaReport lemma2_check(const Lemma2Config& config) {
    config.check();
    LemmaReport report;
    report.ranges = {{"dim", {static_cast<double>(config.dim_min), static_cast<double>(config.dim_max)}},
                     {"classes", {static_cast<double>(config.classes_min), static_cast<double>(config.classes_max)}},
                     {"n_neighbors", {static_cast<double>(config.neighbors_min), static_cast<double>(config.neighbors_max)}},
                     {"eps", {config.eps_min, config.eps_max}},
                     {"b_norm", {config.b_min, config.b_max}}};
    std::normal_distribution<double> gauss;
    std::exponential_distribution<double> expo(1.0);
    for (std::int64_t t = 0; t < config.trials; ++t) {
        std::mt19937_64 rng(derive_seed(config.seed, 2, static_cast<std::uint64_t>(t)));
        const Index dim = uniform_index(config.dim_min, config.dim_max, rng);
        const Index classes = uniform_index(config.classes_min, config.classes_max, rng);
        const Index n = uniform_index(config.neighbors_min, config.neighbors_max, rng);
        const double eps = uniform_real(config.eps_min, config.eps_max, rng);
        const double b = uniform_real(config.b_min, config.b_max, rng);

        const Eigen::RowVectorXd direction = random_unit(dim, rng);
        const double rho = b * uniform_real(0.0, 1.0, rng);
        Matrix neighbors(n, dim);
        for (Index j = 0; j < n; ++j) {
            const double norm = config.norms == NormSampling::kMatchAnchor ? rho : b * uniform_real(0.0, 1.0, rng);
            neighbors.row(j) = norm * unit_with_cosine(direction, uniform_real(eps, 1.0, rng), rng);
        }
        Eigen::VectorXd weights(n);
        for (Index j = 0; j < n; ++j) weights(j) = expo(rng);
        weights /= weights.sum();

        const double w_scale = uniform_real(0.1, 2.0, rng);
        Matrix wc(dim, classes);
        for (Index i = 0; i < wc.size(); ++i) wc.data()[i] = w_scale * gauss(rng);
        const Index label = uniform_index(0, classes - 1, rng);

        const Lemma2Instance inst = lemma2_evaluate(rho * direction, neighbors, weights, wc, label, eps, b);
        record(report, inst.rhs - inst.lhs);
    }
    return report;
}

std::vector<RedundancyPoint> redundancy_profile(const Matrix& e, std::span<const Index> k_values) {
    const Index n = e.rows();
    Matrix unit = e;
    for (Index i = 0; i < n; ++i) {
        const double norm = unit.row(i).norm();
        if (norm >= 1e-12) {
            unit.row(i) /= norm;
        } else {
            unit.row(i).setZero();
        }
    }
    const Matrix cosine = unit * unit.transpose();
    std::vector<RedundancyPoint> out;
    out.reserve(k_values.size());
    for (Index k : k_values) {
        if (k < 2 || k >= n) {
            throw ConfigError("redundancy profile: k = " + std::to_string(k) + " must satisfy 2 <= k < n = " +
                              std::to_string(n));
        }
        const auto kept = top_k_indices(cosine, k);
        const double pairs = static_cast<double>(k) * static_cast<double>(k - 1) / 2.0;
        double total = 0.0;
        for (const auto& nbrs : kept) {
            double s = 0.0;
            for (std::size_t a = 0; a < nbrs.size(); ++a) {
                for (std::size_t b = a + 1; b < nbrs.size(); ++b) s += cosine(nbrs[a], nbrs[b]);
            }
            total += s / pairs;
        }
        out.push_back({k, total / static_cast<double>(n), n});
    }
    return out;
}

std::int64_t complexity_estimate(std::int64_t n, std::int64_t d, std::int64_t m, double r, std::int64_t layers,
                                 std::int64_t batch) {
    if (n < 0 || d < 0 || m < 0 || layers < 0 || batch < 0) throw ConfigError("complexity: arguments must be >= 0");
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("complexity: r must lie in [0, 1)");
    const std::int64_t dense = n * d * (d + batch + layers * d + 1);
    const std::int64_t pruned = std::llround(static_cast<double>(m * layers * d) * r);
    return dense + pruned + m * (d + 1);
}

}  // namespace ingsl
