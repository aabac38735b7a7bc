#include "helpers.hpp"
#include "ingsl/gnn.hpp"
#include "ingsl/graph.hpp"

#include <doctest.h>

#include <cmath>

using namespace ingsl;
using ingsl::test::random_matrix;
using ingsl::test::tiny_graph;

namespace {

GcnParams one_layer(const Matrix& w, const Matrix& wc) {
    GcnParams p;
    p.layers = {w};
    p.classifier = wc;
    return p;
}

double naive_cross_entropy(const Matrix& logits, const std::vector<int>& labels, const std::vector<Index>& mask) {
    double total = 0.0;
    for (Index i : mask) {
        double z = 0.0;
        for (Index c = 0; c < logits.cols(); ++c) z += std::exp(logits(i, c));
        total += -std::log(std::exp(logits(i, labels[i])) / z);
    }
    return total / static_cast<double>(mask.size());
}

}  // namespace

TEST_CASE("gcn_forward trivial cases") {
    std::mt19937_64 rng(1);
    Tape t;
    const Matrix x = random_matrix(4, 3, rng);
    const Matrix wc = random_matrix(3, 2, rng);
    const SparseAdjacency identity = lift(t, normalize_adjacency(tiny_graph(4, {}, 3, 0)));
    const GcnOutput out = gcn_forward(identity, t.constant(x), bind(t, one_layer(Matrix::Identity(3, 3), wc), false));
    CHECK(out.representations.value() == x.cwiseMax(0.0));

    const GcnOutput zero = gcn_forward(identity, t.constant(Matrix::Zero(4, 3)), bind(t, one_layer(random_matrix(3, 3, rng), wc)));
    CHECK(zero.representations.value().isZero());
    CHECK(zero.logits.value().isZero());
}

TEST_CASE("gcn_forward matches a dense oracle") {
    std::mt19937_64 rng(2);
    const Graph g = tiny_graph(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {0, 7}, {1, 5}}, 4, 2);
    const CsrMatrix a = normalize_adjacency(g);
    const Matrix w1 = random_matrix(4, 5, rng), w2 = random_matrix(5, 3, rng), wc = random_matrix(3, 2, rng);
    Tape t;
    GcnParams p;
    p.layers = {w1, w2};
    p.classifier = wc;
    const GcnOutput out = gcn_forward(lift(t, a), t.constant(g.features), bind(t, p));
    const Matrix ad = a.toDense();
    const Matrix z1 = (ad * g.features * w1).cwiseMax(0.0);
    const Matrix z2 = (ad * z1 * w2).cwiseMax(0.0);
    CHECK((out.representations.value() - z2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.logits.value() - z2 * wc).cwiseAbs().maxCoeff() < 1e-12);

    GcnParams bad = p;
    bad.layers[1] = random_matrix(4, 3, rng);
    CHECK_THROWS_AS(bad.check(), ShapeError);
}

TEST_CASE("gcn_forward gradients reach edge values") {
    std::mt19937_64 rng(3);
    const Graph g = tiny_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 3}}, 3, 3);
    const CsrMatrix a = normalize_adjacency(g);
    const std::vector<Matrix> inputs{Eigen::Map<const Matrix>(a.valuePtr(), a.nonZeros(), 1), random_matrix(3, 4, rng),
                                     random_matrix(4, 2, rng)};
    const ScalarFunction f = [&](Tape& t, std::span<const Tensor> in) {
        SparseAdjacency adj{std::make_shared<const CsrMatrix>(a), in[0]};
        GcnVars vars{{in[1]}, in[2]};
        return sum(gcn_forward(adj, t.constant(g.features), vars).logits);
    };
    CHECK(gradient_check(f, inputs) < 1e-4);
}

TEST_CASE("task_loss") {
    const std::vector<int> labels{0, 1, 2, 1, 0};
    const std::vector<Index> mask{0, 2, 3};
    Tape t;
    CHECK(task_loss(t.constant(Matrix::Zero(5, 3)), labels, mask).item() == doctest::Approx(std::log(3.0)).epsilon(1e-15));

    Matrix sure = Matrix::Zero(5, 3);
    for (Index i = 0; i < 5; ++i) sure(i, labels[i]) = 1000.0;
    CHECK(task_loss(t.constant(sure), labels, mask).item() < 1e-6);

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix logits = random_matrix(5, 3, rng, -3, 3);
        const double got = task_loss(t.constant(logits), labels, mask).item();
        CHECK(std::abs(got - naive_cross_entropy(logits, labels, mask)) < 1e-12);
        CHECK(got >= 0.0);
    }
    CHECK_THROWS_AS(task_loss(t.constant(Matrix::Zero(5, 3)), labels, std::vector<Index>{}), ConfigError);
}

TEST_CASE("accuracy") {
    const std::vector<int> labels{0, 1, 1, 0, 1};
    const std::vector<Index> all{0, 1, 2, 3, 4};
    Matrix onehot = Matrix::Zero(5, 2);
    for (Index i = 0; i < 5; ++i) onehot(i, labels[i]) = 1.0;
    CHECK(accuracy(onehot, labels, all) == 1.0);
    CHECK(accuracy(Matrix::Constant(5, 2, 0.3), labels, all) == doctest::Approx(0.4));

    std::mt19937_64 rng(5);
    const Matrix logits = random_matrix(5, 2, rng);
    int hits = 0;
    for (Index i = 0; i < 5; ++i) hits += (logits(i, 1) > logits(i, 0) ? 1 : 0) == labels[i];
    CHECK(accuracy(logits, labels, all) == doctest::Approx(hits / 5.0));
    CHECK_THROWS_AS(accuracy(logits, labels, std::vector<Index>{}), ConfigError);
}

TEST_CASE("adam_step") {
    std::mt19937_64 rng(6);
    const Matrix p0 = random_matrix(3, 2, rng);
    TrainState zero({p0});
    const std::vector<Matrix> zeros{Matrix::Zero(3, 2)};
    adam_step(zero, zeros, 0.01);
    CHECK(zero.params[0] == p0);
    CHECK(zero.step == 1);

    const Matrix g = random_matrix(3, 2, rng);
    const std::vector<Matrix> grads{g};
    TrainState s({p0});
    adam_step(s, grads, 0.01);
    adam_step(s, grads, 0.01);

    // Reference: two steps written out coordinate by coordinate.
    Matrix p = p0, m = Matrix::Zero(3, 2), v = Matrix::Zero(3, 2);
    for (int step = 1; step <= 2; ++step) {
        for (Index i = 0; i < p.size(); ++i) {
            const double gi = g.data()[i];
            m.data()[i] = 0.9 * m.data()[i] + 0.1 * gi;
            v.data()[i] = 0.999 * v.data()[i] + 0.001 * gi * gi;
            const double mh = m.data()[i] / (1.0 - std::pow(0.9, step));
            const double vh = v.data()[i] / (1.0 - std::pow(0.999, step));
            p.data()[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
        if (step == 1) {
            TrainState one({p0});
            adam_step(one, grads, 0.01);
            CHECK((one.params[0] - p).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((one.params[0] - (p0 - 0.01 * g.array().sign().matrix())).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
    CHECK((s.params[0] - p).cwiseAbs().maxCoeff() < 1e-12);

    Matrix nan = g;
    nan(1, 1) = std::nan("");
    const std::vector<Matrix> bad{nan};
    TrainState untouched({p0});
    CHECK_THROWS_AS(adam_step(untouched, bad, 0.01), NumericError);
    CHECK(untouched.params[0] == p0);
    CHECK(untouched.step == 0);

    TrainState frozen({p0});
    frozen.frozen = {true};
    adam_step(frozen, grads, 0.01);
    CHECK(frozen.params[0] == p0);
}

TEST_CASE("flops_estimate") {
    const std::vector<Index> dims{10, 8, 4};
    CHECK(flops_estimate(0, dims, 20) == 2 * 20 * (10 * 8 + 8 * 4));
    CHECK(flops_estimate(50, dims, 20) < flops_estimate(100, dims, 20));
    const std::int64_t full = flops_estimate(100, dims, 20);
    const std::int64_t half = flops_estimate(50, dims, 20);
    CHECK(full - half == 2 * 50 * (8 + 4));
    CHECK(flops_estimate(200, dims, 20) - full == full - flops_estimate(0, dims, 20));
}

TEST_CASE("spectral_norm") {
    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 0.5, 3.0, -2.0;
    CHECK(std::abs(spectral_norm(d) - 3.0) < 1e-8);
    std::mt19937_64 rng(7);
    const Matrix w = random_matrix(6, 4, rng);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
    CHECK(std::abs(spectral_norm(w) - svd.singularValues()(0)) < 1e-8);
}

TEST_CASE("glorot bounds and determinism") {
    std::mt19937_64 a(5), b(5);
    const Matrix w = glorot_uniform(10, 6, a);
    CHECK(w == glorot_uniform(10, 6, b));
    CHECK(w.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 16.0));
}
