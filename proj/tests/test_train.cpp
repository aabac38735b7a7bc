#include "helpers.hpp"
#include "ingsl/gradcheck.hpp"
#include "ingsl/train.hpp"

#include <doctest.h>

#include <cmath>

using namespace ingsl;

namespace {

Graph small_sbm(std::uint64_t seed) {
    SbmSpec spec;
    spec.block_sizes = {20, 20};
    spec.p_in = 0.25;
    spec.p_out = 0.03;
    spec.seed = seed;
    return generate_sbm(spec);
}

TrainConfig quick(Mode mode) {
    TrainConfig c;
    c.mode = mode;
    c.k = 4;
    c.hidden = 8;
    c.epochs = 15;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("every mode trains and reports sane metrics") {
    const Graph g = small_sbm(1);
    for (Mode m : {Mode::kIngsl, Mode::kSimilarityOnly, Mode::kRandomPrune, Mode::kNoReduction}) {
        TrainConfig c = quick(m);
        if (m == Mode::kNoReduction) c.reduction = 0.0;
        const TrainResult r = train(g, c);
        CAPTURE(mode_name(m));
        CHECK(r.epochs_run >= 1);
        CHECK(r.best_epoch >= 0);
        CHECK(r.test_acc >= 0.0);
        CHECK(r.test_acc <= 1.0);
        CHECK(r.candidate_edges == 40 * 4);
        CHECK(r.edges_final <= r.candidate_edges);
        CHECK(r.learned.nonZeros() == r.edges_final);
        if (m != Mode::kNoReduction) CHECK(r.edges_final == survivor_count(r.candidate_edges, c.reduction));
    }
}

TEST_CASE("ingsl keeps values in the open unit interval") {
    const TrainResult r = train_ingsl(small_sbm(2), quick(Mode::kIngsl));
    const Eigen::Map<const Eigen::VectorXd> v(r.learned.valuePtr(), r.learned.nonZeros());
    CHECK((v.array() > 0.0).all());
    CHECK((v.array() < 1.0).all());
    CHECK(r.params.scorer.has_value());
}

TEST_CASE("training is deterministic") {
    const Graph g = small_sbm(4);
    for (Mode m : {Mode::kIngsl, Mode::kRandomPrune}) {
        const TrainResult a = train(g, quick(m));
        const TrainResult b = train(g, quick(m));
        CHECK(a.test_acc == b.test_acc);
        CHECK(a.best_epoch == b.best_epoch);
        CHECK(entry_rows(a.learned) == entry_rows(b.learned));
        CHECK(entry_cols(a.learned) == entry_cols(b.learned));
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].loss == b.history[i].loss);
    }
}

TEST_CASE("identity scorer with no pruning and no MI is the reweighted baseline") {
    const Graph g = small_sbm(5);
    TrainConfig in = quick(Mode::kIngsl);
    in.reduction = 0.0;
    in.beta = 0.0;
    in.freeze_scorer_identity = true;
    TrainConfig base = in;
    base.mode = Mode::kSimilarityOnly;
    base.freeze_scorer_identity = false;
    base.candidate_reweight = [](const Tensor& s) { return sigmoid(hadamard(s, s)); };

    const TrainResult a = train(g, in);
    const TrainResult b = train(g, base);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(std::abs(a.history[i].loss - b.history[i].loss) < 1e-9);
        CHECK(a.history[i].val_acc == b.history[i].val_acc);
    }
    CHECK(a.test_acc == b.test_acc);
    CHECK(entry_cols(a.learned) == entry_cols(b.learned));
}

TEST_CASE("random prune can keep a single edge") {
    const Graph g = small_sbm(6);
    TrainConfig c = quick(Mode::kRandomPrune);
    c.epochs = 3;
    const Index m = 40 * c.k;
    c.reduction = 1.0 - 1.0 / static_cast<double>(m);
    const TrainResult r = train(g, c);
    CHECK(r.edges_final == 1);
}

TEST_CASE("config validation") {
    const Graph g = small_sbm(7);
    TrainConfig c = quick(Mode::kIngsl);
    c.k = 40;
    CHECK_THROWS_AS(train(g, c), ConfigError);
    c = quick(Mode::kIngsl);
    c.beta = 2.0;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = quick(Mode::kIngsl);
    c.scorer = ScorerKind::kMlp;
    c.freeze_scorer_identity = true;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c.freeze_scorer_identity = false;
    CHECK_NOTHROW(c.check());
    CHECK(parse_mode("similarity_only") == Mode::kSimilarityOnly);
    CHECK_THROWS_AS(parse_mode("bogus"), ConfigError);
}

TEST_CASE("divergence names the epoch") {
    Graph g = small_sbm(8);
    g.features(0, 0) = 1e308;
    g.features(1, 0) = 1e308;
    try {
        train(g, quick(Mode::kSimilarityOnly));
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
    }
}

TEST_CASE("gradcheck battery passes") {
    const auto cases = default_gradcheck_cases();
    const auto rows = run_gradcheck(cases, 2, 1);
    CHECK(rows.size() == cases.size());
    for (const GradRow& r : rows) {
        CAPTURE(r.name);
        CHECK(r.passed);
        CHECK(r.max_error < kGradTolerance);
    }
}

TEST_CASE("gradcheck flags a corrupted backward rule") {
    GradCase broken;
    broken.name = "sigmoid_wrong_slope";
    broken.make = [](std::mt19937_64& rng) {
        GradInstance inst;
        inst.inputs = {ingsl::test::random_matrix(3, 3, rng)};
        inst.f = [](Tape& t, std::span<const Tensor> in) {
            const Tensor x = in[0];
            Matrix y = x.value().unaryExpr([](double v) { return sigmoid(v); });
            const Matrix slope = y.array() * (1.0 - y.array());
            const Tensor out = t.record(std::move(y), {x}, [x, slope](Tape& tape, const Matrix& g) {
                tape.accumulate(x, 2.0 * g.cwiseProduct(slope));
            });
            return sum(out);
        };
        return inst;
    };
    const auto rows = run_gradcheck({broken}, 2, 0);
    REQUIRE(rows.size() == 1);
    CHECK_FALSE(rows[0].passed);
    CHECK(rows[0].max_error > kGradTolerance);
}
