#include "ingsl/train.hpp"

#include "ingsl/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ingsl {

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::kIngsl:
            return "ingsl";
        case Mode::kSimilarityOnly:
            return "similarity_only";
        case Mode::kRandomPrune:
            return "random_prune";
        case Mode::kNoReduction:
            return "no_reduction";
    }
    return "?";
}

Mode parse_mode(const std::string& name) {
    for (Mode m : {Mode::kIngsl, Mode::kSimilarityOnly, Mode::kRandomPrune, Mode::kNoReduction}) {
        if (name == mode_name(m)) return m;
    }
    throw ConfigError("unknown mode '" + name + "'");
}

void TrainConfig::check() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(reduction >= 0.0 && reduction < 1.0)) throw ConfigError("reduction level must lie in [0, 1)");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (hidden < 1) throw ConfigError("hidden dimension must be at least 1");
    if (batch_size < 0) throw ConfigError("batch_size must be non-negative");
    if (residual_weight < 0.0) throw ConfigError("residual_weight must be non-negative");
    if (freeze_scorer_identity && scorer != ScorerKind::kBilinear) {
        throw ConfigError("freeze_scorer_identity requires the bilinear scorer");
    }
}

namespace {

// Independent random streams per purpose, so enabling one component never
// perturbs the draws of another.
enum Stream : std::uint64_t {
    kStreamEncoder = 1,
    kStreamTask = 2,
    kStreamScorer = 3,
    kStreamBatch = 4,
    kStreamRandomPrune = 5,
};

struct Layout {
    std::size_t encoder_begin = 0;
    std::size_t encoder_count = 0;
    std::size_t task_begin = 0;
    std::size_t task_count = 0;  // layers; classifier follows
    std::size_t scorer_begin = 0;
    std::size_t scorer_count = 0;
};

GcnParams slice_gcn(const std::vector<Matrix>& p, std::size_t begin, std::size_t count, bool classifier) {
    GcnParams out;
    out.layers.assign(p.begin() + static_cast<std::ptrdiff_t>(begin),
                      p.begin() + static_cast<std::ptrdiff_t>(begin + count));
    if (classifier) out.classifier = p[begin + count];
    return out;
}

SparseAdjacency keep_positions(const CandidateGraph& cand, const Tensor& values, const std::vector<Index>& kept) {
    const CsrMatrix& st = *cand.sparse.structure;
    const auto rows = entry_rows(st);
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(kept.size());
    for (Index k : kept) trip.emplace_back(static_cast<int>(rows[static_cast<std::size_t>(k)]), st.innerIndexPtr()[k], 1.0);
    auto structure = std::make_shared<CsrMatrix>(csr_from_triplets(st.rows(), st.cols(), trip));
    return SparseAdjacency{std::move(structure), gather_rows(values, kept)};
}

}  // namespace

TrainResult train(const Graph& g, const TrainConfig& config) {
    config.check();
    validate(g);
    if (config.k >= g.n) throw ConfigError("k must be smaller than the node count");

    const Index n = g.n;
    const Index d = g.feature_dim();
    const Index h = config.hidden;
    const Index batch_size = config.batch_size == 0 ? std::min<Index>(n, 256) : config.batch_size;
    if (batch_size > n) throw ConfigError("batch_size exceeds node count");
    const bool use_scorer = config.mode == Mode::kIngsl;

    std::vector<Matrix> init;
    Layout layout;
    {
        const std::vector<Index> dims{d, h, h};
        std::mt19937_64 enc_rng(derive_seed(config.seed, kStreamEncoder));
        std::mt19937_64 task_rng(derive_seed(config.seed, kStreamTask));
        GcnParams encoder = init_gcn(dims, 0, enc_rng);
        GcnParams task = init_gcn(dims, g.classes, task_rng);
        layout.encoder_begin = 0;
        layout.encoder_count = encoder.layers.size();
        for (auto& w : encoder.layers) init.push_back(std::move(w));
        layout.task_begin = init.size();
        layout.task_count = task.layers.size();
        for (auto& w : task.layers) init.push_back(std::move(w));
        init.push_back(std::move(task.classifier));
        layout.scorer_begin = init.size();
        if (use_scorer) {
            std::mt19937_64 scorer_rng(derive_seed(config.seed, kStreamScorer));
            const bool identity = config.freeze_scorer_identity ||
                                  (config.scorer == ScorerKind::kBilinear && config.scorer_init == ScorerInit::kIdentity);
            DiversityScorer scorer = identity ? DiversityScorer::identity(h)
                                              : DiversityScorer::random(config.scorer, h, scorer_rng);
            for (auto& w : scorer.parameters()) init.push_back(std::move(w));
            layout.scorer_count = init.size() - layout.scorer_begin;
        }
    }
    TrainState state(std::move(init));
    if (config.freeze_scorer_identity) {
        for (std::size_t k = 0; k < layout.scorer_count; ++k) state.frozen[layout.scorer_begin + k] = true;
    }

    const CsrMatrix a_norm = normalize_adjacency(g);
    const auto train_mask = g.mask(Split::kTrain);
    const auto val_mask = g.mask(Split::kVal);
    const auto test_mask = g.mask(Split::kTest);
    const std::vector<Index> layer_dims{d, h, h};

    TrainResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Tape tape;
        const Tensor x = tape.constant(g.features);
        const SparseAdjacency a_hat = lift(tape, a_norm);

        std::vector<Tensor> leaves;
        leaves.reserve(state.params.size());
        for (std::size_t k = 0; k < state.params.size(); ++k) leaves.push_back(tape.leaf(state.params[k], !state.frozen[k]));
        GcnVars encoder_vars;
        encoder_vars.layers.assign(leaves.begin() + static_cast<std::ptrdiff_t>(layout.encoder_begin),
                                   leaves.begin() + static_cast<std::ptrdiff_t>(layout.encoder_begin + layout.encoder_count));
        GcnVars task_vars;
        task_vars.layers.assign(leaves.begin() + static_cast<std::ptrdiff_t>(layout.task_begin),
                                leaves.begin() + static_cast<std::ptrdiff_t>(layout.task_begin + layout.task_count));
        task_vars.classifier = leaves[layout.task_begin + layout.task_count];

        const Tensor e = encode_structure(a_hat, x, encoder_vars);
        const CandidateGraph cand = build_candidates(e, config.k, config.similarity);
        const Index m = cand.edge_count();

        auto reweight = [&](const Tensor& s) { return config.candidate_reweight ? config.candidate_reweight(s) : s; };

        SparseAdjacency learned;
        switch (config.mode) {
            case Mode::kIngsl: {
                ScorerVars sv;
                sv.kind = config.scorer;
                sv.first = leaves[layout.scorer_begin];
                if (layout.scorer_count > 1) sv.second = leaves[layout.scorer_begin + 1];
                const Tensor w = diversity_scores(e, cand, sv);
                const Matrix xv = cand.sparse.values.value().cwiseProduct(w.value());
                const Threshold thr = select_threshold(std::span<const double>(xv.data(), static_cast<std::size_t>(m)),
                                                       config.reduction);
                learned = prune(cand, w, thr);
                break;
            }
            case Mode::kSimilarityOnly: {
                const Tensor s = reweight(cand.sparse.values);
                const Matrix& sv = s.value();
                const std::span<const double> span(sv.data(), static_cast<std::size_t>(m));
                learned = keep_positions(cand, s, surviving_positions(span, select_threshold(span, config.reduction)));
                break;
            }
            case Mode::kRandomPrune: {
                // Each node pair carries a priority drawn once per run; survivors
                // are the candidates with the highest priorities.
                const Tensor s = reweight(cand.sparse.values);
                const auto rows = entry_rows(*cand.sparse.structure);
                const auto cols = entry_cols(*cand.sparse.structure);
                std::vector<double> priority(static_cast<std::size_t>(m));
                for (std::size_t k = 0; k < priority.size(); ++k) {
                    const auto pair = static_cast<std::uint64_t>(rows[k] * n + cols[k]);
                    priority[k] = static_cast<double>(derive_seed(config.seed, kStreamRandomPrune, pair) >> 11);
                }
                learned = keep_positions(cand, s, surviving_positions(priority, select_threshold(priority, config.reduction)));
                break;
            }
            case Mode::kNoReduction:
                learned = SparseAdjacency{cand.sparse.structure, reweight(cand.sparse.values)};
                break;
        }

        const SparseAdjacency adj = fuse_with_original(g, learned, config.residual_weight);
        const GcnOutput out = gcn_forward(adj, x, task_vars);
        const Tensor task = task_loss(out.logits, g.labels, train_mask);
        Tensor l_gsl = task;
        if (config.lambda > 0.0) l_gsl = gsl_objective(task, feature_smoothness(learned, g.features), config.lambda);
        Tensor loss = l_gsl;
        if (use_scorer && config.beta > 0.0) {
            const SparseAdjacency full = fuse_with_original(g, cand.sparse, config.residual_weight);
            const GcnOutput full_out = gcn_forward(full, x, task_vars);
            const auto batch =
                sample_batch(n, batch_size, derive_seed(config.seed, kStreamBatch, static_cast<std::uint64_t>(epoch)));
            loss = total_loss(l_gsl, mi_loss(out.representations, full_out.representations, batch), config.beta);
        }

        const double loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                               std::to_string(loss_value) + ")");
        }

        const Matrix& logits = out.logits.value();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_value;
        rec.train_acc = accuracy(logits, g.labels, train_mask);
        rec.val_acc = accuracy(logits, g.labels, val_mask);
        rec.test_acc = accuracy(logits, g.labels, test_mask);
        rec.learned_edges = learned.nnz();
        result.history.push_back(rec);
        result.epochs_run = epoch + 1;

        if (result.best_epoch < 0 || rec.val_acc > result.best_val_acc) {
            result.best_epoch = epoch;
            result.best_val_acc = rec.val_acc;
            result.test_acc = rec.test_acc;
            result.candidate_edges = m;
            result.edges_final = learned.nnz();
            result.learned = learned.materialize();
            result.additional_edges = additional_edge_count(g, result.learned);
            result.flops = flops_estimate(adj.nnz(), layer_dims, n);
            result.embeddings = e.value();
            result.params.structure_encoder = slice_gcn(state.params, layout.encoder_begin, layout.encoder_count, false);
            result.params.task = slice_gcn(state.params, layout.task_begin, layout.task_count, true);
            if (use_scorer) {
                result.params.scorer = DiversityScorer::from_parameters(
                    config.scorer, std::span<const Matrix>(state.params.data() + layout.scorer_begin, layout.scorer_count));
            }
        }

        tape.backward(loss);
        std::vector<Matrix> grads;
        grads.reserve(leaves.size());
        for (std::size_t k = 0; k < leaves.size(); ++k) {
            grads.push_back(state.frozen[k] ? Matrix::Zero(state.params[k].rows(), state.params[k].cols())
                                            : leaves[k].grad());
        }
        try {
            adam_step(state, grads, config.lr);
        } catch (const NumericError& err) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + err.what());
        }

        if (epoch - result.best_epoch >= config.patience) break;
    }
    return result;
}

TrainResult train_ingsl(const Graph& g, TrainConfig config) {
    config.mode = Mode::kIngsl;
    return train(g, config);
}

}  // namespace ingsl
