#pragma once

#include "ingsl/gnn.hpp"
#include "ingsl/graph.hpp"
#include "ingsl/gsl.hpp"
#include "ingsl/ingsl.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ingsl {

/// How the candidate graph is reduced before it reaches the task GNN.
enum class Mode {
    kIngsl,           ///< diversity-scored pruning with the MI objective
    kSimilarityOnly,  ///< keep the largest (1 - r) fraction of S values
    kRandomPrune,     ///< keep a uniformly random (1 - r) fraction, fixed per node pair for the run
    kNoReduction,     ///< plain GSL baseline on the full candidate graph
};

const char* mode_name(Mode m);
Mode parse_mode(const std::string& name);

/// Starting point of the bilinear scorer; the MLP scorer always starts from Glorot.
enum class ScorerInit {
    kGlorot,    ///< uniform Glorot, like every other weight
    kIdentity,  ///< W_1 = I, so the first pruning step ranks by S_ij^2
};

struct TrainConfig {
    Mode mode = Mode::kIngsl;
    Index k = 30;
    double reduction = 0.5;
    double beta = 0.5;
    double lambda = 0.0;
    ScorerKind scorer = ScorerKind::kBilinear;
    ScorerInit scorer_init = ScorerInit::kIdentity;
    double lr = 1e-2;
    int epochs = 300;
    int patience = 50;
    Index hidden = 128;
    Index batch_size = 0;  ///< 0 selects min(n, 256)
    double residual_weight = 1.0;
    Similarity similarity = Similarity::kInnerProduct;
    /// Pins W_1 = I and excludes it from updates (bilinear scorer only).
    bool freeze_scorer_identity = false;
    std::uint64_t seed = 0;
    /// Optional transform of S values for the similarity-based modes; identity when empty.
    std::function<Tensor(const Tensor&)> candidate_reweight;

    void check() const;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    Index learned_edges = 0;
};

struct ParameterSets {
    GcnParams structure_encoder;
    GcnParams task;
    std::optional<DiversityScorer> scorer;
};

struct TrainResult {
    int best_epoch = -1;
    int epochs_run = 0;
    double best_val_acc = 0.0;
    double test_acc = 0.0;
    Index candidate_edges = 0;   ///< stored entries of S
    Index edges_final = 0;       ///< stored entries of the learned (pruned) graph
    Index additional_edges = 0;  ///< learned entries that are not original edges
    std::int64_t flops = 0;      ///< task-GCN estimate on the fused adjacency
    CsrMatrix learned;           ///< learned graph at the best epoch, with values
    Matrix embeddings;           ///< E at the best epoch
    ParameterSets params;        ///< snapshot at the best epoch
    std::vector<EpochRecord> history;
};

/// Joint training of the structure encoder, the scorer (InGSL mode) and the
/// task GCN with Adam; selects the epoch with the best validation accuracy.
/// Throws NumericError naming the epoch when the loss diverges.
TrainResult train(const Graph& g, const TrainConfig& config);

/// train() with mode forced to InGSL.
TrainResult train_ingsl(const Graph& g, TrainConfig config);

}  // namespace ingsl
