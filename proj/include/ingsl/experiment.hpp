#pragma once

#include "ingsl/analysis.hpp"
#include "ingsl/gradcheck.hpp"
#include "ingsl/graph.hpp"
#include "ingsl/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ingsl {

struct NoiseSpec {
    double add_ratio = 0.0;
    double del_ratio = 0.0;
    double feature_mask_ratio = 0.0;
};

/// Experiment settings read from a single JSON document.
///
/// The dataset is either a bundle directory or an SBM spec. An SBM without an
/// explicit seed is regenerated from each run seed.
struct ExperimentConfig {
    std::optional<std::filesystem::path> bundle;
    std::optional<SbmSpec> sbm;
    bool sbm_seed_from_run = false;

    Index k = 30;
    std::vector<double> reduction_levels{0.5};
    double beta = 0.5;
    double lambda = 0.0;
    ScorerKind scorer = ScorerKind::kBilinear;
    ScorerInit scorer_init = ScorerInit::kIdentity;
    bool freeze_scorer_identity = false;
    double lr = 1e-2;
    int epochs = 300;
    int patience = 50;
    std::vector<std::uint64_t> seeds{0};
    std::optional<NoiseSpec> noise;
    std::vector<Mode> modes{Mode::kIngsl};
    Index hidden = 128;
    Index batch_size = 0;
    double residual_weight = 1.0;
    Similarity similarity = Similarity::kInnerProduct;
    std::vector<Index> k_values{2, 5, 10, 20, 30};

    void check() const;
    TrainConfig train_config(Mode mode, double r, std::uint64_t seed) const;
};

/// Parses and validates; unknown keys and out-of-range values are ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Replaces the seed list with a single seed (the --seed override).
void override_seed(ExperimentConfig& config, std::uint64_t seed);

/// The graph a run with `seed` trains on, noise included.
Graph build_graph(const ExperimentConfig& config, std::uint64_t seed);

struct CellResult {
    Mode mode = Mode::kIngsl;
    double r = 0.0;
    std::uint64_t seed = 0;
    double test_acc = 0.0;
    double best_val_acc = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    Index original_edges = 0;
    Index candidate_edges = 0;
    Index edges_final = 0;
    Index additional_edges = 0;
    double edge_multiple = 0.0;  ///< additional_edges / original undirected edge count
    std::int64_t flops = 0;
    double wall_time = 0.0;      ///< seconds; excluded from determinism checks
};

/// Every (seed, r, mode) cell, in that nesting order. Cells run on up to
/// `threads` workers; the result order does not depend on scheduling.
std::vector<CellResult> run_cells(const ExperimentConfig& config, int threads = 1);

/// INGSL_THREADS, defaulting to 1.
int threads_from_env();

struct Aggregate {
    Mode mode = Mode::kIngsl;
    double r = 0.0;
    int seeds = 0;
    double test_acc_mean = 0.0;
    std::optional<double> test_acc_std;  ///< sample std; only with >= 2 seeds
    double edges_final_mean = 0.0;
    double edge_multiple_mean = 0.0;
    double flops_mean = 0.0;
};

/// One entry per (mode, r), ordered as the config lists them.
std::vector<Aggregate> aggregate(const ExperimentConfig& config, const std::vector<CellResult>& cells);

nlohmann::json make_report(const ExperimentConfig& config, const std::vector<CellResult>& cells);
/// Copy of a report with every wall-time field removed.
nlohmann::json strip_wall_time(nlohmann::json report);

/// Columns: mode, r, seed, test_acc, edges_final, edge_multiple, flops.
std::string cells_csv(const std::vector<CellResult>& cells);
/// One row per (mode, r) with mean/std accuracy and mean edge counts.
std::string sweep_csv(const std::vector<Aggregate>& rows);

nlohmann::json to_json(const LemmaReport& report);
nlohmann::json lemma_report(const LemmaReport& lemma1, const LemmaReport& lemma2, std::uint64_t seed);

nlohmann::json to_json(const std::vector<GradRow>& rows, std::uint64_t seed);

std::string redundancy_csv(const std::vector<RedundancyPoint>& points);

const char* version_string();

}  // namespace ingsl
