#include "ingsl/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace ingsl;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumeric = 2, kCheckFailed = 3 };

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

ExperimentConfig read_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = load_config(path);
    if (seed) override_seed(cfg, *seed);
    return cfg;
}

void print_aggregates(const std::vector<Aggregate>& rows) {
    for (const auto& a : rows) {
        std::printf("%-16s r=%-5g seeds=%-3d test_acc=%.4f", mode_name(a.mode), a.r, a.seeds, a.test_acc_mean);
        if (a.test_acc_std) std::printf(" +- %.4f", *a.test_acc_std);
        std::printf("  edges=%.1f  multiple=%.3f\n", a.edges_final_mean, a.edge_multiple_mean);
    }
}

int cmd_train(const std::string& config_path, const std::string& out, const std::optional<std::uint64_t>& seed,
              bool sweep) {
    ExperimentConfig cfg = read_config(config_path, seed);
    if (sweep && cfg.reduction_levels.size() < 2) {
        throw ConfigError("sweep needs at least two reduction_levels, got " + std::to_string(cfg.reduction_levels.size()));
    }
    const auto cells = run_cells(cfg, threads_from_env());
    const auto rows = aggregate(cfg, cells);
    const fs::path dir(out);
    write_file(dir / "report.json", make_report(cfg, cells).dump(2) + "\n");
    write_file(dir / "cells.csv", cells_csv(cells));
    if (sweep) write_file(dir / "sweep.csv", sweep_csv(rows));
    print_aggregates(rows);
    return kOk;
}

int cmd_verify_lemmas(std::int64_t trials, std::uint64_t seed, const std::string& out, bool independent_norms) {
    Lemma1Config c1;
    c1.trials = trials;
    c1.seed = seed;
    Lemma2Config c2;
    c2.trials = trials;
    c2.seed = seed;
    if (independent_norms) c2.norms = NormSampling::kIndependent;
    const LemmaReport r1 = lemma1_check(c1);
    const LemmaReport r2 = lemma2_check(c2);
    const std::string text = lemma_report(r1, r2, seed).dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        write_file(fs::path(out) / "lemmas.json", text);
        std::printf("lemma 1: %lld trials, %lld violations, min slack %.3e\n", static_cast<long long>(r1.trials),
                    static_cast<long long>(r1.violations), r1.max_slack);
        std::printf("lemma 2: %lld trials, %lld violations, min slack %.3e\n", static_cast<long long>(r2.trials),
                    static_cast<long long>(r2.violations), r2.max_slack);
    }
    return r1.violations == 0 && r2.violations == 0 ? kOk : kCheckFailed;
}

int cmd_gradcheck(int trials, std::uint64_t seed, const std::string& out) {
    const auto rows = run_gradcheck(default_gradcheck_cases(), trials, seed);
    bool ok = true;
    for (const auto& r : rows) {
        std::printf("%-26s %-4s max rel err %.3e\n", r.name.c_str(), r.passed ? "pass" : "FAIL", r.max_error);
        ok = ok && r.passed;
    }
    if (!out.empty()) write_file(fs::path(out) / "gradcheck.json", to_json(rows, seed).dump(2) + "\n");
    return ok ? kOk : kCheckFailed;
}

int cmd_diagnose(const std::string& config_path, const std::string& out, const std::optional<std::uint64_t>& seed,
                 const std::string& source) {
    ExperimentConfig cfg = read_config(config_path, seed);
    const std::uint64_t run_seed = cfg.seeds.front();
    const Graph g = build_graph(cfg, run_seed);
    Matrix e;
    if (source == "features") {
        e = g.features;
    } else {
        const TrainResult res = train(g, cfg.train_config(cfg.modes.front(), cfg.reduction_levels.front(), run_seed));
        e = res.embeddings;
    }
    const auto profile = redundancy_profile(e, cfg.k_values);
    const std::string csv = redundancy_csv(profile);
    if (out.empty()) {
        std::cout << csv;
    } else {
        write_file(fs::path(out) / "redundancy.csv", csv);
        std::cout << csv;
    }
    return kOk;
}

int cmd_gen_sbm(const std::string& config_path, const std::string& out, const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = read_config(config_path, seed);
    if (!cfg.sbm) throw ConfigError("gen-sbm needs a config with dataset.sbm");
    const Graph g = build_graph(cfg, cfg.seeds.front());
    save_bundle(g, out);
    std::printf("wrote %lld nodes, %zu edges, homophily %.4f to %s\n", static_cast<long long>(g.n), g.edges.size(),
                g.edges.empty() ? 0.0 : edge_homophily(g), out.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph structure learning with diversity-guided pruning"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string());

    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::int64_t trials = 10000;
    std::string source = "trained";
    bool independent_norms = false;

    auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Overrides the config seeds"); };

    auto* train = app.add_subcommand("train", "Run every (seed, r, mode) cell and write report.json and cells.csv");
    train->add_option("--config", config, "Experiment config (JSON)")->required();
    train->add_option("--out", out, "Output directory")->required();
    add_seed(train);

    auto* sweep = app.add_subcommand("sweep", "Like train, plus sweep.csv with one row per (mode, r)");
    sweep->add_option("--config", config, "Experiment config (JSON)")->required();
    sweep->add_option("--out", out, "Output directory")->required();
    add_seed(sweep);

    auto* lemmas = app.add_subcommand("verify-lemmas", "Randomized checks of both redundancy bounds");
    lemmas->add_option("--trials", trials, "Trials per lemma")->check(CLI::PositiveNumber);
    lemmas->add_option("--out", out, "Output directory (prints JSON when omitted)");
    lemmas->add_flag("--independent-norms", independent_norms,
                     "Draw neighbour norms independently of the anchor in the lemma 2 check");
    add_seed(lemmas);

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operation");
    grad->add_option("--trials", trials, "Random instances per operation")->check(CLI::PositiveNumber);
    grad->add_option("--out", out, "Output directory");
    add_seed(grad);

    auto* diag = app.add_subcommand("diagnose-redundancy", "Neighbour redundancy profile over k_values");
    diag->add_option("--config", config, "Experiment config (JSON)")->required();
    diag->add_option("--out", out, "Output directory");
    diag->add_option("--source", source, "Embeddings to profile")->check(CLI::IsMember({"trained", "features"}));
    add_seed(diag);

    auto* gen = app.add_subcommand("gen-sbm", "Write the config's SBM graph as a bundle directory");
    gen->add_option("--config", config, "Experiment config (JSON) with dataset.sbm")->required();
    gen->add_option("--out", out, "Bundle directory")->required();
    add_seed(gen);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*train) return cmd_train(config, out, seed, false);
        if (*sweep) return cmd_train(config, out, seed, true);
        if (*lemmas) return cmd_verify_lemmas(trials, seed.value_or(0), out, independent_norms);
        if (*grad) {
            if (grad->count("--trials") == 0) trials = 3;
            return cmd_gradcheck(static_cast<int>(trials), seed.value_or(0), out);
        }
        if (*diag) return cmd_diagnose(config, out, seed, source);
        if (*gen) return cmd_gen_sbm(config, out, seed);
    } catch (const NumericError& e) {
        std::cerr << "numeric divergence: " << e.what() << "\n";
        return kNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
    return kOk;
}
