#include "ingsl/experiment.hpp"

#include "ingsl/random.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#ifndef INGSL_VERSION
#define INGSL_VERSION "0.0.0"
#endif

namespace ingsl {

using nlohmann::json;

const char* version_string() { return INGSL_VERSION; }

namespace {

// Shortest decimal form that parses back to the same double.
std::string short_real(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& item : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; })) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

const char* scorer_name(ScorerKind k) { return k == ScorerKind::kBilinear ? "bilinear" : "mlp"; }

ScorerKind parse_scorer(const std::string& s) {
    if (s == "bilinear") return ScorerKind::kBilinear;
    if (s == "mlp") return ScorerKind::kMlp;
    throw ConfigError("unknown scorer '" + s + "' (expected bilinear or mlp)");
}

const char* scorer_init_name(ScorerInit i) { return i == ScorerInit::kIdentity ? "identity" : "glorot"; }

ScorerInit parse_scorer_init(const std::string& s) {
    if (s == "identity") return ScorerInit::kIdentity;
    if (s == "glorot") return ScorerInit::kGlorot;
    throw ConfigError("unknown scorer_init '" + s + "' (expected identity or glorot)");
}

const char* similarity_name(Similarity s) { return s == Similarity::kCosine ? "cosine" : "inner_product"; }

Similarity parse_similarity(const std::string& s) {
    if (s == "inner_product") return Similarity::kInnerProduct;
    if (s == "cosine") return Similarity::kCosine;
    throw ConfigError("unknown similarity '" + s + "' (expected inner_product or cosine)");
}

SbmSpec parse_sbm(const json& j, bool& seed_from_run) {
    reject_unknown(j, {"block_sizes", "p_in", "p_out", "feature_dim", "feature_noise", "seed"}, "dataset.sbm");
    SbmSpec spec;
    read(j, "block_sizes", spec.block_sizes);
    read(j, "p_in", spec.p_in);
    read(j, "p_out", spec.p_out);
    read(j, "feature_dim", spec.feature_dim);
    read(j, "feature_noise", spec.feature_noise);
    seed_from_run = !j.contains("seed");
    read(j, "seed", spec.seed);
    return spec;
}

std::string aggregate_key(Mode m, double r) { return std::string(mode_name(m)) + "@" + short_real(r); }

}  // namespace

void ExperimentConfig::check() const {
    if (bundle.has_value() == sbm.has_value()) throw ConfigError("dataset needs exactly one of 'bundle' or 'sbm'");
    if (sbm) {
        if (sbm->block_sizes.empty()) throw ConfigError("dataset.sbm.block_sizes must not be empty");
        for (Index b : sbm->block_sizes) {
            if (b < 1) throw ConfigError("dataset.sbm.block_sizes must be positive");
        }
        for (double p : {sbm->p_in, sbm->p_out}) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("dataset.sbm probabilities must lie in [0, 1]");
        }
        if (sbm->feature_dim < 0 || sbm->feature_noise < 0.0) throw ConfigError("dataset.sbm feature settings must be >= 0");
    }
    if (reduction_levels.empty()) throw ConfigError("reduction_levels must not be empty");
    for (double r : reduction_levels) {
        if (!(r >= 0.0 && r < 1.0)) throw ConfigError("reduction level " + short_real(r) + " outside [0, 1)");
    }
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (!(lr >= 1e-5 && lr <= 5e-2)) throw ConfigError("lr " + short_real(lr) + " outside [1e-5, 5e-2]");
    if (modes.empty()) throw ConfigError("modes must not be empty");
    if (std::set<Mode>(modes.begin(), modes.end()).size() != modes.size()) throw ConfigError("modes contain duplicates");
    if (noise) {
        if (noise->add_ratio < 0.0) throw ConfigError("noise.add_ratio must be >= 0");
        if (!(noise->del_ratio >= 0.0 && noise->del_ratio <= 1.0)) throw ConfigError("noise.del_ratio must lie in [0, 1]");
        if (!(noise->feature_mask_ratio >= 0.0 && noise->feature_mask_ratio <= 1.0)) {
            throw ConfigError("noise.feature_mask_ratio must lie in [0, 1]");
        }
    }
    for (Index k : k_values) {
        if (k < 2) throw ConfigError("k_values entries must be at least 2");
    }
    for (Mode m : modes) train_config(m, reduction_levels.front(), seeds.front()).check();
}

TrainConfig ExperimentConfig::train_config(Mode mode, double r, std::uint64_t seed) const {
    TrainConfig t;
    t.mode = mode;
    t.k = k;
    t.reduction = mode == Mode::kNoReduction ? 0.0 : r;
    t.beta = beta;
    t.lambda = lambda;
    t.scorer = scorer;
    t.scorer_init = scorer_init;
    t.freeze_scorer_identity = freeze_scorer_identity;
    t.lr = lr;
    t.epochs = epochs;
    t.patience = patience;
    t.hidden = hidden;
    t.batch_size = batch_size;
    t.residual_weight = residual_weight;
    t.similarity = similarity;
    t.seed = seed;
    return t;
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig c;
    try {
        reject_unknown(doc,
                       {"dataset", "k", "reduction_levels", "beta", "lambda", "scorer", "scorer_init",
                        "freeze_scorer_identity", "lr", "epochs", "patience", "seeds", "noise", "modes", "hidden",
                        "batch_size", "residual_weight", "similarity", "k_values"},
                       "config");
        if (!doc.contains("dataset")) throw ConfigError("config is missing 'dataset'");
        const json& ds = doc.at("dataset");
        reject_unknown(ds, {"bundle", "sbm"}, "dataset");
        if (ds.contains("bundle")) c.bundle = ds.at("bundle").get<std::string>();
        if (ds.contains("sbm")) c.sbm = parse_sbm(ds.at("sbm"), c.sbm_seed_from_run);

        read(doc, "k", c.k);
        read(doc, "reduction_levels", c.reduction_levels);
        read(doc, "beta", c.beta);
        read(doc, "lambda", c.lambda);
        if (doc.contains("scorer")) c.scorer = parse_scorer(doc.at("scorer").get<std::string>());
        if (doc.contains("scorer_init")) c.scorer_init = parse_scorer_init(doc.at("scorer_init").get<std::string>());
        read(doc, "freeze_scorer_identity", c.freeze_scorer_identity);
        if (c.scorer == ScorerKind::kMlp) {
            if (doc.contains("scorer_init") && c.scorer_init == ScorerInit::kIdentity) {
                throw ConfigError("scorer_init 'identity' applies to the bilinear scorer only");
            }
            c.scorer_init = ScorerInit::kGlorot;
        }
        read(doc, "lr", c.lr);
        read(doc, "epochs", c.epochs);
        read(doc, "patience", c.patience);
        read(doc, "seeds", c.seeds);
        if (doc.contains("noise")) {
            const json& nz = doc.at("noise");
            reject_unknown(nz, {"add_ratio", "del_ratio", "feature_mask_ratio"}, "noise");
            NoiseSpec n;
            read(nz, "add_ratio", n.add_ratio);
            read(nz, "del_ratio", n.del_ratio);
            read(nz, "feature_mask_ratio", n.feature_mask_ratio);
            c.noise = n;
        }
        if (doc.contains("modes")) {
            c.modes.clear();
            for (const auto& m : doc.at("modes")) c.modes.push_back(parse_mode(m.get<std::string>()));
        }
        read(doc, "hidden", c.hidden);
        read(doc, "batch_size", c.batch_size);
        read(doc, "residual_weight", c.residual_weight);
        if (doc.contains("similarity")) c.similarity = parse_similarity(doc.at("similarity").get<std::string>());
        read(doc, "k_values", c.k_values);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.check();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
    json j;
    if (c.bundle) {
        j["dataset"] = {{"bundle", c.bundle->string()}};
    } else {
        json sbm = {{"block_sizes", c.sbm->block_sizes},
                    {"p_in", c.sbm->p_in},
                    {"p_out", c.sbm->p_out},
                    {"feature_dim", c.sbm->feature_dim},
                    {"feature_noise", c.sbm->feature_noise}};
        if (!c.sbm_seed_from_run) sbm["seed"] = c.sbm->seed;
        j["dataset"] = {{"sbm", sbm}};
    }
    j["k"] = c.k;
    j["reduction_levels"] = c.reduction_levels;
    j["beta"] = c.beta;
    j["lambda"] = c.lambda;
    j["scorer"] = scorer_name(c.scorer);
    j["scorer_init"] = scorer_init_name(c.scorer_init);
    j["freeze_scorer_identity"] = c.freeze_scorer_identity;
    j["lr"] = c.lr;
    j["epochs"] = c.epochs;
    j["patience"] = c.patience;
    j["seeds"] = c.seeds;
    if (c.noise) {
        j["noise"] = {{"add_ratio", c.noise->add_ratio},
                      {"del_ratio", c.noise->del_ratio},
                      {"feature_mask_ratio", c.noise->feature_mask_ratio}};
    }
    j["modes"] = json::array();
    for (Mode m : c.modes) j["modes"].push_back(mode_name(m));
    j["hidden"] = c.hidden;
    j["batch_size"] = c.batch_size;
    j["residual_weight"] = c.residual_weight;
    j["similarity"] = similarity_name(c.similarity);
    j["k_values"] = c.k_values;
    return j;
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) { config.seeds = {seed}; }

Graph build_graph(const ExperimentConfig& config, std::uint64_t seed) {
    Graph g;
    if (config.bundle) {
        g = load_bundle(*config.bundle);
    } else {
        SbmSpec spec = *config.sbm;
        if (config.sbm_seed_from_run) spec.seed = seed;
        g = generate_sbm(spec);
    }
    if (config.noise) {
        if (config.noise->add_ratio > 0.0 || config.noise->del_ratio > 0.0) {
            g = inject_structural_noise(g, config.noise->add_ratio, config.noise->del_ratio, derive_seed(seed, 11));
        }
        if (config.noise->feature_mask_ratio > 0.0) {
            g = mask_features(g, config.noise->feature_mask_ratio, derive_seed(seed, 12));
        }
    }
    return g;
}

int threads_from_env() {
    const char* v = std::getenv("INGSL_THREADS");
    if (v == nullptr || *v == '\0') return 1;
    int n = 0;
    auto res = std::from_chars(v, v + std::char_traits<char>::length(v), n);
    if (res.ec != std::errc() || *res.ptr != '\0' || n < 1) {
        throw ConfigError(std::string("INGSL_THREADS must be a positive integer, got '") + v + "'");
    }
    return n;
}

std::vector<CellResult> run_cells(const ExperimentConfig& config, int threads) {
    config.check();
    struct Cell {
        std::size_t graph;
        Mode mode;
        double r;
        std::uint64_t seed;
    };
    std::vector<Graph> graphs;
    std::vector<Cell> cells;
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
        graphs.push_back(build_graph(config, config.seeds[s]));
        for (double r : config.reduction_levels) {
            for (Mode m : config.modes) cells.push_back({s, m, r, config.seeds[s]});
        }
    }

    std::vector<CellResult> out(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const Cell& c = cells[i];
            try {
                const Graph& g = graphs[c.graph];
                const auto start = std::chrono::steady_clock::now();
                const TrainResult res = train(g, config.train_config(c.mode, c.r, c.seed));
                CellResult cr;
                cr.mode = c.mode;
                cr.r = c.r;
                cr.seed = c.seed;
                cr.test_acc = res.test_acc;
                cr.best_val_acc = res.best_val_acc;
                cr.best_epoch = res.best_epoch;
                cr.epochs_run = res.epochs_run;
                cr.original_edges = static_cast<Index>(g.edges.size());
                cr.candidate_edges = res.candidate_edges;
                cr.edges_final = res.edges_final;
                cr.additional_edges = res.additional_edges;
                cr.edge_multiple = g.edges.empty() ? 0.0
                                                   : static_cast<double>(res.additional_edges) /
                                                         static_cast<double>(g.edges.size());
                cr.flops = res.flops;
                cr.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                out[i] = cr;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    // The first failing cell in config order decides the error, independent of scheduling.
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::vector<Aggregate> aggregate(const ExperimentConfig& config, const std::vector<CellResult>& cells) {
    std::vector<Aggregate> rows;
    for (Mode m : config.modes) {
        for (double r : config.reduction_levels) {
            Aggregate a;
            a.mode = m;
            a.r = r;
            std::vector<double> acc;
            for (const auto& c : cells) {
                if (c.mode != m || c.r != r) continue;
                acc.push_back(c.test_acc);
                a.edges_final_mean += static_cast<double>(c.edges_final);
                a.edge_multiple_mean += c.edge_multiple;
                a.flops_mean += static_cast<double>(c.flops);
            }
            a.seeds = static_cast<int>(acc.size());
            if (acc.empty()) continue;
            const double n = static_cast<double>(acc.size());
            for (double v : acc) a.test_acc_mean += v;
            a.test_acc_mean /= n;
            a.edges_final_mean /= n;
            a.edge_multiple_mean /= n;
            a.flops_mean /= n;
            if (acc.size() >= 2) {
                double ss = 0.0;
                for (double v : acc) ss += (v - a.test_acc_mean) * (v - a.test_acc_mean);
                a.test_acc_std = std::sqrt(ss / (n - 1.0));
            }
            rows.push_back(a);
        }
    }
    return rows;
}

json make_report(const ExperimentConfig& config, const std::vector<CellResult>& cells) {
    json report;
    report["config"] = to_json(config);
    report["cells"] = json::array();
    for (const auto& c : cells) {
        report["cells"].push_back({{"mode", mode_name(c.mode)},
                                   {"r", c.r},
                                   {"seed", c.seed},
                                   {"test_acc", c.test_acc},
                                   {"best_val_acc", c.best_val_acc},
                                   {"best_epoch", c.best_epoch},
                                   {"epochs_run", c.epochs_run},
                                   {"original_edges", c.original_edges},
                                   {"candidate_edges", c.candidate_edges},
                                   {"edges_final", c.edges_final},
                                   {"additional_edges", c.additional_edges},
                                   {"edge_multiple", c.edge_multiple},
                                   {"flops", c.flops},
                                   {"wall_time", c.wall_time}});
    }
    report["aggregates"] = json::object();
    for (const auto& a : aggregate(config, cells)) {
        json entry = {{"mode", mode_name(a.mode)},
                      {"r", a.r},
                      {"seeds", a.seeds},
                      {"test_acc_mean", a.test_acc_mean},
                      {"edges_final_mean", a.edges_final_mean},
                      {"edge_multiple_mean", a.edge_multiple_mean},
                      {"flops_mean", a.flops_mean}};
        if (a.test_acc_std) entry["test_acc_std"] = *a.test_acc_std;
        report["aggregates"][aggregate_key(a.mode, a.r)] = entry;
    }
    report["version"] = version_string();
    return report;
}

json strip_wall_time(json report) {
    if (report.contains("cells")) {
        for (auto& c : report["cells"]) c.erase("wall_time");
    }
    return report;
}

std::string cells_csv(const std::vector<CellResult>& cells) {
    std::ostringstream out;
    out << "mode,r,seed,test_acc,edges_final,edge_multiple,flops\n";
    for (const auto& c : cells) {
        out << mode_name(c.mode) << ',' << short_real(c.r) << ',' << c.seed << ',' << short_real(c.test_acc) << ','
            << c.edges_final << ',' << short_real(c.edge_multiple) << ',' << c.flops << '\n';
    }
    return out.str();
}

std::string sweep_csv(const std::vector<Aggregate>& rows) {
    std::ostringstream out;
    out << "mode,r,seeds,test_acc_mean,test_acc_std,edges_final_mean,edge_multiple_mean,flops_mean\n";
    for (const auto& a : rows) {
        out << mode_name(a.mode) << ',' << short_real(a.r) << ',' << a.seeds << ',' << short_real(a.test_acc_mean) << ','
            << (a.test_acc_std ? short_real(*a.test_acc_std) : "") << ',' << short_real(a.edges_final_mean) << ','
            << short_real(a.edge_multiple_mean) << ',' << short_real(a.flops_mean) << '\n';
    }
    return out.str();
}

json to_json(const LemmaReport& report) {
    json ranges = json::object();
    for (const auto& [name, range] : report.ranges) ranges[name] = {range.first, range.second};
    return {{"trials", report.trials},
            {"violations", report.violations},
            {"max_slack", report.max_slack},
            {"ranges", ranges}};
}

json lemma_report(const LemmaReport& lemma1, const LemmaReport& lemma2, std::uint64_t seed) {
    return {{"lemma1", to_json(lemma1)},
            {"lemma2", to_json(lemma2)},
            {"seed", seed},
            {"tolerance", kBoundTolerance},
            {"version", version_string()}};
}

json to_json(const std::vector<GradRow>& rows, std::uint64_t seed) {
    json cases = json::array();
    bool all = true;
    for (const auto& r : rows) {
        cases.push_back({{"name", r.name}, {"trials", r.trials}, {"max_error", r.max_error}, {"passed", r.passed}});
        all = all && r.passed;
    }
    return {{"seed", seed}, {"tolerance", kGradTolerance}, {"cases", cases}, {"passed", all}, {"version", version_string()}};
}

std::string redundancy_csv(const std::vector<RedundancyPoint>& points) {
    std::ostringstream out;
    out << "k,avg_similarity,nodes\n";
    for (const auto& p : points) out << p.k << ',' << short_real(p.avg_similarity) << ',' << p.nodes << '\n';
    return out.str();
}

}  // namespace ingsl
