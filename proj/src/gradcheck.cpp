#include "ingsl/gradcheck.hpp"

#include "ingsl/gnn.hpp"
#include "ingsl/graph.hpp"
#include "ingsl/gsl.hpp"
#include "ingsl/ingsl.hpp"
#include "ingsl/random.hpp"
#include "ingsl/sparse.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <optional>

namespace ingsl {

namespace {

// Decision boundaries (relu kinks, top-K cut-offs, prune threshold) are kept
// at least this far from every probed point.
constexpr double kMargin = 1e-3;
constexpr int kMaxAttempts = 10000;

Matrix uniform(Index r, Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

// Entries with |x| in [0.1, 1], random sign.
Matrix away_from_zero(Index r, Index c, std::mt19937_64& rng) {
    Matrix m = uniform(r, c, rng, 0.1, 1.0);
    std::bernoulli_distribution flip(0.5);
    for (Index i = 0; i < m.size(); ++i) {
        if (flip(rng)) m.data()[i] = -m.data()[i];
    }
    return m;
}

Tensor weighted_sum(const Tensor& t, const Matrix& w) { return sum(hadamard(t, t.tape().constant(w))); }

Graph random_graph(Index n, Index d, int classes, std::mt19937_64& rng) {
    Graph g;
    g.n = n;
    std::bernoulli_distribution edge(0.35);
    for (Index u = 0; u < n; ++u) {
        for (Index v = u + 1; v < n; ++v) {
            if (edge(rng)) g.edges.push_back({u, v});
        }
    }
    g.features = uniform(n, d, rng);
    g.classes = classes;
    std::uniform_int_distribution<int> label(0, classes - 1);
    for (Index i = 0; i < n; ++i) {
        g.labels.push_back(label(rng));
        g.splits.push_back(i < n / 2 ? Split::kTrain : (i < n / 2 + 1 ? Split::kVal : Split::kTest));
    }
    return g;
}

// Random pattern with at least one entry per row; optionally with the diagonal.
std::shared_ptr<const CsrMatrix> random_structure(Index n, bool diagonal, std::mt19937_64& rng) {
    std::bernoulli_distribution keep(0.4);
    std::uniform_int_distribution<Index> col(0, n - 1);
    std::vector<Eigen::Triplet<double, int>> trip;
    for (Index i = 0; i < n; ++i) {
        if (diagonal) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
        for (Index j = 0; j < n; ++j) {
            if (j != i && keep(rng)) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
        }
        if (!diagonal) trip.emplace_back(static_cast<int>(i), static_cast<int>(col(rng)), 1.0);
    }
    // Duplicates are summed; reset every stored value to one.
    CsrMatrix m = csr_from_triplets(n, n, trip);
    for (Index k = 0; k < m.nonZeros(); ++k) m.valuePtr()[k] = 1.0;
    return std::make_shared<const CsrMatrix>(std::move(m));
}

Matrix dense(const CsrMatrix& m) { return Matrix(m); }

// Smallest |pre-activation| over the relu layers of a dense GCN pass.
double gcn_margin(const Matrix& a, const Matrix& x, std::span<const Matrix> layers) {
    double margin = std::numeric_limits<double>::infinity();
    Matrix z = x;
    for (const auto& w : layers) {
        const Matrix h = a * z * w;
        margin = std::min(margin, h.cwiseAbs().minCoeff());
        z = h.cwiseMax(0.0);
    }
    return margin;
}

// Smallest gap between the k-th and (k+1)-th score of any row, self excluded.
double topk_margin(const Matrix& scores, Index k) {
    double margin = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < scores.rows(); ++i) {
        std::vector<double> row;
        for (Index j = 0; j < scores.cols(); ++j) {
            if (j != i) row.push_back(scores(i, j));
        }
        std::sort(row.begin(), row.end(), std::greater<>());
        margin = std::min(margin, row[static_cast<std::size_t>(k - 1)] - row[static_cast<std::size_t>(k)]);
    }
    return margin;
}

// Gap between the weakest survivor and the strongest dropped value.
double threshold_margin(std::vector<double> x, double r) {
    const Index keep = survivor_count(static_cast<Index>(x.size()), r);
    if (keep == static_cast<Index>(x.size())) return std::numeric_limits<double>::infinity();
    std::sort(x.begin(), x.end(), std::greater<>());
    return x[static_cast<std::size_t>(keep - 1)] - x[static_cast<std::size_t>(keep)];
}

// Redraws until `make` produces an instance clear of every decision boundary.
template <typename Make>
GradInstance retry(std::mt19937_64& rng, Make make) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        if (std::optional<GradInstance> inst = make(rng)) return std::move(*inst);
    }
    throw StateError("gradcheck: could not draw an instance away from decision boundaries");
}

GradCase unary_case(std::string name, Tensor (*op)(const Tensor&), double lo, double hi, bool avoid_zero) {
    return {std::move(name), [=](std::mt19937_64& rng) {
                Matrix x = avoid_zero ? away_from_zero(4, 3, rng) : uniform(4, 3, rng, lo, hi);
                Matrix w = uniform(4, 3, rng);
                return GradInstance{[w, op](Tape&, std::span<const Tensor> in) { return weighted_sum(op(in[0]), w); },
                                    {x}};
            }};
}

// Small end-to-end instance of the pruned training objective.
struct Pipeline {
    Graph g;
    Index k = 2;
    double r = 0.5;
    double beta = 0.5;
    std::vector<Index> batch;
};

struct PipelineValues {
    CandidateGraph cand;
    Tensor x_adjusted;
    SparseAdjacency pruned_adj;
    SparseAdjacency full_adj;
    Tensor loss;
};

// Inputs: encoder W_s1, W_s2, task W_t1, W_t2, W_c, scorer W_1.
PipelineValues pipeline_loss(Tape& tape, std::span<const Tensor> in, const Pipeline& p) {
    const Tensor x = tape.constant(p.g.features);
    const SparseAdjacency a_hat = lift(tape, normalize_adjacency(p.g));
    GcnVars enc{{in[0], in[1]}, Tensor()};
    GcnVars task{{in[2], in[3]}, in[4]};
    const Tensor e = encode_structure(a_hat, x, enc);
    CandidateGraph cand = build_candidates(e, p.k);
    ScorerVars sv{ScorerKind::kBilinear, in[5], Tensor()};
    const Tensor w = diversity_scores(e, cand, sv);
    const Matrix xv = cand.sparse.values.value().cwiseProduct(w.value());
    const Threshold thr = select_threshold(std::span<const double>(xv.data(), static_cast<std::size_t>(xv.size())), p.r);
    PrunedGraph pruned = prune_detailed(cand, w, thr);
    const SparseAdjacency adj = fuse_with_original(p.g, pruned.sparse);
    const SparseAdjacency full = fuse_with_original(p.g, cand.sparse);
    const GcnOutput out = gcn_forward(adj, x, task);
    const GcnOutput out_full = gcn_forward(full, x, task);
    const Tensor l_gsl = task_loss(out.logits, p.g.labels, p.g.mask(Split::kTrain));
    Tensor loss = total_loss(l_gsl, mi_loss(out.logits, out_full.logits, p.batch), p.beta);
    return {std::move(cand), pruned.adjusted, adj, full, loss};
}

}  // namespace

std::vector<GradCase> default_gradcheck_cases() {
    std::vector<GradCase> cases;

    cases.push_back({"matmul", [](std::mt19937_64& rng) {
                         Matrix w = uniform(3, 2, rng);
                         return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                 return weighted_sum(matmul(in[0], in[1]), w);
                                             },
                                             {uniform(3, 4, rng), uniform(4, 2, rng)}};
                     }});
    cases.push_back({"transpose", [](std::mt19937_64& rng) {
                         Matrix w = uniform(4, 3, rng);
                         return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                 return weighted_sum(transpose(in[0]), w);
                                             },
                                             {uniform(3, 4, rng)}};
                     }});
    cases.push_back({"add_sub_hadamard_scale", [](std::mt19937_64& rng) {
                         Matrix w = uniform(3, 3, rng);
                         return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                 Tensor t = scale(add(in[0], in[1]), 0.7) - hadamard(in[0], in[1]);
                                                 return weighted_sum(t, w);
                                             },
                                             {uniform(3, 3, rng), uniform(3, 3, rng)}};
                     }});
    cases.push_back(unary_case("relu", [](const Tensor& t) { return relu(t); }, 0, 0, true));
    cases.push_back(unary_case("sigmoid", [](const Tensor& t) { return sigmoid(t); }, -4.0, 4.0, false));
    cases.push_back(unary_case("exp", [](const Tensor& t) { return exp(t); }, -2.0, 2.0, false));
    cases.push_back(unary_case("log", [](const Tensor& t) { return log(t); }, 0.5, 3.0, false));
    cases.push_back(unary_case("row_l2_normalize", [](const Tensor& t) { return row_l2_normalize(t); }, 0, 0, true));
    cases.push_back({"sum_mean", [](std::mt19937_64& rng) {
                         return GradInstance{[](Tape&, std::span<const Tensor> in) {
                                                 return add(sum(in[0]), mean(hadamard(in[0], in[0])));
                                             },
                                             {uniform(3, 4, rng)}};
                     }});
    cases.push_back({"gather_rows", [](std::mt19937_64& rng) {
                         Matrix w = uniform(5, 2, rng);
                         return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                 const std::vector<Index> idx{2, 0, 2, 3, 1};
                                                 return weighted_sum(gather_rows(in[0], idx), w);
                                             },
                                             {uniform(4, 2, rng)}};
                     }});
    cases.push_back({"concat_cols", [](std::mt19937_64& rng) {
                         Matrix w = uniform(3, 5, rng);
                         return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                 return weighted_sum(concat_cols(in[0], in[1]), w);
                                             },
                                             {uniform(3, 2, rng), uniform(3, 3, rng)}};
                     }});
    cases.push_back({"row_dot", [](std::mt19937_64& rng) {
                         Matrix w = uniform(4, 1, rng);
                         return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                 return weighted_sum(row_dot(in[0], in[1]), w);
                                             },
                                             {uniform(4, 3, rng), uniform(4, 3, rng)}};
                     }});
    cases.push_back({"row_logsumexp", [](std::mt19937_64& rng) {
                         Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> include(4, 5);
                         std::bernoulli_distribution on(0.7);
                         for (Index i = 0; i < 4; ++i) {
                             for (Index j = 0; j < 5; ++j) include(i, j) = j == i || on(rng);
                         }
                         Matrix w = uniform(4, 1, rng);
                         return GradInstance{[w, include](Tape&, std::span<const Tensor> in) {
                                                 return weighted_sum(row_logsumexp(in[0], include), w);
                                             },
                                             {uniform(4, 5, rng, -3.0, 3.0)}};
                     }});
    cases.push_back({"spmm_edge_values", [](std::mt19937_64& rng) {
                         auto st = random_structure(6, false, rng);
                         Matrix w = uniform(6, 3, rng);
                         return GradInstance{[st, w](Tape&, std::span<const Tensor> in) {
                                                 return weighted_sum(spmm(SparseAdjacency{st, in[0]}, in[1]), w);
                                             },
                                             {uniform(st->nonZeros(), 1, rng), uniform(6, 3, rng)}};
                     }});
    cases.push_back({"degree_normalize", [](std::mt19937_64& rng) {
                         auto st = random_structure(6, true, rng);
                         Matrix w = uniform(st->nonZeros(), 1, rng);
                         return GradInstance{[st, w](Tape&, std::span<const Tensor> in) {
                                                 return weighted_sum(degree_normalize(*st, in[0]), w);
                                             },
                                             {uniform(st->nonZeros(), 1, rng, 0.5, 2.0)}};
                     }});
    cases.push_back({"scatter_add", [](std::mt19937_64& rng) {
                         Vector base = uniform(6, 1, rng);
                         Matrix w = uniform(6, 1, rng);
                         return GradInstance{[base, w](Tape&, std::span<const Tensor> in) {
                                                 const std::vector<Index> pos{4, 1, 1, 0};
                                                 return weighted_sum(scatter_add(base, pos, in[0], 1.5), w);
                                             },
                                             {uniform(4, 1, rng)}};
                     }});
    cases.push_back({"task_loss", [](std::mt19937_64& rng) {
                         return GradInstance{[](Tape&, std::span<const Tensor> in) {
                                                 const std::vector<int> labels{0, 2, 1, 2, 0};
                                                 const std::vector<Index> mask{0, 1, 3, 4};
                                                 return task_loss(in[0], labels, mask);
                                             },
                                             {uniform(5, 3, rng, -3.0, 3.0)}};
                     }});
    cases.push_back({"gcn_forward", [](std::mt19937_64& rng) {
                         return retry(rng, [](std::mt19937_64& r) -> std::optional<GradInstance> {
                             auto g = std::make_shared<Graph>(random_graph(7, 3, 3, r));
                             auto a = std::make_shared<const CsrMatrix>(normalize_adjacency(*g));
                             Matrix values = Eigen::Map<const Matrix>(a->valuePtr(), a->nonZeros(), 1);
                             std::vector<Matrix> layers{uniform(3, 4, r), uniform(4, 4, r)};
                             if (gcn_margin(dense(*a), g->features, layers) <= kMargin) return std::nullopt;
                             return GradInstance{[g, a](Tape&, std::span<const Tensor> in) {
                                                     GcnVars vars{{in[2], in[3]}, in[4]};
                                                     GcnOutput out = gcn_forward(SparseAdjacency{a, in[0]}, in[1], vars);
                                                     return task_loss(out.logits, g->labels, g->mask(Split::kTrain));
                                                 },
                                                 {values, g->features, layers[0], layers[1], uniform(4, 3, r)}};
                         });
                     }});
    cases.push_back({"build_candidates", [](std::mt19937_64& rng) {
                         return retry(rng, [](std::mt19937_64& r) -> std::optional<GradInstance> {
                             Matrix e = uniform(6, 3, r);
                             if (topk_margin(e * e.transpose(), 2) <= kMargin) return std::nullopt;
                             Matrix w = uniform(12, 1, r);
                             return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                     return weighted_sum(build_candidates(in[0], 2).sparse.values, w);
                                                 },
                                                 {e}};
                         });
                     }});
    cases.push_back({"build_candidates_cosine", [](std::mt19937_64& rng) {
                         return retry(rng, [](std::mt19937_64& r) -> std::optional<GradInstance> {
                             Matrix e = away_from_zero(6, 3, r);
                             const Matrix u = e.rowwise().normalized();
                             if (topk_margin(u * u.transpose(), 2) <= kMargin) return std::nullopt;
                             Matrix w = uniform(12, 1, r);
                             return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                     return weighted_sum(
                                                         build_candidates(in[0], 2, Similarity::kCosine).sparse.values, w);
                                                 },
                                                 {e}};
                         });
                     }});
    cases.push_back({"fuse_with_original", [](std::mt19937_64& rng) {
                         auto g = std::make_shared<Graph>(random_graph(6, 2, 2, rng));
                         auto st = random_structure(6, false, rng);
                         Matrix x = uniform(6, 2, rng);
                         Matrix w = uniform(6, 2, rng);
                         // The fused values are probed through a product with fixed features.
                         return GradInstance{[g, st, x, w](Tape& tape, std::span<const Tensor> in) {
                                                 SparseAdjacency fused = fuse_with_original(*g, SparseAdjacency{st, in[0]}, 0.8);
                                                 return weighted_sum(spmm(fused, tape.constant(x)), w);
                                             },
                                             {uniform(st->nonZeros(), 1, rng, 0.1, 2.0)}};
                     }});
    cases.push_back({"feature_smoothness", [](std::mt19937_64& rng) {
                         auto st = random_structure(6, false, rng);
                         Matrix x = uniform(6, 3, rng);
                         return GradInstance{[st, x](Tape&, std::span<const Tensor> in) {
                                                 return feature_smoothness(SparseAdjacency{st, in[0]}, x);
                                             },
                                             {uniform(st->nonZeros(), 1, rng, 0.1, 2.0)}};
                     }});
    cases.push_back({"bilinear_scorer", [](std::mt19937_64& rng) {
                         Matrix w = uniform(5, 1, rng);
                         return GradInstance{[w](Tape&, std::span<const Tensor> in) {
                                                 const std::vector<Index> rows{0, 0, 1, 3, 4};
                                                 const std::vector<Index> cols{1, 2, 4, 2, 0};
                                                 ScorerVars sv{ScorerKind::kBilinear, in[1], Tensor()};
                                                 return weighted_sum(diversity_scores(in[0], rows, cols, sv), w);
                                             },
                                             {uniform(5, 3, rng), uniform(3, 3, rng)}};
                     }});
    cases.push_back({"mlp_scorer", [](std::mt19937_64& rng) {
                         return retry(rng, [](std::mt19937_64& r) -> std::optional<GradInstance> {
                             const std::vector<Index> rows{0, 0, 1, 3, 4};
                             const std::vector<Index> cols{1, 2, 4, 2, 0};
                             Matrix e = uniform(5, 3, r);
                             Matrix hidden = uniform(6, 3, r);
                             Matrix cat(5, 6);
                             for (Index k = 0; k < 5; ++k) cat.row(k) << e.row(rows[k]), e.row(cols[k]);
                             if ((cat * hidden).cwiseAbs().minCoeff() <= kMargin) return std::nullopt;
                             Matrix w = uniform(5, 1, r);
                             return GradInstance{[rows, cols, w](Tape&, std::span<const Tensor> in) {
                                                     ScorerVars sv{ScorerKind::kMlp, in[1], in[2]};
                                                     return weighted_sum(diversity_scores(in[0], rows, cols, sv), w);
                                                 },
                                                 {e, hidden, uniform(3, 1, r)}};
                         });
                     }});
    cases.push_back({"prune", [](std::mt19937_64& rng) {
                         return retry(rng, [](std::mt19937_64& r) -> std::optional<GradInstance> {
                             constexpr Index k = 4;
                             constexpr double level = 0.25;
                             Matrix e = uniform(6, 3, r);
                             Matrix w1 = uniform(3, 3, r);
                             const Matrix scores = e * e.transpose();
                             if (topk_margin(scores, k) <= kMargin) return std::nullopt;
                             const Matrix bil = e * w1 * e.transpose();
                             std::vector<double> x;
                             const auto kept = top_k_indices(scores, k);
                             for (Index i = 0; i < e.rows(); ++i) {
                                 for (Index j : kept[static_cast<std::size_t>(i)]) x.push_back(scores(i, j) * bil(i, j));
                             }
                             if (threshold_margin(x, level) <= kMargin) return std::nullopt;
                             Matrix weights = uniform(survivor_count(static_cast<Index>(x.size()), level), 1, r);
                             return GradInstance{[weights](Tape&, std::span<const Tensor> in) {
                                                     CandidateGraph cand = build_candidates(in[0], k);
                                                     ScorerVars sv{ScorerKind::kBilinear, in[1], Tensor()};
                                                     Tensor sw = diversity_scores(in[0], cand, sv);
                                                     const Matrix xv = cand.sparse.values.value().cwiseProduct(sw.value());
                                                     const Threshold thr = select_threshold(
                                                         std::span<const double>(xv.data(), static_cast<std::size_t>(xv.size())),
                                                         level);
                                                     return weighted_sum(prune(cand, sw, thr).values, weights);
                                                 },
                                                 {e, w1}};
                         });
                     }});
    cases.push_back({"mi_loss", [](std::mt19937_64& rng) {
                         return GradInstance{[](Tape&, std::span<const Tensor> in) {
                                                 const std::vector<Index> batch{1, 4, 6, 7};
                                                 return mi_loss(in[0], in[1], batch);
                                             },
                                             {away_from_zero(8, 3, rng), away_from_zero(8, 3, rng)}};
                     }});
    cases.push_back({"ingsl_objective", [](std::mt19937_64& rng) {
                         return retry(rng, [](std::mt19937_64& r) -> std::optional<GradInstance> {
                             auto p = std::make_shared<Pipeline>();
                             p->g = random_graph(8, 3, 3, r);
                             p->batch = {0, 3, 5, 6};
                             std::vector<Matrix> inputs{uniform(3, 4, r), uniform(4, 4, r), uniform(3, 4, r),
                                                        uniform(4, 4, r), uniform(4, 3, r),  uniform(4, 4, r)};
                             // Inspect the base point: every relu, the top-K cut and the prune cut need clearance.
                             Tape tape;
                             std::vector<Tensor> leaves;
                             for (const auto& m : inputs) leaves.push_back(tape.leaf(m, false));
                             const PipelineValues v = pipeline_loss(tape, leaves, *p);
                             const Matrix& e = v.cand.embeddings.value();
                             const std::vector<Matrix> enc{inputs[0], inputs[1]};
                             const std::vector<Matrix> task{inputs[2], inputs[3]};
                             if (gcn_margin(dense(normalize_adjacency(p->g)), p->g.features, enc) <= kMargin) return std::nullopt;
                             if (topk_margin(e * e.transpose(), p->k) <= kMargin) return std::nullopt;
                             const Matrix& xv = v.x_adjusted.value();
                             if (threshold_margin(std::vector<double>(xv.data(), xv.data() + xv.size()), p->r) <= kMargin) {
                                 return std::nullopt;
                             }
                             for (const SparseAdjacency* adj : {&v.pruned_adj, &v.full_adj}) {
                                 const Matrix a = dense(adj->materialize());
                                 if (gcn_margin(a, p->g.features, task) <= kMargin) return std::nullopt;
                                 Matrix z = p->g.features;
                                 for (const auto& w : task) z = (a * z * w).cwiseMax(0.0);
                                 if ((z * inputs[4]).rowwise().norm().minCoeff() <= kMargin) return std::nullopt;
                             }
                             return GradInstance{[p](Tape& t, std::span<const Tensor> in) {
                                                     return pipeline_loss(t, in, *p).loss;
                                                 },
                                                 std::move(inputs)};
                         });
                     }});
    return cases;
}

std::vector<GradRow> run_gradcheck(const std::vector<GradCase>& cases, int trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("gradcheck: trials must be at least 1");
    std::vector<GradRow> rows;
    rows.reserve(cases.size());
    for (std::size_t c = 0; c < cases.size(); ++c) {
        GradRow row;
        row.name = cases[c].name;
        row.trials = trials;
        for (int t = 0; t < trials; ++t) {
            std::mt19937_64 rng(derive_seed(seed, c, static_cast<std::uint64_t>(t)));
            GradInstance inst = cases[c].make(rng);
            row.max_error = std::max(row.max_error, gradient_check(inst.f, inst.inputs, 1e-5));
        }
        row.passed = row.max_error < kGradTolerance;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ingsl
