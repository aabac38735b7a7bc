#include "ingsl/graph.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace ingsl {

namespace fs = std::filesystem;

const char* split_name(Split s) {
    switch (s) {
        case Split::kTrain:
            return "train";
        case Split::kVal:
            return "val";
        case Split::kTest:
            return "test";
    }
    return "?";
}

std::vector<Index> Graph::mask(Split s) const {
    std::vector<Index> out;
    for (Index i = 0; i < static_cast<Index>(splits.size()); ++i) {
        if (splits[static_cast<std::size_t>(i)] == s) out.push_back(i);
    }
    return out;
}

void validate(const Graph& g) {
    if (g.n <= 0) throw ConfigError("graph has no nodes");
    for (const auto& e : g.edges) {
        if (e.u < 0 || e.v >= g.n || e.u >= e.v) {
            throw ConfigError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ") invalid for n = " +
                              std::to_string(g.n));
        }
    }
    if (!std::is_sorted(g.edges.begin(), g.edges.end()) ||
        std::adjacent_find(g.edges.begin(), g.edges.end()) != g.edges.end()) {
        throw ConfigError("edge list must be sorted and duplicate-free");
    }
    if (g.features.rows() != g.n) throw ConfigError("feature rows do not match node count");
    if (g.features.hasNaN()) throw ConfigError("features contain NaN");
    if (static_cast<Index>(g.labels.size()) != g.n) throw ConfigError("label count does not match node count");
    for (int y : g.labels) {
        if (y < 0 || y >= g.classes) throw ConfigError("label " + std::to_string(y) + " outside [0, classes)");
    }
    if (static_cast<Index>(g.splits.size()) != g.n) throw ConfigError("mask count does not match node count");
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
        if (std::find(g.splits.begin(), g.splits.end(), s) == g.splits.end()) {
            throw ConfigError(std::string(split_name(s)) + " mask is empty");
        }
    }
}

std::vector<Edge> canonical_edges(std::vector<Edge> edges) {
    std::vector<Edge> out;
    out.reserve(edges.size());
    for (auto e : edges) {
        if (e.u == e.v) continue;
        if (e.u > e.v) std::swap(e.u, e.v);
        out.push_back(e);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string format_real(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Bundle I/O

namespace {

std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ParseError(p.string() + ": cannot open file");
    return in;
}

[[noreturn]] void fail(const fs::path& p, std::size_t line, const std::string& what) {
    throw ParseError(p.string() + ":" + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

/// Reads non-empty lines; returns (line number, trimmed content).
std::vector<std::pair<std::size_t, std::string>> read_lines(const fs::path& p) {
    auto in = open_input(p);
    std::vector<std::pair<std::size_t, std::string>> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto t = trim(line);
        if (!t.empty()) out.emplace_back(no, std::move(t));
    }
    return out;
}

}  // namespace

Graph load_bundle(const fs::path& dir) {
    Graph g;
    const fs::path meta_path = dir / "meta.json";
    Index d = 0;
    {
        auto in = open_input(meta_path);
        nlohmann::json meta;
        try {
            in >> meta;
            g.n = meta.at("n").get<Index>();
            d = meta.at("d").get<Index>();
            g.classes = meta.at("classes").get<int>();
        } catch (const nlohmann::json::exception& e) {
            fail(meta_path, 1, e.what());
        }
        if (g.n <= 0 || d <= 0 || g.classes <= 0) fail(meta_path, 1, "n, d and classes must be positive");
    }

    const fs::path edge_path = dir / "edges.tsv";
    std::vector<Edge> raw;
    for (const auto& [no, line] : read_lines(edge_path)) {
        std::istringstream ss(line);
        std::string a, b, extra;
        ss >> a >> b;
        if (a.empty() || b.empty() || (ss >> extra)) fail(edge_path, no, "expected two node ids");
        Index u = 0, v = 0;
        if (!parse_number(a, u) || !parse_number(b, v)) fail(edge_path, no, "node id is not an integer");
        if (u < 0 || v < 0 || u >= g.n || v >= g.n) {
            fail(edge_path, no, "node id out of range for n = " + std::to_string(g.n));
        }
        if (u == v) fail(edge_path, no, "self-loop");
        raw.push_back(Edge{u, v});
    }
    g.edges = canonical_edges(std::move(raw));

    const fs::path feat_path = dir / "features.csv";
    const auto feat_lines = read_lines(feat_path);
    if (static_cast<Index>(feat_lines.size()) != g.n) {
        fail(feat_path, feat_lines.size(), "expected " + std::to_string(g.n) + " rows, found " +
                                               std::to_string(feat_lines.size()));
    }
    g.features.resize(g.n, d);
    for (Index i = 0; i < g.n; ++i) {
        const auto& [no, line] = feat_lines[static_cast<std::size_t>(i)];
        std::size_t pos = 0;
        Index col = 0;
        while (pos <= line.size()) {
            const auto next = line.find(',', pos);
            const auto field = trim(line.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            if (col >= d) fail(feat_path, no, "more than " + std::to_string(d) + " columns");
            double x = 0.0;
            if (!parse_number(std::string_view(field), x)) fail(feat_path, no, "bad real '" + field + "'");
            if (std::isnan(x)) fail(feat_path, no, "NaN feature");
            g.features(i, col++) = x;
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (col != d) fail(feat_path, no, "expected " + std::to_string(d) + " columns, found " + std::to_string(col));
    }

    const fs::path label_path = dir / "labels.csv";
    const auto label_lines = read_lines(label_path);
    if (static_cast<Index>(label_lines.size()) != g.n) {
        fail(label_path, label_lines.size(), "expected " + std::to_string(g.n) + " rows");
    }
    for (const auto& [no, line] : label_lines) {
        int y = 0;
        if (!parse_number(std::string_view(line), y)) fail(label_path, no, "label is not an integer");
        if (y < 0 || y >= g.classes) fail(label_path, no, "label outside [0, classes)");
        g.labels.push_back(y);
    }

    const fs::path mask_path = dir / "masks.csv";
    const auto mask_lines = read_lines(mask_path);
    if (static_cast<Index>(mask_lines.size()) != g.n) {
        fail(mask_path, mask_lines.size(), "expected " + std::to_string(g.n) + " rows");
    }
    for (const auto& [no, line] : mask_lines) {
        if (line == "train") {
            g.splits.push_back(Split::kTrain);
        } else if (line == "val") {
            g.splits.push_back(Split::kVal);
        } else if (line == "test") {
            g.splits.push_back(Split::kTest);
        } else {
            fail(mask_path, no, "expected exactly one of train/val/test, got '" + line + "'");
        }
    }
    try {
        validate(g);
    } catch (const ConfigError& e) {
        throw ParseError(dir.string() + ": " + e.what());
    }
    return g;
}

void save_bundle(const Graph& g, const fs::path& dir) {
    validate(g);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "meta.json");
        out << nlohmann::json{{"n", g.n}, {"d", g.feature_dim()}, {"classes", g.classes}}.dump() << '\n';
    }
    {
        std::ofstream out(dir / "edges.tsv");
        for (const auto& e : g.edges) out << e.u << '\t' << e.v << '\n';
    }
    {
        std::ofstream out(dir / "features.csv");
        for (Index i = 0; i < g.n; ++i) {
            for (Index j = 0; j < g.feature_dim(); ++j) {
                if (j) out << ',';
                out << format_real(g.features(i, j));
            }
            out << '\n';
        }
    }
    {
        std::ofstream out(dir / "labels.csv");
        for (int y : g.labels) out << y << '\n';
    }
    {
        std::ofstream out(dir / "masks.csv");
        for (Split s : g.splits) out << split_name(s) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Adjacency

CsrMatrix adjacency_matrix(const Graph& g) {
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(g.edges.size() * 2);
    for (const auto& e : g.edges) {
        t.emplace_back(static_cast<int>(e.u), static_cast<int>(e.v), 1.0);
        t.emplace_back(static_cast<int>(e.v), static_cast<int>(e.u), 1.0);
    }
    return csr_from_triplets(g.n, g.n, t);
}

CsrMatrix normalize_adjacency(const Graph& g) { return normalize_adjacency(adjacency_matrix(g)); }

CsrMatrix normalize_adjacency(const CsrMatrix& weighted) {
    if (weighted.rows() != weighted.cols()) throw ShapeError("normalize_adjacency: matrix must be square");
    const Index n = weighted.rows();
    std::vector<Eigen::Triplet<double, int>> t;
    t.reserve(static_cast<std::size_t>(weighted.nonZeros() + n));
    for (Index r = 0; r < n; ++r) {
        for (CsrMatrix::InnerIterator it(weighted, r); it; ++it) {
            if (it.value() < 0.0) {
                throw DomainError("normalize_adjacency: negative weight at (" + std::to_string(r) + ", " +
                                  std::to_string(it.col()) + ")");
            }
            t.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
        }
        t.emplace_back(static_cast<int>(r), static_cast<int>(r), 1.0);
    }
    CsrMatrix m = csr_from_triplets(n, n, t);
    Vector degree = Vector::Zero(n);
    for (Index r = 0; r < n; ++r) {
        for (CsrMatrix::InnerIterator it(m, r); it; ++it) degree(r) += it.value();
    }
    const Vector inv_sqrt = degree.cwiseSqrt().cwiseInverse();
    for (Index r = 0; r < n; ++r) {
        for (CsrMatrix::InnerIterator it(m, r); it; ++it) it.valueRef() *= inv_sqrt(r) * inv_sqrt(it.col());
    }
    return m;
}

double edge_homophily(const Graph& g) {
    if (g.edges.empty()) throw DomainError("edge_homophily: undefined on an empty edge set");
    std::size_t same = 0;
    for (const auto& e : g.edges) {
        if (g.labels[static_cast<std::size_t>(e.u)] == g.labels[static_cast<std::size_t>(e.v)]) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(g.edges.size());
}

// ---------------------------------------------------------------------------
// Generators and noise

namespace {

void require_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

std::uint64_t pair_key(Index u, Index v) {
    return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
}

}  // namespace

Graph generate_sbm(const SbmSpec& spec) {
    if (spec.block_sizes.empty()) throw ConfigError("generate_sbm: at least one block required");
    for (Index s : spec.block_sizes) {
        if (s <= 0) throw ConfigError("generate_sbm: block sizes must be positive");
    }
    require_probability(spec.p_in, "p_in");
    require_probability(spec.p_out, "p_out");
    if (spec.feature_noise < 0.0) throw ConfigError("generate_sbm: feature_noise must be non-negative");
    const Index blocks = static_cast<Index>(spec.block_sizes.size());
    const Index dim = spec.feature_dim == 0 ? blocks : spec.feature_dim;
    if (dim < blocks) throw ConfigError("generate_sbm: feature_dim must be at least the number of blocks");

    Graph g;
    g.classes = static_cast<int>(blocks);
    for (Index b = 0; b < blocks; ++b) {
        for (Index i = 0; i < spec.block_sizes[static_cast<std::size_t>(b)]; ++i) g.labels.push_back(static_cast<int>(b));
    }
    g.n = static_cast<Index>(g.labels.size());

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index u = 0; u < g.n; ++u) {
        for (Index v = u + 1; v < g.n; ++v) {
            const double p = g.labels[static_cast<std::size_t>(u)] == g.labels[static_cast<std::size_t>(v)] ? spec.p_in
                                                                                                           : spec.p_out;
            if (unif(rng) < p) g.edges.push_back(Edge{u, v});
        }
    }

    std::normal_distribution<double> noise(0.0, 1.0);
    g.features = Matrix::Zero(g.n, dim);
    for (Index i = 0; i < g.n; ++i) {
        g.features(i, g.labels[static_cast<std::size_t>(i)]) = 1.0;
        for (Index j = 0; j < dim; ++j) g.features(i, j) += spec.feature_noise * noise(rng);
    }

    g.splits.assign(static_cast<std::size_t>(g.n), Split::kTest);
    Index start = 0;
    for (Index b = 0; b < blocks; ++b) {
        const Index size = spec.block_sizes[static_cast<std::size_t>(b)];
        std::vector<Index> members(static_cast<std::size_t>(size));
        std::iota(members.begin(), members.end(), start);
        std::shuffle(members.begin(), members.end(), rng);
        const Index n_train = std::max<Index>(1, size / 10);
        const Index n_val = std::max<Index>(1, size / 10);
        for (Index k = 0; k < size; ++k) {
            const auto node = static_cast<std::size_t>(members[static_cast<std::size_t>(k)]);
            if (k < n_train) {
                g.splits[node] = Split::kTrain;
            } else if (k < n_train + n_val) {
                g.splits[node] = Split::kVal;
            }
        }
        start += size;
    }
    return g;
}

Graph inject_structural_noise(const Graph& g, double add_ratio, double del_ratio, std::uint64_t seed) {
    if (add_ratio < 0.0) throw ConfigError("inject_structural_noise: add_ratio must be non-negative");
    if (!(del_ratio >= 0.0 && del_ratio <= 1.0)) throw ConfigError("inject_structural_noise: del_ratio must lie in [0, 1]");
    const auto m = static_cast<double>(g.edges.size());
    const auto n_del = static_cast<std::size_t>(std::floor(del_ratio * m));
    const auto n_add = static_cast<std::size_t>(std::floor(add_ratio * m));
    const std::uint64_t total_pairs = static_cast<std::uint64_t>(g.n) * static_cast<std::uint64_t>(g.n - 1) / 2;
    const std::uint64_t free_pairs = total_pairs - g.edges.size();
    if (n_add > free_pairs) {
        throw ConfigError("inject_structural_noise: cannot add " + std::to_string(n_add) + " edges; only " +
                          std::to_string(free_pairs) + " non-edges exist");
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(g.edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> removed(g.edges.size(), false);
    for (std::size_t k = 0; k < n_del; ++k) removed[order[k]] = true;

    Graph out = g;
    out.edges.clear();
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        if (!removed[k]) out.edges.push_back(g.edges[k]);
    }

    std::unordered_set<std::uint64_t> original;
    original.reserve(g.edges.size() * 2);
    for (const auto& e : g.edges) original.insert(pair_key(e.u, e.v));

    std::vector<Edge> added;
    if (n_add > 0 && n_add * 2 > free_pairs) {
        // Dense request: enumerate every non-edge and take a shuffled prefix.
        std::vector<Edge> pool;
        for (Index u = 0; u < g.n; ++u) {
            for (Index v = u + 1; v < g.n; ++v) {
                if (!original.count(pair_key(u, v))) pool.push_back(Edge{u, v});
            }
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        added.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_add));
    } else {
        std::uniform_int_distribution<Index> pick(0, g.n - 1);
        std::unordered_set<std::uint64_t> taken;
        while (added.size() < n_add) {
            Index u = pick(rng);
            Index v = pick(rng);
            if (u == v) continue;
            if (u > v) std::swap(u, v);
            const auto key = pair_key(u, v);
            if (original.count(key) || !taken.insert(key).second) continue;
            added.push_back(Edge{u, v});
        }
    }
    out.edges.insert(out.edges.end(), added.begin(), added.end());
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

Graph mask_features(const Graph& g, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("mask_features: ratio must lie in [0, 1]");
    Graph out = g;
    const Index total = g.features.size();
    const auto count = static_cast<Index>(std::floor(ratio * static_cast<double>(total)));
    std::vector<Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (Index k = 0; k < count; ++k) out.features.data()[order[static_cast<std::size_t>(k)]] = 0.0;
    return out;
}

}  // namespace ingsl
