#pragma once

#include "ingsl/sparse.hpp"
#include "ingsl/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ingsl {

/// Undirected edge stored once, u < v.
struct Edge {
    Index u = 0;
    Index v = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Split : std::uint8_t { kTrain, kVal, kTest };

const char* split_name(Split s);

/// Node-classification graph. Edges are sorted and unique; every node carries
/// exactly one split, which keeps the three masks disjoint.
struct Graph {
    Index n = 0;
    std::vector<Edge> edges;
    Matrix features;
    std::vector<int> labels;
    int classes = 0;
    std::vector<Split> splits;

    Index feature_dim() const { return features.cols(); }
    /// Node ids carrying the given split, ascending.
    std::vector<Index> mask(Split s) const;
};

/// Throws ConfigError describing the first violated invariant.
void validate(const Graph& g);

/// Sorts, orients (u < v) and deduplicates; drops self-loops.
std::vector<Edge> canonical_edges(std::vector<Edge> edges);

Graph load_bundle(const std::filesystem::path& dir);
void save_bundle(const Graph& g, const std::filesystem::path& dir);

/// Formats a double with 17 significant digits so it parses back bit-exactly.
std::string format_real(double x);

/// Binary adjacency A with both directions stored; no diagonal.
CsrMatrix adjacency_matrix(const Graph& g);

/// D^{-1/2}(A + I)D^{-1/2} with D_ii = 1 + sum_j A_ij.
CsrMatrix normalize_adjacency(const Graph& g);
/// Same for a weighted, possibly asymmetric matrix. Negative weights are a DomainError.
CsrMatrix normalize_adjacency(const CsrMatrix& weighted);

/// Fraction of edges whose endpoints share a label.
double edge_homophily(const Graph& g);

struct SbmSpec {
    std::vector<Index> block_sizes;
    double p_in = 0.1;
    double p_out = 0.01;
    Index feature_dim = 0;  ///< 0 means one column per block
    double feature_noise = 1.0;
    std::uint64_t seed = 0;
};

/// Stochastic block model with noisy one-hot block features and a 10/10/80
/// per-class split drawn from the seed.
Graph generate_sbm(const SbmSpec& spec);

/// Removes floor(del_ratio*m) existing edges, then adds floor(add_ratio*m) pairs
/// that were not edges of the input graph.
Graph inject_structural_noise(const Graph& g, double add_ratio, double del_ratio, std::uint64_t seed);

/// Zeroes floor(ratio*n*d) feature entries chosen uniformly without replacement.
Graph mask_features(const Graph& g, double ratio, std::uint64_t seed);

}  // namespace ingsl
