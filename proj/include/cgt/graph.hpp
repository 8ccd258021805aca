#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgt/errors.hpp"
#include "cgt/tensor.hpp"

namespace cgt {

enum class EdgeKind { sequential, skip, semantic };

const char* edge_kind_name(EdgeKind k);

struct GraphEdge {
    int src = 0;
    int dst = 0;
    double weight = 0.0;
    EdgeKind kind = EdgeKind::sequential;
};

struct GraphConfig {
    double skip_decay = 0.5;
    double skip_threshold = 0.3;
    std::vector<int> skip_window = {2, 3};  // |i-j| offsets considered for skip edges
    double sem_threshold = 0.7;
    int sem_window_lo = 3;                  // |i-j| offsets considered for semantic edges, inclusive
    int sem_window_hi = 10;
    // Keep only edges whose source is at or after the destination, so GNN
    // messages never flow from future tokens into past positions.
    bool strict_causal = false;
    // Similarity on the raw embedding rows instead of embeddings+positions.
    bool sem_on_embeddings_only = false;
    // Add log(edge weight) to GNN attention logits instead of ignoring weights.
    bool use_edge_weight_bias = false;

    void validate() const;
};

// Token graph: directed edge list sorted by (src, dst), raw symmetric
// adjacency and its symmetric normalization, all n x n row-major. An edge
// (src, dst) means dst is in the attention neighborhood of src. Under
// strict_causal the edge list is filtered to src >= dst while the adjacency
// matrices stay symmetric.
struct TokenGraph {
    std::size_t n = 0;
    std::vector<GraphEdge> edges;
    std::vector<double> adjacency;
    std::vector<double> normalized_adjacency;

    double adj(std::size_t i, std::size_t j) const { return adjacency[i * n + j]; }
    double norm_adj(std::size_t i, std::size_t j) const { return normalized_adjacency[i * n + j]; }

    // n x n byte mask of GNN neighborhoods: graph edges plus a self-loop on
    // every node, mask[src*n + dst] = 1.
    std::vector<std::uint8_t> neighborhood_mask() const;

    // (src, dst) pairs of the directed edge list (no self-loops).
    std::vector<std::pair<int, int>> edge_pairs() const;
};

// D^{-1/2} A D^{-1/2} with zero-degree rows passed through as zeros.
// The input must be square, symmetric, non-negative and finite.
std::vector<double> normalize_adjacency(const std::vector<double>& a, std::size_t n);

TokenGraph build_graph(const Tensor<float>& h0, const GraphConfig& cfg);
TokenGraph build_graph(const Tensor<double>& h0, const GraphConfig& cfg);

enum class GraphFormat { json, dot };

std::string export_graph(const TokenGraph& g, GraphFormat format);
// Parses the JSON form produced by export_graph (edge list and n only; the
// adjacency matrices are rebuilt from the edges).
TokenGraph parse_graph_json(const std::string& text);

} // namespace cgt
