#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cgt/graph.hpp"

namespace cgt {

enum class Variant { hybrid, pure_transformer, pure_gnn };
enum class GatVersion { v1, v2 };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct ModelConfig {
    std::size_t vocab_size = 258;
    std::size_t hidden_dim = 32;
    std::size_t gnn_layers = 1;
    std::size_t transformer_layers = 1;
    std::size_t heads = 4;
    std::size_t gnn_heads = 0;  // 0 = same as heads; 1 = single-head GAT
    std::size_t max_seq_len = 64;
    std::size_t ffn_dim = 0;    // 0 = 4 * hidden_dim
    Variant variant = Variant::hybrid;
    bool tie_lm_head = true;
    bool causal_mask = true;
    GatVersion gat_version = GatVersion::v1;
    double leaky_relu_slope = 0.2;
    double layer_norm_eps = 1e-5;
    GraphConfig graph;
    std::string tokenizer_mode = "byte";  // "byte" or "bpe"
    std::string bpe_vocab_path;
    std::string bpe_merges_path;

    std::size_t effective_ffn_dim() const { return ffn_dim == 0 ? 4 * hidden_dim : ffn_dim; }
    std::size_t effective_gnn_heads() const { return gnn_heads == 0 ? heads : gnn_heads; }
    std::size_t head_dim() const { return hidden_dim / heads; }
    std::size_t gnn_head_dim() const { return hidden_dim / effective_gnn_heads(); }
    bool uses_gnn() const { return variant != Variant::pure_transformer && gnn_layers > 0; }
    bool uses_transformer() const { return variant != Variant::pure_gnn && transformer_layers > 0; }

    void validate() const;

    std::string to_json_string() const;
    static ModelConfig from_json_string(const std::string& text);
    static ModelConfig from_json_file(const std::string& path);
};

// Closed-form parameter count per block; the total equals the number of
// scalars a model with this config allocates, exactly.
struct ParamCount {
    std::size_t embeddings = 0;
    std::size_t per_gnn_layer = 0;
    std::size_t per_transformer_layer = 0;
    std::size_t lm_head = 0;
    std::size_t gnn_total = 0;
    std::size_t transformer_total = 0;
    std::size_t total = 0;
};

ParamCount count_params(const ModelConfig& cfg);

} // namespace cgt
