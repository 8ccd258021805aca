#include "cgt/model_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cgt {

using nlohmann::json;

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::hybrid: return "hybrid";
        case Variant::pure_transformer: return "pure_transformer";
        case Variant::pure_gnn: return "pure_gnn";
    }
    return "?";
}

Variant variant_from_name(const std::string& s) {
    if (s == "hybrid") return Variant::hybrid;
    if (s == "pure_transformer") return Variant::pure_transformer;
    if (s == "pure_gnn") return Variant::pure_gnn;
    throw DataError("unknown variant: " + s);
}

void ModelConfig::validate() const {
    if (vocab_size < 2) throw DataError("config: vocab_size must be >= 2");
    if (hidden_dim == 0 || heads == 0) throw DataError("config: hidden_dim and heads must be >= 1");
    if (hidden_dim % heads != 0) throw DataError("config: hidden_dim must be divisible by heads");
    if (hidden_dim % effective_gnn_heads() != 0)
        throw DataError("config: hidden_dim must be divisible by gnn_heads");
    if (hidden_dim % 2 != 0) throw DataError("config: hidden_dim must be even for sinusoidal encoding");
    if (max_seq_len < 1) throw DataError("config: max_seq_len must be >= 1");
    if (variant == Variant::hybrid && gnn_layers + transformer_layers == 0)
        throw DataError("config: hybrid variant needs at least one layer");
    if (variant == Variant::pure_gnn && gnn_layers == 0)
        throw DataError("config: pure_gnn variant needs gnn_layers >= 1");
    if (variant == Variant::pure_transformer && transformer_layers == 0)
        throw DataError("config: pure_transformer variant needs transformer_layers >= 1");
    if (tokenizer_mode != "byte" && tokenizer_mode != "bpe")
        throw DataError("config: tokenizer_mode must be \"byte\" or \"bpe\"");
    graph.validate();
}

std::string ModelConfig::to_json_string() const {
    json g;
    g["skip_decay"] = graph.skip_decay;
    g["skip_threshold"] = graph.skip_threshold;
    g["skip_window"] = graph.skip_window;
    g["sem_threshold"] = graph.sem_threshold;
    g["sem_window"] = json::array({graph.sem_window_lo, graph.sem_window_hi});
    g["strict_causal"] = graph.strict_causal;
    g["sem_on_embeddings_only"] = graph.sem_on_embeddings_only;
    g["use_edge_weight_bias"] = graph.use_edge_weight_bias;

    json j;
    j["vocab_size"] = vocab_size;
    j["hidden_dim"] = hidden_dim;
    j["gnn_layers"] = gnn_layers;
    j["transformer_layers"] = transformer_layers;
    j["heads"] = heads;
    j["gnn_heads"] = gnn_heads;
    j["max_seq_len"] = max_seq_len;
    j["ffn_dim"] = ffn_dim;
    j["variant"] = variant_name(variant);
    j["tie_lm_head"] = tie_lm_head;
    j["causal_mask"] = causal_mask;
    j["gat_version"] = gat_version == GatVersion::v1 ? "v1" : "v2";
    j["leaky_relu_slope"] = leaky_relu_slope;
    j["layer_norm_eps"] = layer_norm_eps;
    j["graph"] = g;
    j["tokenizer_mode"] = tokenizer_mode;
    j["bpe_vocab_path"] = bpe_vocab_path;
    j["bpe_merges_path"] = bpe_merges_path;
    return j.dump();
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

} // namespace

ModelConfig ModelConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config parse error: ") + e.what());
    }
    ModelConfig c;
    try {
        c.vocab_size = get_or<std::size_t>(j, "vocab_size", c.vocab_size);
        c.hidden_dim = get_or<std::size_t>(j, "hidden_dim", c.hidden_dim);
        c.gnn_layers = get_or<std::size_t>(j, "gnn_layers", c.gnn_layers);
        c.transformer_layers = get_or<std::size_t>(j, "transformer_layers", c.transformer_layers);
        c.heads = get_or<std::size_t>(j, "heads", c.heads);
        c.gnn_heads = get_or<std::size_t>(j, "gnn_heads", c.gnn_heads);
        c.max_seq_len = get_or<std::size_t>(j, "max_seq_len", c.max_seq_len);
        c.ffn_dim = get_or<std::size_t>(j, "ffn_dim", c.ffn_dim);
        c.variant = variant_from_name(get_or<std::string>(j, "variant", "hybrid"));
        c.tie_lm_head = get_or<bool>(j, "tie_lm_head", c.tie_lm_head);
        c.causal_mask = get_or<bool>(j, "causal_mask", c.causal_mask);
        const std::string gv = get_or<std::string>(j, "gat_version", "v1");
        if (gv != "v1" && gv != "v2") throw DataError("config: gat_version must be v1 or v2");
        c.gat_version = gv == "v1" ? GatVersion::v1 : GatVersion::v2;
        c.leaky_relu_slope = get_or<double>(j, "leaky_relu_slope", c.leaky_relu_slope);
        c.layer_norm_eps = get_or<double>(j, "layer_norm_eps", c.layer_norm_eps);
        if (j.contains("graph")) {
            const json& g = j.at("graph");
            c.graph.skip_decay = get_or<double>(g, "skip_decay", c.graph.skip_decay);
            c.graph.skip_threshold = get_or<double>(g, "skip_threshold", c.graph.skip_threshold);
            c.graph.skip_window = get_or<std::vector<int>>(g, "skip_window", c.graph.skip_window);
            c.graph.sem_threshold = get_or<double>(g, "sem_threshold", c.graph.sem_threshold);
            if (g.contains("sem_window")) {
                const auto w = g.at("sem_window").get<std::vector<int>>();
                if (w.size() != 2) throw DataError("config: sem_window must be [lo, hi]");
                c.graph.sem_window_lo = w[0];
                c.graph.sem_window_hi = w[1];
            }
            c.graph.strict_causal = get_or<bool>(g, "strict_causal", c.graph.strict_causal);
            c.graph.sem_on_embeddings_only =
                get_or<bool>(g, "sem_on_embeddings_only", c.graph.sem_on_embeddings_only);
            c.graph.use_edge_weight_bias =
                get_or<bool>(g, "use_edge_weight_bias", c.graph.use_edge_weight_bias);
        }
        c.tokenizer_mode = get_or<std::string>(j, "tokenizer_mode", c.tokenizer_mode);
        c.bpe_vocab_path = get_or<std::string>(j, "bpe_vocab_path", c.bpe_vocab_path);
        c.bpe_merges_path = get_or<std::string>(j, "bpe_merges_path", c.bpe_merges_path);
    } catch (const json::exception& e) {
        throw DataError(std::string("config schema violation: ") + e.what());
    }
    c.validate();
    return c;
}

ModelConfig ModelConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

ParamCount count_params(const ModelConfig& cfg) {
    const std::size_t d = cfg.hidden_dim;
    const std::size_t dff = cfg.effective_ffn_dim();
    ParamCount pc;
    pc.embeddings = cfg.vocab_size * d;
    // W (d x d) plus per-head attention vectors a (gnn_heads x 2*gnn_head_dim = 2d)
    pc.per_gnn_layer = d * d + 2 * d;
    // Wq,Wk,Wv,Wo + two layer-norm gain/bias pairs + FFN weights and biases
    pc.per_transformer_layer = 4 * d * d + 4 * d + (dff * d + dff) + (d * dff + d);
    pc.lm_head = cfg.tie_lm_head ? 0 : cfg.vocab_size * d;
    pc.gnn_total = cfg.uses_gnn() ? cfg.gnn_layers * pc.per_gnn_layer : 0;
    pc.transformer_total = cfg.uses_transformer() ? cfg.transformer_layers * pc.per_transformer_layer : 0;
    pc.total = pc.embeddings + pc.gnn_total + pc.transformer_total + pc.lm_head;
    return pc;
}

} // namespace cgt
