#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "cgt/autodiff.hpp"
#include "cgt/model_config.hpp"
#include "cgt/rng.hpp"

namespace cgt {

// Sinusoidal positional encoding for one position:
// entry 2i = sin(pos / 10000^(2i/d)), entry 2i+1 = cos of the same argument.
inline std::vector<double> positional_encoding(std::size_t position, std::size_t d) {
    if (d % 2 != 0) throw DataError("positional_encoding: dimension must be even");
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d / 2; ++i) {
        const double denom = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
        const double arg = static_cast<double>(position) / denom;
        out[2 * i] = std::sin(arg);
        out[2 * i + 1] = std::cos(arg);
    }
    return out;
}

template <typename T>
Tensor<T> positional_encoding_table(std::size_t max_len, std::size_t d) {
    Tensor<T> t = Tensor<T>::zeros({max_len, d});
    for (std::size_t p = 0; p < max_len; ++p) {
        const std::vector<double> row = positional_encoding(p, d);
        for (std::size_t j = 0; j < d; ++j) t.at(p, j) = static_cast<T>(row[j]);
    }
    return t;
}

// Everything a composite-loss step needs from one forward pass: logits, the
// stack outputs, the final GNN layer's attention (per head), every
// transformer attention matrix, and the token graph itself.
template <typename T>
struct ForwardTrace {
    int logits = -1;
    int h_gnn = -1;
    int h_trans = -1;
    std::vector<int> gnn_alpha;                  // final GNN layer, one ref per head
    std::shared_ptr<std::vector<std::uint8_t>> gnn_mask;
    std::vector<std::vector<int>> attn;          // [transformer layer][head]
    std::shared_ptr<std::vector<std::uint8_t>> attn_mask;
    TokenGraph graph;
    bool has_graph = false;
};

template <typename T>
class CgtModel {
public:
    CgtModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build_parameters();
        // Weights ~ N(0, 0.02); biases zero; layer-norm gains one. Gains and
        // biases consume no RNG draws, so variants sharing the same weight
        // list initialize identically from the same seed.
        Rng rng(seed);
        auto ends_with = [](const std::string& s, const char* suf) {
            const std::size_t m = std::char_traits<char>::length(suf);
            return s.size() >= m && s.compare(s.size() - m, m, suf) == 0;
        };
        for (std::size_t i = 0; i < store_.size(); ++i) {
            Parameter<T>& p = store_.at(i);
            if (ends_with(p.name, ".gain")) {
                std::fill(p.tensor.data.begin(), p.tensor.data.end(), T(1));
            } else if (ends_with(p.name, ".bias") || ends_with(p.name, ".b1") || ends_with(p.name, ".b2")) {
                std::fill(p.tensor.data.begin(), p.tensor.data.end(), T(0));
            } else {
                for (auto& v : p.tensor.data) v = static_cast<T>(rng.normal(0.0, 0.02));
            }
        }
        pos_ = positional_encoding_table<T>(cfg_.max_seq_len, cfg_.hidden_dim);
    }

    const ModelConfig& config() const { return cfg_; }
    ParameterStore<T>& params() { return store_; }
    const ParameterStore<T>& params() const { return store_; }
    const Tensor<T>& positional_table() const { return pos_; }

    // H^(0) = E[tokens] + P[0..n)
    int embed(Tape<T>& tape, const std::vector<int>& tokens) {
        check_tokens(tokens);
        const std::size_t n = tokens.size();
        int e = tape.embedding_rows(*emb_, tokens);
        Tensor<T> p = Tensor<T>::zeros({n, cfg_.hidden_dim});
        std::copy(pos_.data.begin(), pos_.data.begin() + n * cfg_.hidden_dim, p.data.begin());
        return tape.add_const(e, p);
    }

    // One graph-attention layer (no residual; the stack adds it).
    // alphas_out receives one n x n attention ref per head.
    int gat_layer(Tape<T>& tape, int h, const TokenGraph& graph,
                  const std::shared_ptr<std::vector<std::uint8_t>>& mask,
                  std::size_t layer, std::vector<int>* alphas_out) {
        const std::size_t n = tape.value(h).rows();
        if (graph.n != n) throw DataError("gat_layer: graph/sequence size mismatch");
        const std::size_t gh = cfg_.effective_gnn_heads();
        const std::size_t dk = cfg_.gnn_head_dim();
        const double slope = cfg_.leaky_relu_slope;

        int wh = tape.linear(h, *gnn_[layer].w);
        int a_node = tape.param(*gnn_[layer].a);

        Tensor<T> log_bias;
        if (cfg_.graph.use_edge_weight_bias) {
            log_bias = Tensor<T>::zeros({n, n});
            for (const GraphEdge& e : graph.edges)
                log_bias.at(static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst)) =
                    static_cast<T>(std::log(e.weight));
        }

        std::vector<int> head_outs;
        for (std::size_t hd = 0; hd < gh; ++hd) {
            int wh_h = tape.slice_cols(wh, hd * dk, (hd + 1) * dk);
            int a_row = tape.slice_rows(a_node, hd, hd + 1);
            int a_src = tape.transpose(tape.slice_cols(a_row, 0, dk));
            int a_dst = tape.transpose(tape.slice_cols(a_row, dk, 2 * dk));
            int scores;
            if (cfg_.gat_version == GatVersion::v1) {
                int u = tape.matmul(wh_h, a_src);
                int v = tape.matmul(wh_h, a_dst);
                scores = tape.leaky_relu(tape.outer_sum(u, v), slope);
            } else {
                int lw = tape.leaky_relu(wh_h, slope);
                int u = tape.matmul(lw, a_src);
                int v = tape.matmul(lw, a_dst);
                scores = tape.outer_sum(u, v);
            }
            if (cfg_.graph.use_edge_weight_bias) scores = tape.add_const(scores, log_bias);
            int alpha = tape.masked_softmax_rows(scores, mask);
            if (alphas_out) alphas_out->push_back(alpha);
            head_outs.push_back(tape.matmul(alpha, wh_h));
        }
        return tape.relu(tape.concat_cols(head_outs));
    }

    // Post-norm transformer block: z = LN(h + MHA(h)); out = LN(z + FFN(z)).
    int transformer_layer(Tape<T>& tape, int h,
                          const std::shared_ptr<std::vector<std::uint8_t>>& mask,
                          std::size_t layer, std::vector<int>* attn_out) {
        const std::size_t dk = cfg_.head_dim();
        const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
        TransLayer& L = trans_[layer];

        int q = tape.linear(h, *L.wq);
        int k = tape.linear(h, *L.wk);
        int v = tape.linear(h, *L.wv);
        std::vector<int> ctx;
        for (std::size_t hd = 0; hd < cfg_.heads; ++hd) {
            int qh = tape.slice_cols(q, hd * dk, (hd + 1) * dk);
            int kh = tape.slice_cols(k, hd * dk, (hd + 1) * dk);
            int vh = tape.slice_cols(v, hd * dk, (hd + 1) * dk);
            int scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dk);
            int alpha = tape.masked_softmax_rows(scores, mask);
            if (attn_out) attn_out->push_back(alpha);
            ctx.push_back(tape.matmul(alpha, vh));
        }
        int mh = tape.linear(tape.concat_cols(ctx), *L.wo);
        int z = tape.layer_norm_rows(tape.add(h, mh), *L.ln1_gain, *L.ln1_bias,
                                     static_cast<T>(cfg_.layer_norm_eps));
        int f = tape.relu(tape.add_bias_rows(tape.linear(z, *L.w1), *L.b1));
        int f2 = tape.add_bias_rows(tape.linear(f, *L.w2), *L.b2);
        return tape.layer_norm_rows(tape.add(z, f2), *L.ln2_gain, *L.ln2_bias,
                                    static_cast<T>(cfg_.layer_norm_eps));
    }

    ForwardTrace<T> forward(Tape<T>& tape, const std::vector<int>& tokens) {
        ForwardTrace<T> tr;
        const std::size_t n = tokens.size();
        int e = -1;
        int h = -1;
        {
            check_tokens(tokens);
            e = tape.embedding_rows(*emb_, tokens);
            Tensor<T> p = Tensor<T>::zeros({n, cfg_.hidden_dim});
            std::copy(pos_.data.begin(), pos_.data.begin() + n * cfg_.hidden_dim, p.data.begin());
            h = tape.add_const(e, p);
        }

        if (cfg_.uses_gnn()) {
            // Graph construction itself is not differentiated through; edges
            // and weights come from the current embedding values.
            const Tensor<T>& sim_src = cfg_.graph.sem_on_embeddings_only ? tape.value(e) : tape.value(h);
            tr.graph = build_graph(sim_src, cfg_.graph);
            tr.has_graph = true;
            tr.gnn_mask = std::make_shared<std::vector<std::uint8_t>>(tr.graph.neighborhood_mask());
            for (std::size_t l = 0; l < cfg_.gnn_layers; ++l) {
                std::vector<int> alphas;
                const bool last = l + 1 == cfg_.gnn_layers;
                int g = gat_layer(tape, h, tr.graph, tr.gnn_mask, l, last ? &alphas : nullptr);
                h = tape.add(h, g);
                if (last) tr.gnn_alpha = std::move(alphas);
            }
            tr.h_gnn = h;
        }

        if (cfg_.uses_transformer()) {
            auto mask = std::make_shared<std::vector<std::uint8_t>>(n * n, std::uint8_t{1});
            if (cfg_.causal_mask) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = i + 1; j < n; ++j) (*mask)[i * n + j] = 0;
            }
            tr.attn_mask = mask;
            for (std::size_t l = 0; l < cfg_.transformer_layers; ++l) {
                std::vector<int> attn;
                h = transformer_layer(tape, h, mask, l, &attn);
                tr.attn.push_back(std::move(attn));
            }
            tr.h_trans = h;
        }

        tr.logits = tape.linear(h, cfg_.tie_lm_head ? *emb_ : *head_);
        return tr;
    }

private:
    struct GnnLayer {
        Parameter<T>* w = nullptr;
        Parameter<T>* a = nullptr;
    };
    struct TransLayer {
        Parameter<T>* wq = nullptr;
        Parameter<T>* wk = nullptr;
        Parameter<T>* wv = nullptr;
        Parameter<T>* wo = nullptr;
        Parameter<T>* ln1_gain = nullptr;
        Parameter<T>* ln1_bias = nullptr;
        Parameter<T>* w1 = nullptr;
        Parameter<T>* b1 = nullptr;
        Parameter<T>* w2 = nullptr;
        Parameter<T>* b2 = nullptr;
        Parameter<T>* ln2_gain = nullptr;
        Parameter<T>* ln2_bias = nullptr;
    };

    void check_tokens(const std::vector<int>& tokens) const {
        if (tokens.empty()) throw DataError("forward: empty token sequence");
        if (tokens.size() > cfg_.max_seq_len)
            throw DataError("forward: sequence longer than max_seq_len");
        for (int t : tokens)
            if (t < 0 || static_cast<std::size_t>(t) >= cfg_.vocab_size)
                throw DataError("forward: token id out of vocabulary range");
    }

    void build_parameters() {
        const std::size_t d = cfg_.hidden_dim;
        const std::size_t dff = cfg_.effective_ffn_dim();
        emb_ = &store_.create("embed.tok", Tensor<T>::zeros({cfg_.vocab_size, d}));
        if (cfg_.uses_gnn()) {
            for (std::size_t l = 0; l < cfg_.gnn_layers; ++l) {
                const std::string base = "gnn." + std::to_string(l) + ".";
                GnnLayer gl;
                gl.w = &store_.create(base + "w", Tensor<T>::zeros({d, d}));
                gl.a = &store_.create(base + "a",
                                      Tensor<T>::zeros({cfg_.effective_gnn_heads(),
                                                        2 * cfg_.gnn_head_dim()}));
                gnn_.push_back(gl);
            }
        }
        if (cfg_.uses_transformer()) {
            for (std::size_t l = 0; l < cfg_.transformer_layers; ++l) {
                const std::string base = "trans." + std::to_string(l) + ".";
                TransLayer tl;
                tl.wq = &store_.create(base + "wq", Tensor<T>::zeros({d, d}));
                tl.wk = &store_.create(base + "wk", Tensor<T>::zeros({d, d}));
                tl.wv = &store_.create(base + "wv", Tensor<T>::zeros({d, d}));
                tl.wo = &store_.create(base + "wo", Tensor<T>::zeros({d, d}));
                tl.ln1_gain = &store_.create(base + "ln1.gain", Tensor<T>::zeros({d}));
                tl.ln1_bias = &store_.create(base + "ln1.bias", Tensor<T>::zeros({d}));
                tl.w1 = &store_.create(base + "ffn.w1", Tensor<T>::zeros({dff, d}));
                tl.b1 = &store_.create(base + "ffn.b1", Tensor<T>::zeros({dff}));
                tl.w2 = &store_.create(base + "ffn.w2", Tensor<T>::zeros({d, dff}));
                tl.b2 = &store_.create(base + "ffn.b2", Tensor<T>::zeros({d}));
                tl.ln2_gain = &store_.create(base + "ln2.gain", Tensor<T>::zeros({d}));
                tl.ln2_bias = &store_.create(base + "ln2.bias", Tensor<T>::zeros({d}));
                trans_.push_back(tl);
            }
        }
        if (!cfg_.tie_lm_head)
            head_ = &store_.create("lm_head.w", Tensor<T>::zeros({cfg_.vocab_size, d}));
    }

    ModelConfig cfg_;
    ParameterStore<T> store_;
    Tensor<T> pos_;
    Parameter<T>* emb_ = nullptr;
    Parameter<T>* head_ = nullptr;
    std::vector<GnnLayer> gnn_;
    std::vector<TransLayer> trans_;
};

} // namespace cgt
