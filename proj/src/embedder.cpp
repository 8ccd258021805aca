#include "cgt/embedder.hpp"

#include <cmath>

#include "cgt/metrics.hpp"

namespace cgt {

namespace {

bool blank(const std::string& s) {
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

void normalize_unit(std::vector<float>& v) {
    double norm2 = 0.0;
    for (float x : v) norm2 += static_cast<double>(x) * static_cast<double>(x);
    if (!(norm2 > 0.0)) throw NumericError("embed_text: zero-norm embedding");
    const double inv = 1.0 / std::sqrt(norm2);
    for (float& x : v) x = static_cast<float>(static_cast<double>(x) * inv);
}

} // namespace

MeanEmbedder::MeanEmbedder(const CgtModel<float>& model, TokenizerModel tok)
    : tok_(std::move(tok)), dim_(model.config().hidden_dim) {
    const Parameter<float>* emb = model.params().find("embed.tok");
    if (!emb) throw DataError("mean-embed: model has no embedding table");
    table_ = emb->tensor;
    table_.grad.clear();
}

std::vector<float> MeanEmbedder::embed(const std::string& text) const {
    if (blank(text)) throw DataError("embed_text: empty text");
    const std::vector<int> ids = tokenize(text, tok_);
    if (ids.empty()) throw DataError("embed_text: text produced no tokens");
    std::vector<float> out(dim_, 0.0f);
    for (int id : ids) {
        const float* row = table_.row_ptr(static_cast<std::size_t>(id));
        for (std::size_t j = 0; j < dim_; ++j) out[j] += row[j];
    }
    const float inv = 1.0f / static_cast<float>(ids.size());
    for (float& x : out) x *= inv;
    normalize_unit(out);
    return out;
}

std::size_t HashedBowEmbedder::bucket(const std::string& token) {
    // FNV-1a 64
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : token) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h % kDim);
}

std::vector<float> HashedBowEmbedder::embed(const std::string& text) const {
    if (blank(text)) throw DataError("embed_text: empty text");
    const std::vector<std::string> tokens = metric_tokens(text);
    if (tokens.empty()) throw DataError("embed_text: text produced no tokens");
    std::vector<float> out(kDim, 0.0f);
    for (const std::string& t : tokens) out[bucket(t)] += 1.0f;
    normalize_unit(out);
    return out;
}

std::unique_ptr<Embedder> make_embedder(const std::string& id, const CgtModel<float>* model,
                                        const TokenizerModel* tok) {
    if (id == "hashed-bow") return std::make_unique<HashedBowEmbedder>();
    if (id == "mean-embed") {
        if (!model || !tok) throw DataError("mean-embed requires a model and tokenizer");
        return std::make_unique<MeanEmbedder>(*model, *tok);
    }
    throw DataError("unknown embedder: " + id);
}

} // namespace cgt
