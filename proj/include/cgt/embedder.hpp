#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cgt/model.hpp"
#include "cgt/tokenizer.hpp"

namespace cgt {

// Deterministic text -> unit-norm vector, fixed dimension per embedder.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    // Input must be non-empty after whitespace trim.
    virtual std::vector<float> embed(const std::string& text) const = 0;
};

// Mean of the model's token-embedding rows over the tokenized text,
// L2-normalized. Dimension = hidden_dim.
class MeanEmbedder : public Embedder {
public:
    MeanEmbedder(const CgtModel<float>& model, TokenizerModel tok);
    std::string id() const override { return "mean-embed"; }
    std::size_t dim() const override { return dim_; }
    std::vector<float> embed(const std::string& text) const override;

private:
    Tensor<float> table_;
    TokenizerModel tok_;
    std::size_t dim_;
};

// Hashed bag-of-words over lowercased word types (FNV-1a into 384 buckets),
// L2-normalized. Model-free.
class HashedBowEmbedder : public Embedder {
public:
    static constexpr std::size_t kDim = 384;
    std::string id() const override { return "hashed-bow"; }
    std::size_t dim() const override { return kDim; }
    std::vector<float> embed(const std::string& text) const override;

    // Bucket of one lowercased token, exposed so tests can build
    // collision-free fixtures.
    static std::size_t bucket(const std::string& token);
};

// id is "mean-embed" or "hashed-bow"; mean-embed requires a model.
std::unique_ptr<Embedder> make_embedder(const std::string& id, const CgtModel<float>* model,
                                        const TokenizerModel* tok);

} // namespace cgt
