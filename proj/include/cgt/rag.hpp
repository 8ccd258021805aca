#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cgt/corpus.hpp"
#include "cgt/embedder.hpp"
#include "cgt/model.hpp"

namespace cgt {

struct RagConfig {
    std::size_t k = 3;
    double quality_threshold = 0.5;  // grounding-ratio gate
    std::size_t beam_width = 4;
    std::size_t max_new_tokens = 64;
    double length_penalty = 1.0;

    void validate() const;
};

struct KnowledgeBase {
    std::vector<Chunk> chunks;
    std::vector<std::vector<float>> embeddings;  // unit L2 norm, one per chunk
    std::string embedder_id;
    std::size_t dim = 0;
};

KnowledgeBase build_kb(const Corpus& corpus, const TokenizerModel& tok, const Embedder& embedder,
                       std::size_t chunk_size, std::size_t overlap);

// CGTK container: chunk metadata in the JSON header, one embeddings tensor in
// the payload.
void kb_save(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase kb_load(const std::string& path);

struct Retrieved {
    int chunk_index = 0;  // index into kb.chunks (== chunk_id for built KBs)
    double similarity = 0.0;
};

// Top-min(k, |kb|) chunks by cosine similarity, descending; ties broken by
// lower chunk id.
std::vector<Retrieved> retrieve(const std::vector<float>& query_embedding,
                                const KnowledgeBase& kb, std::size_t k);

// "Context: " + context + " Question: " + question + " Answer: "
std::string build_prompt(const std::string& context, const std::string& question);

// Length-penalized beam search over causal forward passes; stops at eos or
// max_new_tokens; beam_width 1 degenerates to greedy argmax. Returns only the
// newly generated tokens, eos excluded.
std::vector<int> generate(CgtModel<float>& model, const std::vector<int>& prompt_tokens,
                          const RagConfig& cfg, int eos_id);

// Grounding ratio: fraction of the answer's token types present in the
// context (lowercased, type-level); empty answer -> 0.
double quality(const std::string& answer, const std::string& context);

struct Answer {
    std::string text;
    std::vector<std::pair<int, double>> retrieved;  // (chunk_id, similarity), descending
    bool used_fallback = false;
    double seconds = 0.0;
};

// Full pipeline: embed, retrieve, prompt, generate, detokenize, quality-gate.
// Below the gate, the answer falls back to the contiguous span of the
// top-ranked chunk covering its two sentences most similar to the query
// (bag-of-words cosine), in document order.
Answer ask(const std::string& query, const KnowledgeBase& kb, CgtModel<float>& model,
           const TokenizerModel& tok, const Embedder& embedder, const RagConfig& cfg);

// Sentence spans of a text (byte ranges), split after '.', '!' or '?' runs.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(const std::string& text);

} // namespace cgt
