#include "cgt/rag.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "cgt/checkpoint.hpp"
#include "cgt/io.hpp"
#include "cgt/metrics.hpp"

namespace cgt {

using nlohmann::json;

void RagConfig::validate() const {
    if (k < 1) throw DataError("rag config: k must be >= 1");
    if (quality_threshold < 0.0 || quality_threshold > 1.0)
        throw DataError("rag config: quality_threshold must be in [0,1]");
    if (beam_width < 1) throw DataError("rag config: beam_width must be >= 1");
    if (max_new_tokens < 1) throw DataError("rag config: max_new_tokens must be >= 1");
}

KnowledgeBase build_kb(const Corpus& corpus, const TokenizerModel& tok, const Embedder& embedder,
                       std::size_t chunk_size, std::size_t overlap) {
    KnowledgeBase kb;
    kb.chunks = chunk_corpus(corpus, tok, chunk_size, overlap);
    kb.embedder_id = embedder.id();
    kb.dim = embedder.dim();
    kb.embeddings.reserve(kb.chunks.size());
    for (const Chunk& c : kb.chunks) kb.embeddings.push_back(embedder.embed(c.text));
    return kb;
}

void kb_save(const KnowledgeBase& kb, const std::string& path) {
    json chunks = json::array();
    for (const Chunk& c : kb.chunks) {
        json jc;
        jc["chunk_id"] = c.chunk_id;
        jc["doc_id"] = c.doc_id;
        jc["span"] = json::array({c.start, c.end});
        jc["text"] = c.text;
        chunks.push_back(jc);
    }
    json meta;
    meta["embedder_id"] = kb.embedder_id;
    meta["dim"] = kb.dim;
    meta["chunks"] = chunks;

    ContainerTensor emb;
    emb.name = "embeddings";
    emb.shape = {kb.embeddings.size(), kb.dim};
    emb.data.reserve(kb.embeddings.size() * kb.dim);
    for (const auto& v : kb.embeddings) {
        if (v.size() != kb.dim) throw DataError("kb_save: embedding dimension mismatch");
        emb.data.insert(emb.data.end(), v.begin(), v.end());
    }
    atomic_write_file(path, serialize_container("CGTK", meta, {emb}));
}

KnowledgeBase kb_load(const std::string& path) {
    ParsedContainer pc = parse_container(read_file_bytes(path), "CGTK");
    KnowledgeBase kb;
    kb.embedder_id = pc.meta.at("embedder_id").get<std::string>();
    kb.dim = pc.meta.at("dim").get<std::size_t>();
    for (const json& jc : pc.meta.at("chunks")) {
        Chunk c;
        c.chunk_id = jc.at("chunk_id").get<int>();
        c.doc_id = jc.at("doc_id").get<std::string>();
        c.start = jc.at("span").at(0).get<std::size_t>();
        c.end = jc.at("span").at(1).get<std::size_t>();
        c.text = jc.at("text").get<std::string>();
        kb.chunks.push_back(std::move(c));
    }
    if (pc.tensors.size() != 1 || pc.tensors[0].name != "embeddings")
        throw DataError("kb file: expected a single embeddings tensor");
    const ContainerTensor& t = pc.tensors[0];
    if (t.shape.size() != 2 || t.shape[0] != kb.chunks.size() || t.shape[1] != kb.dim)
        throw DataError("kb file: embeddings shape does not match chunks");
    for (std::size_t i = 0; i < kb.chunks.size(); ++i) {
        std::vector<float> v(t.data.begin() + static_cast<std::ptrdiff_t>(i * kb.dim),
                             t.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * kb.dim));
        double norm2 = 0.0;
        for (float x : v) norm2 += static_cast<double>(x) * static_cast<double>(x);
        if (std::abs(norm2 - 1.0) > 1e-4)
            throw DataError("kb file: stored embedding is not unit-norm");
        kb.embeddings.push_back(std::move(v));
    }
    return kb;
}

std::vector<Retrieved> retrieve(const std::vector<float>& query_embedding,
                                const KnowledgeBase& kb, std::size_t k) {
    if (kb.chunks.empty()) throw DataError("retrieve: empty knowledge base");
    if (k < 1) throw DataError("retrieve: k must be >= 1");
    if (query_embedding.size() != kb.dim) throw DataError("retrieve: query dimension mismatch");
    std::vector<Retrieved> scored(kb.chunks.size());
    for (std::size_t i = 0; i < kb.chunks.size(); ++i) {
        double s = 0.0;
        const std::vector<float>& e = kb.embeddings[i];
        for (std::size_t j = 0; j < kb.dim; ++j)
            s += static_cast<double>(query_embedding[j]) * static_cast<double>(e[j]);
        scored[i] = {static_cast<int>(i), s};
    }
    std::sort(scored.begin(), scored.end(), [&kb](const Retrieved& a, const Retrieved& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return kb.chunks[static_cast<std::size_t>(a.chunk_index)].chunk_id <
               kb.chunks[static_cast<std::size_t>(b.chunk_index)].chunk_id;
    });
    scored.resize(std::min(k, scored.size()));
    return scored;
}

std::string build_prompt(const std::string& context, const std::string& question) {
    if (context.empty() || question.empty()) throw DataError("build_prompt: empty context or question");
    return "Context: " + context + " Question: " + question + " Answer: ";
}

namespace {

struct Beam {
    std::vector<int> tokens;  // generated suffix
    double logp = 0.0;
};

struct Finished {
    std::vector<int> tokens;  // suffix including eos
    double score = 0.0;
};

// log-softmax of the final row of the logits, computed in double
std::vector<double> last_row_log_probs(const Tensor<float>& logits) {
    const std::size_t v = logits.cols();
    const float* row = logits.row_ptr(logits.rows() - 1);
    double mx = row[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    std::vector<double> out(v);
    for (std::size_t j = 0; j < v; ++j) {
        out[j] = static_cast<double>(row[j]) - mx;
        sum += std::exp(out[j]);
    }
    const double lse = std::log(sum);
    for (double& x : out) x -= lse;
    return out;
}

double length_normalized(double logp, std::size_t len, double penalty) {
    return logp / std::pow(static_cast<double>(std::max<std::size_t>(len, 1)), penalty);
}

} // namespace

std::vector<int> generate(CgtModel<float>& model, const std::vector<int>& prompt_tokens,
                          const RagConfig& cfg, int eos_id) {
    cfg.validate();
    const std::size_t max_len = model.config().max_seq_len;
    if (prompt_tokens.empty()) throw DataError("generate: empty prompt");
    if (prompt_tokens.size() + 1 > max_len) throw DataError("generate: prompt too long");

    const std::size_t budget = std::min(cfg.max_new_tokens, max_len - prompt_tokens.size());
    std::vector<Beam> active{Beam{}};
    std::vector<Finished> finished;

    for (std::size_t step = 0; step < budget && !active.empty(); ++step) {
        std::vector<Beam> candidates;
        for (const Beam& beam : active) {
            std::vector<int> seq = prompt_tokens;
            seq.insert(seq.end(), beam.tokens.begin(), beam.tokens.end());
            Tape<float> tape(false);
            ForwardTrace<float> tr = model.forward(tape, seq);
            const std::vector<double> logp = last_row_log_probs(tape.value(tr.logits));

            // top beam_width expansions; ties resolved toward lower token ids
            std::vector<int> idx(logp.size());
            for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<int>(j);
            const std::size_t take = std::min<std::size_t>(cfg.beam_width, idx.size());
            std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                              [&logp](int a, int b) {
                                  if (logp[static_cast<std::size_t>(a)] != logp[static_cast<std::size_t>(b)])
                                      return logp[static_cast<std::size_t>(a)] > logp[static_cast<std::size_t>(b)];
                                  return a < b;
                              });
            for (std::size_t j = 0; j < take; ++j) {
                Beam nb = beam;
                nb.tokens.push_back(idx[j]);
                nb.logp += logp[static_cast<std::size_t>(idx[j])];
                candidates.push_back(std::move(nb));
            }
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Beam& a, const Beam& b) { return a.logp > b.logp; });
        active.clear();
        for (Beam& c : candidates) {
            if (!c.tokens.empty() && c.tokens.back() == eos_id) {
                if (finished.size() < 4 * cfg.beam_width)
                    finished.push_back(
                        {c.tokens, length_normalized(c.logp, c.tokens.size(), cfg.length_penalty)});
            } else if (active.size() < cfg.beam_width) {
                active.push_back(std::move(c));
            }
        }
    }

    std::vector<int> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const Finished& f : finished) {
        if (f.score > best_score) {
            best_score = f.score;
            best = f.tokens;
            best.pop_back();  // drop eos
        }
    }
    if (finished.empty()) {
        for (const Beam& b : active) {
            const double s = length_normalized(b.logp, b.tokens.size(), cfg.length_penalty);
            if (s > best_score) {
                best_score = s;
                best = b.tokens;
            }
        }
    }
    return best;
}

double quality(const std::string& answer, const std::string& context) {
    if (context.empty()) throw DataError("quality: empty context");
    const std::vector<std::string> ans = metric_tokens(answer);
    if (ans.empty()) return 0.0;
    std::set<std::string> ans_types(ans.begin(), ans.end());
    const std::vector<std::string> ctx = metric_tokens(context);
    const std::set<std::string> ctx_types(ctx.begin(), ctx.end());
    std::size_t grounded = 0;
    for (const std::string& t : ans_types) grounded += ctx_types.count(t);
    return static_cast<double>(grounded) / static_cast<double>(ans_types.size());
}

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(const std::string& text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t start = 0;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (text[i] == '.' || text[i] == '!' || text[i] == '?') {
            while (i < n && (text[i] == '.' || text[i] == '!' || text[i] == '?')) ++i;
            spans.emplace_back(start, i);
            while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            start = i;
        } else {
            ++i;
        }
    }
    if (start < n) spans.emplace_back(start, n);
    return spans;
}

namespace {

std::map<std::string, int> bow_counts(const std::string& text) {
    std::map<std::string, int> counts;
    for (const std::string& t : metric_tokens(text)) counts[t] += 1;
    return counts;
}

double bow_cosine(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [t, c] : a) {
        na += static_cast<double>(c) * c;
        auto it = b.find(t);
        if (it != b.end()) dot += static_cast<double>(c) * it->second;
    }
    for (const auto& [t, c] : b) nb += static_cast<double>(c) * c;
    if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Contiguous span of the chunk covering its two sentences most similar to
// the query, so the extracted answer is always verbatim chunk text.
std::string extract_answer(const std::string& chunk_text, const std::string& query) {
    const auto spans = sentence_spans(chunk_text);
    if (spans.empty()) return chunk_text;
    const auto q = bow_counts(query);
    std::vector<std::pair<double, std::size_t>> ranked;  // (-score, index) for stable order
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const std::string sent = chunk_text.substr(spans[i].first, spans[i].second - spans[i].first);
        ranked.emplace_back(-bow_cosine(bow_counts(sent), q), i);
    }
    std::stable_sort(ranked.begin(), ranked.end());
    const std::size_t take = std::min<std::size_t>(2, ranked.size());
    std::size_t lo = ranked[0].second, hi = ranked[0].second;
    for (std::size_t i = 1; i < take; ++i) {
        lo = std::min(lo, ranked[i].second);
        hi = std::max(hi, ranked[i].second);
    }
    std::size_t b = spans[lo].first, e = spans[hi].second;
    while (b < e && std::isspace(static_cast<unsigned char>(chunk_text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(chunk_text[e - 1]))) --e;
    return chunk_text.substr(b, e - b);
}

} // namespace

Answer ask(const std::string& query, const KnowledgeBase& kb, CgtModel<float>& model,
           const TokenizerModel& tok, const Embedder& embedder, const RagConfig& cfg) {
    cfg.validate();
    if (kb.chunks.empty()) throw DataError("ask: empty knowledge base");
    if (embedder.id() != kb.embedder_id)
        throw DataError("ask: knowledge base was built with embedder '" + kb.embedder_id +
                        "', got '" + embedder.id() + "'");
    if (embedder.dim() != kb.dim) throw DataError("ask: embedder dimension mismatch");
    if (tok.vocab_size != model.config().vocab_size)
        throw DataError("ask: tokenizer/model vocabulary mismatch");

    const auto t0 = std::chrono::steady_clock::now();
    Answer out;

    const std::vector<float> q_emb = embedder.embed(query);
    const std::vector<Retrieved> hits = retrieve(q_emb, kb, cfg.k);
    std::string context;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i > 0) context += "\n";
        context += kb.chunks[static_cast<std::size_t>(hits[i].chunk_index)].text;
        out.retrieved.emplace_back(
            kb.chunks[static_cast<std::size_t>(hits[i].chunk_index)].chunk_id, hits[i].similarity);
    }

    const std::string prompt = build_prompt(context, query);
    std::vector<int> prompt_tokens = tokenize(prompt, tok);
    // keep the prompt tail (question + answer cue) when the context overflows
    const std::size_t max_len = model.config().max_seq_len;
    const std::size_t reserve = std::min<std::size_t>(cfg.max_new_tokens, std::max<std::size_t>(8, max_len / 4));
    const std::size_t cap = max_len > reserve + 1 ? max_len - reserve - 1 : 1;
    if (prompt_tokens.size() > cap)
        prompt_tokens.erase(prompt_tokens.begin(),
                            prompt_tokens.end() - static_cast<std::ptrdiff_t>(cap));

    const std::vector<int> gen = generate(model, prompt_tokens, cfg, tok.eos_id);
    out.text = detokenize(gen, tok);

    if (quality(out.text, context) < cfg.quality_threshold) {
        const Chunk& top = kb.chunks[static_cast<std::size_t>(hits[0].chunk_index)];
        out.text = extract_answer(top.text, query);
        out.used_fallback = true;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

} // namespace cgt
