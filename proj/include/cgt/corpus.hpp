#pragma once

#include <string>
#include <vector>

#include "cgt/tokenizer.hpp"

namespace cgt {

struct Document {
    std::string id;           // filename stem, unique within a corpus
    std::string text;
    std::string source_path;
};

struct Corpus {
    std::vector<Document> documents;
    std::size_t total_tokens = 0;

    std::size_t document_count() const { return documents.size(); }
};

// One document per .txt file in the directory, ordered lexicographically by
// filename. Files must be valid UTF-8 and non-empty after whitespace trim.
// total_tokens is measured with the given tokenizer (byte fallback when
// omitted).
Corpus load_corpus(const std::string& directory);
Corpus load_corpus(const std::string& directory, const TokenizerModel& tok);

struct Chunk {
    int chunk_id = 0;
    std::string doc_id;
    std::size_t start = 0;  // token span [start, end)
    std::size_t end = 0;
    std::string text;
};

// Sliding-window chunking with stride = chunk_size - overlap; the final
// chunk of a document may be short. Requires 0 <= overlap < chunk_size.
std::vector<Chunk> chunk_corpus(const Corpus& corpus, const TokenizerModel& tok,
                                std::size_t chunk_size, std::size_t overlap);

} // namespace cgt
