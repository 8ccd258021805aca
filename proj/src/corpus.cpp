#include "cgt/corpus.hpp"

#include <algorithm>
#include <filesystem>

#include "cgt/io.hpp"

namespace cgt {

namespace fs = std::filesystem;

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool empty_after_trim(const std::string& s) {
    for (char c : s)
        if (!is_space(c)) return false;
    return true;
}

} // namespace

Corpus load_corpus(const std::string& directory, const TokenizerModel& tok) {
    if (!fs::is_directory(directory)) throw DataError("corpus directory not found: " + directory);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    }
    if (files.empty()) throw DataError("no .txt files in corpus directory: " + directory);
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    Corpus corpus;
    for (const fs::path& f : files) {
        Document doc;
        doc.id = f.stem().string();
        doc.source_path = f.string();
        doc.text = read_file_bytes(f.string());
        if (!is_valid_utf8(doc.text)) throw DataError("corpus file is not UTF-8: " + f.string());
        if (empty_after_trim(doc.text)) throw DataError("corpus file is empty: " + f.string());
        corpus.total_tokens += tokenize(doc.text, tok).size();
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

Corpus load_corpus(const std::string& directory) {
    return load_corpus(directory, TokenizerModel::byte_fallback());
}

std::vector<Chunk> chunk_corpus(const Corpus& corpus, const TokenizerModel& tok,
                                std::size_t chunk_size, std::size_t overlap) {
    if (chunk_size == 0) throw DataError("chunk_corpus: chunk_size must be positive");
    if (overlap >= chunk_size) throw DataError("chunk_corpus: overlap must be smaller than chunk_size");
    const std::size_t stride = chunk_size - overlap;
    std::vector<Chunk> chunks;
    int next_id = 0;
    for (const Document& doc : corpus.documents) {
        const std::vector<int> ids = tokenize(doc.text, tok);
        const std::size_t len = ids.size();
        std::size_t start = 0;
        while (start < len) {
            const std::size_t end = std::min(start + chunk_size, len);
            Chunk c;
            c.chunk_id = next_id++;
            c.doc_id = doc.id;
            c.start = start;
            c.end = end;
            c.text = detokenize(std::vector<int>(ids.begin() + static_cast<std::ptrdiff_t>(start),
                                                 ids.begin() + static_cast<std::ptrdiff_t>(end)),
                                tok);
            chunks.push_back(std::move(c));
            if (end == len) break;
            start += stride;
        }
    }
    return chunks;
}

} // namespace cgt
