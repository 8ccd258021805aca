#include "cgt/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cgt/io.hpp"

namespace cgt {

bool is_valid_utf8(const std::string& s) {
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        if (c < 0x80) len = 1;
        else if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        else return false;
        if (i + len > n) return false;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        // reject overlong encodings and out-of-range code points
        if (len == 2 && c < 0xC2) return false;
        if (len == 3 && c == 0xE0 && static_cast<unsigned char>(s[i + 1]) < 0xA0) return false;
        if (len == 4 && (c > 0xF4 || (c == 0xF0 && static_cast<unsigned char>(s[i + 1]) < 0x90) ||
                         (c == 0xF4 && static_cast<unsigned char>(s[i + 1]) > 0x8F)))
            return false;
        if (len == 3 && c == 0xED && static_cast<unsigned char>(s[i + 1]) >= 0xA0)
            return false;  // surrogates
        i += len;
    }
    return true;
}

namespace {

std::string codepoint_to_utf8(unsigned int cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

// GPT-2 byte<->unicode table: visible bytes map to themselves, the rest to
// code points 256 and up, so every byte has a printable stand-in symbol.
struct ByteUnicode {
    std::string byte_to_sym[256];
    std::map<std::string, int> sym_to_byte;

    ByteUnicode() {
        auto visible = [](int b) {
            return (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
        };
        int extra = 0;
        for (int b = 0; b < 256; ++b) {
            const unsigned int cp = visible(b) ? static_cast<unsigned int>(b)
                                               : static_cast<unsigned int>(256 + extra++);
            byte_to_sym[b] = codepoint_to_utf8(cp);
            sym_to_byte[byte_to_sym[b]] = b;
        }
    }
};

const ByteUnicode& byte_unicode() {
    static const ByteUnicode bu;
    return bu;
}

// Split UTF-8 text into code-point symbols (each entry is one UTF-8 char).
std::vector<std::string> split_utf8_chars(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        out.push_back(s.substr(i, len));
        i += len;
    }
    return out;
}

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

// Whitespace-aware pre-tokenizer: a piece is an optional single leading
// space plus a maximal run of word bytes or of punctuation; remaining
// whitespace runs are their own pieces. Lossless by construction.
std::vector<std::string> pre_tokenize(const std::string& text) {
    std::vector<std::string> pieces;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        std::size_t start = i;
        if (text[i] == ' ' && i + 1 < n && !std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            ++i;  // single space glued to the following piece
        }
        if (i < n && std::isspace(static_cast<unsigned char>(text[i]))) {
            while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            pieces.push_back(text.substr(start, i - start));
            continue;
        }
        if (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) {
            while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            while (i < n && !std::isspace(static_cast<unsigned char>(text[i])) &&
                   !is_word_byte(static_cast<unsigned char>(text[i])))
                ++i;
        }
        pieces.push_back(text.substr(start, i - start));
    }
    return pieces;
}

std::vector<std::string> apply_bpe(const std::string& piece, const TokenizerModel& t) {
    const ByteUnicode& bu = byte_unicode();
    std::vector<std::string> syms;
    syms.reserve(piece.size());
    for (unsigned char b : piece) syms.push_back(bu.byte_to_sym[b]);
    while (syms.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
            auto it = t.merge_rank.find({syms[i], syms[i + 1]});
            if (it != t.merge_rank.end() && it->second < best_rank) {
                best_rank = it->second;
                best_i = i;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;
        const std::string a = syms[best_i];
        const std::string b = syms[best_i + 1];
        std::vector<std::string> merged;
        merged.reserve(syms.size());
        for (std::size_t i = 0; i < syms.size();) {
            if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
                merged.push_back(a + b);
                i += 2;
            } else {
                merged.push_back(syms[i]);
                i += 1;
            }
        }
        syms = std::move(merged);
    }
    return syms;
}

} // namespace

TokenizerModel TokenizerModel::byte_fallback() {
    TokenizerModel t;
    t.mode = Mode::byte_fallback;
    t.vocab_size = 258;
    t.pad_id = 256;
    t.eos_id = 257;
    return t;
}

TokenizerModel TokenizerModel::load_bpe(const std::string& vocab_path, const std::string& merges_path) {
    TokenizerModel t;
    t.mode = Mode::loaded_bpe;

    nlohmann::json jv;
    try {
        jv = nlohmann::json::parse(read_file_bytes(vocab_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("vocab parse error: ") + e.what());
    }
    if (!jv.is_object()) throw DataError("vocab file must be a JSON object of token -> id");
    for (auto it = jv.begin(); it != jv.end(); ++it) {
        const int id = it.value().get<int>();
        if (id < 0) throw DataError("vocab: negative token id");
        if (!t.vocab.emplace(it.key(), id).second) throw DataError("vocab: duplicate token " + it.key());
    }
    // ids must be dense in [0, size)
    t.id_to_token.assign(t.vocab.size(), std::string());
    std::vector<bool> seen(t.vocab.size(), false);
    for (const auto& [tok, id] : t.vocab) {
        if (static_cast<std::size_t>(id) >= t.vocab.size() || seen[static_cast<std::size_t>(id)])
            throw DataError("vocab: ids are not dense in [0, vocab_size)");
        seen[static_cast<std::size_t>(id)] = true;
        t.id_to_token[static_cast<std::size_t>(id)] = tok;
    }

    std::ifstream mf(merges_path, std::ios::binary);
    if (!mf) throw DataError("cannot open merges file: " + merges_path);
    std::string line;
    int rank = 0;
    bool first = true;
    while (std::getline(mf, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && !line.empty() && line[0] == '#') {
            first = false;
            continue;  // "#version" style header
        }
        first = false;
        if (line.empty()) continue;
        const std::size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size())
            throw DataError("merges: malformed line: " + line);
        t.merge_rank[{line.substr(0, sp), line.substr(sp + 1)}] = rank++;
    }

    auto ensure_special = [&t](const std::string& tok) {
        auto it = t.vocab.find(tok);
        if (it != t.vocab.end()) return it->second;
        const int id = static_cast<int>(t.id_to_token.size());
        t.vocab[tok] = id;
        t.id_to_token.push_back(tok);
        return id;
    };
    t.eos_id = ensure_special("<|endoftext|>");
    t.pad_id = ensure_special("<|pad|>");
    t.vocab_size = t.id_to_token.size();
    return t;
}

std::vector<int> tokenize(const std::string& text, const TokenizerModel& t) {
    if (!is_valid_utf8(text)) throw DataError("tokenize: input is not valid UTF-8");
    std::vector<int> ids;
    if (t.mode == TokenizerModel::Mode::byte_fallback) {
        ids.reserve(text.size());
        for (unsigned char b : text) ids.push_back(static_cast<int>(b));
        return ids;
    }
    for (const std::string& piece : pre_tokenize(text)) {
        for (const std::string& sym : apply_bpe(piece, t)) {
            auto it = t.vocab.find(sym);
            if (it == t.vocab.end()) throw DataError("tokenize: symbol not in vocab: " + sym);
            ids.push_back(it->second);
        }
    }
    return ids;
}

std::string detokenize(const std::vector<int>& ids, const TokenizerModel& t) {
    std::string out;
    if (t.mode == TokenizerModel::Mode::byte_fallback) {
        out.reserve(ids.size());
        for (int id : ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= t.vocab_size)
                throw DataError("detokenize: unknown id " + std::to_string(id));
            if (id == t.pad_id || id == t.eos_id) continue;
            out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
        }
        return out;
    }
    const ByteUnicode& bu = byte_unicode();
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= t.vocab_size)
            throw DataError("detokenize: unknown id " + std::to_string(id));
        if (id == t.pad_id || id == t.eos_id) continue;
        for (const std::string& sym : split_utf8_chars(t.id_to_token[static_cast<std::size_t>(id)])) {
            auto it = bu.sym_to_byte.find(sym);
            if (it == bu.sym_to_byte.end())
                throw DataError("detokenize: token contains a non-byte symbol");
            out.push_back(static_cast<char>(static_cast<unsigned char>(it->second)));
        }
    }
    return out;
}

} // namespace cgt
