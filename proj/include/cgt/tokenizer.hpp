#pragma once

#include <map>
#include <string>
#include <vector>

#include "cgt/errors.hpp"

namespace cgt {

// Two modes:
//  - byte_fallback: ids 0..255 are raw bytes, plus pad (256) and eos (257).
//    Fully self-contained; round-trips any byte string.
//  - loaded_bpe: GPT-2-style byte-level BPE from an external JSON vocab and a
//    ranked merges file. Byte-level merges make decode(encode(s)) == s for
//    any UTF-8 input as long as the vocab covers all 256 byte symbols.
//    Pre-tokenization is a simplified whitespace-aware splitter, so token
//    ids are only comparable with tools using the same splitter.
struct TokenizerModel {
    enum class Mode { byte_fallback, loaded_bpe };

    Mode mode = Mode::byte_fallback;
    std::size_t vocab_size = 258;
    int pad_id = 256;
    int eos_id = 257;

    // loaded_bpe only
    std::map<std::string, int> vocab;
    std::vector<std::string> id_to_token;
    std::map<std::pair<std::string, std::string>, int> merge_rank;

    static TokenizerModel byte_fallback();
    static TokenizerModel load_bpe(const std::string& vocab_path, const std::string& merges_path);
};

std::vector<int> tokenize(const std::string& text, const TokenizerModel& t);
std::string detokenize(const std::vector<int>& ids, const TokenizerModel& t);

bool is_valid_utf8(const std::string& s);

} // namespace cgt
