#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "cgt/corpus.hpp"
#include "cgt/io.hpp"
#include "cgt/tokenizer.hpp"
#include "oracle_helpers.hpp"

using namespace cgt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cgt_text_" + std::to_string(::getpid()) +
                                            "_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    void write(const std::string& name, const std::string& text) const {
        std::ofstream((path / name).string(), std::ios::binary) << text;
    }
};

// Independent restatement of the byte -> printable-symbol table used by
// byte-level BPE vocabularies.
std::map<int, std::string> byte_symbols() {
    auto visible = [](int b) {
        return (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
    };
    auto utf8 = [](unsigned int cp) {
        std::string s;
        if (cp < 0x80) s.push_back(char(cp));
        else if (cp < 0x800) {
            s.push_back(char(0xC0 | (cp >> 6)));
            s.push_back(char(0x80 | (cp & 0x3F)));
        }
        return s;
    };
    std::map<int, std::string> out;
    int extra = 0;
    for (int b = 0; b < 256; ++b) out[b] = utf8(visible(b) ? b : 256 + extra++);
    return out;
}

// Minimal but complete BPE fixture: all 256 byte symbols plus one merged
// token "th".
TempDir write_bpe_fixture() {
    TempDir dir;
    const auto syms = byte_symbols();
    nlohmann::json vocab = nlohmann::json::object();
    for (const auto& [b, sym] : syms) vocab[sym] = b;
    vocab[syms.at('t') + syms.at('h')] = 256;
    dir.write("vocab.json", vocab.dump());
    dir.write("merges.txt", "#version: test\n" + syms.at('t') + " " + syms.at('h') + "\n");
    return dir;
}

} // namespace

TEST_CASE("byte fallback tokenizer basics") {
    const TokenizerModel t = TokenizerModel::byte_fallback();
    CHECK(t.vocab_size == 258);
    CHECK(t.pad_id == 256);
    CHECK(t.eos_id == 257);
    CHECK(t.pad_id != t.eos_id);

    CHECK(tokenize("ab", t) == std::vector<int>{97, 98});
    CHECK(tokenize("", t).empty());
    CHECK(detokenize({104, 105}, t) == "hi");
    CHECK(detokenize({}, t).empty());
    CHECK(detokenize({104, t.eos_id, 105, t.pad_id}, t) == "hi");
    CHECK_THROWS_AS(detokenize({258}, t), DataError);
    CHECK_THROWS_AS(detokenize({-1}, t), DataError);
}

TEST_CASE("tokenize/detokenize round trip on 1000 random UTF-8 strings") {
    const TokenizerModel t = TokenizerModel::byte_fallback();
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        const std::string s = oracle::random_utf8(rng, 40);
        const std::vector<int> ids = tokenize(s, t);
        for (int id : ids) {
            CHECK(id >= 0);
            CHECK(std::size_t(id) < t.vocab_size);
        }
        CHECK(detokenize(ids, t) == s);
    }
}

TEST_CASE("loaded BPE applies merges and round-trips") {
    const TempDir dir = write_bpe_fixture();
    const TokenizerModel t =
        TokenizerModel::load_bpe((dir.path / "vocab.json").string(), (dir.path / "merges.txt").string());
    CHECK(t.vocab_size == 259);  // 256 bytes + "th" + appended eos and pad
    CHECK(t.eos_id != t.pad_id);

    const std::vector<int> ids = tokenize("the hat", t);
    // "the" -> ["th", "e"]; " hat" has no 't h' bigram so stays byte-level
    CHECK(ids.front() == 256);
    CHECK(detokenize(ids, t) == "the hat");

    Rng rng(7);
    for (int i = 0; i < 300; ++i) {
        const std::string s = oracle::random_utf8(rng, 24);
        CHECK(detokenize(tokenize(s, t), t) == s);
    }
}

TEST_CASE("loaded BPE validates its vocab") {
    TempDir dir;
    dir.write("vocab.json", R"({"a": 0, "b": 2})");  // not dense
    dir.write("merges.txt", "");
    CHECK_THROWS_WITH_AS(
        TokenizerModel::load_bpe((dir.path / "vocab.json").string(), (dir.path / "merges.txt").string()),
        doctest::Contains("dense"), DataError);
}

TEST_CASE("tokenize rejects invalid UTF-8") {
    const TokenizerModel t = TokenizerModel::byte_fallback();
    CHECK_THROWS_AS(tokenize(std::string("\xff\xfe"), t), DataError);
    CHECK(!is_valid_utf8("\xC0\xAF"));  // overlong
    CHECK(is_valid_utf8("héllo"));
}

TEST_CASE("load_corpus orders documents lexicographically") {
    TempDir dir;
    dir.write("b.txt", "y");
    dir.write("a.txt", "x");
    dir.write("ignored.md", "not text corpus");
    const Corpus c = load_corpus(dir.path.string());
    REQUIRE(c.document_count() == 2);
    CHECK(c.documents[0].id == "a");
    CHECK(c.documents[0].text == "x");
    CHECK(c.documents[1].id == "b");
    CHECK(c.total_tokens == 2);
}

TEST_CASE("load_corpus error cases") {
    TempDir dir;
    CHECK_THROWS_AS(load_corpus(dir.path.string()), DataError);  // no .txt files
    dir.write("bad.txt", std::string("\xff\xff"));
    CHECK_THROWS_WITH_AS(load_corpus(dir.path.string()), doctest::Contains("UTF-8"), DataError);
    fs::remove(dir.path / "bad.txt");
    dir.write("empty.txt", "   \n\t ");
    CHECK_THROWS_WITH_AS(load_corpus(dir.path.string()), doctest::Contains("empty"), DataError);
    CHECK_THROWS_AS(load_corpus((dir.path / "missing").string()), DataError);
}

TEST_CASE("chunk_corpus stride arithmetic") {
    TempDir dir;
    dir.write("doc.txt", std::string(100, 'a'));  // 100 byte tokens
    const TokenizerModel t = TokenizerModel::byte_fallback();
    const Corpus c = load_corpus(dir.path.string(), t);

    const std::vector<Chunk> chunks = chunk_corpus(c, t, 40, 10);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].start == 0);
    CHECK(chunks[0].end == 40);
    CHECK(chunks[1].start == 30);
    CHECK(chunks[1].end == 70);
    CHECK(chunks[2].start == 60);
    CHECK(chunks[2].end == 100);
    CHECK(chunks[0].text.size() == 40);
    CHECK(chunks[0].chunk_id == 0);
    CHECK(chunks[2].chunk_id == 2);
    CHECK(chunks[0].doc_id == "doc");
}

TEST_CASE("chunk_corpus short document and precondition") {
    TempDir dir;
    dir.write("doc.txt", "hello");
    const TokenizerModel t = TokenizerModel::byte_fallback();
    const Corpus c = load_corpus(dir.path.string(), t);
    const std::vector<Chunk> chunks = chunk_corpus(c, t, 40, 10);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].start == 0);
    CHECK(chunks[0].end == 5);
    CHECK(chunks[0].text == "hello");

    CHECK_THROWS_AS(chunk_corpus(c, t, 40, 40), DataError);
}

TEST_CASE("chunk coverage: every token belongs to at least one chunk") {
    const TokenizerModel t = TokenizerModel::byte_fallback();
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        TempDir dir;
        const std::size_t len = 1 + rng.below(300);
        std::string text;
        for (std::size_t i = 0; i < len; ++i) text.push_back(char('a' + rng.below(26)));
        dir.write("d.txt", text);
        const Corpus c = load_corpus(dir.path.string(), t);
        const std::size_t size = 2 + rng.below(50);
        const std::size_t overlap = rng.below(size);
        const auto chunks = chunk_corpus(c, t, size, overlap);
        std::vector<bool> covered(len, false);
        for (std::size_t ci = 0; ci + 1 < chunks.size(); ++ci) {
            // consecutive chunks overlap by exactly `overlap` (final may be short)
            CHECK(chunks[ci].end - chunks[ci + 1].start == overlap);
        }
        for (const Chunk& ch : chunks) {
            CHECK(ch.start < ch.end);
            CHECK(ch.end <= len);
            for (std::size_t i = ch.start; i < ch.end; ++i) covered[i] = true;
        }
        for (bool b : covered) CHECK(b);

        // deterministic across runs
        const auto again = chunk_corpus(c, t, size, overlap);
        REQUIRE(again.size() == chunks.size());
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            CHECK(again[i].start == chunks[i].start);
            CHECK(again[i].end == chunks[i].end);
            CHECK(again[i].text == chunks[i].text);
        }
    }
}
