#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cgt/evalqa.hpp"

using namespace cgt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cgt_eval_" + std::to_string(::getpid()) +
                                            "_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    void write(const std::string& name, const std::string& text) const {
        std::ofstream((path / name).string(), std::ios::binary) << text;
    }
};

std::vector<QaItem> fixture_qa() {
    return {
        {"what does the hub collect", "the hub collects sensor readings from cabinets"},
        {"what does the relay forward", "the relay forwards fault indications over the mesh"},
        {"what does the gateway link", "the gateway links switchgear to the central server"},
    };
}

} // namespace

TEST_CASE("references used verbatim as outputs score 1 on every metric") {
    const std::vector<QaItem> qa = fixture_qa();
    std::size_t next = 0;
    AnswerFn identity = [&](const std::string&) {
        Answer a;
        a.text = qa[next++].reference_answer;
        a.seconds = 0.01;
        return a;
    };
    const MetricReport rep = evaluate_answers(identity, qa, "hybrid", 12345);
    REQUIRE(rep.rows.size() == qa.size());
    for (const QaRow& r : rep.rows) {
        CHECK(r.bleu1 == doctest::Approx(1.0));
        CHECK(r.bleu2 == doctest::Approx(1.0));
        CHECK(r.bleu4 == doctest::Approx(1.0));
        CHECK(r.rouge1 == doctest::Approx(1.0));
        CHECK(r.rouge2 == doctest::Approx(1.0));
        CHECK(r.rougeL == doctest::Approx(1.0));
        CHECK(r.jaccard == doctest::Approx(1.0));
    }
    CHECK(rep.means.bleu1 == doctest::Approx(1.0));
    CHECK(rep.param_count == 12345);
    CHECK(rep.variant == "hybrid");
}

TEST_CASE("report has one row per question plus a mean row and exact mean") {
    const std::vector<QaItem> qa = fixture_qa();
    int call = 0;
    AnswerFn vary = [&](const std::string&) {
        Answer a;
        // first answer matches its reference, the others share nothing with it
        a.text = call == 0 ? qa[0].reference_answer : "zzz qqq";
        ++call;
        return a;
    };
    const MetricReport rep = evaluate_answers(vary, qa, "hybrid", 1);
    REQUIRE(rep.rows.size() == 3);
    double hand_mean = 0.0;
    for (const QaRow& r : rep.rows) hand_mean += r.jaccard / 3.0;
    CHECK(rep.means.jaccard == doctest::Approx(hand_mean).epsilon(1e-12));

    const nlohmann::json j = rep.to_json();
    CHECK(j.at("rows").size() == 3);
    CHECK(j.at("means").contains("jaccard"));
    CHECK(rep.to_text_table().find("(mean)") != std::string::npos);

    CHECK_THROWS_AS(evaluate_answers(vary, {}, "hybrid", 1), DataError);
}

TEST_CASE("qa jsonl loading") {
    TempDir dir;
    dir.write("qa.jsonl",
              R"({"question": "q1", "reference_answer": "a1"})"
              "\n\n"
              R"({"question": "q2", "reference_answer": "a2"})"
              "\n");
    const auto items = load_qa_jsonl((dir.path / "qa.jsonl").string());
    REQUIRE(items.size() == 2);
    CHECK(items[0].question == "q1");
    CHECK(items[1].reference_answer == "a2");

    dir.write("bad.jsonl", "{nope\n");
    CHECK_THROWS_AS(load_qa_jsonl((dir.path / "bad.jsonl").string()), DataError);
    dir.write("empty.jsonl", "\n");
    CHECK_THROWS_AS(load_qa_jsonl((dir.path / "empty.jsonl").string()), DataError);
}

TEST_CASE("ablation produces the three-variant comparative layout") {
    TempDir corpus;
    corpus.write("a.txt", "the gateway links switchgear to the central server.");
    corpus.write("b.txt", "the hub collects sensor readings from cabinets.");
    corpus.write("c.txt", "the relay forwards fault indications over the mesh.");

    ModelConfig cfg;
    cfg.vocab_size = 258;
    cfg.hidden_dim = 16;
    cfg.heads = 2;
    cfg.gnn_layers = 1;
    cfg.transformer_layers = 1;
    cfg.max_seq_len = 48;

    StageConfig stage;
    stage.epochs = 1;
    stage.learning_rate = 1e-3;
    stage.batch_size = 2;
    stage.seed = 5;

    const TokenizerModel tok = TokenizerModel::byte_fallback();
    const Corpus c = load_corpus(corpus.path.string(), tok);
    RagConfig rag;
    rag.max_new_tokens = 8;
    rag.beam_width = 1;
    const AblationReport rep = ablation_run(cfg, c, tok, fixture_qa(), stage, LossCoeffs{}, rag, 3);

    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].variant == "hybrid");
    CHECK(rep.rows[1].variant == "pure_transformer");
    CHECK(rep.rows[2].variant == "pure_gnn");

    // parameter counts equal the closed form, and the hybrid is smaller than
    // the layer-matched pure transformer
    ModelConfig pt = cfg;
    pt.variant = Variant::pure_transformer;
    pt.transformer_layers = cfg.gnn_layers + cfg.transformer_layers;
    pt.gnn_layers = 0;
    CHECK(rep.rows[0].param_count == count_params(cfg).total);
    CHECK(rep.rows[1].param_count == count_params(pt).total);
    CHECK(rep.rows[0].param_count < rep.rows[1].param_count);

    const std::string table = rep.to_text_table();
    CHECK(table.find("hybrid vs pure_transformer") != std::string::npos);
    CHECK(table.find("hybrid vs pure_gnn") != std::string::npos);
    CHECK(rep.to_json().size() == 3);
}
