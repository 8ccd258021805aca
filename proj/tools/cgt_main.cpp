// cgt — command-line front end: training, graph inspection, generation,
// knowledge-base construction, RAG question answering, evaluation, ablation
// and checkpoint inspection.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
// failure (e.g. a NaN training abort).

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgt/checkpoint.hpp"
#include "cgt/evalqa.hpp"
#include "cgt/io.hpp"
#include "cgt/rag.hpp"
#include "cgt/train.hpp"

namespace {

using nlohmann::json;

struct GlobalOpts {
    std::uint64_t seed = 42;
    bool seed_given = false;
    std::string config_path;
    std::string out_dir = ".";
    bool quiet = false;
};

std::uint64_t env_seed() {
    if (const char* s = std::getenv("CGT_SEED")) {
        try {
            return std::stoull(s);
        } catch (...) {
            throw cgt::UsageError("CGT_SEED is not a valid integer");
        }
    }
    return 42;
}

cgt::TokenizerModel tokenizer_for(const cgt::ModelConfig& cfg) {
    cgt::TokenizerModel tok = cfg.tokenizer_mode == "bpe"
                                  ? cgt::TokenizerModel::load_bpe(cfg.bpe_vocab_path, cfg.bpe_merges_path)
                                  : cgt::TokenizerModel::byte_fallback();
    if (tok.vocab_size != cfg.vocab_size)
        throw cgt::DataError("config vocab_size " + std::to_string(cfg.vocab_size) +
                             " does not match tokenizer vocab " + std::to_string(tok.vocab_size));
    return tok;
}

void print_resolved(const GlobalOpts& g, const cgt::ModelConfig& cfg) {
    if (g.quiet) return;
    std::cerr << "seed: " << g.seed << "\n";
    std::cerr << "config: " << cfg.to_json_string() << "\n";
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
    } else {
        cgt::atomic_write_file(out_path, text);
    }
}

json answer_json(const cgt::Answer& a) {
    json j;
    j["text"] = a.text;
    j["retrieved"] = json::array();
    for (const auto& [id, sim] : a.retrieved) {
        json r;
        r["chunk_id"] = id;
        r["similarity"] = sim;
        j["retrieved"].push_back(r);
    }
    j["used_fallback"] = a.used_fallback;
    j["seconds"] = a.seconds;
    return j;
}

cgt::ModelConfig load_model_config(const GlobalOpts& g) {
    if (!g.config_path.empty()) return cgt::ModelConfig::from_json_file(g.config_path);
    return cgt::ModelConfig{};
}

int cmd_train(const GlobalOpts& g) {
    if (g.config_path.empty()) throw cgt::UsageError("train requires --config");
    const std::string raw = cgt::read_file_bytes(g.config_path);
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::exception& e) {
        throw cgt::DataError(std::string("config parse error: ") + e.what());
    }
    cgt::ModelConfig cfg = cgt::ModelConfig::from_json_string(raw);
    cgt::StageConfig s1 = j.contains("stage1") ? cgt::StageConfig::from_json(j.at("stage1"))
                                               : cgt::default_stage1();
    cgt::StageConfig s2 = j.contains("stage2") ? cgt::StageConfig::from_json(j.at("stage2"))
                                               : cgt::default_stage2();
    if (s1.corpus_dir.empty() || s2.corpus_dir.empty())
        throw cgt::DataError("train config: stage1/stage2 must name a corpus directory");
    if (g.seed_given) {
        s1.seed = g.seed + 1;
        s2.seed = g.seed + 2;
    }
    print_resolved(g, cfg);

    cgt::TokenizerModel tok = tokenizer_for(cfg);
    cgt::CgtModel<float> model(cfg, g.seed);
    cgt::LossCoeffs coeffs;
    cgt::TwoStageResult res = cgt::train_two_stage(model, tok, s1, s2, coeffs, g.out_dir);

    cgt::atomic_write_file(g.out_dir + "/train_report.json", res.report.to_json().dump(2));
    cgt::atomic_write_file(g.out_dir + "/train_report.txt", res.report.to_text_table());
    if (!g.quiet) {
        std::cout << res.report.to_text_table();
        std::cout << "stage1 checkpoint: " << res.stage1_checkpoint << "\n";
        std::cout << "stage2 checkpoint: " << res.stage2_checkpoint << "\n";
    }
    return 0;
}

int cmd_graph(const GlobalOpts& g, const std::string& text, const std::string& format,
              const std::string& model_path, const std::string& out_path) {
    cgt::GraphFormat fmt;
    if (format == "json") fmt = cgt::GraphFormat::json;
    else if (format == "dot") fmt = cgt::GraphFormat::dot;
    else throw cgt::UsageError("graph: --format must be json or dot");

    cgt::TokenGraph graph;
    if (!model_path.empty()) {
        cgt::CgtModel<float> model = cgt::checkpoint_load(model_path);
        print_resolved(g, model.config());
        cgt::TokenizerModel tok = tokenizer_for(model.config());
        const std::vector<int> tokens = cgt::tokenize(text, tok);
        cgt::Tape<float> tape(false);
        const int h0 = model.embed(tape, tokens);
        graph = cgt::build_graph(tape.value(h0), model.config().graph);
    } else {
        cgt::ModelConfig cfg = load_model_config(g);
        print_resolved(g, cfg);
        cgt::TokenizerModel tok = tokenizer_for(cfg);
        const std::vector<int> tokens = cgt::tokenize(text, tok);
        cgt::CgtModel<float> model(cfg, g.seed);
        cgt::Tape<float> tape(false);
        const int h0 = model.embed(tape, tokens);
        graph = cgt::build_graph(tape.value(h0), cfg.graph);
    }
    emit(cgt::export_graph(graph, fmt), out_path);
    return 0;
}

int cmd_generate(const GlobalOpts& g, const std::string& model_path, const std::string& prompt,
                 cgt::RagConfig rag, const std::string& out_path) {
    cgt::CgtModel<float> model = cgt::checkpoint_load(model_path);
    print_resolved(g, model.config());
    cgt::TokenizerModel tok = tokenizer_for(model.config());
    const std::vector<int> prompt_tokens = cgt::tokenize(prompt, tok);
    const std::vector<int> gen = cgt::generate(model, prompt_tokens, rag, tok.eos_id);
    emit(cgt::detokenize(gen, tok), out_path);
    return 0;
}

int cmd_kb_build(const GlobalOpts& g, const std::string& corpus_dir, const std::string& out_path,
                 const std::string& embedder_id, const std::string& model_path,
                 std::size_t chunk_size, std::size_t overlap) {
    std::unique_ptr<cgt::CgtModel<float>> model;
    cgt::TokenizerModel tok = cgt::TokenizerModel::byte_fallback();
    if (!model_path.empty()) {
        model = std::make_unique<cgt::CgtModel<float>>(cgt::checkpoint_load(model_path));
        tok = tokenizer_for(model->config());
        print_resolved(g, model->config());
    } else {
        print_resolved(g, cgt::ModelConfig{});
    }
    auto embedder = cgt::make_embedder(embedder_id, model.get(), &tok);
    const cgt::Corpus corpus = cgt::load_corpus(corpus_dir, tok);
    const cgt::KnowledgeBase kb = cgt::build_kb(corpus, tok, *embedder, chunk_size, overlap);
    cgt::kb_save(kb, out_path);
    if (!g.quiet)
        std::cout << "kb: " << kb.chunks.size() << " chunks from " << corpus.document_count()
                  << " documents -> " << out_path << "\n";
    return 0;
}

int cmd_ask(const GlobalOpts& g, const std::string& question, const std::string& kb_path,
            const std::string& model_path, cgt::RagConfig rag, const std::string& out_path) {
    cgt::CgtModel<float> model = cgt::checkpoint_load(model_path);
    print_resolved(g, model.config());
    cgt::TokenizerModel tok = tokenizer_for(model.config());
    const cgt::KnowledgeBase kb = cgt::kb_load(kb_path);
    auto embedder = cgt::make_embedder(kb.embedder_id, &model, &tok);
    const cgt::Answer a = cgt::ask(question, kb, model, tok, *embedder, rag);
    emit(answer_json(a).dump(2), out_path);
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& qa_path, const std::string& kb_path,
             const std::string& model_path, cgt::RagConfig rag, const std::string& out_path) {
    cgt::CgtModel<float> model = cgt::checkpoint_load(model_path);
    print_resolved(g, model.config());
    cgt::TokenizerModel tok = tokenizer_for(model.config());
    const cgt::KnowledgeBase kb = cgt::kb_load(kb_path);
    auto embedder = cgt::make_embedder(kb.embedder_id, &model, &tok);
    const std::vector<cgt::QaItem> qa = cgt::load_qa_jsonl(qa_path);
    const cgt::MetricReport rep = cgt::evaluate_qa(model, kb, tok, *embedder, qa, rag);
    const std::string path = out_path.empty() ? g.out_dir + "/eval_report.json" : out_path;
    cgt::atomic_write_file(path, rep.to_json().dump(2));
    if (!g.quiet) std::cout << rep.to_text_table();
    return 0;
}

int cmd_ablate(const GlobalOpts& g, const std::string& corpus_dir, const std::string& qa_path,
               std::size_t epochs, double lr, std::size_t batch_size) {
    cgt::ModelConfig cfg = load_model_config(g);
    if (cfg.variant != cgt::Variant::hybrid)
        throw cgt::DataError("ablate: config must describe the hybrid variant");
    print_resolved(g, cfg);
    cgt::TokenizerModel tok = tokenizer_for(cfg);
    const cgt::Corpus corpus = cgt::load_corpus(corpus_dir, tok);
    const std::vector<cgt::QaItem> qa = cgt::load_qa_jsonl(qa_path);

    cgt::StageConfig stage;
    stage.epochs = epochs;
    stage.learning_rate = lr;
    stage.batch_size = batch_size;
    stage.seed = g.seed + 1;

    cgt::RagConfig rag;
    const cgt::AblationReport rep =
        cgt::ablation_run(cfg, corpus, tok, qa, stage, cgt::LossCoeffs{}, rag, g.seed);
    cgt::atomic_write_file(g.out_dir + "/ablation_report.json", rep.to_json().dump(2));
    if (!g.quiet) std::cout << rep.to_text_table();
    return 0;
}

int cmd_inspect(const GlobalOpts& g, const std::string& path) {
    const json header = cgt::checkpoint_header(path);
    std::size_t total = 0;
    for (const json& t : header.at("tensors")) {
        std::size_t numel = 1;
        for (const auto& s : t.at("shape")) numel *= s.get<std::size_t>();
        total += numel;
    }
    if (!g.quiet) std::cerr << "seed: " << g.seed << "\n";
    json out;
    out["header"] = header;
    out["total_parameters"] = total;
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cgt: hybrid graph/transformer language model toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    try {
        g.seed = env_seed();
    } catch (const cgt::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    app.add_option("--seed", g.seed, "deterministic run seed (env CGT_SEED as fallback)")
        ->each([&g](const std::string&) { g.seed_given = true; });
    app.add_option("--config", g.config_path, "model/training config JSON");
    app.add_option("--out-dir", g.out_dir, "directory for output artifacts");
    app.add_flag("--quiet", g.quiet, "suppress progress output");

    auto* c_train = app.add_subcommand("train", "two-stage training from a config file");

    auto* c_graph = app.add_subcommand("graph", "build and export the token graph for a text");
    std::string graph_text, graph_format = "json", graph_model, graph_out;
    c_graph->add_option("--text", graph_text, "input text")->required();
    c_graph->add_option("--format", graph_format, "json or dot");
    c_graph->add_option("--model", graph_model, "checkpoint supplying embeddings");
    c_graph->add_option("--out", graph_out, "write to file instead of stdout");

    auto* c_gen = app.add_subcommand("generate", "beam-search generation from a prompt");
    std::string gen_model, gen_prompt, gen_out;
    cgt::RagConfig gen_rag;
    c_gen->add_option("--model", gen_model, "checkpoint")->required();
    c_gen->add_option("--prompt", gen_prompt, "prompt text")->required();
    c_gen->add_option("--max-new-tokens", gen_rag.max_new_tokens, "generation budget");
    c_gen->add_option("--beam-width", gen_rag.beam_width, "beam width (1 = greedy)");
    c_gen->add_option("--length-penalty", gen_rag.length_penalty, "length penalty exponent");
    c_gen->add_option("--out", gen_out, "write to file instead of stdout");

    auto* c_kb = app.add_subcommand("kb-build", "chunk a corpus and embed it into a knowledge base");
    std::string kb_corpus, kb_out = "kb.cgtk", kb_embedder = "mean-embed", kb_model;
    std::size_t kb_chunk = 128, kb_overlap = 32;
    c_kb->add_option("--corpus", kb_corpus, "directory of .txt files")->required();
    c_kb->add_option("--out", kb_out, "output kb path");
    c_kb->add_option("--embedder", kb_embedder, "mean-embed or hashed-bow");
    c_kb->add_option("--model", kb_model, "checkpoint (required for mean-embed)");
    c_kb->add_option("--chunk-size", kb_chunk, "chunk size in tokens");
    c_kb->add_option("--overlap", kb_overlap, "chunk overlap in tokens");

    auto* c_ask = app.add_subcommand("ask", "RAG question answering");
    std::string ask_q, ask_kb, ask_model, ask_out;
    cgt::RagConfig ask_rag;
    c_ask->add_option("--question", ask_q, "question text")->required();
    c_ask->add_option("--kb", ask_kb, "knowledge base file")->required();
    c_ask->add_option("--model", ask_model, "checkpoint")->required();
    c_ask->add_option("--k", ask_rag.k, "retrieved chunks");
    c_ask->add_option("--beam-width", ask_rag.beam_width, "beam width");
    c_ask->add_option("--max-new-tokens", ask_rag.max_new_tokens, "generation budget");
    c_ask->add_option("--quality-threshold", ask_rag.quality_threshold, "grounding-ratio gate");
    c_ask->add_option("--out", ask_out, "write answer JSON to file");

    auto* c_eval = app.add_subcommand("eval", "score RAG answers against a QA set");
    std::string eval_qa, eval_kb, eval_model, eval_out;
    cgt::RagConfig eval_rag;
    c_eval->add_option("--qa", eval_qa, "JSON-lines QA set")->required();
    c_eval->add_option("--kb", eval_kb, "knowledge base file")->required();
    c_eval->add_option("--model", eval_model, "checkpoint")->required();
    c_eval->add_option("--k", eval_rag.k, "retrieved chunks");
    c_eval->add_option("--beam-width", eval_rag.beam_width, "beam width");
    c_eval->add_option("--max-new-tokens", eval_rag.max_new_tokens, "generation budget");
    c_eval->add_option("--out", eval_out, "report JSON path");

    auto* c_abl = app.add_subcommand("ablate", "train and compare hybrid / pure variants");
    std::string abl_corpus, abl_qa;
    std::size_t abl_epochs = 2, abl_batch = 8;
    double abl_lr = 1e-3;
    c_abl->add_option("--corpus", abl_corpus, "directory of .txt files")->required();
    c_abl->add_option("--qa", abl_qa, "JSON-lines QA set")->required();
    c_abl->add_option("--epochs", abl_epochs, "epochs per variant");
    c_abl->add_option("--lr", abl_lr, "learning rate");
    c_abl->add_option("--batch-size", abl_batch, "batch size");

    auto* c_ins = app.add_subcommand("inspect-checkpoint", "print checkpoint header and stats");
    std::string ins_file;
    c_ins->add_option("--file", ins_file, "checkpoint path")->required();

    // global flags (--seed, --config, --out-dir, --quiet) are accepted after
    // the subcommand as well
    for (CLI::App* sc : app.get_subcommands([](const CLI::App*) { return true; }))
        sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (c_train->parsed()) return cmd_train(g);
        if (c_graph->parsed()) return cmd_graph(g, graph_text, graph_format, graph_model, graph_out);
        if (c_gen->parsed()) return cmd_generate(g, gen_model, gen_prompt, gen_rag, gen_out);
        if (c_kb->parsed())
            return cmd_kb_build(g, kb_corpus, kb_out, kb_embedder, kb_model, kb_chunk, kb_overlap);
        if (c_ask->parsed()) return cmd_ask(g, ask_q, ask_kb, ask_model, ask_rag, ask_out);
        if (c_eval->parsed()) return cmd_eval(g, eval_qa, eval_kb, eval_model, eval_rag, eval_out);
        if (c_abl->parsed()) return cmd_ablate(g, abl_corpus, abl_qa, abl_epochs, abl_lr, abl_batch);
        if (c_ins->parsed()) return cmd_inspect(g, ins_file);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const cgt::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const cgt::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const cgt::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
