#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgt/rag.hpp"
#include "cgt/train.hpp"

namespace cgt {

struct QaItem {
    std::string question;
    std::string reference_answer;
};

// JSON-lines, one {question, reference_answer} object per line.
std::vector<QaItem> load_qa_jsonl(const std::string& path);

struct QaRow {
    std::string question;
    double bleu1 = 0, bleu2 = 0, bleu4 = 0;
    double rouge1 = 0, rouge2 = 0, rougeL = 0;
    double jaccard = 0;
    double seconds = 0;
};

struct MetricReport {
    std::string variant;
    std::size_t param_count = 0;
    std::vector<QaRow> rows;
    QaRow means;

    nlohmann::json to_json() const;
    std::string to_text_table() const;
};

using AnswerFn = std::function<Answer(const std::string& question)>;

// Scores one answerer against the references; the seam lets tests inject a
// fixed answerer in place of the full RAG pipeline.
MetricReport evaluate_answers(const AnswerFn& answer, const std::vector<QaItem>& qa,
                              const std::string& variant, std::size_t param_count);

MetricReport evaluate_qa(CgtModel<float>& model, const KnowledgeBase& kb,
                         const TokenizerModel& tok, const Embedder& embedder,
                         const std::vector<QaItem>& qa, const RagConfig& cfg);

struct AblationRow {
    std::string variant;
    std::size_t param_count = 0;
    double final_loss = 0.0;
    MetricReport metrics;
};

struct AblationReport {
    std::vector<AblationRow> rows;  // hybrid, pure_transformer, pure_gnn

    nlohmann::json to_json() const;
    // Variant / params / loss side-by-side with improvement deltas.
    std::string to_text_table() const;
};

// Trains the hybrid config plus its two single-stack counterparts (a pure
// transformer with gnn_layers+transformer_layers layers and a pure GNN with
// gnn_layers layers) on identical data and seeds, then evaluates each on the
// QA set.
AblationReport ablation_run(const ModelConfig& hybrid_cfg, const Corpus& corpus,
                            const TokenizerModel& tok, const std::vector<QaItem>& qa,
                            const StageConfig& stage, const LossCoeffs& coeffs,
                            const RagConfig& rag_cfg, std::uint64_t model_seed);

} // namespace cgt
