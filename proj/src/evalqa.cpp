#include "cgt/evalqa.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "cgt/metrics.hpp"

namespace cgt {

using nlohmann::json;

std::vector<QaItem> load_qa_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open qa file: " + path);
    std::vector<QaItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("qa file line " + std::to_string(lineno) + ": " + e.what());
        }
        QaItem item;
        item.question = j.at("question").get<std::string>();
        item.reference_answer = j.at("reference_answer").get<std::string>();
        if (item.question.empty() || item.reference_answer.empty())
            throw DataError("qa file line " + std::to_string(lineno) + ": empty field");
        items.push_back(std::move(item));
    }
    if (items.empty()) throw DataError("qa file has no entries: " + path);
    return items;
}

static json row_json(const QaRow& r, bool with_question) {
    json j;
    if (with_question) j["question"] = r.question;
    j["bleu1"] = r.bleu1;
    j["bleu2"] = r.bleu2;
    j["bleu4"] = r.bleu4;
    j["rouge1"] = r.rouge1;
    j["rouge2"] = r.rouge2;
    j["rougeL"] = r.rougeL;
    j["jaccard"] = r.jaccard;
    j["seconds"] = r.seconds;
    return j;
}

json MetricReport::to_json() const {
    json j;
    j["variant"] = variant;
    j["params"] = param_count;
    j["rows"] = json::array();
    for (const QaRow& r : rows) j["rows"].push_back(row_json(r, true));
    j["means"] = row_json(means, false);
    return j;
}

std::string MetricReport::to_text_table() const {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "variant: %s   params: %zu\n", variant.c_str(), param_count);
    out += line;
    std::snprintf(line, sizeof line, "%-32s %7s %7s %7s %7s %7s %7s %8s %8s\n", "question",
                  "bleu1", "bleu2", "bleu4", "rouge1", "rouge2", "rougeL", "jaccard", "seconds");
    out += line;
    auto fmt_row = [&](const char* name, const QaRow& r) {
        std::snprintf(line, sizeof line, "%-32.32s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %8.4f %8.4f\n",
                      name, r.bleu1, r.bleu2, r.bleu4, r.rouge1, r.rouge2, r.rougeL, r.jaccard,
                      r.seconds);
        out += line;
    };
    for (const QaRow& r : rows) fmt_row(r.question.c_str(), r);
    fmt_row("(mean)", means);
    return out;
}

MetricReport evaluate_answers(const AnswerFn& answer, const std::vector<QaItem>& qa,
                              const std::string& variant, std::size_t param_count) {
    if (qa.empty()) throw DataError("evaluate_answers: empty qa set");
    MetricReport rep;
    rep.variant = variant;
    rep.param_count = param_count;
    for (const QaItem& item : qa) {
        const Answer a = answer(item.question);
        const std::vector<std::string> cand = metric_tokens(a.text);
        const std::vector<std::string> ref = metric_tokens(item.reference_answer);
        QaRow row;
        row.question = item.question;
        row.bleu1 = bleu_n(cand, ref, 1);
        row.bleu2 = bleu_n(cand, ref, 2);
        row.bleu4 = bleu_n(cand, ref, 4);
        row.rouge1 = rouge_n(cand, ref, 1).f1;
        row.rouge2 = ref.size() >= 2 ? rouge_n(cand, ref, 2).f1 : 0.0;
        row.rougeL = rouge_l(cand, ref).f1;
        row.jaccard = jaccard(std::set<std::string>(cand.begin(), cand.end()),
                              std::set<std::string>(ref.begin(), ref.end()));
        row.seconds = a.seconds;
        rep.rows.push_back(std::move(row));
    }
    const double inv = 1.0 / static_cast<double>(rep.rows.size());
    for (const QaRow& r : rep.rows) {
        rep.means.bleu1 += r.bleu1 * inv;
        rep.means.bleu2 += r.bleu2 * inv;
        rep.means.bleu4 += r.bleu4 * inv;
        rep.means.rouge1 += r.rouge1 * inv;
        rep.means.rouge2 += r.rouge2 * inv;
        rep.means.rougeL += r.rougeL * inv;
        rep.means.jaccard += r.jaccard * inv;
        rep.means.seconds += r.seconds * inv;
    }
    rep.means.question = "(mean)";
    return rep;
}

MetricReport evaluate_qa(CgtModel<float>& model, const KnowledgeBase& kb,
                         const TokenizerModel& tok, const Embedder& embedder,
                         const std::vector<QaItem>& qa, const RagConfig& cfg) {
    AnswerFn fn = [&](const std::string& question) {
        return ask(question, kb, model, tok, embedder, cfg);
    };
    return evaluate_answers(fn, qa, variant_name(model.config().variant),
                            count_params(model.config()).total);
}

json AblationReport::to_json() const {
    json j = json::array();
    for (const AblationRow& r : rows) {
        json jr;
        jr["variant"] = r.variant;
        jr["params"] = r.param_count;
        jr["final_loss"] = r.final_loss;
        jr["metrics"] = r.metrics.to_json();
        j.push_back(jr);
    }
    return j;
}

std::string AblationReport::to_text_table() const {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %14s %12s %8s %8s %8s\n", "variant", "params",
                  "final_loss", "bleu1", "rougeL", "jaccard");
    out += line;
    for (const AblationRow& r : rows) {
        std::snprintf(line, sizeof line, "%-28s %14zu %12.4f %8.4f %8.4f %8.4f\n", r.variant.c_str(),
                      r.param_count, r.final_loss, r.metrics.means.bleu1, r.metrics.means.rougeL,
                      r.metrics.means.jaccard);
        out += line;
    }
    if (rows.size() >= 2) {
        const AblationRow& hybrid = rows[0];
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double dp = 100.0 * (static_cast<double>(hybrid.param_count) /
                                           static_cast<double>(rows[i].param_count) -
                                       1.0);
            const double dl = 100.0 * (1.0 - hybrid.final_loss / rows[i].final_loss);
            std::snprintf(line, sizeof line, "hybrid vs %-18s %+13.1f%% params %+10.1f%% loss\n",
                          rows[i].variant.c_str(), dp, dl);
            out += line;
        }
    }
    return out;
}

AblationReport ablation_run(const ModelConfig& hybrid_cfg, const Corpus& corpus,
                            const TokenizerModel& tok, const std::vector<QaItem>& qa,
                            const StageConfig& stage, const LossCoeffs& coeffs,
                            const RagConfig& rag_cfg, std::uint64_t model_seed) {
    if (hybrid_cfg.variant != Variant::hybrid)
        throw DataError("ablation_run: base config must be the hybrid variant");

    ModelConfig pure_trans = hybrid_cfg;
    pure_trans.variant = Variant::pure_transformer;
    pure_trans.transformer_layers = hybrid_cfg.gnn_layers + hybrid_cfg.transformer_layers;
    pure_trans.gnn_layers = 0;

    ModelConfig pure_gnn = hybrid_cfg;
    pure_gnn.variant = Variant::pure_gnn;
    pure_gnn.transformer_layers = 0;

    AblationReport rep;
    for (const ModelConfig& cfg : {hybrid_cfg, pure_trans, pure_gnn}) {
        CgtModel<float> model(cfg, model_seed);
        train_stage(model, corpus, tok, stage, coeffs);
        const std::size_t max_len =
            stage.max_seq_len == 0 ? cfg.max_seq_len : std::min(stage.max_seq_len, cfg.max_seq_len);

        AblationRow row;
        row.variant = variant_name(cfg.variant);
        row.param_count = count_params(cfg).total;
        row.final_loss = evaluate_lm_loss(model, corpus, tok, max_len);

        const HashedBowEmbedder embedder;
        const KnowledgeBase kb = build_kb(corpus, tok, embedder, 128, 32);
        row.metrics = evaluate_qa(model, kb, tok, embedder, qa, rag_cfg);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

} // namespace cgt
