#include "cgt/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "cgt/checkpoint.hpp"
#include "cgt/rng.hpp"

namespace cgt {

using nlohmann::json;

void StageConfig::validate() const {
    if (epochs < 1) throw DataError("stage config: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw DataError("stage config: learning_rate must be positive");
    if (batch_size < 1) throw DataError("stage config: batch_size must be >= 1");
}

StageConfig StageConfig::from_json(const json& j) {
    StageConfig s;
    if (j.contains("epochs")) s.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("learning_rate")) s.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("batch_size")) s.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("corpus")) s.corpus_dir = j.at("corpus").get<std::string>();
    if (j.contains("max_seq_len")) s.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
}

json StageConfig::to_json() const {
    json j;
    j["epochs"] = epochs;
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["corpus"] = corpus_dir;
    j["max_seq_len"] = max_seq_len;
    j["seed"] = seed;
    return j;
}

StageConfig default_stage1() {
    StageConfig s;
    s.epochs = 5;
    s.learning_rate = 1e-4;
    s.batch_size = 16;
    s.seed = 1;
    return s;
}

StageConfig default_stage2() {
    StageConfig s;
    s.epochs = 5;
    s.learning_rate = 5e-5;
    s.batch_size = 8;
    s.seed = 2;
    return s;
}

static json breakdown_json(const LossBreakdown& b) {
    json j;
    j["lm"] = b.lm;
    j["graph"] = b.graph;
    j["attention"] = b.attention;
    j["consistency"] = b.consistency;
    j["total"] = b.total;
    return j;
}

json TrainReport::to_json() const {
    json j;
    auto stage_json = [](const std::vector<EpochStats>& st, double seconds) {
        json s;
        s["epochs"] = json::array();
        for (const EpochStats& e : st) {
            json je = breakdown_json(e.mean);
            je["steps"] = e.steps;
            s["epochs"].push_back(je);
        }
        s["seconds"] = seconds;
        return s;
    };
    j["stage1"] = stage_json(stage1, stage1_seconds);
    j["stage2"] = stage_json(stage2, stage2_seconds);
    j["final_eval_loss"] = final_eval_loss;
    return j;
}

std::string TrainReport::to_text_table() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-7s %-6s %10s %10s %10s %12s %10s\n", "stage", "epoch",
                  "lm", "graph", "attention", "consistency", "total");
    out += line;
    auto rows = [&](const std::vector<EpochStats>& st, int stage) {
        for (std::size_t e = 0; e < st.size(); ++e) {
            const LossBreakdown& b = st[e].mean;
            std::snprintf(line, sizeof line, "%-7d %-6zu %10.4f %10.4f %10.4f %12.4f %10.4f\n",
                          stage, e + 1, b.lm, b.graph, b.attention, b.consistency, b.total);
            out += line;
        }
    };
    rows(stage1, 1);
    rows(stage2, 2);
    std::snprintf(line, sizeof line, "final eval loss: %.4f\n", final_eval_loss);
    out += line;
    return out;
}

std::vector<std::vector<int>> make_training_sequences(const Corpus& corpus,
                                                      const TokenizerModel& tok,
                                                      std::size_t max_len, int eos_id) {
    if (max_len < 2) throw DataError("make_training_sequences: max_len must be >= 2");
    std::vector<std::vector<int>> seqs;
    for (const Document& doc : corpus.documents) {
        std::vector<int> ids = tokenize(doc.text, tok);
        ids.push_back(eos_id);
        std::size_t start = 0;
        while (start + 1 < ids.size()) {
            const std::size_t end = std::min(start + max_len, ids.size());
            seqs.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start),
                              ids.begin() + static_cast<std::ptrdiff_t>(end));
            if (end == ids.size()) break;
            start = end - 1;  // window overlap of one token
        }
    }
    return seqs;
}

LossBreakdown train_batch(CgtModel<float>& model, const std::vector<std::vector<int>>& batch,
                          const LossCoeffs& coeffs, AdamState<float>& opt, double lr) {
    if (batch.empty()) throw DataError("train_batch: empty batch");
    model.params().zero_grads();
    LossBreakdown sum;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const std::vector<int>& seq : batch) {
        if (seq.size() < 2) throw DataError("train_batch: sequence shorter than 2 tokens");
        Tape<float> tape;
        ForwardTrace<float> tr = model.forward(tape, seq);
        std::vector<int> targets(seq.begin() + 1, seq.end());
        targets.push_back(0);
        std::vector<std::uint8_t> mask(seq.size(), 1);
        if (!mask.empty()) mask.back() = 0;
        SequenceLoss<float> loss = compose_losses(tape, tr, targets, mask, coeffs);
        if (!std::isfinite(loss.values.total))
            throw NumericError("training step aborted: non-finite loss (lm=" +
                               std::to_string(loss.values.lm) + ")");
        tape.backward(loss.total, inv_b);
        sum += loss.values;
    }
    adam_step(model.params(), opt, lr);
    return sum.scaled(inv_b);
}

std::vector<EpochStats> train_stage(CgtModel<float>& model, const Corpus& corpus,
                                    const TokenizerModel& tok, const StageConfig& stage,
                                    const LossCoeffs& coeffs) {
    stage.validate();
    const std::size_t max_len =
        stage.max_seq_len == 0 ? model.config().max_seq_len
                               : std::min(stage.max_seq_len, model.config().max_seq_len);
    std::vector<std::vector<int>> seqs = make_training_sequences(corpus, tok, max_len, tok.eos_id);
    if (seqs.empty()) throw DataError("train_stage: corpus produced no training sequences");

    AdamState<float> opt;
    opt.init(model.params());

    std::vector<EpochStats> epochs;
    for (std::size_t epoch = 0; epoch < stage.epochs; ++epoch) {
        std::vector<std::size_t> order(seqs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(stage.seed + 0x9e3779b97f4a7c15ull * (epoch + 1));
        shuffle_rng.shuffle(order);

        EpochStats stats;
        LossBreakdown epoch_sum;
        for (std::size_t b = 0; b < order.size(); b += stage.batch_size) {
            std::vector<std::vector<int>> batch;
            for (std::size_t i = b; i < std::min(b + stage.batch_size, order.size()); ++i)
                batch.push_back(seqs[order[i]]);
            epoch_sum += train_batch(model, batch, coeffs, opt, stage.learning_rate);
            stats.steps += 1;
        }
        stats.mean = epoch_sum.scaled(1.0 / static_cast<double>(stats.steps));
        epochs.push_back(stats);
    }
    return epochs;
}

double evaluate_lm_loss(CgtModel<float>& model, const Corpus& corpus, const TokenizerModel& tok,
                        std::size_t max_len) {
    std::vector<std::vector<int>> seqs = make_training_sequences(corpus, tok, max_len, tok.eos_id);
    if (seqs.empty()) throw DataError("evaluate_lm_loss: no sequences");
    double total = 0.0;
    for (const std::vector<int>& seq : seqs) {
        Tape<float> tape;
        ForwardTrace<float> tr = model.forward(tape, seq);
        std::vector<int> targets(seq.begin() + 1, seq.end());
        targets.push_back(0);
        std::vector<std::uint8_t> mask(seq.size(), 1);
        if (!mask.empty()) mask.back() = 0;
        total += static_cast<double>(tape.value(lm_loss(tape, tr.logits, targets, mask)).data[0]);
    }
    return total / static_cast<double>(seqs.size());
}

TwoStageResult train_two_stage(CgtModel<float>& model, const TokenizerModel& tok,
                               const StageConfig& stage1, const StageConfig& stage2,
                               const LossCoeffs& coeffs, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    const std::string p1 = (fs::path(out_dir) / "stage1.cgt1").string();
    const std::string p2 = (fs::path(out_dir) / "stage2.cgt1").string();

    const Corpus c1 = load_corpus(stage1.corpus_dir, tok);
    const Corpus c2 = load_corpus(stage2.corpus_dir, tok);

    TwoStageResult res;
    using clock = std::chrono::steady_clock;

    const auto t0 = clock::now();
    res.report.stage1 = train_stage(model, c1, tok, stage1, coeffs);
    res.report.stage1_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    checkpoint_save(model, p1);
    res.stage1_checkpoint = p1;

    const auto t1 = clock::now();
    res.report.stage2 = train_stage(model, c2, tok, stage2, coeffs);
    res.report.stage2_seconds = std::chrono::duration<double>(clock::now() - t1).count();
    checkpoint_save(model, p2);
    res.stage2_checkpoint = p2;

    const std::size_t max_len =
        stage2.max_seq_len == 0 ? model.config().max_seq_len
                                : std::min(stage2.max_seq_len, model.config().max_seq_len);
    res.report.final_eval_loss = evaluate_lm_loss(model, c2, tok, max_len);
    return res;
}

} // namespace cgt
