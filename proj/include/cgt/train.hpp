#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgt/adam.hpp"
#include "cgt/corpus.hpp"
#include "cgt/losses.hpp"
#include "cgt/model.hpp"

namespace cgt {

struct StageConfig {
    std::size_t epochs = 5;
    double learning_rate = 1e-4;
    std::size_t batch_size = 16;
    std::string corpus_dir;
    std::size_t max_seq_len = 0;  // 0 = model max_seq_len
    std::uint64_t seed = 1;

    void validate() const;
    static StageConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Paper-default stages: 5 epochs at 1e-4 / batch 16, then 5 epochs at 5e-5 /
// batch 8.
StageConfig default_stage1();
StageConfig default_stage2();

struct EpochStats {
    LossBreakdown mean;
    std::size_t steps = 0;
};

struct TrainReport {
    std::vector<EpochStats> stage1;
    std::vector<EpochStats> stage2;
    double stage1_seconds = 0.0;
    double stage2_seconds = 0.0;
    double final_eval_loss = 0.0;

    nlohmann::json to_json() const;
    std::string to_text_table() const;
};

// Teacher-forced LM windows: each document is tokenized, terminated with eos,
// and cut into windows of at most max_len tokens overlapping by one token so
// every transition is predicted exactly once. Windows shorter than 2 tokens
// are dropped.
std::vector<std::vector<int>> make_training_sequences(const Corpus& corpus,
                                                      const TokenizerModel& tok,
                                                      std::size_t max_len, int eos_id);

// One optimizer step over a batch of sequences; gradients are averaged over
// the batch. Returns the batch-mean loss breakdown. Aborts with NumericError
// on a non-finite loss.
LossBreakdown train_batch(CgtModel<float>& model, const std::vector<std::vector<int>>& batch,
                          const LossCoeffs& coeffs, AdamState<float>& opt, double lr);

std::vector<EpochStats> train_stage(CgtModel<float>& model, const Corpus& corpus,
                                    const TokenizerModel& tok, const StageConfig& stage,
                                    const LossCoeffs& coeffs);

// Mean LM cross-entropy over the corpus, no parameter updates.
double evaluate_lm_loss(CgtModel<float>& model, const Corpus& corpus, const TokenizerModel& tok,
                        std::size_t max_len);

struct TwoStageResult {
    TrainReport report;
    std::string stage1_checkpoint;
    std::string stage2_checkpoint;
};

// Stage 1 on the general corpus, checkpoint, stage 2 continuing on the
// domain corpus, checkpoint, then a no-update eval pass on the stage-2
// corpus. Optimizer state restarts at the stage boundary.
TwoStageResult train_two_stage(CgtModel<float>& model, const TokenizerModel& tok,
                               const StageConfig& stage1, const StageConfig& stage2,
                               const LossCoeffs& coeffs, const std::string& out_dir);

} // namespace cgt
