#pragma once

#include <set>
#include <string>
#include <vector>

namespace cgt {

// Metric tokenization, independent of the model tokenizer: lowercase (ASCII),
// split on whitespace and at letter/digit vs punctuation boundaries.
// Punctuation runs are tokens of their own.
std::vector<std::string> metric_tokens(const std::string& text);

// BLEU-max_n: geometric mean of modified n-gram precisions for n = 1..max_n
// with brevity penalty exp(1 - r/c) when c < r. No smoothing: any zero
// precision gives 0; empty candidate gives 0.
double bleu_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
              int max_n);

struct RougeScore {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);
// Longest-common-subsequence variant.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

// |a intersect b| / |a union b|; both empty -> 1.0 by convention.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// 1 / (parameters_in_millions * loss); both inputs must be positive.
double efficiency(double params_millions, double loss);

} // namespace cgt
