#include "cgt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cgt/errors.hpp"

namespace cgt {

namespace {

enum class CharClass { space, word, punct };

CharClass classify(unsigned char c) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return CharClass::space;
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80)
        return CharClass::word;
    return CharClass::punct;
}

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::map<std::vector<std::string>, int> counts;
    if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
        counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)] += 1;
    return counts;
}

} // namespace

std::vector<std::string> metric_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    CharClass cur_class = CharClass::space;
    for (unsigned char c : text) {
        const CharClass cls = classify(c);
        if (cls != cur_class && !cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
        cur_class = cls;
        if (cls == CharClass::space) continue;
        cur.push_back(static_cast<char>(
            c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double bleu_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
              int max_n) {
    if (max_n != 1 && max_n != 2 && max_n != 4) throw DataError("bleu_n: max_n must be 1, 2 or 4");
    if (reference.empty()) throw DataError("bleu_n: empty reference");
    if (candidate.empty()) return 0.0;

    double log_prec_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        std::size_t total = 0, clipped = 0;
        for (const auto& [gram, count] : cand) {
            total += static_cast<std::size_t>(count);
            auto it = ref.find(gram);
            if (it != ref.end()) clipped += static_cast<std::size_t>(std::min(count, it->second));
        }
        if (total == 0 || clipped == 0) return 0.0;
        log_prec_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_prec_sum / max_n);
}

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
    if (n < 1) throw DataError("rouge_n: n must be >= 1");
    if (reference.empty()) throw DataError("rouge_n: empty reference");
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t cand_total = 0, ref_total = 0, overlap = 0;
    for (const auto& [gram, count] : cand) cand_total += static_cast<std::size_t>(count);
    for (const auto& [gram, count] : ref) ref_total += static_cast<std::size_t>(count);
    for (const auto& [gram, count] : ref) {
        auto it = cand.find(gram);
        if (it != cand.end()) overlap += static_cast<std::size_t>(std::min(count, it->second));
    }
    RougeScore s;
    s.recall = ref_total > 0 ? static_cast<double>(overlap) / static_cast<double>(ref_total) : 0.0;
    s.precision = cand_total > 0 ? static_cast<double>(overlap) / static_cast<double>(cand_total) : 0.0;
    s.f1 = s.recall + s.precision > 0.0 ? 2.0 * s.recall * s.precision / (s.recall + s.precision) : 0.0;
    return s;
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
    if (reference.empty()) throw DataError("rouge_l: empty reference");
    const std::size_t nc = candidate.size(), nr = reference.size();
    std::vector<std::size_t> prev(nr + 1, 0), cur(nr + 1, 0);
    for (std::size_t i = 1; i <= nc; ++i) {
        for (std::size_t j = 1; j <= nr; ++j) {
            cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                          : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[nr]);
    RougeScore s;
    s.recall = lcs / static_cast<double>(nr);
    s.precision = nc > 0 ? lcs / static_cast<double>(nc) : 0.0;
    s.f1 = s.recall + s.precision > 0.0 ? 2.0 * s.recall * s.precision / (s.recall + s.precision) : 0.0;
    return s;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const std::string& x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double efficiency(double params_millions, double loss) {
    if (!(params_millions > 0.0) || !(loss > 0.0))
        throw DataError("efficiency: inputs must be positive");
    return 1.0 / (params_millions * loss);
}

} // namespace cgt
