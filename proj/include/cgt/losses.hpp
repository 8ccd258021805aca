#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "cgt/autodiff.hpp"
#include "cgt/model.hpp"

namespace cgt {

struct LossCoeffs {
    double lambda = 0.1;  // graph
    double gamma = 0.05;  // attention entropy
    double beta = 0.02;   // consistency
};

struct LossBreakdown {
    double lm = 0.0;
    double graph = 0.0;
    double attention = 0.0;
    double consistency = 0.0;
    double total = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o) {
        lm += o.lm;
        graph += o.graph;
        attention += o.attention;
        consistency += o.consistency;
        total += o.total;
        return *this;
    }
    LossBreakdown scaled(double c) const { return {lm * c, graph * c, attention * c, consistency * c, total * c}; }
};

// Mean token-level cross entropy over unmasked positions, next-token targets.
template <typename T>
int lm_loss(Tape<T>& tape, int logits, const std::vector<int>& targets,
            const std::vector<std::uint8_t>& mask) {
    return tape.cross_entropy_mean(logits, targets, mask);
}

// 0.5 * ||A - A^T||_F^2 of a raw adjacency matrix. Zero by construction for
// graphs built by build_graph; nonzero only for hand-made matrices.
inline double adjacency_asymmetry(const std::vector<double>& a, std::size_t n) {
    if (a.size() != n * n) throw DataError("adjacency_asymmetry: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double d = a[i * n + j] - a[j * n + i];
            s += d * d;
        }
    return 0.5 * s;
}

// -sum over edges of log(mean-over-heads alpha_ij) + 0.5||A - A^T||_F^2
template <typename T>
int graph_loss(Tape<T>& tape, const std::vector<int>& head_alphas,
               const std::vector<std::pair<int, int>>& edges,
               const std::vector<double>& adjacency, std::size_t n) {
    if (head_alphas.empty()) throw DataError("graph_loss: no attention heads");
    int alpha_mean = head_alphas[0];
    for (std::size_t h = 1; h < head_alphas.size(); ++h)
        alpha_mean = tape.add(alpha_mean, head_alphas[h]);
    alpha_mean = tape.scale(alpha_mean, 1.0 / static_cast<double>(head_alphas.size()));
    const double sym = adjacency_asymmetry(adjacency, n);
    int out = tape.neg_log_sum_entries(
        alpha_mean, std::make_shared<const std::vector<std::pair<int, int>>>(edges));
    if (sym != 0.0) out = tape.add_const(out, Tensor<T>::scalar(static_cast<T>(sym)));
    return out;
}

// Value-level form for hand-supplied attention/adjacency.
inline double graph_loss_value(const Tensor<double>& alpha,
                               const std::vector<std::pair<int, int>>& edges,
                               const std::vector<double>& adjacency, std::size_t n) {
    double s = 0.0;
    for (const auto& [i, j] : edges) {
        const double p = alpha.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if (!(p > 0.0)) throw NumericError("graph_loss: non-positive attention on edge");
        s -= std::log(p);
    }
    return s + adjacency_asymmetry(adjacency, n);
}

// -sum over layers and heads of the mean row entropy (natural log) of each
// attention matrix. Minimizing this maximizes entropy. Rows must be
// probability distributions over the unmasked keys (checked to 1e-4).
template <typename T>
int attention_entropy_loss(Tape<T>& tape, const std::vector<std::vector<int>>& attn,
                           const std::shared_ptr<std::vector<std::uint8_t>>& mask) {
    int acc = -1;
    for (const auto& layer : attn) {
        for (int head : layer) {
            const Tensor<T>& p = tape.value(head);
            const std::size_t n = p.rows(), m = p.cols();
            for (std::size_t i = 0; i < n; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < m; ++j)
                    if ((*mask)[i * m + j]) row += static_cast<double>(p.at(i, j));
                if (std::abs(row - 1.0) > 1e-4)
                    throw NumericError("attention_entropy_loss: attention row not normalized");
            }
            int ent = tape.mean_row_entropy(head, mask);
            acc = acc < 0 ? ent : tape.add(acc, ent);
        }
    }
    if (acc < 0) throw DataError("attention_entropy_loss: no attention tensors");
    return tape.scale(acc, -1.0);
}

// ||H_GNN - H_Trans||_2^2, summed over entries.
template <typename T>
int consistency_loss(Tape<T>& tape, int h_gnn, int h_trans) {
    return tape.sum_squares(tape.sub(h_gnn, h_trans));
}

// total = lm + lambda*graph + gamma*attention + beta*consistency.
// Component refs may be -1 when a variant lacks the corresponding block.
template <typename T>
int total_loss(Tape<T>& tape, int lm, int graph, int attention, int consistency,
               const LossCoeffs& c) {
    for (int r : {lm, graph, attention, consistency})
        if (r >= 0 && !std::isfinite(static_cast<double>(tape.value(r).data[0])))
            throw NumericError("total_loss: non-finite component");
    int total = lm;
    if (graph >= 0) total = tape.add(total, tape.scale(graph, c.lambda));
    if (attention >= 0) total = tape.add(total, tape.scale(attention, c.gamma));
    if (consistency >= 0) total = tape.add(total, tape.scale(consistency, c.beta));
    return total;
}

template <typename T>
struct SequenceLoss {
    int lm = -1;
    int graph = -1;
    int attention = -1;
    int consistency = -1;
    int total = -1;
    LossBreakdown values;
};

// Composite loss for one forward trace under the variant's applicable terms:
// graph term needs a GNN stack, attention term a transformer stack, and the
// consistency term both.
template <typename T>
SequenceLoss<T> compose_losses(Tape<T>& tape, const ForwardTrace<T>& tr,
                               const std::vector<int>& targets,
                               const std::vector<std::uint8_t>& mask, const LossCoeffs& c) {
    SequenceLoss<T> out;
    out.lm = lm_loss(tape, tr.logits, targets, mask);
    if (tr.has_graph && !tr.gnn_alpha.empty())
        out.graph = graph_loss(tape, tr.gnn_alpha, tr.graph.edge_pairs(), tr.graph.adjacency,
                               tr.graph.n);
    if (!tr.attn.empty()) out.attention = attention_entropy_loss(tape, tr.attn, tr.attn_mask);
    if (tr.h_gnn >= 0 && tr.h_trans >= 0)
        out.consistency = consistency_loss(tape, tr.h_gnn, tr.h_trans);
    out.total = total_loss(tape, out.lm, out.graph, out.attention, out.consistency, c);

    out.values.lm = static_cast<double>(tape.value(out.lm).data[0]);
    out.values.graph = out.graph >= 0 ? static_cast<double>(tape.value(out.graph).data[0]) : 0.0;
    out.values.attention =
        out.attention >= 0 ? static_cast<double>(tape.value(out.attention).data[0]) : 0.0;
    out.values.consistency =
        out.consistency >= 0 ? static_cast<double>(tape.value(out.consistency).data[0]) : 0.0;
    // the reported total is the exact weighted sum of the reported
    // components; the tape node realizes the same sum at working precision
    out.values.total = out.values.lm + c.lambda * out.values.graph +
                       c.gamma * out.values.attention + c.beta * out.values.consistency;
    return out;
}

} // namespace cgt
