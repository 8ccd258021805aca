#include "cgt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace cgt {

const char* edge_kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::sequential: return "sequential";
        case EdgeKind::skip: return "skip";
        case EdgeKind::semantic: return "semantic";
    }
    return "?";
}

static EdgeKind edge_kind_from_name(const std::string& s) {
    if (s == "sequential") return EdgeKind::sequential;
    if (s == "skip") return EdgeKind::skip;
    if (s == "semantic") return EdgeKind::semantic;
    throw DataError("unknown edge kind: " + s);
}

void GraphConfig::validate() const {
    if (!(skip_threshold > 0.0 && skip_threshold < 1.0))
        throw DataError("graph config: skip_threshold must be in (0,1)");
    if (!(sem_threshold > 0.0 && sem_threshold < 1.0))
        throw DataError("graph config: sem_threshold must be in (0,1)");
    if (!(skip_decay > 0.0)) throw DataError("graph config: skip_decay must be positive");
    if (skip_window.empty()) throw DataError("graph config: empty skip window");
    if (sem_window_lo > sem_window_hi) throw DataError("graph config: empty semantic window");
    for (int off : skip_window)
        if (off < 1) throw DataError("graph config: skip offsets must be >= 1");
    if (sem_window_lo < 1) throw DataError("graph config: semantic offsets must be >= 1");
}

std::vector<std::uint8_t> TokenGraph::neighborhood_mask() const {
    std::vector<std::uint8_t> mask(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 1;
    for (const GraphEdge& e : edges)
        mask[static_cast<std::size_t>(e.src) * n + static_cast<std::size_t>(e.dst)] = 1;
    return mask;
}

std::vector<std::pair<int, int>> TokenGraph::edge_pairs() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(edges.size());
    for (const GraphEdge& e : edges) out.emplace_back(e.src, e.dst);
    return out;
}

std::vector<double> normalize_adjacency(const std::vector<double>& a, std::size_t n) {
    if (a.size() != n * n) throw DataError("normalize_adjacency: size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = a[i * n + j];
            if (!std::isfinite(v)) throw NumericError("normalize_adjacency: non-finite entry");
            if (v < 0.0) throw DataError("normalize_adjacency: negative entry");
            if (v != a[j * n + i]) throw DataError("normalize_adjacency: asymmetric input");
        }
    }
    std::vector<double> inv_sqrt(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a[i * n + j];
        inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    std::vector<double> out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = inv_sqrt[i] * a[i * n + j] * inv_sqrt[j];
    return out;
}

namespace {

template <typename T>
double cosine_rows(const Tensor<T>& h, std::size_t i, std::size_t j) {
    const std::size_t d = h.cols();
    const T* a = h.row_ptr(i);
    const T* b = h.row_ptr(j);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        dot += static_cast<double>(a[k]) * static_cast<double>(b[k]);
        na += static_cast<double>(a[k]) * static_cast<double>(a[k]);
        nb += static_cast<double>(b[k]) * static_cast<double>(b[k]);
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
}

struct PairEntry {
    double weight;
    EdgeKind kind;
};

// Rules are applied in priority order (sequential > semantic > skip); a pair
// already claimed by a higher-priority rule keeps its weight.
template <typename T>
TokenGraph build_graph_impl(const Tensor<T>& h0, const GraphConfig& cfg) {
    cfg.validate();
    if (!h0.is_matrix() || h0.rows() == 0) throw DataError("build_graph: need a non-empty n x d matrix");
    if (!h0.all_finite()) throw NumericError("build_graph: non-finite embedding rows");
    const std::size_t n = h0.rows();

    std::map<std::pair<int, int>, PairEntry> pairs;  // key (i, j) with i < j

    for (std::size_t i = 0; i + 1 < n; ++i)
        pairs[{static_cast<int>(i), static_cast<int>(i + 1)}] = {1.0, EdgeKind::sequential};

    for (std::size_t i = 0; i < n; ++i) {
        for (int off = cfg.sem_window_lo; off <= cfg.sem_window_hi; ++off) {
            const std::size_t j = i + static_cast<std::size_t>(off);
            if (j >= n) break;
            const double s = cosine_rows(h0, i, j);
            if (s > cfg.sem_threshold)
                pairs.try_emplace({static_cast<int>(i), static_cast<int>(j)},
                                  PairEntry{s, EdgeKind::semantic});
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (int off : cfg.skip_window) {
            const std::size_t j = i + static_cast<std::size_t>(off);
            if (j >= n) continue;
            const double w = std::exp(-cfg.skip_decay * static_cast<double>(off));
            if (w > cfg.skip_threshold)
                pairs.try_emplace({static_cast<int>(i), static_cast<int>(j)},
                                  PairEntry{w, EdgeKind::skip});
        }
    }

    TokenGraph g;
    g.n = n;
    g.adjacency.assign(n * n, 0.0);
    for (const auto& [key, entry] : pairs) {
        const auto [i, j] = key;
        g.adjacency[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] = entry.weight;
        g.adjacency[static_cast<std::size_t>(j) * n + static_cast<std::size_t>(i)] = entry.weight;
        if (!cfg.strict_causal)
            g.edges.push_back({i, j, entry.weight, entry.kind});
        g.edges.push_back({j, i, entry.weight, entry.kind});
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    g.normalized_adjacency = normalize_adjacency(g.adjacency, n);
    return g;
}

std::string format_weight(double w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", w);
    return buf;
}

} // namespace

TokenGraph build_graph(const Tensor<float>& h0, const GraphConfig& cfg) {
    return build_graph_impl(h0, cfg);
}
TokenGraph build_graph(const Tensor<double>& h0, const GraphConfig& cfg) {
    return build_graph_impl(h0, cfg);
}

std::string export_graph(const TokenGraph& g, GraphFormat format) {
    if (format == GraphFormat::json) {
        nlohmann::json edges = nlohmann::json::array();
        for (const GraphEdge& e : g.edges) {
            nlohmann::json je;
            je["src"] = e.src;
            je["dst"] = e.dst;
            // 6-decimal weights keep the export canonical for round trips
            je["weight"] = std::stod(format_weight(e.weight));
            je["kind"] = edge_kind_name(e.kind);
            edges.push_back(je);
        }
        nlohmann::json j;
        j["n"] = g.n;
        j["normalized"] = !g.normalized_adjacency.empty();
        j["edges"] = edges;
        return j.dump();
    }
    if (format == GraphFormat::dot) {
        std::string out = "graph tokens {\n";
        std::map<std::pair<int, int>, bool> seen;
        for (const GraphEdge& e : g.edges) {
            const std::pair<int, int> key{std::min(e.src, e.dst), std::max(e.src, e.dst)};
            if (seen[key]) continue;
            seen[key] = true;
            const char* style = e.kind == EdgeKind::sequential ? "solid"
                              : e.kind == EdgeKind::skip       ? "dashed"
                                                               : "dotted";
            out += "  " + std::to_string(key.first) + " -- " + std::to_string(key.second) +
                   " [label=\"" + format_weight(e.weight) + "\", style=" + style + "];\n";
        }
        out += "}\n";
        return out;
    }
    throw DataError("export_graph: unknown format");
}

TokenGraph parse_graph_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("graph json parse error: ") + e.what());
    }
    TokenGraph g;
    g.n = j.at("n").get<std::size_t>();
    g.adjacency.assign(g.n * g.n, 0.0);
    for (const auto& je : j.at("edges")) {
        GraphEdge e;
        e.src = je.at("src").get<int>();
        e.dst = je.at("dst").get<int>();
        e.weight = je.at("weight").get<double>();
        e.kind = edge_kind_from_name(je.at("kind").get<std::string>());
        if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= g.n ||
            static_cast<std::size_t>(e.dst) >= g.n)
            throw DataError("graph json: edge endpoint out of range");
        g.edges.push_back(e);
        g.adjacency[static_cast<std::size_t>(e.src) * g.n + static_cast<std::size_t>(e.dst)] = e.weight;
        g.adjacency[static_cast<std::size_t>(e.dst) * g.n + static_cast<std::size_t>(e.src)] = e.weight;
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    if (j.at("normalized").get<bool>())
        g.normalized_adjacency = normalize_adjacency(g.adjacency, g.n);
    return g;
}

} // namespace cgt
