#include <doctest.h>

#include "cgt/graph.hpp"
#include "oracle_helpers.hpp"

using namespace cgt;

namespace {

bool edges_equal(const std::vector<GraphEdge>& a, const std::vector<GraphEdge>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].src != b[i].src || a[i].dst != b[i].dst || a[i].kind != b[i].kind) return false;
        if (std::abs(a[i].weight - b[i].weight) > tol) return false;
    }
    return true;
}

} // namespace

TEST_CASE("two nodes: only the sequential pair exists") {
    Rng rng(1);
    const Tensor<double> h0 = Tensor<double>::randn({2, 8}, rng, 1.0);
    const TokenGraph g = build_graph(h0, GraphConfig{});
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges[0].src == 0);
    CHECK(g.edges[0].dst == 1);
    CHECK(g.edges[0].weight == 1.0);
    CHECK(g.edges[0].kind == EdgeKind::sequential);
    CHECK(g.edges[1].src == 1);
    CHECK(g.edges[1].dst == 0);
}

TEST_CASE("skip weights follow exp(-decay*offset) against the 0.3 threshold") {
    // offset 2: e^-1 = 0.367879 > 0.3 kept; offset 3: e^-1.5 = 0.223130 < 0.3 never kept
    Rng rng(2);
    const Tensor<double> h0 = Tensor<double>::randn({8, 4}, rng, 0.01);
    const TokenGraph g = build_graph(h0, GraphConfig{});
    bool saw_offset2 = false;
    for (const GraphEdge& e : g.edges) {
        if (e.kind != EdgeKind::skip) continue;
        const int off = std::abs(e.src - e.dst);
        CHECK(off == 2);
        CHECK(e.weight == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
        saw_offset2 = true;
    }
    CHECK(saw_offset2);
}

TEST_CASE("identical rows four apart create a semantic edge of weight 1") {
    Tensor<double> h0 = Tensor<double>::zeros({6, 4});
    Rng rng(3);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) h0.at(i, j) = rng.normal(0.0, 1.0);
    for (std::size_t j = 0; j < 4; ++j) h0.at(5, j) = h0.at(1, j);
    const TokenGraph g = build_graph(h0, GraphConfig{});
    bool found = false;
    for (const GraphEdge& e : g.edges) {
        if (e.src == 1 && e.dst == 5) {
            CHECK(e.kind == EdgeKind::semantic);
            CHECK(e.weight == doctest::Approx(1.0).epsilon(1e-12));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("pairwise orthogonal rows create no semantic edge") {
    Tensor<double> h0 = Tensor<double>::zeros({6, 6});
    for (std::size_t i = 0; i < 6; ++i) h0.at(i, i) = 1.0;  // orthonormal rows
    const TokenGraph g = build_graph(h0, GraphConfig{});
    for (const GraphEdge& e : g.edges) CHECK(e.kind != EdgeKind::semantic);
}

TEST_CASE("build_graph preconditions") {
    CHECK_THROWS_AS(build_graph(Tensor<double>::zeros({0, 4}), GraphConfig{}), DataError);
    Tensor<double> bad = Tensor<double>::zeros({2, 2});
    bad.at(0, 0) = std::nan("");
    CHECK_THROWS_AS(build_graph(bad, GraphConfig{}), NumericError);
    GraphConfig gc;
    gc.skip_threshold = 1.5;
    CHECK_THROWS_AS(build_graph(Tensor<double>::zeros({2, 2}), gc), DataError);
}

TEST_CASE("oracle equivalence on 500 random graphs (n <= 12, d = 16)") {
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        // large-ish scale plus occasional duplicated rows to exercise the
        // semantic rule
        Tensor<double> h0 = Tensor<double>::randn({n, 16}, rng, 1.0);
        if (n > 4 && rng.below(2) == 0) {
            const std::size_t a = rng.below(n), b = rng.below(n);
            for (std::size_t j = 0; j < 16; ++j) h0.at(a, j) = h0.at(b, j);
        }
        const TokenGraph got = build_graph(h0, GraphConfig{});
        const TokenGraph want = oracle::brute_force_graph(h0, GraphConfig{});
        REQUIRE(edges_equal(got.edges, want.edges, 1e-12));
        for (std::size_t i = 0; i < n * n; ++i) {
            CHECK(std::abs(got.adjacency[i] - want.adjacency[i]) <= 1e-12);
            CHECK(std::abs(got.normalized_adjacency[i] - want.normalized_adjacency[i]) <= 1e-12);
        }
    }
}

TEST_CASE("duplicate-pair priority: semantic beats skip at offset 2 when enabled") {
    GraphConfig gc;
    gc.sem_window_lo = 2;  // let semantic and skip compete on offset 2
    Tensor<double> h0 = Tensor<double>::zeros({4, 3});
    for (std::size_t i = 0; i < 4; ++i) h0.at(i, 0) = 1.0;  // all rows identical
    const TokenGraph g = build_graph(h0, gc);
    for (const GraphEdge& e : g.edges) {
        if (std::abs(e.src - e.dst) == 2) {
            CHECK(e.kind == EdgeKind::semantic);
            CHECK(e.weight == doctest::Approx(1.0));
        }
    }
    // and sequential always beats semantic on offset 1
    GraphConfig gc1;
    gc1.sem_window_lo = 1;
    const TokenGraph g1 = build_graph(h0, gc1);
    for (const GraphEdge& e : g1.edges)
        if (std::abs(e.src - e.dst) == 1) CHECK(e.kind == EdgeKind::sequential);
}

TEST_CASE("normalization hand cases") {
    // 2-node path: both degrees 1, unchanged
    const std::vector<double> path2{0, 1, 1, 0};
    const std::vector<double> n2 = normalize_adjacency(path2, 2);
    CHECK(n2[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(n2[2] == doctest::Approx(1.0).epsilon(1e-12));

    // 3-node path: off-diagonals become 1/sqrt(2)
    const std::vector<double> path3{0, 1, 0, 1, 0, 1, 0, 1, 0};
    const std::vector<double> n3 = normalize_adjacency(path3, 3);
    CHECK(n3[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(n3[3] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(n3[5] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

    // all-zero matrix passes through (no division by zero)
    const std::vector<double> zero(9, 0.0);
    CHECK(normalize_adjacency(zero, 3) == zero);

    CHECK_THROWS_AS(normalize_adjacency({0, 1, 0, 0}, 2), DataError);   // asymmetric
    CHECK_THROWS_AS(normalize_adjacency({0, -1, -1, 0}, 2), DataError); // negative
}

TEST_CASE("normalization keeps symmetry and spectral radius <= 1") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(11);
        const Tensor<double> h0 = Tensor<double>::randn({n, 16}, rng, 1.0);
        const TokenGraph g = build_graph(h0, GraphConfig{});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                CHECK(std::abs(g.norm_adj(i, j) - g.norm_adj(j, i)) < 1e-12);
        const double rad = oracle::spectral_radius_symmetric(g.normalized_adjacency, n);
        CHECK(rad <= 1.0 + 1e-9);
    }
}

TEST_CASE("sequential connectivity and the window-bounded degree") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        const Tensor<double> h0 = Tensor<double>::randn({n, 8}, rng, 1.0);
        const TokenGraph g = build_graph(h0, GraphConfig{});
        for (std::size_t i = 0; i + 1 < n; ++i) CHECK(g.adj(i, i + 1) > 0.0);
        CHECK(g.edges.size() <= 22 * n);
    }
}

TEST_CASE("strict_causal keeps only src >= dst and symmetric adjacency") {
    GraphConfig gc;
    gc.strict_causal = true;
    Rng rng(4);
    const Tensor<double> h0 = Tensor<double>::randn({8, 8}, rng, 1.0);
    const TokenGraph g = build_graph(h0, gc);
    CHECK(!g.edges.empty());
    for (const GraphEdge& e : g.edges) CHECK(e.src >= e.dst);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) CHECK(g.adj(i, j) == g.adj(j, i));
}

TEST_CASE("json export round trip is byte-identical") {
    Rng rng(9);
    const Tensor<double> h0 = Tensor<double>::randn({7, 8}, rng, 1.0);
    const TokenGraph g = build_graph(h0, GraphConfig{});
    const std::string first = export_graph(g, GraphFormat::json);
    const TokenGraph parsed = parse_graph_json(first);
    CHECK(parsed.n == g.n);
    CHECK(parsed.edges.size() == g.edges.size());
    const std::string second = export_graph(parsed, GraphFormat::json);
    CHECK(first == second);
}

TEST_CASE("2-node graph exports 2 directed json edges and 1 dot line") {
    Rng rng(10);
    const Tensor<double> h0 = Tensor<double>::randn({2, 4}, rng, 1.0);
    const TokenGraph g = build_graph(h0, GraphConfig{});
    const TokenGraph parsed = parse_graph_json(export_graph(g, GraphFormat::json));
    CHECK(parsed.edges.size() == 2);
    const std::string dot = export_graph(g, GraphFormat::dot);
    CHECK(dot.find("0 -- 1") != std::string::npos);
    CHECK(dot.find("1 -- 0") == std::string::npos);
}

TEST_CASE("dot export of a 5-token sentence shows all three edge styles") {
    // five tokens with two rows aligned to force a semantic edge
    Tensor<double> h0 = Tensor<double>::zeros({5, 8});
    Rng rng(12);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 8; ++j) h0.at(i, j) = rng.normal(0.0, 1.0);
    for (std::size_t j = 0; j < 8; ++j) h0.at(4, j) = h0.at(0, j);  // offset 4 semantic pair
    const TokenGraph g = build_graph(h0, GraphConfig{});
    const std::string dot = export_graph(g, GraphFormat::dot);
    CHECK(dot.find("style=solid") != std::string::npos);
    CHECK(dot.find("style=dashed") != std::string::npos);
    CHECK(dot.find("style=dotted") != std::string::npos);
    CHECK_THROWS_AS(export_graph(g, static_cast<GraphFormat>(99)), DataError);
}

TEST_CASE("neighborhood mask adds self-loops") {
    Rng rng(14);
    const Tensor<double> h0 = Tensor<double>::randn({4, 4}, rng, 1.0);
    const TokenGraph g = build_graph(h0, GraphConfig{});
    const auto mask = g.neighborhood_mask();
    for (std::size_t i = 0; i < 4; ++i) CHECK(mask[i * 4 + i] == 1);
    for (const GraphEdge& e : g.edges)
        CHECK(mask[std::size_t(e.src) * 4 + std::size_t(e.dst)] == 1);
}
