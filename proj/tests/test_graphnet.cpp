#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bookforge;

namespace {

SubNetwork cycle3() { return SubNetwork({"a", "b", "c"}, {{0, 1}, {1, 2}, {2, 0}}); }

void expect_matches_oracle(const oracle::Adjacency& adj) {
    const auto g = oracle::to_subnetwork(adj);
    const auto f = compute_centralities(g);
    std::vector<double> bt, cl;
    oracle::path_measures(adj, bt, cl);
    const auto pr = oracle::pagerank(adj);
    for (std::size_t v = 0; v < adj.size(); ++v) {
        ASSERT_NEAR(f.betweenness[v], bt[v], 1e-12);
        ASSERT_NEAR(f.closeness[v], cl[v], 1e-12);
        ASSERT_NEAR(f.pagerank[v], pr[v], 1e-9);
    }
    if (g.edge_count() == 0) return;
    std::vector<double> hub, auth;
    oracle::hits(adj, hub, auth);
    for (std::size_t v = 0; v < adj.size(); ++v) {
        ASSERT_NEAR(f.hub[v], hub[v], 1e-7);
        ASSERT_NEAR(f.authority[v], auth[v], 1e-7);
    }
}

} // namespace

TEST(SubNetwork, InducedEdgesOnly) {
    Corpus c({fixture::article("a", "A", {"b", "z"}), fixture::article("b", "B"), fixture::article("z", "Z")});
    std::vector<std::string> members{"a", "b"};
    auto g = build_subnetwork(c, members);
    EXPECT_EQ(g.size(), 2u);
    EXPECT_EQ(g.edge_count(), 1u);
    EXPECT_TRUE(g.has_edge(*g.find("a"), *g.find("b")));
    EXPECT_EQ(build_subnetwork(c, std::vector<std::string>{}).size(), 0u);
    std::vector<std::string> bad{"a", "nope"};
    EXPECT_THROW(build_subnetwork(c, bad), SchemaError);
}

TEST(SubNetwork, WholeCorpusKeepsEveryLink) {
    SynthConfig cfg;
    cfg.articles = 400;
    cfg.books = 5;
    const auto s = generate_synthetic(cfg, 3);
    std::vector<std::string> all;
    std::size_t links = 0;
    for (std::size_t i = 0; i < s.corpus.size(); ++i) {
        all.push_back(s.corpus[i].id);
        for (auto t : s.corpus.links_of(i)) links += t != i ? 1 : 0;
    }
    EXPECT_EQ(build_subnetwork(s.corpus, all).edge_count(), links);
}

TEST(Centrality, ThreeCycle) {
    auto f = compute_centralities(cycle3());
    for (int v = 0; v < 3; ++v) {
        EXPECT_NEAR(f.pagerank[v], 1.0 / 3.0, 1e-12);
        EXPECT_DOUBLE_EQ(f.closeness[v], 2.0 / 3.0);
        EXPECT_DOUBLE_EQ(f.betweenness[v], 1.0);
    }
}

TEST(Centrality, PathBetweenness) {
    auto f = compute_centralities(SubNetwork({"a", "b", "c"}, {{0, 1}, {1, 2}}));
    EXPECT_EQ(f.betweenness[0], 0.0);
    EXPECT_EQ(f.betweenness[1], 1.0);
    EXPECT_EQ(f.betweenness[2], 0.0);
    EXPECT_EQ(f.closeness[2], 0.0);
    EXPECT_DOUBLE_EQ(f.closeness[0], 2.0 / 3.0);
}

TEST(Centrality, HitsStarGraph) {
    // hub 0 points at 1..3
    auto f = compute_centralities(SubNetwork({"h", "x", "y", "z"}, {{0, 1}, {0, 2}, {0, 3}}));
    EXPECT_NEAR(f.hub[0], 1.0, 1e-9);
    EXPECT_NEAR(f.authority[0], 0.0, 1e-9);
    for (int v = 1; v < 4; ++v) EXPECT_NEAR(f.authority[v], 1.0 / std::sqrt(3.0), 1e-9);
}

TEST(Centrality, ParameterAndConvergenceErrors) {
    CentralityParams p;
    p.damping = 1.0;
    EXPECT_THROW(compute_centralities(cycle3(), p), ConfigError);
    p = {};
    p.max_iter = 1;
    p.tol = 1e-300;
    try {
        compute_centralities(SubNetwork({"a", "b", "c"}, {{0, 1}, {1, 2}}), p);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), 0.0);
    }
}

TEST(Centrality, OracleAllGraphsUpToFourNodes) {
    for (std::size_t n = 1; n <= 4; ++n)
        for (std::uint64_t code = 0; code < (1ull << (n * (n - 1))); ++code) expect_matches_oracle(oracle::graph_from_code(n, code));
}

TEST(Centrality, OracleRandomFiveAndSixNodes) {
    Rng rng(99);
    for (int t = 0; t < 400; ++t) expect_matches_oracle(oracle::random_graph(5 + t % 2, rng.uniform(0.1, 0.7), rng));
}

TEST(Centrality, HitsConvergesOnNarrowEigenGap) {
    // plain alternating updates need about 400 sweeps here
    for (std::uint64_t code : {75690ull, 76646ull}) expect_matches_oracle(oracle::graph_from_code(5, code));
}

TEST(Centrality, PagerankIsPermutationEquivariant) {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        auto adj = oracle::random_graph(6, 0.35, rng);
        std::vector<std::size_t> perm{0, 1, 2, 3, 4, 5};
        rng.shuffle(perm);
        oracle::Adjacency q(6, std::vector<char>(6, 0));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) q[perm[i]][perm[j]] = adj[i][j];
        auto a = compute_centralities(oracle::to_subnetwork(adj)).pagerank;
        auto b = compute_centralities(oracle::to_subnetwork(q)).pagerank;
        for (int i = 0; i < 6; ++i) EXPECT_NEAR(a[i], b[perm[i]], 1e-12);
    }
}

TEST(SeedDistance, Aggregation) {
    // s1 -> x ; s2 -> m -> n -> x
    SubNetwork g({"s1", "s2", "m", "n", "x"}, {{0, 4}, {1, 2}, {2, 3}, {3, 4}});
    std::vector<std::string> seeds{"s1", "s2"};
    auto d = seed_distances(g, seeds);
    EXPECT_EQ(*d[4].min, 1.0);
    EXPECT_EQ(*d[4].avg, 2.0);
    EXPECT_EQ(*d[4].max, 3.0);
    EXPECT_EQ(*d[0].min, 0.0); // s1 itself
    EXPECT_EQ(*d[0].max, 0.0);
    EXPECT_EQ(*d[2].min, 1.0); // only s2 reaches m
    EXPECT_EQ(*d[2].max, 1.0);
    EXPECT_THROW(seed_distances(g, std::vector<std::string>{}), ConfigError);
}

TEST(SeedDistance, SingleSeedCollapsesAndMatchesBfs) {
    Rng rng(21);
    for (int t = 0; t < 100; ++t) {
        auto adj = oracle::random_graph(7, 0.25, rng);
        auto g = oracle::to_subnetwork(adj);
        const auto hops = oracle::hop_matrix(adj);
        std::vector<std::string> seeds{"n0", "n3"};
        auto d = seed_distances(g, seeds);
        std::vector<std::string> one{"n2"};
        auto d1 = seed_distances(g, one);
        for (std::size_t v = 0; v < 7; ++v) {
            if (d1[v].min) {
                EXPECT_EQ(*d1[v].min, *d1[v].avg);
                EXPECT_EQ(*d1[v].avg, *d1[v].max);
                EXPECT_EQ(*d1[v].min, static_cast<double>(hops[2][v]));
            } else {
                EXPECT_EQ(hops[2][v], -1);
            }
            std::vector<double> r;
            for (int s : {0, 3})
                if (hops[s][v] >= 0) r.push_back(static_cast<double>(hops[s][v]));
            ASSERT_EQ(d[v].min.has_value(), !r.empty());
            if (r.empty()) continue;
            EXPECT_EQ(*d[v].min, *std::min_element(r.begin(), r.end()));
            EXPECT_EQ(*d[v].max, *std::max_element(r.begin(), r.end()));
            EXPECT_DOUBLE_EQ(*d[v].avg, std::accumulate(r.begin(), r.end(), 0.0) / r.size());
        }
    }
}
