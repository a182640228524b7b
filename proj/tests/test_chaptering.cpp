#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bookforge;

namespace {

constexpr ClusterMethod all_methods[] = {ClusterMethod::agnes, ClusterMethod::diana, ClusterMethod::pam};

Dissimilarity two_blocks(const std::vector<std::size_t>& block) {
    Dissimilarity d(block.size());
    for (std::size_t i = 0; i < block.size(); ++i)
        for (std::size_t j = i + 1; j < block.size(); ++j) d.set(i, j, block[i] == block[j] ? 0.1 : 0.9);
    return d;
}

Dissimilarity random_dissimilarity(std::size_t n, Rng& rng) {
    Dissimilarity d(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d.set(i, j, std::round(rng.uniform() * 1000) / 1000 + 1e-3);
    return d;
}

RowSet pair_rows(const std::vector<std::string>& ids, const std::vector<double>& probs) {
    RowSet r;
    std::size_t p = 0;
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j, ++p) {
            r.ids.push_back(ids[i] + "|" + ids[j]);
            r.rows.push_back({probs[p]});
            r.labels.push_back(0);
        }
    return r;
}

} // namespace

TEST(Dissimilarity, FromProbabilities) {
    std::vector<std::string> arts{"a", "b", "c"}, keys{"a|b", "c|a", "b|c"};
    std::vector<double> probs{0.9, 0.1, 0.2};
    auto d = probs_to_dissimilarity(arts, keys, probs);
    const double want[3][3] = {{0, .1, .9}, {.1, 0, .8}, {.9, .8, 0}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(d(i, j), want[i][j], 1e-15);
    EXPECT_NEAR(probs_to_dissimilarity(std::vector<std::string>{"a", "b"}, std::vector<std::string>{"a|b"},
                                       std::vector<double>{0.7})(0, 1),
                0.3, 1e-15);
    EXPECT_EQ(probs_to_dissimilarity(std::vector<std::string>{"a", "b"}, std::vector<std::string>{"a|b"},
                                     std::vector<double>{1.0})(0, 1),
              0.0);
    std::vector<std::string> missing{"a|b", "a|c"};
    EXPECT_THROW(probs_to_dissimilarity(arts, missing, std::vector<double>{0.5, 0.5}), Error);
    std::vector<std::string> dup{"a|b", "b|a", "a|c"};
    EXPECT_THROW(probs_to_dissimilarity(arts, dup, std::vector<double>{0.5, 0.5, 0.5}), Error);
}

TEST(Cluster, TrivialK) {
    Rng rng(1);
    auto d = random_dissimilarity(7, rng);
    for (auto m : all_methods) {
        EXPECT_EQ(cluster(d, 1, m).k(), 1u);
        auto s = cluster(d, 7, m);
        EXPECT_EQ(s.k(), 7u);
        EXPECT_THROW(cluster(d, 0, m), ConfigError);
        EXPECT_THROW(cluster(d, 8, m), ConfigError);
    }
}

TEST(Cluster, TwoBlocksRecoveredExhaustively) {
    for (std::size_t n = 4; n <= 8; ++n)
        for (std::uint64_t mask = 1; mask < (1ull << (n - 1)); ++mask) {
            std::vector<std::size_t> block(n, 0);
            for (std::size_t i = 1; i < n; ++i) block[i] = (mask >> (i - 1)) & 1u;
            const Partition truth(block);
            for (auto m : all_methods) ASSERT_EQ(cluster(two_blocks(block), 2, m), truth) << to_string(m) << " n=" << n;
        }
}

TEST(Cluster, RelabelInvariance) {
    Rng rng(2);
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 4 + rng.below(7);
        // continuous draws: exact ties may legitimately break by index
        Dissimilarity d(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) d.set(i, j, rng.uniform(0.01, 1.0));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        Dissimilarity q(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) q.set(perm[i], perm[j], d(i, j));
        const std::size_t k = 1 + rng.below(n);
        for (auto m : all_methods) {
            auto a = cluster(d, k, m), b = cluster(q, k, m);
            std::vector<std::size_t> back(n);
            for (std::size_t i = 0; i < n; ++i) back[i] = b[perm[i]];
            EXPECT_EQ(a, Partition(back)) << to_string(m);
        }
    }
}

TEST(Cluster, AgnesLastMergeIsClosestPair) {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 3 + rng.below(8);
        auto d = random_dissimilarity(n, rng);
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (d(i, j) < d(bi, bj)) {
                    bi = i;
                    bj = j;
                }
        auto p = agnes(d, n - 1);
        EXPECT_TRUE(p.same_cluster(bi, bj));
        EXPECT_EQ(p.k(), n - 1);
    }
}

TEST(Cluster, PamCostNeverIncreases) {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 5 + rng.below(10);
        auto r = pam_detailed(random_dissimilarity(n, rng), 1 + rng.below(4));
        for (std::size_t i = 1; i < r.cost_trace.size(); ++i) EXPECT_LE(r.cost_trace[i], r.cost_trace[i - 1]);
    }
}

TEST(AffinityPropagation, Extremes) {
    Dissimilarity same(5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) same.set(i, j, 0.5);
    EXPECT_EQ(affinity_propagation(same).k, 1u);

    auto blocks = two_blocks({0, 0, 0, 0, 1, 1, 1, 1});
    auto r = affinity_propagation(blocks);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.k, 2u);

    Rng rng(5);
    auto d = random_dissimilarity(8, rng);
    AffinityParams p;
    p.preference = 0.0;
    EXPECT_EQ(affinity_propagation(d, p).k, 8u);
    p.preference = -1e6;
    EXPECT_EQ(affinity_propagation(d, p).k, 1u);
    p = {};
    p.damping = 0.3;
    EXPECT_THROW(affinity_propagation(d, p), ConfigError);
}

TEST(Chaptering, TwoArticlesOneChapter) {
    auto rows = pair_rows({"a", "b"}, {0.9});
    auto r = chapter_from_probabilities(rows, {0.9}, 1);
    EXPECT_EQ(r.k, 1u);
    EXPECT_TRUE(r.partition.same_cluster(0, 1));
}

TEST(Chaptering, LeaveOneOutExcludesOwnModel) {
    // the feature is the probability itself; model i is a constant that would wreck the result
    std::vector<std::string> ids{"a", "b", "c", "d"};
    auto rows = pair_rows(ids, {0.9, 0.1, 0.1, 0.1, 0.1, 0.9});
    GbdtModel good, bad;
    good.n_features = bad.n_features = 1;
    RegressionTree t;
    t.nodes.resize(3);
    t.nodes[0].feature = 0;
    t.nodes[0].threshold = 0.5;
    t.nodes[0].left = 1;
    t.nodes[0].right = 2;
    t.nodes[1].value = -3;
    t.nodes[2].value = 3;
    good.trees.push_back(t);
    bad.base_score = 5;
    std::vector<RowSet> data{rows, rows};
    std::vector<GbdtModel> models{bad, good};
    auto r = chapter_articles(data, models, 0, 2);
    EXPECT_EQ(r.partition, Partition({0, 0, 1, 1}));
    auto est = chapter_articles(data, models, 0, std::nullopt);
    EXPECT_TRUE(est.k_estimated);
    EXPECT_EQ(est.k, 2u);
}
