#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bookforge;

TEST(Auc, Examples) {
    std::vector<double> s{0.9, 0.8, 0.7, 0.6};
    EXPECT_DOUBLE_EQ(auc(s, std::vector<int>{1, 0, 1, 0}), 0.75);
    EXPECT_DOUBLE_EQ(auc(s, std::vector<int>{0, 1, 0, 1}), 0.25);
    EXPECT_DOUBLE_EQ(auc(s, std::vector<int>{1, 1, 0, 0}), 1.0);
    EXPECT_THROW(auc(s, std::vector<int>{1, 1, 1, 1}), Error);
}

TEST(Auc, MatchesPairCountingOracle) {
    Rng rng(10);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(60);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 20) / 20;
            y[i] = rng.bernoulli(0.4) ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        EXPECT_NEAR(auc(s, y), oracle::auc(s, y), 1e-12);
        std::vector<double> e(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(4 * s[i]);
        EXPECT_NEAR(auc(e, y), auc(s, y), 1e-12);
    }
}

TEST(PrecisionRecall, Examples) {
    std::vector<double> s{0.9, 0.8, 0.1, 0.2};
    std::vector<int> y{1, 1, 0, 0};
    std::vector<std::string> ids{"a", "b", "c", "d"};
    auto pr = precision_recall_at_n(s, y, ids, 2);
    EXPECT_EQ(pr.precision, 1.0);
    EXPECT_EQ(pr.recall, 1.0);
    auto all = precision_recall_at_n(s, y, ids, 4);
    EXPECT_EQ(all.precision, 0.5);
    EXPECT_EQ(all.recall, 1.0);
    auto wider = precision_recall_at_n(s, y, ids, 2, 4);
    EXPECT_EQ(wider.recall, 0.5);
    EXPECT_THROW(precision_recall_at_n(s, std::vector<int>{0, 0, 0, 0}, ids, 2), Error);
    EXPECT_THROW(precision_recall_at_n(s, y, ids, 0), ConfigError);
    // tie at the boundary goes to the smaller id
    std::vector<double> tie{0.5, 0.5};
    auto t = precision_recall_at_n(tie, std::vector<int>{0, 1}, std::vector<std::string>{"b", "a"}, 1);
    EXPECT_EQ(t.precision, 1.0);
}

TEST(Ari, Examples) {
    EXPECT_DOUBLE_EQ(adjusted_rand(Partition({0, 0, 1, 1}), Partition({0, 1, 0, 1})), -0.5);
    EXPECT_DOUBLE_EQ(adjusted_rand(Partition({0, 0, 1, 2}), Partition({5, 5, 3, 1})), 1.0);
    EXPECT_THROW(adjusted_rand(Partition({0, 1}), Partition({0, 1, 2})), Error);
}

TEST(Ari, MatchesPairCountingOracle) {
    Rng rng(11);
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = 2 + rng.below(9);
        auto a = oracle::random_labels(n, 1 + rng.below(n), rng);
        auto b = oracle::random_labels(n, 1 + rng.below(n), rng);
        ASSERT_NEAR(adjusted_rand(Partition(a), Partition(b)), oracle::ari(a, b), 1e-12);
    }
}

TEST(Ari, RelabelInvariantAndCentred) {
    Rng rng(12);
    auto a = oracle::random_labels(40, 4, rng);
    auto b = oracle::random_labels(40, 3, rng);
    auto relabeled = a;
    for (auto& x : relabeled) x = 10 - x;
    EXPECT_DOUBLE_EQ(adjusted_rand(Partition(a), Partition(b)), adjusted_rand(Partition(relabeled), Partition(b)));
    double sum = 0;
    for (int t = 0; t < 400; ++t) {
        auto p = a;
        rng.shuffle(p);
        sum += adjusted_rand(Partition(p), Partition(a));
    }
    EXPECT_LT(std::abs(sum / 400), 0.05);
}

TEST(Ari, PermutationPValue) {
    Partition p({0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3});
    const double pv = ari_pvalue(p, p, 999, 3);
    EXPECT_LE(pv, 0.01);
    EXPECT_GT(pv, 0.0);
    EXPECT_EQ(ari_pvalue(p, p, 999, 3), pv);
    Rng rng(13);
    auto noise = oracle::random_labels(12, 4, rng);
    EXPECT_GT(ari_pvalue(Partition(noise), p, 199, 3), 0.01);
}

TEST(Kendall, Examples) {
    std::vector<std::string> a{"1", "2", "3", "4"}, b{"1", "3", "2", "4"}, r{"4", "3", "2", "1"};
    EXPECT_DOUBLE_EQ(kendall_tau_orders(a, a).statistic, 1.0);
    EXPECT_DOUBLE_EQ(kendall_tau_orders(a, r).statistic, -1.0);
    EXPECT_NEAR(kendall_tau_orders(a, b).statistic, 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(kendall_tau_orders(a, b).statistic, kendall_tau_orders(b, a).statistic);
    EXPECT_THROW(kendall_tau_orders(a, std::vector<std::string>{"1", "2", "3", "9"}), Error);
}

TEST(Kendall, MatchesTauAOnPermutations) {
    Rng rng(14);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::string> x;
        for (int i = 0; i < 2 + static_cast<int>(rng.below(9)); ++i) x.push_back("i" + std::to_string(i));
        auto y = x;
        rng.shuffle(y);
        EXPECT_NEAR(kendall_tau_orders(x, y).statistic, oracle::kendall_orders(x, y), 1e-12);
    }
}

TEST(Significance, Stars) {
    EXPECT_EQ(significance_stars(0.005), "*");
    EXPECT_EQ(significance_stars(0.02), "**");
    EXPECT_EQ(significance_stars(0.07), "***");
    EXPECT_EQ(significance_stars(0.5), "");
}

TEST(Report, JsonHasAveragesAndReferences) {
    EvalReport r;
    BookEvaluation b;
    b.title = "x";
    b.candidates = 100;
    b.n = 10;
    b.auc = 0.8;
    b.kendall_articles = 0.5;
    r.books = {b, b};
    r.books[1].auc = 1.0;
    auto j = report_to_json(r);
    EXPECT_DOUBLE_EQ(j["averages"]["auc"].get<double>(), 0.9);
    EXPECT_DOUBLE_EQ(j["averages"]["chance_rate"].get<double>(), 0.1);
    for (const char* k : {"auc", "precision_at_n", "recall_at_n", "ari", "ari_ap", "kendall_articles", "kendall_chapters"})
        EXPECT_TRUE(j["averages"].contains(k)) << k;
    EXPECT_DOUBLE_EQ(j["metadata"]["reference_values"]["auc"].get<double>(), 0.9765);
    EXPECT_DOUBLE_EQ(j["metadata"]["reference_values"]["kendall_chapters"].get<double>(), 0.7735);
    EXPECT_TRUE(j["books"][0]["kendall_chapters"].is_null());
}
