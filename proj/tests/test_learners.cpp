#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bookforge;

namespace {

struct Data {
    FeatureMatrix x;
    std::vector<int> y;
};

Data noisy_data(std::uint64_t seed, std::size_t n = 400, std::size_t width = 4) {
    Rng rng(seed);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> r(width);
        for (auto& v : r) v = rng.normal();
        const double z = 1.5 * r[0] - r[1] + 0.5 * rng.normal();
        d.x.push_back(r);
        d.y.push_back(z > 0.8 ? 1 : 0);
    }
    return d;
}

} // namespace

TEST(LogisticLoss, GradientAndHessianMatchFiniteDifferences) {
    Rng rng(1);
    const double h = 1e-5;
    for (int t = 0; t < 200; ++t) {
        const double z = rng.uniform(-8, 8);
        for (int y : {0, 1}) {
            const auto d = logistic_loss(z, y);
            const double g = (logistic_loss(z + h, y).loss - logistic_loss(z - h, y).loss) / (2 * h);
            const double hh = (logistic_loss(z + h, y).gradient - logistic_loss(z - h, y).gradient) / (2 * h);
            EXPECT_NEAR(d.gradient, g, 1e-6);
            EXPECT_NEAR(d.hessian, hh, 1e-6);
        }
    }
}

TEST(Gbdt, SeparableDataReachesPerfectAuc) {
    FeatureMatrix x;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        const double v = -1.0 + 2.0 * (i + 0.5) / 200.0;
        x.push_back({v});
        y.push_back(v > 0 ? 1 : 0);
    }
    GbdtParams p;
    p.n_trees = 20;
    auto m = train_gbdt(x, y, p);
    auto pred = predict_gbdt(m, x);
    EXPECT_EQ(oracle::auc(pred, y), 1.0);
    for (double v : pred) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Gbdt, UnweightedPriorIsRespected) {
    Rng rng(4);
    FeatureMatrix x;
    std::vector<int> y;
    for (int i = 0; i < 1000; ++i) {
        x.push_back({rng.uniform()});
        y.push_back(i % 10 == 0 ? 1 : 0);
    }
    GbdtParams p;
    p.positive_class_weight = 1.0;
    p.n_trees = 30;
    auto pred = predict_gbdt(train_gbdt(x, y, p), x);
    const double mean = std::accumulate(pred.begin(), pred.end(), 0.0) / pred.size();
    EXPECT_NEAR(mean, 0.1, 0.05);
}

TEST(Gbdt, TrainingLossNeverIncreases) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto d = noisy_data(seed);
        GbdtParams p;
        p.n_trees = 60;
        p.min_samples_leaf = 5;
        p.rng_seed = seed;
        p.feature_subsample = 0.75;
        std::vector<double> trace;
        train_gbdt(d.x, d.y, p, &trace);
        ASSERT_EQ(trace.size(), 61u);
        for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-9);
    }
}

TEST(Gbdt, SameSeedSameBytes) {
    auto d = noisy_data(8);
    GbdtParams p;
    p.feature_subsample = 0.5;
    p.rng_seed = 77;
    const auto a = gbdt_to_json(train_gbdt(d.x, d.y, p)).dump();
    const auto b = gbdt_to_json(train_gbdt(d.x, d.y, p)).dump();
    EXPECT_EQ(a, b);
}

TEST(Gbdt, JsonRoundTripPredictsIdentically) {
    auto d = noisy_data(9);
    auto m = train_gbdt(d.x, d.y, GbdtParams{});
    auto back = gbdt_from_json(nlohmann::json::parse(gbdt_to_json(m).dump()));
    EXPECT_EQ(predict_gbdt(m, d.x), predict_gbdt(back, d.x));
}

TEST(Gbdt, RowOrderAndColumnPermutation) {
    auto d = noisy_data(10, 300, 3);
    auto m = train_gbdt(d.x, d.y, GbdtParams{});
    auto pred = predict_gbdt(m, d.x);
    FeatureMatrix rev(d.x.rbegin(), d.x.rend());
    auto pr = predict_gbdt(m, rev);
    for (std::size_t i = 0; i < pred.size(); ++i) EXPECT_EQ(pred[i], pr[pred.size() - 1 - i]);

    FeatureMatrix perm;
    for (const auto& r : d.x) perm.push_back({r[2], r[0], r[1]});
    auto mp = train_gbdt(perm, d.y, GbdtParams{});
    auto pp = predict_gbdt(mp, perm);
    for (std::size_t i = 0; i < pred.size(); ++i) EXPECT_NEAR(pred[i], pp[i], 1e-12);
}

TEST(Gbdt, SingleSplitTree) {
    FeatureMatrix x{{0}, {1}, {2}, {3}};
    std::vector<int> y{0, 0, 1, 1};
    GbdtParams p;
    p.n_trees = 1;
    p.max_leaves = 2;
    p.min_samples_leaf = 1;
    p.learning_rate = 1.0;
    p.positive_class_weight = 1.0;
    p.l2_regularization = 0.0;
    auto m = train_gbdt(x, y, p);
    ASSERT_EQ(m.trees.size(), 1u);
    auto pred = predict_gbdt(m, FeatureMatrix{{-5}, {1.2}, {1.8}, {9}});
    EXPECT_EQ(pred[0], pred[1]);
    EXPECT_EQ(pred[2], pred[3]);
    // base 0, one Newton step per leaf: -G/H = -(2 * -0.5) / (2 * 0.25) = 2
    EXPECT_NEAR(pred[2], sigmoid(2.0), 1e-12);
    EXPECT_NEAR(pred[0], sigmoid(-2.0), 1e-12);
}

TEST(Gbdt, ContractErrors) {
    FeatureMatrix x{{0}, {1}};
    EXPECT_THROW(train_gbdt(x, std::vector<int>{1, 1}, GbdtParams{}), ConfigError);
    GbdtParams p;
    p.n_trees = 0;
    EXPECT_THROW(train_gbdt(x, std::vector<int>{0, 1}, p), ConfigError);
    FeatureMatrix ragged{{0}, {1, 2}};
    EXPECT_THROW(train_gbdt(ragged, std::vector<int>{0, 1}, GbdtParams{}), Error);
    auto m = train_gbdt(FeatureMatrix{{0}, {1}, {2}, {3}}, std::vector<int>{0, 0, 1, 1}, GbdtParams{});
    EXPECT_THROW(predict_gbdt(m, FeatureMatrix{{0, 1}}), Error);
}

TEST(Logistic, MonotoneAndComplementary) {
    std::vector<double> x{1, 2, 3, 4};
    std::vector<int> y{0, 0, 1, 1}, flipped{1, 1, 0, 0};
    auto m = train_logistic(x, y);
    auto f = train_logistic(x, flipped);
    for (int i = 0; i + 1 < 4; ++i) EXPECT_LT(m.predict(x[i]), m.predict(x[i + 1]));
    for (double v : x) EXPECT_NEAR(m.predict(v) + f.predict(v), 1.0, 1e-9);
    EXPECT_THROW(train_logistic(std::vector<double>{2, 2, 2}, std::vector<int>{0, 1, 0}), ConfigError);
    EXPECT_THROW(train_logistic(x, std::vector<int>{1, 1, 1, 1}), ConfigError);
}

TEST(Logistic, StationaryPointOfPenalizedLikelihood) {
    Rng rng(12);
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 300; ++i) {
        const double v = rng.uniform(0, 10);
        x.push_back(v);
        y.push_back(rng.bernoulli(sigmoid(v - 5.0)) ? 1 : 0);
    }
    auto m = train_logistic(x, y);
    double ga = 0, gb = 2e-6 * m.coefficient;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = m.predict(x[i]) - y[i];
        ga += r;
        gb += r * x[i];
    }
    EXPECT_LT(std::abs(ga), 1e-6);
    EXPECT_LT(std::abs(gb), 1e-5);
}
