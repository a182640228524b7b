#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "random.hpp"

namespace bookforge {

using FeatureMatrix = std::vector<std::vector<double>>;

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Binary logistic loss of one example at raw score `z`, with its first and second derivative in z.
struct LossDerivatives {
    double loss, gradient, hessian;
};

inline LossDerivatives logistic_loss(double z, int label) {
    const double p = sigmoid(z);
    // log(1 + e^z) - y z, computed without overflow
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return {softplus - (label ? z : 0.0), p - (label ? 1.0 : 0.0), p * (1.0 - p)};
}

struct GbdtParams {
    int n_trees = 100;
    double learning_rate = 0.1;
    int max_leaves = 31;
    int min_samples_leaf = 20;
    std::optional<double> positive_class_weight; // default: neg/pos, capped at 100
    std::uint64_t rng_seed = 0;
    double feature_subsample = 1.0;
    double l2_regularization = 1.0;

    void validate() const {
        if (n_trees < 1) throw ConfigError("gbdt: n_trees must be at least 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("gbdt: learning_rate must lie in (0,1]");
        if (max_leaves < 2) throw ConfigError("gbdt: max_leaves must be at least 2");
        if (min_samples_leaf < 1) throw ConfigError("gbdt: min_samples_leaf must be at least 1");
        if (positive_class_weight && !(*positive_class_weight > 0.0))
            throw ConfigError("gbdt: positive_class_weight must be positive");
        if (!(feature_subsample > 0.0 && feature_subsample <= 1.0))
            throw ConfigError("gbdt: feature_subsample must lie in (0,1]");
        if (!(l2_regularization >= 0.0)) throw ConfigError("gbdt: l2_regularization must be non-negative");
    }
};

/// Flat binary tree; node 0 is the root. Rows with x[feature] <= threshold go left.
struct RegressionTree {
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        double value = 0.0;
    };
    std::vector<Node> nodes;

    double predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }

    std::size_t leaves() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
    }
};

struct GbdtModel {
    std::size_t n_features = 0;
    double base_score = 0.0; // log-odds
    std::vector<RegressionTree> trees;

    double raw_score(std::span<const double> x) const {
        double z = base_score;
        for (const auto& t : trees) z += t.predict(x);
        return z;
    }
};

namespace detail {

inline void check_matrix(const FeatureMatrix& rows, std::size_t width) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != width)
            throw ConfigError("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                              " features, expected " + std::to_string(width));
    }
}

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct GrowingLeaf {
    int node = 0;
    std::vector<std::vector<std::uint32_t>> sorted; // per active feature, rows sorted by value
    double g = 0.0, h = 0.0;
    SplitCandidate split;
};

} // namespace detail

/**
 * Gradient-boosted trees for binary logistic loss.
 *
 * Trees grow leaf-wise (best gain first) with exact split search over sorted
 * feature values; leaf outputs are shrunken Newton steps -G / (H + lambda).
 * Positive rows are weighted by `positive_class_weight`. `loss_trace`, when
 * given, receives the weighted training loss before the first tree and after
 * every tree.
 */
inline GbdtModel train_gbdt(const FeatureMatrix& rows, std::span<const int> labels, const GbdtParams& params,
                            std::vector<double>* loss_trace = nullptr) {
    params.validate();
    if (rows.size() != labels.size()) throw ConfigError("gbdt: row and label counts differ");
    if (rows.empty()) throw ConfigError("gbdt: no training rows");
    const std::size_t n = rows.size();
    const std::size_t width = rows.front().size();
    detail::check_matrix(rows, width);
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw ConfigError("gbdt: labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    if (pos == 0 || pos == n) throw ConfigError("gbdt: training labels contain a single class");
    for (const auto& r : rows)
        for (double x : r)
            if (std::isnan(x)) throw ConfigError("gbdt: NaN in training data");

    const double pos_weight = params.positive_class_weight
                                  ? *params.positive_class_weight
                                  : std::min(100.0, static_cast<double>(n - pos) / static_cast<double>(pos));
    std::vector<double> weight(n);
    double wpos = 0.0, wneg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        weight[i] = labels[i] ? pos_weight : 1.0;
        (labels[i] ? wpos : wneg) += weight[i];
    }

    GbdtModel model;
    model.n_features = width;
    model.base_score = std::log(wpos / wneg);

    // column-major copy and global presort
    std::vector<std::vector<double>> cols(width, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < width; ++f) cols[f][i] = rows[i][f];
    std::vector<std::vector<std::uint32_t>> presorted(width, std::vector<std::uint32_t>(n));
    for (std::size_t f = 0; f < width; ++f) {
        auto& idx = presorted[f];
        std::iota(idx.begin(), idx.end(), 0u);
        std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return cols[f][a] < cols[f][b]; });
    }

    std::vector<double> score(n, model.base_score), grad(n), hess(n);
    auto total_loss = [&] {
        double l = 0.0;
        for (std::size_t i = 0; i < n; ++i) l += weight[i] * logistic_loss(score[i], labels[i]).loss;
        return l;
    };
    if (loss_trace) loss_trace->push_back(total_loss());

    Rng rng(params.rng_seed);
    const double lambda = params.l2_regularization;
    const std::size_t min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
    std::vector<char> goes_left(n);

    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto d = logistic_loss(score[i], labels[i]);
            grad[i] = weight[i] * d.gradient;
            hess[i] = std::max(weight[i] * d.hessian, 1e-16);
        }
        std::vector<std::size_t> features(width);
        std::iota(features.begin(), features.end(), 0);
        if (params.feature_subsample < 1.0) {
            const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.feature_subsample * width)));
            rng.shuffle(features);
            features.resize(keep);
            std::sort(features.begin(), features.end());
        }

        auto find_split = [&](detail::GrowingLeaf& leaf) {
            leaf.split = {};
            const std::size_t count = leaf.sorted.empty() ? 0 : leaf.sorted[0].size();
            if (count < 2 * min_leaf) return;
            const double parent = leaf.g * leaf.g / (leaf.h + lambda);
            for (std::size_t a = 0; a < features.size(); ++a) {
                const auto f = features[a];
                const auto& order = leaf.sorted[a];
                const auto& col = cols[f];
                double gl = 0.0, hl = 0.0;
                for (std::size_t k = 0; k + 1 < count; ++k) {
                    gl += grad[order[k]];
                    hl += hess[order[k]];
                    const std::size_t nl = k + 1;
                    if (nl < min_leaf) continue;
                    if (count - nl < min_leaf) break;
                    const double lo = col[order[k]], hi = col[order[k + 1]];
                    if (!(lo < hi)) continue;
                    const double gr = leaf.g - gl, hr = leaf.h - hl;
                    const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                    if (gain > leaf.split.gain + 1e-12) {
                        double thr = lo + (hi - lo) / 2.0;
                        if (!(thr < hi)) thr = lo;
                        leaf.split = {gain, static_cast<int>(f), thr};
                    }
                }
            }
        };

        RegressionTree tree;
        tree.nodes.emplace_back();
        std::vector<detail::GrowingLeaf> open;
        {
            detail::GrowingLeaf root;
            root.node = 0;
            root.sorted.reserve(features.size());
            for (auto f : features) root.sorted.push_back(presorted[f]);
            for (std::size_t i = 0; i < n; ++i) {
                root.g += grad[i];
                root.h += hess[i];
            }
            find_split(root);
            open.push_back(std::move(root));
        }
        std::vector<detail::GrowingLeaf> done;
        int leaves = 1;
        while (leaves < params.max_leaves) {
            std::size_t best = open.size();
            for (std::size_t l = 0; l < open.size(); ++l)
                if (open[l].split.feature >= 0 && (best == open.size() || open[l].split.gain > open[best].split.gain)) best = l;
            if (best == open.size()) break;
            detail::GrowingLeaf leaf = std::move(open[best]);
            open.erase(open.begin() + static_cast<std::ptrdiff_t>(best));

            const auto f = static_cast<std::size_t>(leaf.split.feature);
            const double thr = leaf.split.threshold;
            for (auto r : leaf.sorted[0]) goes_left[r] = cols[f][r] <= thr;
            detail::GrowingLeaf left, right;
            left.sorted.resize(features.size());
            right.sorted.resize(features.size());
            for (std::size_t a = 0; a < features.size(); ++a)
                for (auto r : leaf.sorted[a]) (goes_left[r] ? left.sorted[a] : right.sorted[a]).push_back(r);
            for (auto r : left.sorted[0]) {
                left.g += grad[r];
                left.h += hess[r];
            }
            right.g = leaf.g - left.g;
            right.h = leaf.h - left.h;

            left.node = static_cast<int>(tree.nodes.size());
            right.node = left.node + 1;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& parent = tree.nodes[static_cast<std::size_t>(leaf.node)];
            parent.feature = leaf.split.feature;
            parent.threshold = thr;
            parent.left = left.node;
            parent.right = right.node;
            find_split(left);
            find_split(right);
            open.push_back(std::move(left));
            open.push_back(std::move(right));
            ++leaves;
        }
        for (auto& leaf : open) done.push_back(std::move(leaf));
        for (const auto& leaf : done) {
            const double value = -params.learning_rate * leaf.g / (leaf.h + lambda);
            tree.nodes[static_cast<std::size_t>(leaf.node)].value = value;
            for (auto r : leaf.sorted[0]) score[r] += value;
        }
        model.trees.push_back(std::move(tree));
        if (loss_trace) loss_trace->push_back(total_loss());
    }
    return model;
}

/// sigmoid(base + sum of tree outputs) per row.
inline std::vector<double> predict_gbdt(const GbdtModel& m, const FeatureMatrix& rows) {
    detail::check_matrix(rows, m.n_features);
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        // clamp keeps the result strictly inside (0,1) in double precision
        const double z = std::clamp(m.raw_score(rows[i]), -36.0, 36.0);
        out[i] = sigmoid(z);
    }
    return out;
}

namespace detail {

inline nlohmann::ordered_json node_to_json(const RegressionTree& t, int i) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    nlohmann::ordered_json j;
    if (n.feature < 0) {
        j["leaf"] = n.value;
    } else {
        j["feature"] = n.feature;
        j["threshold"] = n.threshold;
        j["left"] = node_to_json(t, n.left);
        j["right"] = node_to_json(t, n.right);
    }
    return j;
}

inline int node_from_json(const nlohmann::json& j, RegressionTree& t, std::size_t width) {
    const int idx = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (j.contains("leaf")) {
        t.nodes.back().value = j.at("leaf").get<double>();
        return idx;
    }
    const int f = j.at("feature").get<int>();
    if (f < 0 || static_cast<std::size_t>(f) >= width) throw ParseError("tree split feature out of range");
    const double thr = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), t, width);
    const int r = node_from_json(j.at("right"), t, width);
    auto& n = t.nodes[static_cast<std::size_t>(idx)];
    n.feature = f;
    n.threshold = thr;
    n.left = l;
    n.right = r;
    return idx;
}

} // namespace detail

inline constexpr int gbdt_format_version = 1;

inline nlohmann::ordered_json gbdt_to_json(const GbdtModel& m) {
    nlohmann::ordered_json j;
    j["format"] = "bookforge-gbdt";
    j["version"] = gbdt_format_version;
    j["n_features"] = m.n_features;
    j["base_score"] = m.base_score;
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : m.trees) trees.push_back(detail::node_to_json(t, 0));
    j["trees"] = std::move(trees);
    return j;
}

inline GbdtModel gbdt_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "bookforge-gbdt") throw ParseError("not a bookforge-gbdt model");
    if (j.at("version").get<int>() != gbdt_format_version)
        throw ParseError("unsupported model version " + std::to_string(j.at("version").get<int>()));
    GbdtModel m;
    m.n_features = j.at("n_features").get<std::size_t>();
    m.base_score = j.at("base_score").get<double>();
    for (const auto& t : j.at("trees")) {
        RegressionTree tree;
        detail::node_from_json(t, tree, m.n_features);
        m.trees.push_back(std::move(tree));
    }
    return m;
}

inline void save_gbdt(const GbdtModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model '" + path + "'");
    out << gbdt_to_json(m).dump() << '\n';
}

inline GbdtModel load_gbdt(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot open model '" + path + "'");
    try {
        return gbdt_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// p(y = 1 | x) = sigmoid(intercept + coefficient * x)
struct LogisticModel {
    double intercept = 0.0;
    double coefficient = 0.0;

    double predict(double x) const { return sigmoid(intercept + coefficient * x); }
};

/**
 * One-feature logistic regression maximizing the L2-penalized log-likelihood
 * (penalty `lambda * coefficient^2`) with damped Newton steps.
 *
 * The fit runs on the standardized feature and maps back, which leaves the
 * optimum unchanged.
 */
inline LogisticModel train_logistic(std::span<const double> x, std::span<const int> y, double lambda = 1e-6) {
    if (x.size() != y.size()) throw ConfigError("logistic: feature and label counts differ");
    std::size_t pos = 0;
    for (int v : y) pos += v ? 1 : 0;
    if (pos == 0 || pos == y.size()) throw ConfigError("logistic: labels contain a single class");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0.0)) throw ConfigError("logistic: feature is constant");

    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean) / sd;
    const double pen = lambda / (sd * sd); // penalty on the standardized slope

    auto objective = [&](double a, double b) {
        double l = pen * b * b;
        for (std::size_t i = 0; i < z.size(); ++i) l += logistic_loss(a + b * z[i], y[i]).loss;
        return l;
    };
    double a = std::log(static_cast<double>(pos) / (n - static_cast<double>(pos))), b = 0.0;
    double f = objective(a, b);
    for (int it = 0; it < 500; ++it) {
        double ga = 0.0, gb = 2.0 * pen * b, haa = 0.0, hab = 0.0, hbb = 2.0 * pen;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const auto d = logistic_loss(a + b * z[i], y[i]);
            ga += d.gradient;
            gb += d.gradient * z[i];
            haa += d.hessian;
            hab += d.hessian * z[i];
            hbb += d.hessian * z[i] * z[i];
        }
        if (std::sqrt(ga * ga + gb * gb) < 1e-8) break;
        double det = haa * hbb - hab * hab;
        double da, db;
        if (det > 1e-300) {
            da = -(hbb * ga - hab * gb) / det;
            db = -(haa * gb - hab * ga) / det;
        } else {
            da = -ga;
            db = -gb;
        }
        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            const double fa = objective(a + step * da, b + step * db);
            if (fa <= f) {
                a += step * da;
                b += step * db;
                moved = fa < f;
                f = fa;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    LogisticModel m;
    m.coefficient = b / sd;
    m.intercept = a - m.coefficient * mean;
    return m;
}

inline std::vector<double> predict_logistic(const LogisticModel& m, std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = m.predict(x[i]);
    return out;
}

inline nlohmann::ordered_json logistic_to_json(const LogisticModel& m) {
    nlohmann::ordered_json j;
    j["intercept"] = m.intercept;
    j["coefficient"] = m.coefficient;
    return j;
}

inline LogisticModel logistic_from_json(const nlohmann::json& j) {
    return {j.at("intercept").get<double>(), j.at("coefficient").get<double>()};
}

} // namespace bookforge
