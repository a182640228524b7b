#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clustering.hpp"
#include "error.hpp"
#include "learners.hpp"
#include "parallel.hpp"
#include "selection.hpp"

namespace bookforge {

/// Splits a pair key "a|b".
inline std::pair<std::string, std::string> split_pair_key(const std::string& key) {
    const auto bar = key.find('|');
    if (bar == std::string::npos) throw Error("malformed pair key '" + key + "'");
    return {key.substr(0, bar), key.substr(bar + 1)};
}

/// Sorted distinct articles named by a set of pair keys.
inline std::vector<std::string> pair_articles(std::span<const std::string> keys) {
    std::vector<std::string> out;
    for (const auto& k : keys) {
        auto [a, b] = split_pair_key(k);
        out.push_back(std::move(a));
        out.push_back(std::move(b));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/**
 * d(a,b) = 1 - p(a,b) over `articles`. Every unordered pair must appear
 * exactly once in `keys`, in either orientation.
 */
inline Dissimilarity probs_to_dissimilarity(std::span<const std::string> articles, std::span<const std::string> keys,
                                            std::span<const double> probs) {
    if (keys.size() != probs.size()) throw Error("pair keys and probabilities differ in length");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < articles.size(); ++i) index[articles[i]] = i;
    const std::size_t n = articles.size();
    Dissimilarity d(n);
    std::vector<char> seen(n * n, 0);
    for (std::size_t p = 0; p < keys.size(); ++p) {
        const auto [a, b] = split_pair_key(keys[p]);
        auto ia = index.find(a), ib = index.find(b);
        if (ia == index.end() || ib == index.end()) throw Error("pair '" + keys[p] + "' names an unknown article");
        if (!(probs[p] >= 0.0 && probs[p] <= 1.0)) throw Error("pair probability outside [0,1]");
        const auto i = ia->second, j = ib->second;
        if (i == j) throw Error("pair '" + keys[p] + "' repeats an article");
        if (seen[i * n + j]) throw Error("pair '" + keys[p] + "' listed twice");
        seen[i * n + j] = seen[j * n + i] = 1;
        d.set(i, j, 1.0 - probs[p]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!seen[i * n + j]) throw Error("missing pair " + articles[i] + "|" + articles[j]);
    return d;
}

/// Mean predicted probability per row over `models`.
inline std::vector<double> average_probabilities(const RowSet& data, std::span<const GbdtModel* const> models) {
    if (models.empty()) throw ConfigError("no models to average");
    std::vector<std::vector<double>> per(models.size());
    parallel_for(models.size(), [&](std::size_t m) { per[m] = predict_gbdt(*models[m], data.rows); });
    std::vector<double> avg(data.size(), 0.0);
    for (const auto& p : per)
        for (std::size_t r = 0; r < p.size(); ++r) avg[r] += p[r];
    for (auto& v : avg) v /= static_cast<double>(models.size());
    return avg;
}

/// Chapter count suggested by affinity propagation (at least 1).
inline std::size_t estimate_k(const Dissimilarity& d, const AffinityParams& params = {}) {
    if (d.size() <= 1) return d.size();
    return std::max<std::size_t>(1, affinity_propagation(d, params).k);
}

struct ChapterResult {
    std::vector<std::string> articles; // sorted ids; partition item i is articles[i]
    Partition partition;
    std::size_t k = 0;
    bool k_estimated = false;
    std::vector<double> pair_probs;
    Dissimilarity dissimilarity;

    /// Clusters as id lists, clusters in canonical order.
    std::vector<std::vector<std::string>> clusters() const {
        std::vector<std::vector<std::string>> out;
        for (const auto& c : partition.clusters()) {
            std::vector<std::string> ids;
            for (auto i : c) ids.push_back(articles[i]);
            out.push_back(std::move(ids));
        }
        return out;
    }
};

/// Dissimilarity from pair probabilities, then clustering with `k` or, when absent, the AP estimate.
inline ChapterResult chapter_from_probabilities(const RowSet& data, std::vector<double> probs, std::optional<std::size_t> k,
                                                ClusterMethod method = ClusterMethod::agnes) {
    ChapterResult r;
    r.articles = pair_articles(data.ids);
    if (r.articles.size() < 2) throw Error("chaptering needs at least two articles");
    r.dissimilarity = probs_to_dissimilarity(r.articles, data.ids, probs);
    r.pair_probs = std::move(probs);
    r.k_estimated = !k.has_value();
    r.k = k ? std::min(*k, r.articles.size()) : estimate_k(r.dissimilarity);
    r.partition = cluster(r.dissimilarity, r.k, method);
    return r;
}

/// Leave-one-out chaptering of pair dataset `i`: models[i] is excluded from the probability average.
inline ChapterResult chapter_articles(std::span<const RowSet> datasets, std::span<const GbdtModel> models, std::size_t i,
                                      std::optional<std::size_t> k, ClusterMethod method = ClusterMethod::agnes) {
    if (models.size() != datasets.size()) throw ConfigError("one model per dataset is required");
    const auto foreign = foreign_models(models, i);
    return chapter_from_probabilities(datasets[i], average_probabilities(datasets[i], foreign), k, method);
}

inline nlohmann::ordered_json partition_to_json(const ChapterResult& r) {
    nlohmann::ordered_json j;
    j["k"] = r.k;
    j["clusters"] = r.clusters();
    return j;
}

} // namespace bookforge
