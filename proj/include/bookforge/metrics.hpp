#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "clustering.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace bookforge {

/// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie). Higher score means positive.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("auc: scores and labels differ in length");
    const auto ranks = average_ranks(scores);
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i]) {
            pos += 1.0;
            rank_sum += ranks[i];
        }
    const double neg = static_cast<double>(scores.size()) - pos;
    if (pos == 0.0 || neg == 0.0) throw Error("auc needs both classes");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/**
 * Precision and recall over the n best-scored items (ties: id ascending).
 * `positives` overrides the recall denominator, e.g. with gold items that
 * never became candidates.
 */
inline PrecisionRecall precision_recall_at_n(std::span<const double> scores, std::span<const int> labels,
                                             std::span<const std::string> ids, std::size_t n,
                                             std::optional<std::size_t> positives = std::nullopt) {
    if (n < 1) throw ConfigError("precision@n: n must be at least 1");
    if (scores.size() != labels.size() || scores.size() != ids.size()) throw Error("precision@n: inputs differ in length");
    std::size_t pos = positives.value_or(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)));
    if (pos == 0) throw Error("recall undefined without positives");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(n, order.size()); ++r) hits += labels[order[r]] ? 1 : 0;
    return {static_cast<double>(hits) / static_cast<double>(n), static_cast<double>(hits) / static_cast<double>(pos)};
}

inline double adjusted_rand(const Partition& a, const Partition& b) {
    if (a.size() != b.size()) throw Error("adjusted_rand: partitions cover different item counts");
    const std::size_t n = a.size();
    auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
    std::vector<double> table(a.k() * b.k(), 0.0), rows(a.k(), 0.0), cols(b.k(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        table[a[i] * b.k() + b[i]] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (double v : table) index += c2(v);
    for (double v : rows) sa += c2(v);
    for (double v : cols) sb += c2(v);
    const double total = c2(static_cast<double>(n));
    if (total == 0.0) return 1.0;
    const double expected = sa * sb / total;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0; // both trivial in the same way
    return (index - expected) / (max_index - expected);
}

/**
 * Permutation p-value of adjusted_rand(a, b): share of label permutations of
 * `a` reaching at least the observed index, with add-one smoothing.
 * Permutation t draws from its own stream, so the result is thread-count free.
 */
inline double ari_pvalue(const Partition& a, const Partition& b, std::size_t permutations = 999, std::uint64_t seed = 0) {
    const double observed = adjusted_rand(a, b);
    std::vector<char> hit(permutations, 0);
    parallel_for(permutations, [&](std::size_t t) {
        Rng rng(splitmix64(seed + t));
        auto labels = a.assignment();
        rng.shuffle(labels);
        hit[t] = adjusted_rand(Partition(labels), b) >= observed - 1e-12 ? 1 : 0;
    });
    const auto count = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
    return (count + 1.0) / (static_cast<double>(permutations) + 1.0);
}

/// Kendall tau-b between two orderings of the same items.
inline Correlation kendall_tau_orders(std::span<const std::string> order1, std::span<const std::string> order2) {
    if (order1.size() != order2.size()) throw Error("kendall: orders differ in length");
    std::unordered_map<std::string, double> pos2;
    for (std::size_t i = 0; i < order2.size(); ++i) pos2[order2[i]] = static_cast<double>(i);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < order1.size(); ++i) {
        auto it = pos2.find(order1[i]);
        if (it == pos2.end()) throw Error("kendall: item '" + order1[i] + "' missing from the second order");
        x.push_back(static_cast<double>(i));
        y.push_back(it->second);
    }
    if (pos2.size() != order2.size()) throw Error("kendall: repeated items");
    auto r = kendall_tau(x, y);
    if (!r) throw Error("kendall: needs at least two items");
    return *r;
}

/// "*" below 0.01, "**" below 0.05, "***" below 0.1, else empty.
inline std::string significance_stars(double p) {
    if (p < 0.01) return "*";
    if (p < 0.05) return "**";
    if (p < 0.1) return "***";
    return "";
}

struct BookEvaluation {
    std::string title;
    std::size_t candidates = 0;
    std::size_t n = 0;
    double auc = 0.0;
    double precision_at_n = 0.0;
    double recall_at_n = 0.0;
    double ari = 0.0;
    double ari_pvalue = 1.0;
    std::size_t gold_k = 0;
    double ari_ap = 0.0;
    double ari_ap_pvalue = 1.0;
    std::size_t ap_k = 0;
    std::optional<double> kendall_articles;
    std::optional<double> kendall_articles_pvalue;
    std::optional<double> kendall_chapters;
    std::optional<double> kendall_chapters_pvalue;
};

struct EvalReport {
    std::vector<BookEvaluation> books;
    double seconds = 0.0;

    double mean(double BookEvaluation::*field) const {
        double s = 0.0;
        for (const auto& b : books) s += b.*field;
        return books.empty() ? 0.0 : s / static_cast<double>(books.size());
    }

    /// Mean over the books where the value is defined.
    double mean(std::optional<double> BookEvaluation::*field) const {
        double s = 0.0;
        std::size_t c = 0;
        for (const auto& b : books)
            if ((b.*field).has_value()) {
                s += *(b.*field);
                ++c;
            }
        return c ? s / static_cast<double>(c) : 0.0;
    }

    double mean_chance_rate() const {
        double s = 0.0;
        for (const auto& b : books) s += static_cast<double>(b.n) / static_cast<double>(b.candidates);
        return books.empty() ? 0.0 : s / static_cast<double>(books.size());
    }

    double share_significant_ari(double alpha = 0.05) const {
        std::size_t c = 0;
        for (const auto& b : books) c += b.ari_pvalue < alpha ? 1 : 0;
        return books.empty() ? 0.0 : static_cast<double>(c) / static_cast<double>(books.size());
    }
};

inline nlohmann::ordered_json published_reference_values() {
    return {{"auc", 0.9765},           {"precision_at_n", 0.2027}, {"recall_at_n", 0.2228},
            {"ari_agnes_gold_k", 0.4276}, {"ari_agnes_ap_k", 0.3716}, {"kendall_articles", 0.8566},
            {"kendall_chapters", 0.7735}};
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
    auto stars = [](const std::optional<double>& p) { return p ? significance_stars(*p) : std::string(); };
    nlohmann::ordered_json j;
    j["books"] = nlohmann::ordered_json::array();
    for (const auto& b : r.books) {
        nlohmann::ordered_json e;
        e["title"] = b.title;
        e["candidates"] = b.candidates;
        e["n"] = b.n;
        e["auc"] = b.auc;
        e["precision_at_n"] = b.precision_at_n;
        e["recall_at_n"] = b.recall_at_n;
        e["gold_k"] = b.gold_k;
        e["ari"] = b.ari;
        e["ari_pvalue"] = b.ari_pvalue;
        e["ari_significance"] = significance_stars(b.ari_pvalue);
        e["ap_k"] = b.ap_k;
        e["ari_ap"] = b.ari_ap;
        e["ari_ap_pvalue"] = b.ari_ap_pvalue;
        e["ari_ap_significance"] = significance_stars(b.ari_ap_pvalue);
        e["kendall_articles"] = opt(b.kendall_articles);
        e["kendall_articles_pvalue"] = opt(b.kendall_articles_pvalue);
        e["kendall_articles_significance"] = stars(b.kendall_articles_pvalue);
        e["kendall_chapters"] = opt(b.kendall_chapters);
        e["kendall_chapters_pvalue"] = opt(b.kendall_chapters_pvalue);
        e["kendall_chapters_significance"] = stars(b.kendall_chapters_pvalue);
        j["books"].push_back(std::move(e));
    }
    nlohmann::ordered_json avg;
    avg["auc"] = r.mean(&BookEvaluation::auc);
    avg["precision_at_n"] = r.mean(&BookEvaluation::precision_at_n);
    avg["recall_at_n"] = r.mean(&BookEvaluation::recall_at_n);
    avg["chance_rate"] = r.mean_chance_rate();
    avg["ari"] = r.mean(&BookEvaluation::ari);
    avg["ari_ap"] = r.mean(&BookEvaluation::ari_ap);
    avg["ari_significant_share"] = r.share_significant_ari();
    avg["kendall_articles"] = r.mean(&BookEvaluation::kendall_articles);
    avg["kendall_chapters"] = r.mean(&BookEvaluation::kendall_chapters);
    j["averages"] = std::move(avg);
    j["metadata"] = {{"books", r.books.size()},
                     {"seconds", r.seconds},
                     {"significance", {{"*", "p < 0.01"}, {"**", "p < 0.05"}, {"***", "p < 0.1"}}},
                     {"reference_values", published_reference_values()}};
    return j;
}

} // namespace bookforge
