#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "learners.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace bookforge {

/// Feature rows of one dataset with their labels and row keys (article ids or pair keys).
struct RowSet {
    FeatureMatrix rows;
    std::vector<int> labels;
    std::vector<std::string> ids;

    std::size_t size() const { return rows.size(); }

    RowSet subset(std::span<const std::size_t> idx) const {
        RowSet out;
        for (auto i : idx) {
            out.rows.push_back(rows[i]);
            if (!labels.empty()) out.labels.push_back(labels[i]);
            out.ids.push_back(ids[i]);
        }
        return out;
    }
};

/// Highest probability -> rank 1, lowest -> rank n; ties share the mean of their span.
inline std::vector<double> probs_to_ranks(std::span<const double> probs) {
    if (probs.empty()) throw Error("probs_to_ranks: empty input");
    std::vector<double> neg(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!std::isfinite(probs[i])) throw Error("probs_to_ranks: non-finite probability");
        neg[i] = -probs[i];
    }
    return average_ranks(neg);
}

struct LooScores {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rank_table; // one column per foreign model, rank_table[model][row]
    std::vector<double> avg_rank;
    std::vector<double> calibrated_prob;
    std::optional<LogisticModel> calibration; // empty when the fallback prior was used

    std::size_t size() const { return avg_rank.size(); }
};

/// Per-row mean of the rank columns produced by `models` on `data`.
inline LooScores rank_with_models(const RowSet& data, std::span<const GbdtModel* const> models) {
    if (data.size() == 0) throw Error("cannot score an empty dataset");
    LooScores s;
    s.ids = data.ids;
    s.rank_table.resize(models.size());
    parallel_for(models.size(), [&](std::size_t m) { s.rank_table[m] = probs_to_ranks(predict_gbdt(*models[m], data.rows)); });
    s.avg_rank.assign(data.size(), 0.0);
    for (const auto& col : s.rank_table)
        for (std::size_t r = 0; r < col.size(); ++r) s.avg_rank[r] += col[r];
    for (auto& v : s.avg_rank) v /= static_cast<double>(models.size());
    return s;
}

/**
 * Fits the one-feature logistic model avg_rank -> label on the scored rows and
 * fills `calibrated_prob`. When the labels hold a single class or the ranks are
 * constant the model is undefined; every row then gets the smoothed positive
 * rate (pos + 0.5) / (n + 1).
 */
inline void calibrate_on_labels(LooScores& s, std::span<const int> labels) {
    std::size_t pos = 0;
    for (int y : labels) pos += y ? 1 : 0;
    const bool constant = std::all_of(s.avg_rank.begin(), s.avg_rank.end(), [&](double v) { return v == s.avg_rank.front(); });
    if (pos == 0 || pos == labels.size() || constant) {
        s.calibration.reset();
        s.calibrated_prob.assign(s.size(), (static_cast<double>(pos) + 0.5) / (static_cast<double>(labels.size()) + 1.0));
        return;
    }
    s.calibration = train_logistic(s.avg_rank, labels);
    s.calibrated_prob = predict_logistic(*s.calibration, s.avg_rank);
}

inline std::vector<const GbdtModel*> foreign_models(std::span<const GbdtModel> models, std::size_t i) {
    if (models.size() < 2) throw ConfigError("leave-one-out needs at least two datasets");
    if (i >= models.size()) throw ConfigError("dataset index out of range");
    std::vector<const GbdtModel*> foreign;
    for (std::size_t j = 0; j < models.size(); ++j)
        if (j != i) foreign.push_back(&models[j]);
    return foreign;
}

/**
 * Leave-one-out scoring of dataset `i`: predictions from every model except
 * models[i], per-model descending-probability ranks, their row mean, and a
 * logistic calibration fit on dataset i's own labels.
 */
inline LooScores loo_protocol(std::span<const RowSet> datasets, std::span<const GbdtModel> models, std::size_t i) {
    if (datasets.size() < 2) throw ConfigError("leave-one-out needs at least two datasets");
    if (models.size() != datasets.size()) throw ConfigError("one model per dataset is required");
    auto s = rank_with_models(datasets[i], foreign_models(models, i));
    calibrate_on_labels(s, datasets[i].labels);
    return s;
}

/// Indices of the ceil(fraction * n) rows with the smallest avg_rank (ties: id ascending).
inline std::vector<std::size_t> top_fraction_indices(const LooScores& s, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("top fraction must lie in (0,1]");
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s.avg_rank[a] != s.avg_rank[b]) return s.avg_rank[a] < s.avg_rank[b];
        return s.ids[a] < s.ids[b];
    });
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(s.size()) - 1e-9));
    order.resize(std::min(order.size(), std::max<std::size_t>(keep, 1)));
    return order;
}

/// Rows sorted by ascending avg_rank, first ceil(fraction * n) kept.
inline RowSet refine_top_fraction(const RowSet& rows, const LooScores& scores, double fraction = 0.2) {
    if (rows.size() != scores.size()) throw ConfigError("rows and scores differ in length");
    return rows.subset(top_fraction_indices(scores, fraction));
}

struct SelectionOutcome {
    LooScores stage1;
    LooScores stage2;
    std::vector<std::size_t> stage2_rows; // indices into the stage-1 rows
};

/// Both stages of the selection protocol for dataset i.
inline SelectionOutcome run_selection_loo(std::span<const RowSet> datasets, std::span<const GbdtModel> models, std::size_t i,
                                          double fraction = 0.2) {
    SelectionOutcome out;
    out.stage1 = loo_protocol(datasets, models, i);
    out.stage2_rows = top_fraction_indices(out.stage1, fraction);
    const RowSet reduced = datasets[i].subset(out.stage2_rows);
    out.stage2 = rank_with_models(reduced, foreign_models(models, i));
    calibrate_on_labels(out.stage2, reduced.labels);
    return out;
}

struct ChooseOptions {
    std::optional<std::size_t> n; // evaluation mode when set
    std::size_t max_articles = 200;
    double threshold = 0.5;
};

/**
 * Evaluation mode (n given): the n rows with the smallest stage-2 avg_rank.
 * Generation mode: rows with calibrated_prob >= threshold in avg_rank order,
 * capped at max_articles; when none qualifies, the top ceil(sqrt(rows)).
 */
inline std::vector<std::string> choose_articles(const LooScores& s, const ChooseOptions& opt = {}) {
    if (opt.n && *opt.n < 1) throw ConfigError("choose_articles: n must be at least 1");
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (s.avg_rank[a] != s.avg_rank[b]) return s.avg_rank[a] < s.avg_rank[b];
        return s.ids[a] < s.ids[b];
    });
    std::vector<std::string> out;
    if (opt.n) {
        for (std::size_t r = 0; r < std::min(*opt.n, order.size()); ++r) out.push_back(s.ids[order[r]]);
        return out;
    }
    for (auto r : order)
        if (s.calibrated_prob[r] >= opt.threshold && out.size() < opt.max_articles) out.push_back(s.ids[r]);
    if (out.empty()) {
        const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(order.size()))));
        for (std::size_t r = 0; r < std::min(k, order.size()); ++r) out.push_back(s.ids[order[r]]);
    }
    return out;
}

} // namespace bookforge
