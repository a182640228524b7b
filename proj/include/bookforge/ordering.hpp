#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "learners.hpp"
#include "selection.hpp"

namespace bookforge {

/// Unordered article pair in stored orientation; class 1 means `first` precedes `second`.
struct OrderPair {
    std::string first;
    std::string second;
};

struct OrderRanks {
    std::map<std::string, std::int64_t> article_rank;
    std::vector<std::int64_t> chapter_rank; // by chapter index
    std::vector<double> chapter_rank_normalized;
};

/**
 * Rank counting over pair classes. A same-chapter pair increments the
 * article that should come later; a cross-chapter pair increments the chapter
 * that should come later. Chapter ranks are then divided by chapter size.
 */
inline OrderRanks ranks_from_pair_classes(const std::vector<std::vector<std::string>>& chapters, std::span<const OrderPair> pairs,
                                          std::span<const int> classes) {
    if (pairs.size() != classes.size()) throw Error("pairs and classes differ in length");
    std::unordered_map<std::string, std::size_t> chapter_of;
    OrderRanks r;
    for (std::size_t c = 0; c < chapters.size(); ++c) {
        if (chapters[c].empty()) throw Error("empty chapter " + std::to_string(c));
        for (const auto& id : chapters[c]) {
            if (!chapter_of.emplace(id, c).second) throw Error("article '" + id + "' assigned to two chapters");
            r.article_rank[id] = 0;
        }
    }
    r.chapter_rank.assign(chapters.size(), 0);
    auto lookup = [&](const std::string& id) {
        auto it = chapter_of.find(id);
        if (it == chapter_of.end()) throw Error("pair references unassigned article '" + id + "'");
        return it->second;
    };
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto c1 = lookup(pairs[p].first), c2 = lookup(pairs[p].second);
        const bool first_before = classes[p] == 1;
        if (c1 == c2) ++r.article_rank[first_before ? pairs[p].second : pairs[p].first];
        else ++r.chapter_rank[first_before ? c2 : c1];
    }
    for (std::size_t c = 0; c < chapters.size(); ++c)
        r.chapter_rank_normalized.push_back(static_cast<double>(r.chapter_rank[c]) / static_cast<double>(chapters[c].size()));
    return r;
}

struct BookDraft {
    std::string title;
    std::vector<std::vector<std::string>> chapters;
    nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
};

/// Chapters ascending by normalized rank (ties: chapter index), articles ascending by rank (ties: id).
inline BookDraft assemble_book(const std::vector<std::vector<std::string>>& chapters, const OrderRanks& ranks, std::string title,
                               nlohmann::ordered_json provenance = nlohmann::ordered_json::object()) {
    if (ranks.chapter_rank_normalized.size() != chapters.size()) throw Error("ranks do not match the chapters");
    std::vector<std::size_t> order(chapters.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ranks.chapter_rank_normalized[a] < ranks.chapter_rank_normalized[b];
    });
    BookDraft book{std::move(title), {}, std::move(provenance)};
    for (auto c : order) {
        auto arts = chapters[c];
        std::sort(arts.begin(), arts.end(), [&](const std::string& a, const std::string& b) {
            const auto ra = ranks.article_rank.at(a), rb = ranks.article_rank.at(b);
            return ra != rb ? ra < rb : a < b;
        });
        book.chapters.push_back(std::move(arts));
    }
    return book;
}

inline nlohmann::ordered_json book_to_json(const BookDraft& b) {
    nlohmann::ordered_json j;
    j["title"] = b.title;
    j["chapters"] = nlohmann::ordered_json::array();
    for (const auto& c : b.chapters) j["chapters"].push_back({{"articles", c}});
    j["provenance"] = b.provenance;
    return j;
}

inline BookDraft book_from_json(const nlohmann::json& j) {
    BookDraft b;
    try {
        b.title = j.at("title").get<std::string>();
        for (const auto& c : j.at("chapters")) b.chapters.push_back(c.at("articles").get<std::vector<std::string>>());
        if (j.contains("provenance")) b.provenance = j.at("provenance");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("book: ") + e.what());
    }
    return b;
}

/// Parses stored pair keys "a|b" into pairs.
inline std::vector<OrderPair> order_pairs(std::span<const std::string> keys) {
    std::vector<OrderPair> out;
    for (const auto& k : keys) {
        const auto bar = k.find('|');
        if (bar == std::string::npos) throw Error("malformed pair key '" + k + "'");
        out.push_back({k.substr(0, bar), k.substr(bar + 1)});
    }
    return out;
}

inline std::vector<int> classes_from_probabilities(std::span<const double> p, double threshold = 0.5) {
    std::vector<int> out;
    for (double v : p) out.push_back(v >= threshold ? 1 : 0);
    return out;
}

/// LOO pair classes for order dataset `i`: calibrated probability >= 0.5.
inline std::vector<int> classify_pair_order(std::span<const RowSet> datasets, std::span<const GbdtModel> models, std::size_t i) {
    return classes_from_probabilities(loo_protocol(datasets, models, i).calibrated_prob);
}

} // namespace bookforge
