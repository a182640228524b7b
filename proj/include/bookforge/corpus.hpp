#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "text_util.hpp"

namespace bookforge {

/// One corpus document.
struct Article {
    std::string id;
    std::string title;
    std::string text;
    std::vector<std::string> out_links;
    std::vector<std::string> categories;
    std::vector<std::int64_t> pageviews;

    bool operator==(const Article&) const = default;
};

struct DanglingLink {
    std::string source;
    std::string target;
};

struct ValidationReport {
    std::vector<DanglingLink> dangling_links;
    /// Articles whose case-folded title collides with an earlier article; the earlier one is indexed.
    std::vector<std::string> shadowed_titles;

    bool clean() const { return dangling_links.empty() && shadowed_titles.empty(); }
};

/**
 * Immutable id-indexed article collection.
 *
 * Articles keep file order. Link targets that are not in the corpus stay in
 * `Article::out_links` but are dropped from the resolved adjacency (`links_of`).
 */
class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Article> articles) : articles_(std::move(articles)) { index(); }

    std::size_t size() const { return articles_.size(); }
    bool empty() const { return articles_.empty(); }
    const std::vector<Article>& articles() const { return articles_; }
    const Article& at(std::size_t i) const { return articles_.at(i); }
    const Article& operator[](std::size_t i) const { return articles_[i]; }

    /// Length of every non-empty pageview series (0 when no article has one).
    std::size_t window_days() const { return window_days_; }

    bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

    std::size_t index_of(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) throw SchemaError("unknown article id '" + id + "'");
        return it->second;
    }

    const Article& get(const std::string& id) const { return articles_[index_of(id)]; }

    /// Case-folded, whitespace-normalized title lookup.
    const std::unordered_map<std::string, std::size_t>& title_index() const { return by_title_; }

    /// Resolved out-neighbours (corpus indices, file order of the link list, self-links kept).
    const std::vector<std::size_t>& links_of(std::size_t i) const { return resolved_[i]; }

    std::size_t out_link_count(std::size_t i) const { return resolved_[i].size(); }
    std::size_t in_link_count(std::size_t i) const { return in_count_[i]; }
    std::size_t resolvable_link_count() const { return resolvable_links_; }

    const ValidationReport& report() const { return report_; }

    bool operator==(const Corpus& other) const { return articles_ == other.articles_; }

private:
    void index() {
        by_id_.reserve(articles_.size());
        for (std::size_t i = 0; i < articles_.size(); ++i) {
            const auto& a = articles_[i];
            if (a.id.empty()) throw SchemaError("article " + std::to_string(i) + " has an empty id");
            if (!by_id_.emplace(a.id, i).second) throw SchemaError("duplicate article id '" + a.id + "'");
            std::unordered_set<std::string> seen;
            for (const auto& l : a.out_links)
                if (!seen.insert(l).second)
                    throw SchemaError("article '" + a.id + "' links '" + l + "' more than once");
            if (!a.pageviews.empty()) {
                if (window_days_ == 0) window_days_ = a.pageviews.size();
                else if (a.pageviews.size() != window_days_)
                    throw SchemaError("article '" + a.id + "' has " + std::to_string(a.pageviews.size()) +
                                      " pageview days, expected " + std::to_string(window_days_));
                for (auto v : a.pageviews)
                    if (v < 0) throw SchemaError("article '" + a.id + "' has a negative pageview count");
            }
            auto key = fold_title(a.title);
            if (!by_title_.emplace(key, i).second) report_.shadowed_titles.push_back(a.id);
        }
        resolved_.resize(articles_.size());
        in_count_.assign(articles_.size(), 0);
        for (std::size_t i = 0; i < articles_.size(); ++i) {
            for (const auto& l : articles_[i].out_links) {
                auto it = by_id_.find(l);
                if (it == by_id_.end()) {
                    report_.dangling_links.push_back({articles_[i].id, l});
                    continue;
                }
                resolved_[i].push_back(it->second);
                ++in_count_[it->second];
                ++resolvable_links_;
            }
        }
    }

    std::vector<Article> articles_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> by_title_;
    std::vector<std::vector<std::size_t>> resolved_;
    std::vector<std::size_t> in_count_;
    std::size_t resolvable_links_ = 0;
    std::size_t window_days_ = 0;
    ValidationReport report_;
};

inline nlohmann::ordered_json article_to_json(const Article& a) {
    nlohmann::ordered_json j;
    j["id"] = a.id;
    j["title"] = a.title;
    j["text"] = a.text;
    j["links"] = a.out_links;
    j["categories"] = a.categories;
    j["pageviews"] = a.pageviews;
    return j;
}

inline Article article_from_json(const nlohmann::json& j) {
    Article a;
    a.id = j.at("id").get<std::string>();
    a.title = j.value("title", std::string{});
    a.text = j.value("text", std::string{});
    if (j.contains("links")) a.out_links = j.at("links").get<std::vector<std::string>>();
    if (j.contains("categories")) a.categories = j.at("categories").get<std::vector<std::string>>();
    if (j.contains("pageviews")) a.pageviews = j.at("pageviews").get<std::vector<std::int64_t>>();
    return a;
}

/// Reads line-delimited JSON, one article per line. Blank lines are skipped.
inline Corpus load_corpus(std::istream& in) {
    std::vector<Article> articles;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
            articles.push_back(article_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return Corpus(std::move(articles));
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file '" + path + "'");
    return load_corpus(in);
}

inline void save_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& a : corpus.articles()) out << article_to_json(a).dump() << '\n';
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write corpus file '" + path + "'");
    save_corpus(corpus, out);
}

/// A curated book: title (the seed query), ordered chapters of ordered article ids, and page views.
struct GoldBook {
    std::string title;
    std::vector<std::vector<std::string>> chapters;
    std::int64_t views = 0;

    std::size_t components() const {
        std::size_t n = 0;
        for (const auto& c : chapters) n += c.size();
        return n;
    }

    /// Chapter order then within-chapter order.
    std::vector<std::string> flattened() const {
        std::vector<std::string> out;
        for (const auto& c : chapters) out.insert(out.end(), c.begin(), c.end());
        return out;
    }

    bool operator==(const GoldBook&) const = default;
};

/// Checks disjointness and corpus membership.
inline void validate_gold_book(const GoldBook& b, const Corpus& corpus) {
    if (b.components() == 0) throw SchemaError("gold book '" + b.title + "' has no components");
    std::unordered_set<std::string> seen;
    for (const auto& ch : b.chapters) {
        if (ch.empty()) throw SchemaError("gold book '" + b.title + "' has an empty chapter");
        for (const auto& id : ch) {
            if (!corpus.contains(id))
                throw SchemaError("gold book '" + b.title + "' references unknown article '" + id + "'");
            if (!seen.insert(id).second)
                throw SchemaError("gold book '" + b.title + "' lists '" + id + "' twice");
        }
    }
}

inline std::vector<GoldBook> gold_books_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ParseError("gold books file must hold a JSON array");
    std::vector<GoldBook> out;
    for (const auto& e : j) {
        GoldBook b;
        b.title = e.at("title").get<std::string>();
        b.views = e.value("views", std::int64_t{0});
        b.chapters = e.at("chapters").get<std::vector<std::vector<std::string>>>();
        out.push_back(std::move(b));
    }
    return out;
}

inline nlohmann::ordered_json gold_books_to_json(const std::vector<GoldBook>& books) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : books) {
        nlohmann::ordered_json j;
        j["title"] = b.title;
        j["views"] = b.views;
        j["chapters"] = b.chapters;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline std::vector<GoldBook> load_gold_books(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open gold books file '" + path + "'");
    try {
        return gold_books_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gold books: ") + e.what());
    }
}

inline void save_gold_books(const std::vector<GoldBook>& books, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write gold books file '" + path + "'");
    out << gold_books_to_json(books).dump(1) << '\n';
}

/// Keeps books with at least `min_views` views and at least `min_components` articles. Stable.
inline std::vector<GoldBook> filter_gold_books(const std::vector<GoldBook>& books, std::int64_t min_views,
                                               std::size_t min_components) {
    std::vector<GoldBook> out;
    std::copy_if(books.begin(), books.end(), std::back_inserter(out), [&](const GoldBook& b) {
        return b.views >= min_views && b.components() >= min_components;
    });
    return out;
}

} // namespace bookforge
