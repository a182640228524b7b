#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <numeric>
#include <optional>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "clustering.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "graph.hpp"
#include "selection.hpp"
#include "stats.hpp"
#include "text.hpp"
#include "text_util.hpp"

namespace bookforge {

inline constexpr double missing_value = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Seeds and candidates

struct SeedSet {
    std::string query;
    std::vector<std::string> concept_ids;
};

/**
 * Offline stand-in for wikification: greedy left-to-right longest match of
 * query n-grams against the case-folded title index. A lone stop word never
 * matches; it is skipped.
 */
inline SeedSet seed_concepts_from_query(const Corpus& corpus, std::string_view query) {
    const auto tokens = tokenize(query);
    if (tokens.empty()) throw ConfigError("seed query is empty");
    SeedSet seeds{std::string(query), {}};
    const auto& index = corpus.title_index();
    std::size_t i = 0;
    while (i < tokens.size()) {
        bool matched = false;
        for (std::size_t len = tokens.size() - i; len >= 1; --len) {
            if (len == 1 && is_stop_word(tokens[i])) break;
            auto it = index.find(join_tokens(tokens, i, i + len));
            if (it == index.end()) continue;
            const auto& id = corpus[it->second].id;
            if (std::find(seeds.concept_ids.begin(), seeds.concept_ids.end(), id) == seeds.concept_ids.end())
                seeds.concept_ids.push_back(id);
            i += len;
            matched = true;
            break;
        }
        if (!matched) ++i;
    }
    if (seeds.concept_ids.empty()) throw NoSeedFound("no article title matches the query '" + std::string(query) + "'");
    return seeds;
}

/// Articles 1..max_hops links away from any seed, seeds excluded, in corpus order.
inline std::vector<std::string> find_candidates(const Corpus& corpus, const SeedSet& seeds, int max_hops = 3) {
    if (max_hops < 1) throw ConfigError("max_hops must be at least 1");
    std::vector<char> visited(corpus.size(), 0);
    std::vector<std::size_t> frontier;
    for (const auto& s : seeds.concept_ids) {
        const auto i = corpus.index_of(s);
        if (!visited[i]) {
            visited[i] = 1;
            frontier.push_back(i);
        }
    }
    std::vector<char> candidate(corpus.size(), 0);
    for (int level = 1; level <= max_hops && !frontier.empty(); ++level) {
        std::vector<std::size_t> next;
        for (auto v : frontier)
            for (auto w : corpus.links_of(v))
                if (!visited[w]) {
                    visited[w] = 1;
                    candidate[w] = 1;
                    next.push_back(w);
                }
        frontier.swap(next);
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (candidate[i]) out.push_back(corpus[i].id);
    return out;
}

/// Sub-network over seeds and candidates with its structural measures.
struct BookGraph {
    SubNetwork network;
    StructuralFeatures structure;
};

inline BookGraph build_book_graph(const Corpus& corpus, const SeedSet& seeds, std::span<const std::string> candidates,
                                  const CentralityParams& params = {}) {
    std::vector<std::string> members(seeds.concept_ids);
    members.insert(members.end(), candidates.begin(), candidates.end());
    BookGraph g;
    g.network = build_subnetwork(corpus, members);
    g.structure = compute_centralities(g.network, params);
    return g;
}

// ---------------------------------------------------------------------------
// Per-article attributes and relative features

struct ArticleProfile {
    TextStats stats;
    std::vector<double> pageviews;
    std::vector<std::string> categories; // sorted, unique
    double out_links = 0.0;              // references
    double in_links = 0.0;               // referenced-by
    double aggregated_views = 0.0;
    std::vector<double> embedding;
};

inline ArticleProfile make_profile(const Corpus& corpus, const std::string& id, const DocumentEmbedder& emb) {
    const auto i = corpus.index_of(id);
    const auto& a = corpus[i];
    ArticleProfile p;
    p.stats = text_stats(a.text);
    p.pageviews.assign(a.pageviews.begin(), a.pageviews.end());
    for (double v : p.pageviews) p.aggregated_views += v;
    p.categories = a.categories;
    std::sort(p.categories.begin(), p.categories.end());
    p.categories.erase(std::unique(p.categories.begin(), p.categories.end()), p.categories.end());
    p.out_links = static_cast<double>(corpus.out_link_count(i));
    p.in_links = static_cast<double>(corpus.in_link_count(i));
    p.embedding = emb.vector_for(a);
    return p;
}

inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

/// Features of x relative to y; signed differences are x - y. NaN marks undefined values.
struct RelativeFeatures {
    double cosine = 0.0;
    double length_diff = 0.0, abs_length_diff = 0.0;
    double paragraph_diff = 0.0, abs_paragraph_diff = 0.0;
    double kendall_stat = missing_value, kendall_p = missing_value;
    double spearman_stat = missing_value, spearman_p = missing_value;
    double jaccard = 0.0;
    double references_diff = 0.0, abs_references_diff = 0.0;
    double referenced_by_diff = 0.0, abs_referenced_by_diff = 0.0;
    double categories_diff = 0.0, abs_categories_diff = 0.0;
};

inline RelativeFeatures relative_features(const ArticleProfile& x, const ArticleProfile& y) {
    RelativeFeatures r;
    r.cosine = cosine(x.embedding, y.embedding);
    r.length_diff = static_cast<double>(x.stats.length) - static_cast<double>(y.stats.length);
    r.abs_length_diff = std::abs(r.length_diff);
    r.paragraph_diff = static_cast<double>(x.stats.paragraphs) - static_cast<double>(y.stats.paragraphs);
    r.abs_paragraph_diff = std::abs(r.paragraph_diff);
    // correlations need aligned series of at least three days
    if (x.pageviews.size() >= 3 && x.pageviews.size() == y.pageviews.size()) {
        if (auto k = kendall_tau(x.pageviews, y.pageviews)) {
            r.kendall_stat = k->statistic;
            r.kendall_p = k->pvalue;
        }
        if (auto s = spearman(x.pageviews, y.pageviews)) {
            r.spearman_stat = s->statistic;
            r.spearman_p = s->pvalue;
        }
    }
    r.jaccard = jaccard(x.categories, y.categories);
    r.references_diff = x.out_links - y.out_links;
    r.abs_references_diff = std::abs(r.references_diff);
    r.referenced_by_diff = x.in_links - y.in_links;
    r.abs_referenced_by_diff = std::abs(r.referenced_by_diff);
    r.categories_diff = static_cast<double>(x.categories.size()) - static_cast<double>(y.categories.size());
    r.abs_categories_diff = std::abs(r.categories_diff);
    return r;
}

/// Replaces NaN/inf cells with their column's mean over finite cells (0 for an all-missing column).
inline std::size_t impute_column_means(FeatureMatrix& rows) {
    if (rows.empty()) return 0;
    const std::size_t width = rows.front().size();
    std::size_t imputed = 0;
    for (std::size_t f = 0; f < width; ++f) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (const auto& r : rows)
            if (std::isfinite(r[f])) {
                sum += r[f];
                ++cnt;
            }
        const double mean = cnt ? sum / static_cast<double>(cnt) : 0.0;
        for (auto& r : rows)
            if (!std::isfinite(r[f])) {
                r[f] = mean;
                ++imputed;
            }
    }
    return imputed;
}

// ---------------------------------------------------------------------------
// Candidate dataset

inline const std::vector<std::string>& candidate_feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n = {"In-degree", "Out-degree", "PageRank", "Betweenness", "Closeness", "Hub", "Authority",
                                      "Min Dijkstra distance from the seed", "Average Dijkstra distance from the seed concept",
                                      "Max Dijkstra distance from the seed"};
        auto triple = [&](const std::string& what) {
            n.push_back("Min " + what);
            n.push_back("Average " + what);
            n.push_back("Max " + what);
        };
        triple("cosine similarity");
        triple("length difference");
        triple("absolute length difference");
        triple("paragraph difference");
        triple("absolute paragraph difference");
        triple("Kendall Tau statistic");
        triple("Kendall Tau p-value");
        triple("Spearman statistic");
        triple("Spearman p-value");
        n.push_back("Aggregated page views");
        triple("Jaccard coefficient on categories");
        triple("references difference");
        triple("absolute references difference");
        triple("references to difference");
        triple("absolute references to difference");
        triple("categories number difference");
        triple("absolute categories number difference");
        return n;
    }();
    return names;
}

inline constexpr std::size_t candidate_feature_count = 59;

struct CandidateRow {
    std::string article_id;
    std::vector<double> features;
    int label = 0;
};

namespace detail {

// Relative quantities in Table order, each aggregated min/avg/max over seeds.
inline std::vector<double> relative_vector(const RelativeFeatures& r) {
    return {r.cosine,        r.length_diff,     r.abs_length_diff,     r.paragraph_diff,
            r.abs_paragraph_diff, r.kendall_stat, r.kendall_p,          r.spearman_stat,
            r.spearman_p,    r.jaccard,         r.references_diff,     r.abs_references_diff,
            r.referenced_by_diff, r.abs_referenced_by_diff, r.categories_diff, r.abs_categories_diff};
}

inline void push_aggregate(std::vector<double>& out, const std::vector<double>& values) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        ++n;
    }
    if (n == 0) {
        out.insert(out.end(), {missing_value, missing_value, missing_value});
    } else {
        out.insert(out.end(), {lo, sum / static_cast<double>(n), hi});
    }
}

inline double node_value(const std::vector<double>& v, const SubNetwork& g, const std::string& id) {
    auto i = g.find(id);
    return i ? v[*i] : missing_value;
}

} // namespace detail

/**
 * One row per candidate (graph node that is not a seed), in graph order.
 *
 * Relative features are computed seed by seed (seed value minus candidate
 * value) and aggregated into min/avg/max. Missing cells are imputed with the
 * column mean. Labels are 1 for gold members when `gold` is given.
 */
inline std::vector<CandidateRow> build_candidate_dataset(const Corpus& corpus, const SeedSet& seeds, const GoldBook* gold,
                                                         const BookGraph& graph, const DocumentEmbedder& emb) {
    const auto& g = graph.network;
    const auto& st = graph.structure;
    std::unordered_set<std::string> seed_set(seeds.concept_ids.begin(), seeds.concept_ids.end());
    std::vector<std::size_t> nodes;
    for (std::size_t v = 0; v < g.size(); ++v)
        if (!seed_set.count(g.id(v))) nodes.push_back(v);
    if (nodes.empty()) throw Error("candidate dataset: no candidates");

    std::vector<ArticleProfile> seed_profiles;
    for (const auto& s : seeds.concept_ids) seed_profiles.push_back(make_profile(corpus, s, emb));
    const auto dist = seed_distances(g, seeds.concept_ids);
    std::unordered_set<std::string> members;
    if (gold)
        for (const auto& ch : gold->chapters) members.insert(ch.begin(), ch.end());

    std::vector<CandidateRow> rows(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t r) {
        const auto v = nodes[r];
        const auto& id = g.id(v);
        const auto cand = make_profile(corpus, id, emb);
        auto& f = rows[r].features;
        f.reserve(candidate_feature_count);
        f.insert(f.end(), {st.in_degree[v], st.out_degree[v], st.pagerank[v], st.betweenness[v], st.closeness[v], st.hub[v],
                           st.authority[v]});
        const auto& d = dist[v];
        f.insert(f.end(), {d.min.value_or(missing_value), d.avg.value_or(missing_value), d.max.value_or(missing_value)});

        std::vector<std::vector<double>> per_seed;
        for (const auto& sp : seed_profiles) per_seed.push_back(detail::relative_vector(relative_features(sp, cand)));
        auto column = [&](std::size_t q) {
            std::vector<double> c;
            for (const auto& ps : per_seed) c.push_back(ps[q]);
            return c;
        };
        for (std::size_t q = 0; q < 9; ++q) detail::push_aggregate(f, column(q)); // cosine .. Spearman p-value
        f.push_back(cand.aggregated_views);
        for (std::size_t q = 9; q < 16; ++q) detail::push_aggregate(f, column(q)); // Jaccard .. categories
        rows[r].article_id = id;
        rows[r].label = members.count(id) ? 1 : 0;
    });

    FeatureMatrix m;
    m.reserve(rows.size());
    for (auto& r : rows) m.push_back(std::move(r.features));
    impute_column_means(m);
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r].features = std::move(m[r]);
    return rows;
}

// ---------------------------------------------------------------------------
// Chaptering pair dataset

/// Relative features recomputed between the two articles of a pair.
inline const std::vector<std::string>& pair_relative_feature_names() {
    static const std::vector<std::string> names = {"Dijkstra distance between pair's articles",
                                                   "Cosine similarity between pair's articles",
                                                   "Length difference between pair's articles",
                                                   "Absolute length difference between pair's articles",
                                                   "Paragraph difference between pair's articles",
                                                   "Absolute paragraph difference between pair's articles",
                                                   "Kendall Tau statistic",
                                                   "Kendall Tau p-value",
                                                   "Spearman statistic",
                                                   "Spearman p-value",
                                                   "Jaccard coefficient on categories",
                                                   "References difference between pair's articles",
                                                   "Absolute references difference",
                                                   "References to difference between pair's articles",
                                                   "Absolute references to difference between pair's articles",
                                                   "Categories number difference between pair's articles",
                                                   "Absolute categories number difference between pair's articles"};
    return names;
}

inline constexpr std::size_t pair_relative_feature_count = 17;

inline const std::vector<std::string>& chapter_pair_feature_names() {
    static const std::vector<std::string> names = [] {
        auto n = pair_relative_feature_names();
        for (const auto& r : pair_relative_feature_names()) {
            n.push_back(r + " (Diana)");
            n.push_back(r + " (PAM)");
            n.push_back(r + " (Agnes)");
        }
        return n;
    }();
    return names;
}

struct PairRowChapter {
    std::string article_a; // lexicographically smaller id
    std::string article_b;
    std::vector<double> features;
    int label = 0; // same chapter
};

namespace detail {

// Symmetric hop distance: the shorter of the two directions, NaN when neither is reachable.
inline std::vector<std::vector<double>> pairwise_hops(const SubNetwork& g, const std::vector<std::string>& ids) {
    const std::size_t n = ids.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, missing_value));
    std::vector<std::optional<std::size_t>> node(n);
    for (std::size_t i = 0; i < n; ++i) node[i] = g.find(ids[i]);
    for (std::size_t i = 0; i < n; ++i) {
        if (!node[i]) continue;
        const auto dist = bfs_distances(g, *node[i]);
        for (std::size_t j = 0; j < n; ++j)
            if (node[j] && dist[*node[j]] >= 0) d[i][j] = static_cast<double>(dist[*node[j]]);
    }
    return d;
}

inline double symmetric_hops(const std::vector<std::vector<double>>& d, std::size_t i, std::size_t j) {
    const double a = d[i][j], b = d[j][i];
    if (std::isnan(a)) return b;
    if (std::isnan(b)) return a;
    return std::min(a, b);
}

} // namespace detail

/**
 * Same-group indicators of one relative feature: values are min-max
 * normalized, turned into distances 1 - nv, and the articles partitioned into
 * k groups by Diana, PAM and Agnes. A constant feature yields one group (or
 * singletons when k equals the article count).
 */
inline std::array<Partition, 3> relative_feature_partitions(std::size_t n, const std::vector<double>& pair_values, std::size_t k) {
    const double lo = *std::min_element(pair_values.begin(), pair_values.end());
    const double hi = *std::max_element(pair_values.begin(), pair_values.end());
    if (!(hi > lo)) {
        std::vector<std::size_t> labels(n, 0);
        if (k >= n)
            for (std::size_t i = 0; i < n; ++i) labels[i] = i;
        Partition p(labels);
        return {p, p, p};
    }
    Dissimilarity d(n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j, ++p) d.set(i, j, 1.0 - (pair_values[p] - lo) / (hi - lo));
    return {diana(d, k), pam(d, k), agnes(d, k)};
}

/**
 * All C(N,2) pairs of `articles` (sorted by id, pairs in lexicographic order).
 * `chapter_of`, when non-empty, gives each article's gold chapter and sets the
 * same-chapter label. `k` is clamped to [1, N].
 */
inline std::vector<PairRowChapter> build_pair_dataset_chapter(const Corpus& corpus, std::vector<std::string> articles,
                                                              const std::vector<std::size_t>& chapter_of, const BookGraph& graph,
                                                              const DocumentEmbedder& emb, std::size_t k) {
    if (articles.size() < 2) throw Error("chapter pair dataset needs at least two articles");
    if (k < 1) throw ConfigError("chapter pair dataset: k must be at least 1");
    if (!chapter_of.empty() && chapter_of.size() != articles.size()) throw ConfigError("chapter labels do not match articles");
    std::vector<std::size_t> order(articles.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return articles[a] < articles[b]; });
    std::vector<std::string> ids;
    std::vector<std::size_t> chapters;
    for (auto o : order) {
        ids.push_back(articles[o]);
        if (!chapter_of.empty()) chapters.push_back(chapter_of[o]);
    }
    for (std::size_t i = 1; i < ids.size(); ++i)
        if (ids[i] == ids[i - 1]) throw SchemaError("article '" + ids[i] + "' listed twice");
    const std::size_t n = ids.size();
    k = std::min(k, n);

    std::vector<ArticleProfile> prof(n);
    parallel_for(n, [&](std::size_t i) { prof[i] = make_profile(corpus, ids[i], emb); });
    const auto hops = detail::pairwise_hops(graph.network, ids);

    std::vector<PairRowChapter> rows;
    rows.reserve(n * (n - 1) / 2);
    FeatureMatrix rel;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            PairRowChapter row;
            row.article_a = ids[i];
            row.article_b = ids[j];
            row.label = !chapters.empty() && chapters[i] == chapters[j] ? 1 : 0;
            std::vector<double> f{detail::symmetric_hops(hops, i, j)};
            const auto r = detail::relative_vector(relative_features(prof[i], prof[j]));
            f.insert(f.end(), r.begin(), r.end());
            rel.push_back(std::move(f));
            rows.push_back(std::move(row));
        }
    impute_column_means(rel);

    std::vector<std::vector<double>> indicators(rows.size());
    for (std::size_t q = 0; q < pair_relative_feature_count; ++q) {
        std::vector<double> values(rows.size());
        for (std::size_t p = 0; p < rows.size(); ++p) values[p] = rel[p][q];
        const auto parts = relative_feature_partitions(n, values, k);
        std::size_t p = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j, ++p)
                for (const auto& part : parts) indicators[p].push_back(part.same_cluster(i, j) ? 1.0 : 0.0);
    }
    for (std::size_t p = 0; p < rows.size(); ++p) {
        rows[p].features = std::move(rel[p]);
        rows[p].features.insert(rows[p].features.end(), indicators[p].begin(), indicators[p].end());
    }
    return rows;
}

/// Gold-book overload: articles and labels come from the chapters.
inline std::vector<PairRowChapter> build_pair_dataset_chapter(const Corpus& corpus, const std::vector<std::vector<std::string>>& chapters,
                                                              const BookGraph& graph, const DocumentEmbedder& emb, std::size_t k) {
    std::vector<std::string> articles;
    std::vector<std::size_t> chapter_of;
    for (std::size_t c = 0; c < chapters.size(); ++c)
        for (const auto& id : chapters[c]) {
            articles.push_back(id);
            chapter_of.push_back(c);
        }
    return build_pair_dataset_chapter(corpus, std::move(articles), chapter_of, graph, emb, k);
}

// ---------------------------------------------------------------------------
// Ordering pair dataset

inline const std::vector<std::string>& order_pair_feature_names() {
    static const std::vector<std::string> names = {"In-degree 1",
                                                   "In-degree 2",
                                                   "Out-degree 1",
                                                   "Out-degree 2",
                                                   "PageRank 1",
                                                   "PageRank 2",
                                                   "Betweenness 1",
                                                   "Betweenness 2",
                                                   "Closeness 1",
                                                   "Closeness 2",
                                                   "Hub 1",
                                                   "Hub 2",
                                                   "Authority 1",
                                                   "Authority 2",
                                                   "Dijkstra distance between pair's articles",
                                                   "Cosine similarity between pair's articles",
                                                   "Length difference between pair's articles",
                                                   "Absolute length difference between pair's articles",
                                                   "Paragraph difference between pair's articles",
                                                   "Absolute paragraph difference between pair's articles",
                                                   "Kendall Tau statistic",
                                                   "Kendall Tau p-value",
                                                   "Spearman statistic",
                                                   "Spearman p-value",
                                                   "Aggregated page views 1",
                                                   "Aggregated page views 2",
                                                   "Jaccard coefficient on categories",
                                                   "References difference between pair's articles",
                                                   "Absolute references difference",
                                                   "References to difference between pair's articles",
                                                   "Absolute references to difference between pair's articles",
                                                   "Categories number difference between pair's articles",
                                                   "Absolute categories number difference between pair's articles"};
    return names;
}

inline constexpr std::size_t order_feature_count = 33;

struct PairRowOrder {
    std::string article_1; // lexicographically smaller id
    std::string article_2;
    std::vector<double> features;
    int label = 0; // article_1 precedes article_2
};

/**
 * One row per unordered pair of `articles`, oriented with the smaller id first.
 * `articles` is the reference order: the label is 1 iff article_1 comes
 * earlier in it. The hop distance is directed, article_1 -> article_2.
 */
inline std::vector<PairRowOrder> build_pair_dataset_order(const Corpus& corpus, const std::vector<std::string>& articles,
                                                          const BookGraph& graph, const DocumentEmbedder& emb) {
    const std::size_t n = articles.size();
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < n; ++i)
        if (!position.emplace(articles[i], i).second) throw SchemaError("article '" + articles[i] + "' listed twice");
    std::vector<std::string> ids(articles);
    std::sort(ids.begin(), ids.end());

    std::vector<ArticleProfile> prof(n);
    parallel_for(n, [&](std::size_t i) { prof[i] = make_profile(corpus, ids[i], emb); });
    const auto hops = detail::pairwise_hops(graph.network, ids);
    const auto& g = graph.network;
    const auto& st = graph.structure;
    auto structural = [&](const std::string& id) {
        return std::vector<double>{detail::node_value(st.in_degree, g, id),   detail::node_value(st.out_degree, g, id),
                                   detail::node_value(st.pagerank, g, id),    detail::node_value(st.betweenness, g, id),
                                   detail::node_value(st.closeness, g, id),   detail::node_value(st.hub, g, id),
                                   detail::node_value(st.authority, g, id)};
    };
    std::vector<std::vector<double>> node_values(n);
    for (std::size_t i = 0; i < n; ++i) node_values[i] = structural(ids[i]);

    std::vector<PairRowOrder> rows;
    rows.reserve(n * (n - 1) / 2);
    FeatureMatrix m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            PairRowOrder row;
            row.article_1 = ids[i];
            row.article_2 = ids[j];
            row.label = position[ids[i]] < position[ids[j]] ? 1 : 0;
            std::vector<double> f;
            f.reserve(order_feature_count);
            for (std::size_t q = 0; q < 7; ++q) {
                f.push_back(node_values[i][q]);
                f.push_back(node_values[j][q]);
            }
            const auto r = relative_features(prof[i], prof[j]);
            f.insert(f.end(), {hops[i][j], r.cosine, r.length_diff, r.abs_length_diff, r.paragraph_diff, r.abs_paragraph_diff,
                               r.kendall_stat, r.kendall_p, r.spearman_stat, r.spearman_p, prof[i].aggregated_views,
                               prof[j].aggregated_views, r.jaccard, r.references_diff, r.abs_references_diff,
                               r.referenced_by_diff, r.abs_referenced_by_diff, r.categories_diff, r.abs_categories_diff});
            m.push_back(std::move(f));
            rows.push_back(std::move(row));
        }
    impute_column_means(m);
    for (std::size_t p = 0; p < rows.size(); ++p) rows[p].features = std::move(m[p]);
    return rows;
}

// ---------------------------------------------------------------------------
// Conversions and CSV cache files

inline RowSet to_rowset(const std::vector<CandidateRow>& rows) {
    RowSet s;
    for (const auto& r : rows) {
        s.rows.push_back(r.features);
        s.labels.push_back(r.label);
        s.ids.push_back(r.article_id);
    }
    return s;
}

inline std::string pair_key(const std::string& a, const std::string& b) { return a + "|" + b; }

inline RowSet to_rowset(const std::vector<PairRowChapter>& rows) {
    RowSet s;
    for (const auto& r : rows) {
        s.rows.push_back(r.features);
        s.labels.push_back(r.label);
        s.ids.push_back(pair_key(r.article_a, r.article_b));
    }
    return s;
}

inline RowSet to_rowset(const std::vector<PairRowOrder>& rows) {
    RowSet s;
    for (const auto& r : rows) {
        s.rows.push_back(r.features);
        s.labels.push_back(r.label);
        s.ids.push_back(pair_key(r.article_1, r.article_2));
    }
    return s;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/**
 * Columnar CSV: key columns, one column per feature, label last
 * ("Classification"). Pair keys "a|b" are written as two columns.
 */
inline void write_dataset_csv(std::ostream& out, const RowSet& data, const std::vector<std::string>& feature_names, bool pairs) {
    out << (pairs ? "article_1,article_2" : "article_id");
    for (const auto& n : feature_names) out << ',' << detail::csv_field(n);
    out << ",Classification\n";
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (pairs) {
            const auto bar = data.ids[r].find('|');
            out << detail::csv_field(data.ids[r].substr(0, bar)) << ',' << detail::csv_field(data.ids[r].substr(bar + 1));
        } else {
            out << detail::csv_field(data.ids[r]);
        }
        for (double v : data.rows[r]) out << ',' << detail::format_double(v);
        out << ',' << (data.labels.empty() ? 0 : data.labels[r]) << '\n';
    }
}

inline RowSet read_dataset_csv(std::istream& in, std::size_t expected_features, bool pairs) {
    RowSet data;
    std::string line;
    std::size_t lineno = 0;
    const std::size_t keys = pairs ? 2 : 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (detail::csv_split(line).size() != keys + expected_features + 1) throw ParseError("unexpected dataset header", 1);
            continue;
        }
        if (line.empty()) continue;
        const auto cells = detail::csv_split(line);
        if (cells.size() != keys + expected_features + 1) throw ParseError("wrong column count", lineno);
        data.ids.push_back(pairs ? pair_key(cells[0], cells[1]) : cells[0]);
        std::vector<double> row(expected_features);
        for (std::size_t f = 0; f < expected_features; ++f) {
            const auto& c = cells[keys + f];
            const auto res = std::from_chars(c.data(), c.data() + c.size(), row[f]);
            if (res.ec != std::errc{}) throw ParseError("bad number '" + c + "'", lineno);
        }
        data.rows.push_back(std::move(row));
        data.labels.push_back(cells.back() == "1" ? 1 : 0);
    }
    return data;
}

} // namespace bookforge
