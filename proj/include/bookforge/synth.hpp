#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "random.hpp"

namespace bookforge {

/// Parameters of the planted-book corpus generator.
struct SynthConfig {
    std::size_t articles = 2000;
    std::size_t books = 20;
    std::size_t book_size_min = 10; // components per book, seed article excluded
    std::size_t book_size_max = 16;
    std::size_t chapters_min = 2;
    std::size_t chapters_max = 4;
    double p_intra_chapter = 0.5; // link to an earlier article of the same chapter
    double p_intra_book = 0.1;    // link to an earlier article of another chapter of the book
    double p_forward = 0.2;       // multiplier for links pointing to later articles
    double p_seed_link = 0.5;     // seed -> member
    double p_background = 0.01;   // any article -> any article
    double pageview_correlation = 0.8;
    std::size_t window_days = 90;
    std::size_t background_vocabulary = 1500;
    std::size_t topic_vocabulary = 25;
    std::size_t chapter_vocabulary = 12;
    double topic_share = 0.2;   // share of a member's words drawn from the book vocabulary
    double chapter_share = 0.1; // share drawn from the chapter vocabulary
    std::size_t categories = 150;

    std::size_t max_articles_needed() const { return books * (book_size_max + 1); }

    void validate() const {
        if (articles == 0) throw ConfigError("synth: articles must be positive");
        if (book_size_min < 1 || book_size_min > book_size_max) throw ConfigError("synth: bad book size range");
        if (chapters_min < 1 || chapters_min > chapters_max) throw ConfigError("synth: bad chapter count range");
        if (max_articles_needed() > articles)
            throw ConfigError("synth: " + std::to_string(books) + " books of up to " + std::to_string(book_size_max) +
                              " articles plus seeds need " + std::to_string(max_articles_needed()) + " articles, only " +
                              std::to_string(articles) + " requested");
        for (double p : {p_intra_chapter, p_intra_book, p_forward, p_seed_link, p_background})
            if (p < 0.0 || p > 1.0) throw ConfigError("synth: probabilities must lie in [0,1]");
        if (pageview_correlation < 0.0 || pageview_correlation > 1.0)
            throw ConfigError("synth: pageview_correlation must lie in [0,1]");
        if (window_days == 0) throw ConfigError("synth: window_days must be positive");
        if (topic_share < 0.0 || chapter_share < 0.0 || topic_share + chapter_share > 1.0)
            throw ConfigError("synth: topic_share and chapter_share must be non-negative and sum to at most 1");
    }
};

struct SyntheticCorpus {
    Corpus corpus;
    std::vector<GoldBook> books;
    std::vector<std::string> seed_ids; // one per book, same order as `books`
};

namespace detail {

class WordMaker {
public:
    explicit WordMaker(Rng& rng) : rng_(rng) {}

    std::string fresh() {
        static constexpr const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "kr", "pl"};
        static constexpr const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
        for (;;) {
            std::string w;
            const auto syllables = 2 + rng_.below(3);
            for (std::uint64_t s = 0; s < syllables; ++s) {
                w += onsets[rng_.below(std::size(onsets))];
                w += vowels[rng_.below(std::size(vowels))];
            }
            if (used_.insert(w).second) return w;
        }
    }

    std::vector<std::string> fresh(std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(fresh());
        return out;
    }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

inline std::string capitalize(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

struct Role {
    int book = -1;    // -1 background
    int chapter = -1; // -1 seed or background
    std::size_t position = 0;
    std::size_t book_size = 0;
};

inline std::string make_text(Rng& rng, std::size_t paragraphs, std::size_t words_per_paragraph,
                             const std::vector<std::pair<const std::vector<std::string>*, double>>& sources) {
    std::string text;
    for (std::size_t p = 0; p < paragraphs; ++p) {
        if (p) text += "\n\n";
        for (std::size_t w = 0; w < words_per_paragraph; ++w) {
            double u = rng.uniform();
            const std::vector<std::string>* src = sources.back().first;
            for (const auto& [s, weight] : sources) {
                if (u < weight) {
                    src = s;
                    break;
                }
                u -= weight;
            }
            if (w) text += ' ';
            text += (*src)[rng.below(src->size())];
        }
        text += '.';
    }
    return text;
}

// Standardized smoothed random walk.
inline std::vector<double> latent_series(Rng& rng, std::size_t n) {
    std::vector<double> z(n);
    double x = 0.0;
    for (auto& v : z) {
        x = 0.9 * x + rng.normal();
        v = x;
    }
    double mean = 0.0, var = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(n);
    for (double v : z) var += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 1.0;
    for (auto& v : z) v = sd > 0 ? (v - mean) / sd : 0.0;
    return z;
}

} // namespace detail

/**
 * Generates a corpus with planted gold books.
 *
 * Each book has a seed article whose title is the book title. Members of a
 * book share a book category and topic vocabulary, members of a chapter share
 * a chapter category and chapter vocabulary and are densely interlinked. Gold
 * order is generation order: later articles tend to link back to earlier ones,
 * are longer and get fewer page views. Deterministic for a fixed seed.
 */
inline SyntheticCorpus generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    detail::WordMaker words(rng);
    const std::size_t n = cfg.articles;

    std::vector<std::size_t> slots(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = i;
    rng.shuffle(slots);

    std::vector<detail::Role> role(n);
    std::vector<std::vector<std::vector<std::size_t>>> chapters(cfg.books);
    std::vector<std::size_t> seeds(cfg.books);
    std::size_t next = 0;
    for (std::size_t b = 0; b < cfg.books; ++b) {
        const auto size = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.book_size_min),
                                                               static_cast<std::int64_t>(cfg.book_size_max)));
        const auto nch = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(std::min(cfg.chapters_min, size)),
                                                              static_cast<std::int64_t>(std::min(cfg.chapters_max, size))));
        // chapter sizes: one each, the rest spread uniformly
        std::vector<std::size_t> sizes(nch, 1);
        for (std::size_t r = nch; r < size; ++r) ++sizes[rng.below(nch)];
        seeds[b] = slots[next++];
        role[seeds[b]] = {static_cast<int>(b), -1, 0, size};
        std::size_t pos = 0;
        chapters[b].resize(nch);
        for (std::size_t c = 0; c < nch; ++c)
            for (std::size_t k = 0; k < sizes[c]; ++k) {
                const auto a = slots[next++];
                role[a] = {static_cast<int>(b), static_cast<int>(c), pos++, size};
                chapters[b][c].push_back(a);
            }
    }

    // vocabulary and categories
    const auto background = words.fresh(cfg.background_vocabulary);
    std::vector<std::vector<std::string>> topic(cfg.books);
    std::vector<std::vector<std::vector<std::string>>> chapter_words(cfg.books);
    for (std::size_t b = 0; b < cfg.books; ++b) {
        topic[b] = words.fresh(cfg.topic_vocabulary);
        for (std::size_t c = 0; c < chapters[b].size(); ++c) chapter_words[b].push_back(words.fresh(cfg.chapter_vocabulary));
    }
    std::vector<std::string> global_categories;
    for (std::size_t i = 0; i < cfg.categories; ++i) global_categories.push_back("Category:" + detail::capitalize(words.fresh()));

    std::vector<Article> articles(n);
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "A%05zu", i);
        articles[i].id = buf;
    }

    std::vector<std::string> book_titles(cfg.books);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = role[i];
        auto& a = articles[i];
        const std::size_t nwords = 1 + rng.below(2);
        std::string title;
        for (std::size_t w = 0; w < nwords + (r.book >= 0 && r.chapter < 0 ? 1 : 0); ++w) {
            if (w) title += ' ';
            title += detail::capitalize(words.fresh());
        }
        a.title = title;
        if (r.book >= 0 && r.chapter < 0) book_titles[static_cast<std::size_t>(r.book)] = title;

        // categories
        std::set<std::string> cats;
        const auto noise = rng.below(3);
        for (std::uint64_t k = 0; k < noise; ++k) cats.insert(global_categories[rng.below(global_categories.size())]);
        if (r.book >= 0) {
            const std::string book_cat = "Category:Book " + std::to_string(r.book);
            if (r.chapter < 0 || rng.bernoulli(0.9)) cats.insert(book_cat);
            if (r.chapter >= 0 && rng.bernoulli(0.85))
                cats.insert("Category:Book " + std::to_string(r.book) + " part " + std::to_string(r.chapter));
        } else if (cats.empty()) {
            cats.insert(global_categories[rng.below(global_categories.size())]);
        }
        a.categories.assign(cats.begin(), cats.end());

        // text
        if (r.book < 0) {
            const auto paragraphs = static_cast<std::size_t>(rng.between(1, 8));
            const auto per = static_cast<std::size_t>(rng.between(10, 40));
            a.text = detail::make_text(rng, paragraphs, per, {{&background, 1.0}});
        } else if (r.chapter < 0) {
            a.text = detail::make_text(rng, 4, 30, {{&topic[static_cast<std::size_t>(r.book)], 0.5}, {&background, 0.5}});
        } else {
            const double frac = static_cast<double>(r.position) / static_cast<double>(std::max<std::size_t>(1, r.book_size - 1));
            const auto paragraphs = 2 + static_cast<std::size_t>(std::lround(5.0 * frac));
            const auto per = 18 + static_cast<std::size_t>(std::lround(10.0 * frac)) + rng.below(4);
            const auto b = static_cast<std::size_t>(r.book);
            a.text = detail::make_text(rng, paragraphs, per,
                                       {{&topic[b], cfg.topic_share},
                                        {&chapter_words[b][static_cast<std::size_t>(r.chapter)], cfg.chapter_share},
                                        {&background, 1.0 - cfg.topic_share - cfg.chapter_share}});
        }
    }

    // links
    std::vector<std::set<std::size_t>> links(n);
    for (std::size_t b = 0; b < cfg.books; ++b) {
        std::vector<std::size_t> members;
        for (const auto& ch : chapters[b]) members.insert(members.end(), ch.begin(), ch.end());
        const auto s = seeds[b];
        for (const auto& ch : chapters[b]) links[s].insert(ch.front());
        for (auto m : members) {
            if (rng.bernoulli(cfg.p_seed_link)) links[s].insert(m);
            if (rng.bernoulli(0.3)) links[m].insert(s);
        }
        for (auto i : members)
            for (auto j : members) {
                if (i == j) continue;
                double p = role[i].chapter == role[j].chapter ? cfg.p_intra_chapter : cfg.p_intra_book;
                if (role[j].position > role[i].position) p *= cfg.p_forward;
                if (rng.bernoulli(p)) links[i].insert(j);
            }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && rng.bernoulli(cfg.p_background)) links[i].insert(j);
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : links[i]) articles[i].out_links.push_back(articles[j].id);

    // page views
    std::vector<std::vector<double>> trend(cfg.books);
    for (auto& t : trend) t = detail::latent_series(rng, cfg.window_days);
    const double rho = cfg.pageview_correlation;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = role[i];
        const auto own = detail::latent_series(rng, cfg.window_days);
        double base;
        if (r.book < 0) base = 300.0 * std::exp(0.8 * rng.normal());
        else if (r.chapter < 0) base = 2000.0;
        else base = 600.0 * (1.5 - static_cast<double>(r.position) / static_cast<double>(r.book_size));
        auto& pv = articles[i].pageviews;
        pv.resize(cfg.window_days);
        for (std::size_t t = 0; t < cfg.window_days; ++t) {
            double z = own[t];
            if (r.book >= 0) z = rho * trend[static_cast<std::size_t>(r.book)][t] + std::sqrt(1.0 - rho * rho) * own[t];
            pv[t] = static_cast<std::int64_t>(std::llround(base * std::exp(0.4 * z)));
        }
    }

    SyntheticCorpus out;
    for (std::size_t b = 0; b < cfg.books; ++b) {
        GoldBook g;
        g.title = book_titles[b];
        g.views = 1000 + static_cast<std::int64_t>(rng.below(20000));
        for (const auto& ch : chapters[b]) {
            std::vector<std::string> ids;
            for (auto a : ch) ids.push_back(articles[a].id);
            g.chapters.push_back(std::move(ids));
        }
        out.books.push_back(std::move(g));
        out.seed_ids.push_back(articles[seeds[b]].id);
    }
    out.corpus = Corpus(std::move(articles));
    return out;
}

} // namespace bookforge
