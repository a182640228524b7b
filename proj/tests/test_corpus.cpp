#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

using namespace bookforge;

TEST(Corpus, LoadsTwoLinkedArticles) {
    std::istringstream in(R"({"id":"a","title":"A","links":["b"]}
{"id":"b","title":"B"}
)");
    auto c = load_corpus(in);
    ASSERT_EQ(c.size(), 2u);
    ASSERT_EQ(c.links_of(c.index_of("a")).size(), 1u);
    EXPECT_EQ(c[c.links_of(c.index_of("a"))[0]].id, "b");
    EXPECT_EQ(c.in_link_count(c.index_of("b")), 1u);
    EXPECT_TRUE(c.report().clean());
}

TEST(Corpus, DuplicateIdNamesTheId) {
    std::istringstream in("{\"id\":\"a\"}\n{\"id\":\"a\"}\n");
    try {
        load_corpus(in);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    }
}

TEST(Corpus, DanglingLinkIsReportedNotFatal) {
    std::istringstream in(R"({"id":"a","links":["zz"]})");
    auto c = load_corpus(in);
    ASSERT_EQ(c.report().dangling_links.size(), 1u);
    EXPECT_EQ(c.report().dangling_links[0].target, "zz");
    EXPECT_EQ(c.get("a").out_links.size(), 1u);
    EXPECT_TRUE(c.links_of(0).empty());
}

TEST(Corpus, MalformedLineCarriesLineNumber) {
    std::istringstream in("{\"id\":\"a\"}\n\n{not json\n");
    try {
        load_corpus(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    }
}

TEST(Corpus, RejectsRaggedPageviews) {
    std::vector<Article> arts{fixture::article("a", "A", {}, "", {}, {1, 2, 3}), fixture::article("b", "B", {}, "", {}, {1, 2})};
    EXPECT_THROW(Corpus(std::move(arts)), SchemaError);
}

TEST(Corpus, SaveLoadRoundTrip) {
    std::vector<Article> arts{fixture::article("a", "Alpha", {"b", "q"}, "one\n\ntwo", {"c1"}, {4, 5, 6}),
                              fixture::article("b", "Beta \"quoted\"", {}, "ünïcode", {}, {0, 0, 0})};
    Corpus c(arts);
    std::stringstream s;
    save_corpus(c, s);
    auto back = load_corpus(s);
    EXPECT_EQ(back, c);
    EXPECT_EQ(back.window_days(), 3u);
}

TEST(GoldBooks, FilterThresholds) {
    std::vector<GoldBook> books{{"x", {{"a", "b"}}, 5}, {"y", {{"a"}}, 2000}, {"z", {{"a", "b"}, {"c"}}, 1500}};
    auto kept = filter_gold_books(books, 1000, 2);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].title, "z");
    EXPECT_TRUE(filter_gold_books({}, 0, 0).empty());
    EXPECT_EQ(filter_gold_books(kept, 1000, 2), kept);
}

TEST(GoldBooks, FilterIsMonotone) {
    Rng rng(7);
    std::vector<GoldBook> books;
    for (int i = 0; i < 60; ++i) {
        GoldBook b{"b" + std::to_string(i), {}, static_cast<std::int64_t>(rng.below(3000))};
        std::vector<std::string> ch;
        for (std::uint64_t j = 0, m = 1 + rng.below(12); j < m; ++j) ch.push_back("a" + std::to_string(j));
        b.chapters.push_back(ch);
        books.push_back(b);
    }
    for (std::int64_t v : {0, 500, 1000, 2500})
        for (std::size_t c : {0u, 3u, 8u}) {
            auto base = filter_gold_books(books, v, c);
            EXPECT_LE(filter_gold_books(books, v + 300, c).size(), base.size());
            EXPECT_LE(filter_gold_books(books, v, c + 2).size(), base.size());
            EXPECT_EQ(filter_gold_books(base, v, c), base);
        }
}

TEST(GoldBooks, ValidationCatchesDuplicatesAndUnknownIds) {
    Corpus c({fixture::article("a", "A"), fixture::article("b", "B")});
    EXPECT_NO_THROW(validate_gold_book({"t", {{"a"}, {"b"}}}, c));
    EXPECT_THROW(validate_gold_book({"t", {{"a"}, {"a"}}}, c), SchemaError);
    EXPECT_THROW(validate_gold_book({"t", {{"a", "zz"}}}, c), SchemaError);
    EXPECT_THROW(validate_gold_book({"t", {{"a"}, {}}}, c), SchemaError);
}

TEST(Synth, SameSeedGivesIdenticalCorpus) {
    SynthConfig cfg;
    cfg.articles = 300;
    cfg.books = 4;
    auto a = generate_synthetic(cfg, 11), b = generate_synthetic(cfg, 11);
    std::stringstream sa, sb;
    save_corpus(a.corpus, sa);
    save_corpus(b.corpus, sb);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.books, b.books);
    auto c = generate_synthetic(cfg, 12);
    std::stringstream sc;
    save_corpus(c.corpus, sc);
    EXPECT_NE(sa.str(), sc.str());
}

TEST(Synth, GoldBooksAreWellFormed) {
    auto s = generate_synthetic(SynthConfig{}, 42);
    ASSERT_EQ(s.books.size(), 20u);
    std::set<std::string> used;
    for (const auto& b : s.books) {
        EXPECT_NO_THROW(validate_gold_book(b, s.corpus));
        EXPECT_GE(b.chapters.size(), 2u);
        EXPECT_GE(b.components(), 10u);
        EXPECT_LE(b.components(), 16u);
        for (const auto& id : b.flattened()) EXPECT_TRUE(used.insert(id).second) << id << " used by two books";
        EXPECT_NO_THROW(seed_concepts_from_query(s.corpus, b.title));
    }
}

TEST(Synth, IntraChapterLinksDominate) {
    auto s = generate_synthetic(SynthConfig{}, 42);
    double intra = 0, cross = 0, intra_pairs = 0, cross_pairs = 0;
    for (const auto& b : s.books) {
        std::map<std::string, std::size_t> chap;
        for (std::size_t c = 0; c < b.chapters.size(); ++c)
            for (const auto& id : b.chapters[c]) chap[id] = c;
        for (const auto& [x, cx] : chap)
            for (const auto& [y, cy] : chap) {
                if (x == y) continue;
                const auto& links = s.corpus.get(x).out_links;
                const bool linked = std::find(links.begin(), links.end(), y) != links.end();
                if (cx == cy) {
                    intra += linked;
                    intra_pairs += 1;
                } else {
                    cross += linked;
                    cross_pairs += 1;
                }
            }
    }
    EXPECT_GT(intra / intra_pairs, cross / cross_pairs);
}

TEST(Synth, InfeasibleConfigIsRejected) {
    SynthConfig cfg;
    cfg.articles = 100;
    cfg.books = 20;
    EXPECT_THROW(generate_synthetic(cfg, 1), ConfigError);
}
