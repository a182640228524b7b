#include <bookforge/bookforge.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <set>

namespace bf = bookforge;

namespace {

enum ExitCode { ok = 0, bad_input = 2, no_seed = 3, missing_artifact = 4 };

/// Config file plus per-key flag overrides, attached to one subcommand.
struct ConfigOptions {
    std::string path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* sub, const std::set<std::string>& skip) {
        sub->add_option("--config", path, "Flat TOML configuration file");
        for (const auto& k : bf::config_keys()) {
            if (skip.count(k.name)) continue;
            options[k.name] = sub->add_option("--" + k.name, values[k.name], "Overrides config key " + k.name);
        }
    }

    bf::PipelineConfig resolve() const {
        auto cfg = path.empty() ? bf::PipelineConfig{} : bf::load_config(path);
        for (const auto& [name, opt] : options)
            if (opt->count()) bf::set_config_value(cfg, name, values.at(name));
        return cfg;
    }
};

void write_file(const std::string& path, const std::string& content) {
    const auto parent = bf::fs::path(path).parent_path();
    if (!parent.empty()) bf::fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw bf::Error("cannot write '" + path + "'");
    out << content;
}

int run_synth(const bf::PipelineConfig& cfg) {
    cfg.synth.validate();
    const auto s = bf::generate_synthetic(cfg.synth, cfg.seed);
    bf::fs::create_directories(cfg.out);
    const auto corpus_path = (bf::fs::path(cfg.out) / "corpus.jsonl").string();
    const auto gold_path = (bf::fs::path(cfg.out) / "goldbooks.json").string();
    bf::save_corpus(s.corpus, corpus_path);
    bf::save_gold_books(s.books, gold_path);
    std::cout << "wrote " << s.corpus.size() << " articles to " << corpus_path << "\n"
              << "wrote " << s.books.size() << " gold books to " << gold_path << "\n";
    return ok;
}

int run_ingest(const bf::PipelineConfig& cfg, bool with_gold) {
    const auto corpus = bf::load_corpus(cfg.corpus);
    const auto& rep = corpus.report();
    std::cout << "articles: " << corpus.size() << "\n"
              << "pageview window: " << corpus.window_days() << " days\n"
              << "dangling links: " << rep.dangling_links.size() << "\n"
              << "shadowed titles: " << rep.shadowed_titles.size() << "\n";
    bf::fs::create_directories(cfg.out);
    bf::save_corpus(corpus, (bf::fs::path(cfg.out) / "corpus.jsonl").string());
    if (with_gold) {
        const auto all = bf::load_gold_books(cfg.gold);
        auto kept = bf::filter_gold_books(all, cfg.min_views, cfg.min_components);
        for (const auto& b : kept) bf::validate_gold_book(b, corpus);
        bf::save_gold_books(kept, (bf::fs::path(cfg.out) / "goldbooks.json").string());
        std::cout << "gold books: " << kept.size() << " of " << all.size() << " kept\n";
    }
    return ok;
}

int run_train(const bf::PipelineConfig& cfg) {
    const auto outcome = bf::cmd_train(cfg);
    std::cout << (outcome.reused ? "models up to date in " : "trained models in ") << cfg.models << " ("
              << outcome.manifest.titles.size() << " books, key " << outcome.manifest.config_hash << ")\n";
    return ok;
}

int run_generate(const bf::PipelineConfig& cfg, const std::string& query, const std::string& out) {
    const auto book = bf::cmd_generate(cfg, query);
    write_file(out, bf::book_to_json(book).dump(1) + "\n");
    std::size_t n = 0;
    for (const auto& c : book.chapters) n += c.size();
    std::cout << "wrote '" << book.title << "' with " << book.chapters.size() << " chapters and " << n << " articles to "
              << out << "\n";
    return ok;
}

int run_evaluate(const bf::PipelineConfig& cfg, const std::string& out) {
    std::vector<std::string> scores;
    const auto report = bf::cmd_evaluate(cfg, &scores);
    const auto j = bf::report_to_json(report);
    write_file(out, j.dump(1) + "\n");
    const auto dir = bf::fs::path(out).parent_path() / (bf::fs::path(out).stem().string() + "_scores");
    for (std::size_t i = 0; i < scores.size(); ++i) write_file((dir / ("book_" + std::to_string(i) + ".csv")).string(), scores[i]);
    const auto& a = j["averages"];
    std::cout << "books: " << report.books.size() << "\n";
    for (const auto& [k, v] : a.items()) std::cout << k << ": " << v.get<double>() << "\n";
    return ok;
}

int run_metrics_scores(const std::string& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw bf::Error("cannot open scores file '" + path + "'");
    std::string line;
    std::getline(in, line);
    std::vector<std::string> ids;
    std::vector<double> s1, s2;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = bf::detail::csv_split(line);
        if (cells.size() != 5) throw bf::ParseError("scores rows need five columns");
        ids.push_back(cells[0]);
        s1.push_back(-std::stod(cells[1]));
        // rows dropped before stage 2 rank below every stage-2 row
        s2.push_back(cells[2].empty() ? -1e300 : -std::stod(cells[2]));
        labels.push_back(cells[4] == "1" ? 1 : 0);
    }
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (n == 0) n = positives;
    const auto pr = bf::precision_recall_at_n(s2, labels, ids, n);
    std::cout << "auc: " << bf::auc(s1, labels) << "\n"
              << "n: " << n << "\n"
              << "precision_at_n: " << pr.precision << "\n"
              << "recall_at_n: " << pr.recall << "\n";
    return ok;
}

int run_metrics_book(const std::string& book_path, const std::string& gold_path, const std::string& title,
                     std::size_t permutations, std::uint64_t seed) {
    std::ifstream in(book_path);
    if (!in) throw bf::Error("cannot open book '" + book_path + "'");
    bf::BookDraft book;
    try {
        book = bf::book_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw bf::ParseError(e.what());
    }
    const auto golds = bf::load_gold_books(gold_path);
    const std::string want = title.empty() ? book.title : title;
    const auto it = std::find_if(golds.begin(), golds.end(), [&](const bf::GoldBook& g) { return g.title == want; });
    if (it == golds.end()) throw bf::ConfigError("no gold book titled '" + want + "'");
    std::vector<std::string> shared;
    for (const auto& c : book.chapters)
        for (const auto& id : c)
            for (const auto& gc : it->chapters)
                if (std::find(gc.begin(), gc.end(), id) != gc.end()) shared.push_back(id);
    std::sort(shared.begin(), shared.end());
    std::cout << "shared articles: " << shared.size() << " of " << it->components() << "\n";
    if (shared.size() < 2) return ok;
    auto restrict_to = [&](const std::vector<std::vector<std::string>>& chapters) {
        std::vector<std::vector<std::string>> out;
        for (const auto& c : chapters) {
            std::vector<std::string> kept;
            for (const auto& id : c)
                if (std::binary_search(shared.begin(), shared.end(), id)) kept.push_back(id);
            if (!kept.empty()) out.push_back(std::move(kept));
        }
        return out;
    };
    const auto pred = restrict_to(book.chapters), gold = restrict_to(it->chapters);
    const auto truth = bf::gold_partition(shared, gold), mine = bf::gold_partition(shared, pred);
    const double p = bf::ari_pvalue(mine, truth, permutations, seed);
    std::cout << "ari: " << bf::adjusted_rand(mine, truth) << " (p=" << p << ") " << bf::significance_stars(p) << "\n";
    std::vector<std::string> flat_pred, flat_gold;
    for (const auto& c : pred) flat_pred.insert(flat_pred.end(), c.begin(), c.end());
    for (const auto& c : gold) flat_gold.insert(flat_gold.end(), c.begin(), c.end());
    const auto k = bf::kendall_tau_orders(flat_pred, flat_gold);
    std::cout << "kendall (reading order): " << k.statistic << " (p=" << k.pvalue << ") " << bf::significance_stars(k.pvalue)
              << "\n";
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bookforge: builds structured books from a linked article corpus"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted gold books");
    ConfigOptions synth_cfg;
    synth_cfg.attach(synth, {});

    auto* ingest = app.add_subcommand("ingest", "Validate and normalize a corpus and gold books");
    ConfigOptions ingest_cfg;
    ingest_cfg.attach(ingest, {});

    auto* train = app.add_subcommand("train", "Build per-book datasets and train the models");
    ConfigOptions train_cfg;
    std::string train_out;
    train_cfg.attach(train, {"out"});
    train->add_option("--out", train_out, "Model directory (same as --models)");

    auto* generate = app.add_subcommand("generate", "Generate a book for a query");
    ConfigOptions gen_cfg;
    std::string query, gen_out = "book.json";
    gen_cfg.attach(generate, {"out"});
    generate->add_option("--query", query, "Seed query")->required();
    generate->add_option("--out", gen_out, "Book JSON path");

    auto* evaluate = app.add_subcommand("evaluate", "Leave-one-out evaluation against the gold books");
    ConfigOptions eval_cfg;
    std::string eval_out = "report.json";
    eval_cfg.attach(evaluate, {"out"});
    evaluate->add_option("--out", eval_out, "Report JSON path");

    auto* metrics = app.add_subcommand("metrics", "Score a scores CSV or a generated book against gold");
    std::string scores_path, book_path, gold_path, title;
    std::size_t n = 0, permutations = 999;
    std::uint64_t seed = 42;
    metrics->add_option("--scores", scores_path, "Scores CSV written by evaluate");
    metrics->add_option("--n", n, "Cut-off for precision/recall (default: number of positives)");
    metrics->add_option("--book", book_path, "Book JSON written by generate");
    metrics->add_option("--gold", gold_path, "Gold books JSON");
    metrics->add_option("--title", title, "Gold book title (default: the book's title)");
    metrics->add_option("--ari_permutations", permutations, "Permutations for the ARI p-value");
    metrics->add_option("--seed", seed, "Permutation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_input;
    }

    try {
        if (*synth) return run_synth(synth_cfg.resolve());
        if (*ingest) return run_ingest(ingest_cfg.resolve(), ingest_cfg.options.at("gold")->count() > 0);
        if (*train) {
            auto cfg = train_cfg.resolve();
            if (!train_out.empty()) cfg.models = train_out;
            return run_train(cfg);
        }
        if (*generate) return run_generate(gen_cfg.resolve(), query, gen_out);
        if (*evaluate) return run_evaluate(eval_cfg.resolve(), eval_out);
        if (*metrics) {
            if (!scores_path.empty()) return run_metrics_scores(scores_path, n);
            if (!book_path.empty() && !gold_path.empty()) return run_metrics_book(book_path, gold_path, title, permutations, seed);
            std::cerr << "error: metrics needs --scores, or --book with --gold\n";
            return bad_input;
        }
    } catch (const bf::NoSeedFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return no_seed;
    } catch (const bf::MissingArtifact& e) {
        std::cerr << "error: " << e.what() << "\n";
        return missing_artifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return bad_input;
    }
    return ok;
}
