#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chaptering.hpp"
#include "clustering.hpp"
#include "corpus.hpp"
#include "datasets.hpp"
#include "error.hpp"
#include "learners.hpp"
#include "metrics.hpp"
#include "ordering.hpp"
#include "selection.hpp"
#include "synth.hpp"
#include "text.hpp"

namespace bookforge {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
    std::string corpus = "corpus.jsonl";
    std::string gold = "goldbooks.json";
    std::string models = "models";
    std::string out = "out";
    std::string embeddings; // optional id -> vector table; empty uses tf-idf

    int max_hops = 3;
    double top_fraction = 0.2;
    std::string selection_mode = "threshold"; // threshold | top_n
    std::size_t top_n = 20;
    double threshold = 0.5;
    std::size_t max_articles = 200;

    ClusterMethod chapter_method = ClusterMethod::agnes;
    std::string k_mode = "ap"; // ap | gold (generation falls back to ap)

    GbdtParams gbdt;
    int pair_min_samples_leaf = 5;

    std::int64_t min_views = 0;
    std::size_t min_components = 2;

    std::uint64_t seed = 42;
    std::size_t ari_permutations = 999;

    SynthConfig synth;
};

/// Binding between a flat config key and a PipelineConfig field.
struct ConfigKey {
    std::string name;
    bool affects_artifacts; // part of the cache hash
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    std::istringstream in(v);
    in >> out;
    if (!in || !(in >> std::ws).eof()) throw ConfigError("config key '" + key + "': '" + v + "' is not a valid number");
    return out;
}

template <class T>
std::string show(const T& v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}

template <class T>
ConfigKey number_key(std::string name, bool affects, T PipelineConfig::*field) {
    return {name, affects, [name, field](PipelineConfig& c, const std::string& v) { c.*field = parse_number<T>(name, v); },
            [field](const PipelineConfig& c) { return show(c.*field); }};
}

template <class T>
ConfigKey gbdt_key(std::string name, T GbdtParams::*field) {
    return {name, true, [name, field](PipelineConfig& c, const std::string& v) { c.gbdt.*field = parse_number<T>(name, v); },
            [field](const PipelineConfig& c) { return show(c.gbdt.*field); }};
}

template <class T>
ConfigKey synth_key(std::string name, T SynthConfig::*field) {
    return {"synth_" + name, true,
            [name, field](PipelineConfig& c, const std::string& v) { c.synth.*field = parse_number<T>("synth_" + name, v); },
            [field](const PipelineConfig& c) { return show(c.synth.*field); }};
}

inline ConfigKey string_key(std::string name, bool affects, std::string PipelineConfig::*field) {
    return {name, affects, [field](PipelineConfig& c, const std::string& v) { c.*field = v; },
            [field](const PipelineConfig& c) { return c.*field; }};
}

} // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
    using namespace detail;
    static const std::vector<ConfigKey> keys = {
        string_key("corpus", false, &PipelineConfig::corpus),
        string_key("gold", false, &PipelineConfig::gold),
        string_key("models", false, &PipelineConfig::models),
        string_key("out", false, &PipelineConfig::out),
        string_key("embeddings", true, &PipelineConfig::embeddings),
        number_key("max_hops", true, &PipelineConfig::max_hops),
        number_key("top_fraction", true, &PipelineConfig::top_fraction),
        {"selection_mode", false,
         [](PipelineConfig& c, const std::string& v) {
             if (v != "threshold" && v != "top_n") throw ConfigError("selection_mode must be 'threshold' or 'top_n'");
             c.selection_mode = v;
         },
         [](const PipelineConfig& c) { return c.selection_mode; }},
        number_key("top_n", false, &PipelineConfig::top_n),
        number_key("threshold", false, &PipelineConfig::threshold),
        number_key("max_articles", false, &PipelineConfig::max_articles),
        {"chapter_method", false,
         [](PipelineConfig& c, const std::string& v) { c.chapter_method = parse_cluster_method(v); },
         [](const PipelineConfig& c) { return std::string(to_string(c.chapter_method)); }},
        {"k_mode", false,
         [](PipelineConfig& c, const std::string& v) {
             if (v != "ap" && v != "gold") throw ConfigError("k_mode must be 'ap' or 'gold'");
             c.k_mode = v;
         },
         [](const PipelineConfig& c) { return c.k_mode; }},
        gbdt_key("n_trees", &GbdtParams::n_trees),
        gbdt_key("learning_rate", &GbdtParams::learning_rate),
        gbdt_key("max_leaves", &GbdtParams::max_leaves),
        gbdt_key("min_samples_leaf", &GbdtParams::min_samples_leaf),
        gbdt_key("feature_subsample", &GbdtParams::feature_subsample),
        gbdt_key("l2_regularization", &GbdtParams::l2_regularization),
        number_key("pair_min_samples_leaf", true, &PipelineConfig::pair_min_samples_leaf),
        number_key("min_views", true, &PipelineConfig::min_views),
        number_key("min_components", true, &PipelineConfig::min_components),
        number_key("seed", true, &PipelineConfig::seed),
        number_key("ari_permutations", false, &PipelineConfig::ari_permutations),
        synth_key("articles", &SynthConfig::articles),
        synth_key("books", &SynthConfig::books),
        synth_key("book_size_min", &SynthConfig::book_size_min),
        synth_key("book_size_max", &SynthConfig::book_size_max),
        synth_key("chapters_min", &SynthConfig::chapters_min),
        synth_key("chapters_max", &SynthConfig::chapters_max),
        synth_key("p_intra_chapter", &SynthConfig::p_intra_chapter),
        synth_key("p_intra_book", &SynthConfig::p_intra_book),
        synth_key("p_forward", &SynthConfig::p_forward),
        synth_key("p_seed_link", &SynthConfig::p_seed_link),
        synth_key("p_background", &SynthConfig::p_background),
        synth_key("pageview_correlation", &SynthConfig::pageview_correlation),
        synth_key("window_days", &SynthConfig::window_days),
        synth_key("background_vocabulary", &SynthConfig::background_vocabulary),
        synth_key("topic_vocabulary", &SynthConfig::topic_vocabulary),
        synth_key("chapter_vocabulary", &SynthConfig::chapter_vocabulary),
        synth_key("topic_share", &SynthConfig::topic_share),
        synth_key("chapter_share", &SynthConfig::chapter_share),
        synth_key("categories", &SynthConfig::categories),
    };
    return keys;
}

inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys())
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    throw ConfigError("unknown config key '" + key + "'");
}

/**
 * Flat TOML subset: `key = value` lines, `#` comments, basic strings,
 * integers, floats and booleans. Tables and arrays are rejected.
 */
inline std::map<std::string, std::string> parse_flat_toml(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string body;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (c == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
            if (c == '#' && !quoted) break;
            body += c;
        }
        body = trim(body);
        if (body.empty()) continue;
        if (body.front() == '[') throw ParseError("tables are not supported in the flat config", lineno);
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
        auto key = trim(body.substr(0, eq));
        auto value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError("empty key or value", lineno);
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') throw ParseError("unterminated string", lineno);
            std::string s;
            for (std::size_t i = 1; i + 1 < value.size(); ++i) {
                if (value[i] == '\\' && i + 2 < value.size()) {
                    const char n = value[++i];
                    s += n == 'n' ? '\n' : n == 't' ? '\t' : n;
                } else {
                    s += value[i];
                }
            }
            value = s;
        } else if (value.front() == '[' || value.front() == '{') {
            throw ParseError("arrays and inline tables are not supported", lineno);
        } else {
            value.erase(std::remove(value.begin(), value.end(), '_'), value.end());
        }
        if (!out.emplace(key, value).second) throw ParseError("duplicate key '" + key + "'", lineno);
    }
    return out;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    PipelineConfig cfg;
    for (const auto& [k, v] : parse_flat_toml(in)) set_config_value(cfg, k, v);
    return cfg;
}

inline void validate_config(const PipelineConfig& cfg) {
    if (cfg.max_hops < 1) throw ConfigError("max_hops must be at least 1");
    if (!(cfg.top_fraction > 0.0 && cfg.top_fraction <= 1.0)) throw ConfigError("top_fraction must lie in (0,1]");
    if (cfg.top_n < 1) throw ConfigError("top_n must be at least 1");
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
    if (cfg.pair_min_samples_leaf < 1) throw ConfigError("pair_min_samples_leaf must be at least 1");
    if (cfg.ari_permutations < 1) throw ConfigError("ari_permutations must be at least 1");
    cfg.gbdt.validate();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << v;
    return o.str();
}

inline std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return hex64(fnv1a(s.str()));
}

/// Hash of every key that changes datasets or models.
inline std::string config_hash(const PipelineConfig& cfg) {
    std::string canon;
    for (const auto& k : config_keys())
        if (k.affects_artifacts) canon += k.name + "=" + k.get(cfg) + "\n";
    return hex64(fnv1a(canon));
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& cfg) {
    nlohmann::ordered_json j;
    for (const auto& k : config_keys()) j[k.name] = k.get(cfg);
    return j;
}

// ---------------------------------------------------------------------------
// Per-book datasets

struct BookData {
    std::string title;
    std::vector<std::string> seeds;
    std::vector<std::vector<std::string>> gold_chapters;
    RowSet candidates;
    RowSet chapter_pairs;
    RowSet order_pairs;

    std::size_t gold_size() const {
        std::size_t n = 0;
        for (const auto& c : gold_chapters) n += c.size();
        return n;
    }
};

/// Tf-idf vectors for the whole corpus, or the supplied table.
inline std::unique_ptr<DocumentEmbedder> make_embedder(const Corpus& corpus, const PipelineConfig& cfg) {
    if (!cfg.embeddings.empty()) return std::make_unique<EmbeddingTable>(load_embedding_table(cfg.embeddings));
    const auto e = fit_embedder(corpus);
    auto table = std::make_unique<EmbeddingTable>();
    std::vector<std::vector<double>> vecs(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) { vecs[i] = e.vector_for(corpus[i]); });
    for (std::size_t i = 0; i < corpus.size(); ++i) table->add(corpus[i].id, std::move(vecs[i]));
    return table;
}

inline BookData build_book_data(const Corpus& corpus, const GoldBook& gold, const DocumentEmbedder& emb, const PipelineConfig& cfg) {
    BookData b;
    b.title = gold.title;
    b.gold_chapters = gold.chapters;
    const auto seeds = seed_concepts_from_query(corpus, gold.title);
    b.seeds = seeds.concept_ids;
    const auto cands = find_candidates(corpus, seeds, cfg.max_hops);
    const auto graph = build_book_graph(corpus, seeds, cands);
    b.candidates = to_rowset(build_candidate_dataset(corpus, seeds, &gold, graph, emb));
    b.chapter_pairs = to_rowset(build_pair_dataset_chapter(corpus, gold.chapters, graph, emb, gold.chapters.size()));
    b.order_pairs = to_rowset(build_pair_dataset_order(corpus, gold.flattened(), graph, emb));
    return b;
}

namespace detail {

inline void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << s;
    if (!out) throw Error("failed writing '" + p.string() + "'");
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingArtifact("missing artifact '" + p.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline nlohmann::json read_json(const fs::path& p) {
    try {
        return nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

inline std::string dataset_csv(const RowSet& d, const std::vector<std::string>& names, bool pairs) {
    std::ostringstream o;
    write_dataset_csv(o, d, names, pairs);
    return o.str();
}

inline fs::path book_cache_dir(const fs::path& models, const std::string& hash, std::size_t i) {
    return models / "cache" / hash / ("book_" + std::to_string(i));
}

} // namespace detail

inline void save_book_data(const BookData& b, const fs::path& dir) {
    fs::create_directories(dir);
    detail::write_text(dir / "candidates.csv", detail::dataset_csv(b.candidates, candidate_feature_names(), false));
    detail::write_text(dir / "chapter_pairs.csv", detail::dataset_csv(b.chapter_pairs, chapter_pair_feature_names(), true));
    detail::write_text(dir / "order_pairs.csv", detail::dataset_csv(b.order_pairs, order_pair_feature_names(), true));
    nlohmann::ordered_json meta{{"title", b.title}, {"seeds", b.seeds}, {"chapters", b.gold_chapters}};
    detail::write_text(dir / "book.json", meta.dump(1) + "\n");
}

inline BookData load_book_data(const fs::path& dir) {
    BookData b;
    const auto meta = detail::read_json(dir / "book.json");
    b.title = meta.at("title").get<std::string>();
    b.seeds = meta.at("seeds").get<std::vector<std::string>>();
    b.gold_chapters = meta.at("chapters").get<std::vector<std::vector<std::string>>>();
    auto load = [&](const char* name, std::size_t width, bool pairs) {
        std::istringstream in(detail::read_text(dir / name));
        return read_dataset_csv(in, width, pairs);
    };
    b.candidates = load("candidates.csv", candidate_feature_count, false);
    b.chapter_pairs = load("chapter_pairs.csv", chapter_pair_feature_names().size(), true);
    b.order_pairs = load("order_pairs.csv", order_feature_count, true);
    return b;
}

// ---------------------------------------------------------------------------
// Training

struct ModelSet {
    std::vector<std::string> titles;
    std::vector<GbdtModel> selection;
    std::vector<GbdtModel> chapter;
    std::vector<GbdtModel> order;
    // relative rank (avg_rank / rows) -> probability, pooled over training books
    std::optional<LogisticModel> selection_calibration;
    std::optional<LogisticModel> order_calibration;
};

inline std::vector<double> relative_ranks(const LooScores& s) {
    std::vector<double> out;
    for (double r : s.avg_rank) out.push_back(r / static_cast<double>(s.size()));
    return out;
}

namespace detail {

inline std::optional<LogisticModel> pooled_calibration(const std::vector<double>& x, const std::vector<int>& y) {
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || pos == static_cast<long>(y.size())) return std::nullopt;
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) return std::nullopt;
    return train_logistic(x, y);
}

inline GbdtParams params_for(const PipelineConfig& cfg, std::size_t book, std::uint64_t stream, bool pairs) {
    auto p = cfg.gbdt;
    p.rng_seed = splitmix64(cfg.seed * 1000003ull + book * 3ull + stream);
    if (pairs) p.min_samples_leaf = cfg.pair_min_samples_leaf;
    return p;
}

} // namespace detail

/**
 * One selection, chaptering and ordering model per book, plus pooled
 * calibrations used when generating books without labels.
 */
inline ModelSet train_models(const std::vector<BookData>& books, const PipelineConfig& cfg) {
    if (books.size() < 2) throw ConfigError("training needs at least two gold books");
    ModelSet m;
    const std::size_t n = books.size();
    m.selection.resize(n);
    m.chapter.resize(n);
    m.order.resize(n);
    for (const auto& b : books) m.titles.push_back(b.title);
    parallel_for(n, [&](std::size_t i) {
        const auto& b = books[i];
        m.selection[i] = train_gbdt(b.candidates.rows, b.candidates.labels, detail::params_for(cfg, i, 0, false));
        m.chapter[i] = train_gbdt(b.chapter_pairs.rows, b.chapter_pairs.labels, detail::params_for(cfg, i, 1, true));
        m.order[i] = train_gbdt(b.order_pairs.rows, b.order_pairs.labels, detail::params_for(cfg, i, 2, true));
    });
    std::vector<RowSet> cand, order;
    for (const auto& b : books) {
        cand.push_back(b.candidates);
        order.push_back(b.order_pairs);
    }
    std::vector<double> sx, ox;
    std::vector<int> sy, oy;
    for (std::size_t i = 0; i < n; ++i) {
        const auto sel = run_selection_loo(cand, m.selection, i, cfg.top_fraction);
        const auto r = relative_ranks(sel.stage2);
        sx.insert(sx.end(), r.begin(), r.end());
        for (auto row : sel.stage2_rows) sy.push_back(cand[i].labels[row]);
        const auto ord = rank_with_models(order[i], foreign_models(m.order, i));
        const auto ro = relative_ranks(ord);
        ox.insert(ox.end(), ro.begin(), ro.end());
        oy.insert(oy.end(), order[i].labels.begin(), order[i].labels.end());
    }
    m.selection_calibration = detail::pooled_calibration(sx, sy);
    m.order_calibration = detail::pooled_calibration(ox, oy);
    return m;
}

inline constexpr const char* manifest_name = "manifest.json";

struct Manifest {
    std::string config_hash;
    std::string corpus_path;
    std::string corpus_hash;
    std::string gold_path;
    std::string gold_hash;
    std::vector<std::string> titles;
    nlohmann::ordered_json config;
    std::optional<LogisticModel> selection_calibration;
    std::optional<LogisticModel> order_calibration;
};

inline nlohmann::ordered_json manifest_to_json(const Manifest& m) {
    auto cal = [](const std::optional<LogisticModel>& c) {
        return c ? nlohmann::ordered_json(logistic_to_json(*c)) : nlohmann::ordered_json(nullptr);
    };
    return {{"format", "bookforge-models"},
            {"version", 1},
            {"config_hash", m.config_hash},
            {"corpus", {{"path", m.corpus_path}, {"hash", m.corpus_hash}}},
            {"gold", {{"path", m.gold_path}, {"hash", m.gold_hash}}},
            {"books", m.titles},
            {"selection_calibration", cal(m.selection_calibration)},
            {"order_calibration", cal(m.order_calibration)},
            {"config", m.config}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    try {
        if (j.at("format").get<std::string>() != "bookforge-models") throw SchemaError("not a model manifest");
        m.config_hash = j.at("config_hash").get<std::string>();
        m.corpus_path = j.at("corpus").at("path").get<std::string>();
        m.corpus_hash = j.at("corpus").at("hash").get<std::string>();
        m.gold_path = j.at("gold").at("path").get<std::string>();
        m.gold_hash = j.at("gold").at("hash").get<std::string>();
        m.titles = j.at("books").get<std::vector<std::string>>();
        if (!j.at("selection_calibration").is_null()) m.selection_calibration = logistic_from_json(j.at("selection_calibration"));
        if (!j.at("order_calibration").is_null()) m.order_calibration = logistic_from_json(j.at("order_calibration"));
        m.config = j.at("config");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("manifest: ") + e.what());
    }
    return m;
}

inline void save_models(const ModelSet& m, const Manifest& manifest, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < m.titles.size(); ++i) {
        const auto s = std::to_string(i);
        save_gbdt(m.selection[i], (dir / ("selection_" + s + ".json")).string());
        save_gbdt(m.chapter[i], (dir / ("chapter_" + s + ".json")).string());
        save_gbdt(m.order[i], (dir / ("order_" + s + ".json")).string());
    }
    detail::write_text(dir / manifest_name, manifest_to_json(manifest).dump(1) + "\n");
}

inline Manifest load_manifest(const fs::path& dir) {
    if (!fs::exists(dir / manifest_name)) throw MissingArtifact("no trained models in '" + dir.string() + "'");
    return manifest_from_json(detail::read_json(dir / manifest_name));
}

inline ModelSet load_models(const fs::path& dir) {
    const auto manifest = load_manifest(dir);
    ModelSet m;
    m.titles = manifest.titles;
    m.selection_calibration = manifest.selection_calibration;
    m.order_calibration = manifest.order_calibration;
    for (std::size_t i = 0; i < m.titles.size(); ++i) {
        const auto s = std::to_string(i);
        m.selection.push_back(load_gbdt((dir / ("selection_" + s + ".json")).string()));
        m.chapter.push_back(load_gbdt((dir / ("chapter_" + s + ".json")).string()));
        m.order.push_back(load_gbdt((dir / ("order_" + s + ".json")).string()));
    }
    return m;
}

/// Validated, filtered gold books of `cfg.gold` against the corpus.
inline std::vector<GoldBook> load_training_books(const Corpus& corpus, const PipelineConfig& cfg) {
    auto books = filter_gold_books(load_gold_books(cfg.gold), cfg.min_views, cfg.min_components);
    for (const auto& b : books) validate_gold_book(b, corpus);
    if (books.size() < 2) throw ConfigError("at least two gold books are required after filtering");
    return books;
}

/// Per-book datasets, read from the cache when present and written otherwise.
inline std::vector<BookData> prepare_books(const Corpus& corpus, const std::vector<GoldBook>& gold, const PipelineConfig& cfg,
                                           const std::string& cache_key) {
    std::unique_ptr<DocumentEmbedder> emb;
    std::vector<BookData> books;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto dir = detail::book_cache_dir(cfg.models, cache_key, i);
        if (fs::exists(dir / "book.json")) {
            books.push_back(load_book_data(dir));
            continue;
        }
        if (!emb) emb = make_embedder(corpus, cfg);
        books.push_back(build_book_data(corpus, gold[i], *emb, cfg));
        save_book_data(books.back(), dir);
    }
    return books;
}

/// Cache key of the datasets: configuration plus both input files.
inline std::string artifact_key(const PipelineConfig& cfg, const std::string& corpus_hash, const std::string& gold_hash) {
    return hex64(fnv1a(config_hash(cfg) + corpus_hash + gold_hash));
}

struct TrainOutcome {
    Manifest manifest;
    bool reused = false;
};

/// Builds (or reuses) datasets and models for `cfg.corpus` and `cfg.gold` under `cfg.models`.
inline TrainOutcome cmd_train(const PipelineConfig& cfg) {
    validate_config(cfg);
    Manifest man;
    man.corpus_path = fs::absolute(cfg.corpus).lexically_normal().string();
    man.gold_path = fs::absolute(cfg.gold).lexically_normal().string();
    man.corpus_hash = file_hash(cfg.corpus);
    man.gold_hash = file_hash(cfg.gold);
    man.config_hash = artifact_key(cfg, man.corpus_hash, man.gold_hash);
    man.config = config_to_json(cfg);
    if (fs::exists(fs::path(cfg.models) / manifest_name)) {
        const auto old = load_manifest(cfg.models);
        if (old.config_hash == man.config_hash) {
            bool complete = true;
            for (std::size_t i = 0; i < old.titles.size(); ++i)
                for (const char* kind : {"selection_", "chapter_", "order_"})
                    complete = complete && fs::exists(fs::path(cfg.models) / (kind + std::to_string(i) + ".json"));
            if (complete) return {old, true};
        }
    }
    const auto corpus = load_corpus(cfg.corpus);
    const auto gold = load_training_books(corpus, cfg);
    const auto books = prepare_books(corpus, gold, cfg, man.config_hash);
    const auto models = train_models(books, cfg);
    man.titles = models.titles;
    man.selection_calibration = models.selection_calibration;
    man.order_calibration = models.order_calibration;
    save_models(models, man, cfg.models);
    return {man, false};
}

// ---------------------------------------------------------------------------
// Evaluation

struct GroupedKendall {
    double tau = 0.0;    // mean over groups with at least two items
    double pvalue = 1.0; // stratified normal approximation
    std::size_t groups = 0;
};

/**
 * Kendall agreement of predicted and reference orders group by group.
 * The p-value pools S = concordant - discordant over groups with variance
 * sum n(n-1)(2n+5)/18.
 */
inline std::optional<GroupedKendall> grouped_kendall(const std::vector<std::vector<std::string>>& predicted,
                                                     const std::vector<std::vector<std::string>>& reference) {
    if (predicted.size() != reference.size()) throw Error("grouped kendall: group counts differ");
    GroupedKendall g;
    double s_total = 0.0, var_total = 0.0, tau_sum = 0.0;
    for (std::size_t c = 0; c < predicted.size(); ++c) {
        const auto n = static_cast<double>(predicted[c].size());
        if (predicted[c].size() < 2) continue;
        const auto k = kendall_tau_orders(predicted[c], reference[c]);
        tau_sum += k.statistic;
        ++g.groups;
        s_total += k.statistic * n * (n - 1.0) / 2.0;
        var_total += n * (n - 1.0) * (2.0 * n + 5.0) / 18.0;
    }
    if (g.groups == 0) return std::nullopt;
    g.tau = tau_sum / static_cast<double>(g.groups);
    g.pvalue = std::erfc(std::abs(s_total / std::sqrt(var_total)) / std::sqrt(2.0));
    return g;
}

/// Gold chapter labels for `articles` (sorted pair-dataset order).
inline Partition gold_partition(const std::vector<std::string>& articles, const std::vector<std::vector<std::string>>& chapters) {
    std::map<std::string, std::size_t> of;
    for (std::size_t c = 0; c < chapters.size(); ++c)
        for (const auto& id : chapters[c]) of[id] = c;
    std::vector<std::size_t> labels;
    for (const auto& a : articles) {
        auto it = of.find(a);
        if (it == of.end()) throw Error("article '" + a + "' has no gold chapter");
        labels.push_back(it->second);
    }
    return Partition(labels);
}

struct EvaluationParts {
    bool selection = true;
    bool chaptering = true;
    bool ordering = true;
};

/// Rows `article_id,avg_rank_stage1,avg_rank_stage2,calibrated_prob,label`; stage-2 cells are empty for dropped rows.
inline std::string selection_scores_csv(const SelectionOutcome& sel, std::span<const int> labels) {
    std::vector<std::optional<std::size_t>> in_stage2(sel.stage1.size());
    for (std::size_t r = 0; r < sel.stage2_rows.size(); ++r) in_stage2[sel.stage2_rows[r]] = r;
    std::ostringstream o;
    o << "article_id,avg_rank_stage1,avg_rank_stage2,calibrated_prob,label\n";
    for (std::size_t r = 0; r < sel.stage1.size(); ++r) {
        o << detail::csv_field(sel.stage1.ids[r]) << ',' << detail::format_double(sel.stage1.avg_rank[r]) << ',';
        if (in_stage2[r])
            o << detail::format_double(sel.stage2.avg_rank[*in_stage2[r]]) << ','
              << detail::format_double(sel.stage2.calibrated_prob[*in_stage2[r]]);
        else
            o << ',';
        o << ',' << labels[r] << '\n';
    }
    return o.str();
}

/// Leave-one-out evaluation of every book against the models of the others.
inline EvalReport evaluate_books(const std::vector<BookData>& books, const ModelSet& models, const PipelineConfig& cfg,
                                 EvaluationParts parts = {}, std::vector<std::string>* scores_csv = nullptr) {
    if (books.size() != models.selection.size()) throw ConfigError("models and books differ in number");
    const auto start = std::chrono::steady_clock::now();
    std::vector<RowSet> cand, chap, order;
    for (const auto& b : books) {
        cand.push_back(b.candidates);
        chap.push_back(b.chapter_pairs);
        order.push_back(b.order_pairs);
    }
    EvalReport report;
    for (std::size_t i = 0; i < books.size(); ++i) {
        const auto& b = books[i];
        BookEvaluation e;
        e.title = b.title;
        e.candidates = b.candidates.size();
        e.n = b.gold_size();
        if (parts.selection) {
            const auto sel = run_selection_loo(cand, models.selection, i, cfg.top_fraction);
            std::vector<double> s1;
            for (double r : sel.stage1.avg_rank) s1.push_back(-r);
            e.auc = auc(s1, b.candidates.labels);
            std::vector<double> s2;
            std::vector<int> l2;
            for (std::size_t r = 0; r < sel.stage2.size(); ++r) {
                s2.push_back(-sel.stage2.avg_rank[r]);
                l2.push_back(b.candidates.labels[sel.stage2_rows[r]]);
            }
            const auto pr = precision_recall_at_n(s2, l2, sel.stage2.ids, e.n, e.n);
            e.precision_at_n = pr.precision;
            e.recall_at_n = pr.recall;
            if (scores_csv) scores_csv->push_back(selection_scores_csv(sel, b.candidates.labels));
        }
        if (parts.chaptering) {
            const auto gold_k = chapter_articles(chap, models.chapter, i, b.gold_chapters.size(), cfg.chapter_method);
            const auto truth = gold_partition(gold_k.articles, b.gold_chapters);
            e.gold_k = gold_k.k;
            e.ari = adjusted_rand(gold_k.partition, truth);
            e.ari_pvalue = ari_pvalue(gold_k.partition, truth, cfg.ari_permutations, splitmix64(cfg.seed + 2 * i));
            const auto ap = chapter_from_probabilities(chap[i], gold_k.pair_probs, std::nullopt, cfg.chapter_method);
            e.ap_k = ap.k;
            e.ari_ap = adjusted_rand(ap.partition, truth);
            e.ari_ap_pvalue = ari_pvalue(ap.partition, truth, cfg.ari_permutations, splitmix64(cfg.seed + 2 * i + 1));
        }
        if (parts.ordering) {
            const auto classes = classify_pair_order(order, models.order, i);
            // chapters enter ordered by their smallest id so the reference order cannot break ties
            auto chapters = b.gold_chapters;
            for (auto& c : chapters) std::sort(c.begin(), c.end());
            std::sort(chapters.begin(), chapters.end());
            const auto pairs = order_pairs(b.order_pairs.ids);
            const auto ranks = ranks_from_pair_classes(chapters, pairs, classes);
            const auto draft = assemble_book(chapters, ranks, b.title);
            // reference order of each predicted chapter
            std::vector<std::vector<std::string>> reference;
            std::vector<std::string> predicted_seq, gold_seq;
            for (const auto& pc : draft.chapters) {
                for (std::size_t g = 0; g < b.gold_chapters.size(); ++g) {
                    if (std::find(b.gold_chapters[g].begin(), b.gold_chapters[g].end(), pc.front()) == b.gold_chapters[g].end())
                        continue;
                    reference.push_back(b.gold_chapters[g]);
                    predicted_seq.push_back(std::to_string(g));
                }
            }
            for (std::size_t g = 0; g < b.gold_chapters.size(); ++g) gold_seq.push_back(std::to_string(g));
            if (auto gk = grouped_kendall(draft.chapters, reference)) {
                e.kendall_articles = gk->tau;
                e.kendall_articles_pvalue = gk->pvalue;
            }
            if (gold_seq.size() >= 2) {
                const auto k = kendall_tau_orders(predicted_seq, gold_seq);
                e.kendall_chapters = k.statistic;
                e.kendall_chapters_pvalue = k.pvalue;
            }
        }
        report.books.push_back(std::move(e));
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

/// Evaluates the models trained under `cfg.models`; exits with MissingArtifact when inputs changed since training.
inline EvalReport cmd_evaluate(const PipelineConfig& cfg, std::vector<std::string>* scores_csv = nullptr) {
    validate_config(cfg);
    const auto man = load_manifest(cfg.models);
    if (file_hash(cfg.gold) != man.gold_hash)
        throw MissingArtifact("gold books differ from the ones the models were trained on; run train again");
    if (!fs::exists(man.corpus_path) || file_hash(man.corpus_path) != man.corpus_hash)
        throw MissingArtifact("corpus '" + man.corpus_path + "' changed since training; run train again");
    const auto models = load_models(cfg.models);
    std::vector<BookData> books;
    for (std::size_t i = 0; i < models.titles.size(); ++i) {
        const auto dir = detail::book_cache_dir(cfg.models, man.config_hash, i);
        if (!fs::exists(dir / "book.json")) throw MissingArtifact("dataset cache missing for book " + std::to_string(i));
        books.push_back(load_book_data(dir));
    }
    return evaluate_books(books, models, cfg, {}, scores_csv);
}

// ---------------------------------------------------------------------------
// Generation

inline std::vector<double> calibrated(const std::optional<LogisticModel>& cal, const LooScores& s) {
    const auto r = relative_ranks(s);
    if (!cal) return std::vector<double>(r.size(), 0.5);
    return predict_logistic(*cal, r);
}

/// A new book for `query` from every trained model.
inline BookDraft generate_book(const Corpus& corpus, const DocumentEmbedder& emb, const ModelSet& models, const PipelineConfig& cfg,
                               const std::string& query) {
    const auto seeds = seed_concepts_from_query(corpus, query);
    const auto cands = find_candidates(corpus, seeds, cfg.max_hops);
    if (cands.empty()) throw NoSeedFound("the seed articles of '" + query + "' link to no other article");
    const auto graph = build_book_graph(corpus, seeds, cands);
    const auto rows = to_rowset(build_candidate_dataset(corpus, seeds, nullptr, graph, emb));

    std::vector<const GbdtModel*> sel_models, chap_models, order_models;
    for (std::size_t i = 0; i < models.selection.size(); ++i) {
        sel_models.push_back(&models.selection[i]);
        chap_models.push_back(&models.chapter[i]);
        order_models.push_back(&models.order[i]);
    }
    const auto stage1 = rank_with_models(rows, sel_models);
    const auto reduced = rows.subset(top_fraction_indices(stage1, cfg.top_fraction));
    auto stage2 = rank_with_models(reduced, sel_models);
    stage2.calibrated_prob = calibrated(models.selection_calibration, stage2);
    ChooseOptions opt;
    if (cfg.selection_mode == "top_n") opt.n = cfg.top_n;
    opt.max_articles = cfg.max_articles;
    opt.threshold = cfg.threshold;
    const auto chosen = choose_articles(stage2, opt);

    nlohmann::ordered_json prov{{"query", query}, {"seeds", seeds.concept_ids}, {"candidates", cands.size()},
                                {"selected", chosen.size()}, {"config_hash", config_hash(cfg)}};
    if (chosen.size() < 2) {
        prov["k"] = 1;
        return BookDraft{query, {chosen}, prov};
    }

    // categorical pair features need a group count before any label exists
    std::vector<std::vector<double>> vecs;
    for (const auto& id : chosen) vecs.push_back(emb.vector_for(corpus.get(id)));
    Dissimilarity text_d(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i)
        for (std::size_t j = i + 1; j < chosen.size(); ++j) text_d.set(i, j, std::max(0.0, 1.0 - cosine(vecs[i], vecs[j])));
    const auto feature_k = estimate_k(text_d);

    const auto pairs = to_rowset(build_pair_dataset_chapter(corpus, chosen, {}, graph, emb, feature_k));
    const auto chapters = chapter_from_probabilities(pairs, average_probabilities(pairs, chap_models), std::nullopt, cfg.chapter_method);

    auto sorted = chosen;
    std::sort(sorted.begin(), sorted.end());
    const auto order_rows = to_rowset(build_pair_dataset_order(corpus, sorted, graph, emb));
    const auto order_scores = rank_with_models(order_rows, order_models);
    const auto classes = classes_from_probabilities(calibrated(models.order_calibration, order_scores));
    const auto ranks = ranks_from_pair_classes(chapters.clusters(), order_pairs(order_rows.ids), classes);
    prov["k"] = chapters.k;
    return assemble_book(chapters.clusters(), ranks, query, prov);
}

inline BookDraft cmd_generate(const PipelineConfig& cfg, const std::string& query) {
    validate_config(cfg);
    const auto man = load_manifest(cfg.models);
    const auto models = load_models(cfg.models);
    const std::string corpus_path = fs::exists(cfg.corpus) ? cfg.corpus : man.corpus_path;
    const auto corpus = load_corpus(corpus_path);
    const auto emb = make_embedder(corpus, cfg);
    return generate_book(corpus, *emb, models, cfg, query);
}

} // namespace bookforge
