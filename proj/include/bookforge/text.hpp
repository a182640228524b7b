#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "text_util.hpp"

namespace bookforge {

/// Document -> vector. Implementations are immutable after construction and safe to share.
class DocumentEmbedder {
public:
    virtual ~DocumentEmbedder() = default;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> vector_for(const Article& a) const = 0;
};

/**
 * Term-frequency x inverse-document-frequency embedder.
 *
 * Vocabulary is ordered lexicographically; idf(t) = ln((1 + N) / (1 + df(t))) + 1.
 */
class Embedder : public DocumentEmbedder {
public:
    Embedder() = default;

    Embedder(std::vector<std::string> vocabulary, std::vector<double> idf) : vocab_(std::move(vocabulary)), idf_(std::move(idf)) {
        for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
    }

    std::size_t dimension() const override { return vocab_.size(); }
    const std::vector<std::string>& vocabulary() const { return vocab_; }

    std::optional<std::size_t> term_index(const std::string& term) const {
        auto it = index_.find(term);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    double idf(const std::string& term) const {
        auto i = term_index(term);
        if (!i) throw Error("term '" + term + "' is not in the vocabulary");
        return idf_[*i];
    }

    const std::vector<double>& idf_values() const { return idf_; }

    std::vector<double> vector_for(const Article& a) const override;

private:
    std::vector<std::string> vocab_;
    std::vector<double> idf_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline Embedder fit_embedder(std::span<const std::string> documents) {
    if (documents.empty()) throw Error("cannot fit an embedder on an empty corpus");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : documents) {
        auto tokens = tokenize(doc);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (auto& t : tokens) ++df[t];
    }
    if (df.empty()) throw Error("corpus contains no tokens");
    const double n = static_cast<double>(documents.size());
    std::vector<std::string> vocab;
    std::vector<double> idf;
    vocab.reserve(df.size());
    idf.reserve(df.size());
    for (const auto& [term, count] : df) {
        vocab.push_back(term);
        idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return Embedder(std::move(vocab), std::move(idf));
}

inline Embedder fit_embedder(const Corpus& corpus) {
    std::vector<std::string> docs;
    docs.reserve(corpus.size());
    for (const auto& a : corpus.articles()) docs.push_back(a.text);
    return fit_embedder(docs);
}

/// L2-normalized tf-idf vector; out-of-vocabulary terms are ignored, no overlap gives the zero vector.
inline std::vector<double> embed(const Embedder& e, std::string_view text) {
    std::vector<double> v(e.dimension(), 0.0);
    for (const auto& t : tokenize(text))
        if (auto i = e.term_index(t)) v[*i] += 1.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] *= e.idf_values()[i];
        norm += v[i] * v[i];
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

inline std::vector<double> Embedder::vector_for(const Article& a) const { return embed(*this, a.text); }

/// Precomputed id -> vector table. Returns stored vectors unchanged; unknown ids map to the zero vector.
class EmbeddingTable : public DocumentEmbedder {
public:
    EmbeddingTable() = default;

    void add(std::string id, std::vector<double> v) {
        if (vectors_.empty() && dim_ == 0) dim_ = v.size();
        if (v.size() != dim_) throw SchemaError("embedding for '" + id + "' has dimension " + std::to_string(v.size()) +
                                                ", expected " + std::to_string(dim_));
        if (!vectors_.emplace(std::move(id), std::move(v)).second) throw SchemaError("duplicate embedding id");
    }

    std::size_t dimension() const override { return dim_; }
    std::size_t size() const { return vectors_.size(); }

    std::vector<double> vector_for(const Article& a) const override {
        auto it = vectors_.find(a.id);
        if (it == vectors_.end()) return std::vector<double>(dim_, 0.0);
        return it->second;
    }

private:
    std::unordered_map<std::string, std::vector<double>> vectors_;
    std::size_t dim_ = 0;
};

/// Reads `{"id":str,"vector":[float,...]}` lines.
inline EmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embedding table '" + path + "'");
    EmbeddingTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            table.add(j.at("id").get<std::string>(), j.at("vector").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return table;
}

/// dot(u,v) / (|u||v|), 0 when either vector is zero.
inline double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw Error("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu <= 0.0 || nv <= 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

struct TextStats {
    std::size_t length = 0;     // characters (UTF-8 code points)
    std::size_t paragraphs = 0; // maximal runs of non-blank lines
};

inline TextStats text_stats(std::string_view text) {
    TextStats s;
    for (unsigned char c : text)
        if ((c & 0xC0) != 0x80) ++s.length; // UTF-8 code points
    bool in_paragraph = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        const bool blank = line.find_first_not_of(" \t\r") == std::string_view::npos;
        if (!blank && !in_paragraph) ++s.paragraphs;
        in_paragraph = !blank;
        pos = end + 1;
    }
    return s;
}

inline TextStats text_stats(const Article& a) { return text_stats(a.text); }

} // namespace bookforge
