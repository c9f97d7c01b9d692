#pragma once

/// \file index.hpp
/// Document-level inverted index and BM25 retrieval over weighted queries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fbkit/analysis.hpp"
#include "fbkit/io.hpp"
#include "fbkit/types.hpp"

namespace fbkit {

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
};

struct TermCount {
    std::uint32_t term = 0;
    std::uint32_t tf = 0;
};

struct BM25Params {
    double k1 = 0.9;
    double b = 0.4;
};

/// Analyzed query: term -> non-negative weight.
struct WeightedQuery {
    std::string query_id;
    std::map<std::string, double> weights;
};

class InvertedIndex {
public:
    InvertedIndex() = default;
    explicit InvertedIndex(AnalyzerConfig config) : config_(std::move(config)) {}

    /// Appends a document given its analyzed terms. Ids must be unique.
    void add_document(const std::string& doc_id, const std::vector<std::string>& terms) {
        if (doc_id.empty()) throw Error("empty doc_id");
        auto ordinal = static_cast<std::uint32_t>(doc_ids_.size());
        if (!doc_ordinals_.emplace(doc_id, ordinal).second)
            throw Error("duplicate doc_id " + doc_id);
        doc_ids_.push_back(doc_id);
        doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        total_length_ += terms.size();

        std::map<std::uint32_t, std::uint32_t> counts;
        for (const auto& t : terms) ++counts[intern(t)];
        auto& fwd = forward_.emplace_back();
        fwd.reserve(counts.size());
        for (auto [term, tf] : counts) {
            postings_[term].push_back({ordinal, tf});
            fwd.push_back({term, tf});
        }
    }

    const AnalyzerConfig& config() const { return config_; }
    std::size_t doc_count() const { return doc_ids_.size(); }
    std::size_t vocabulary_size() const { return terms_.size(); }
    std::uint64_t total_length() const { return total_length_; }

    double avgdl() const {
        return doc_ids_.empty() ? 0.0
                                : static_cast<double>(total_length_) /
                                      static_cast<double>(doc_ids_.size());
    }

    const std::string& doc_id(std::uint32_t ordinal) const { return doc_ids_.at(ordinal); }
    std::uint32_t doc_length(std::uint32_t ordinal) const { return doc_lengths_.at(ordinal); }

    std::optional<std::uint32_t> ordinal_of(const std::string& doc_id) const {
        auto it = doc_ordinals_.find(doc_id);
        if (it == doc_ordinals_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::uint32_t> term_id(const std::string& term) const {
        auto it = term_ids_.find(term);
        if (it == term_ids_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& term(std::uint32_t id) const { return terms_.at(id); }

    std::span<const Posting> postings(const std::string& term) const {
        auto id = term_id(term);
        if (!id) return {};
        return postings_[*id];
    }

    std::size_t df(const std::string& term) const { return postings(term).size(); }

    std::uint32_t tf(const std::string& term, std::uint32_t ordinal) const {
        for (const auto& p : postings(term))
            if (p.doc == ordinal) return p.tf;
        return 0;
    }

    /// Term counts of one document, sorted by term id.
    std::span<const TermCount> doc_terms(std::uint32_t ordinal) const { return forward_.at(ordinal); }

    /// Writes the index and its manifest into `dir`.
    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        nlohmann::ordered_json manifest;
        manifest["format"] = "fbkit-index-1";
        manifest["analyzer"] = {{"stemmer", config_.stem ? "porter" : "none"},
                                {"stopwords", config_.stopwords}};
        manifest["analyzer_signature"] = config_.signature();
        manifest["doc_count"] = doc_count();
        manifest["total_length"] = total_length_;
        manifest["avgdl"] = avgdl();
        manifest["vocabulary_size"] = vocabulary_size();
        {
            std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
            out << manifest.dump(2) << '\n';
        }
        {
            std::ofstream out(dir / "docs.tsv", std::ios::binary | std::ios::trunc);
            for (std::size_t i = 0; i < doc_ids_.size(); ++i)
                out << doc_ids_[i] << '\t' << doc_lengths_[i] << '\n';
        }
        std::ofstream out(dir / "postings.txt", std::ios::binary | std::ios::trunc);
        for (std::size_t t = 0; t < terms_.size(); ++t) {
            out << terms_[t] << '\t' << postings_[t].size() << '\t';
            for (std::size_t i = 0; i < postings_[t].size(); ++i) {
                if (i) out << ' ';
                out << postings_[t][i].doc << ':' << postings_[t][i].tf;
            }
            out << '\n';
        }
        if (!out) throw Error("failed writing index to " + dir.string());
    }

    static AnalyzerConfig read_manifest_config(const std::filesystem::path& dir) {
        std::ifstream in(dir / "manifest.json");
        if (!in) throw Error("not an index directory (missing manifest): " + dir.string());
        auto manifest = nlohmann::json::parse(in, nullptr, false);
        if (manifest.is_discarded() || manifest.value("format", "") != "fbkit-index-1")
            throw Error("unrecognised index manifest in " + dir.string());
        AnalyzerConfig config;
        config.stem = manifest["analyzer"].value("stemmer", "porter") == "porter";
        config.stopwords = manifest["analyzer"]["stopwords"].get<std::set<std::string>>();
        return config;
    }

    /// Loads an index. If `expected` is given, the analyzer recorded in the
    /// manifest must match it.
    static InvertedIndex load(const std::filesystem::path& dir,
                              const AnalyzerConfig* expected = nullptr) {
        auto config = read_manifest_config(dir);
        if (expected && !(*expected == config))
            throw Error("index " + dir.string() + " was built with a different analyzer (" +
                        config.signature() + ")");
        InvertedIndex index(config);

        std::ifstream docs(dir / "docs.tsv");
        if (!docs) throw Error("missing docs.tsv in " + dir.string());
        std::string line;
        while (std::getline(docs, line)) {
            auto tab = line.find('\t');
            long len = 0;
            if (tab == std::string::npos || !parse_long(std::string_view(line).substr(tab + 1), len))
                throw Error("corrupt docs.tsv in " + dir.string());
            auto ordinal = static_cast<std::uint32_t>(index.doc_ids_.size());
            index.doc_ids_.push_back(line.substr(0, tab));
            index.doc_ordinals_.emplace(index.doc_ids_.back(), ordinal);
            index.doc_lengths_.push_back(static_cast<std::uint32_t>(len));
            index.total_length_ += static_cast<std::uint64_t>(len);
        }
        index.forward_.resize(index.doc_ids_.size());

        std::ifstream post(dir / "postings.txt");
        if (!post) throw Error("missing postings.txt in " + dir.string());
        while (std::getline(post, line)) {
            auto tab1 = line.find('\t');
            auto tab2 = line.find('\t', tab1 + 1);
            if (tab1 == std::string::npos || tab2 == std::string::npos)
                throw Error("corrupt postings.txt in " + dir.string());
            auto term = index.intern(line.substr(0, tab1));
            auto& list = index.postings_[term];
            for (auto tok : split_whitespace(std::string_view(line).substr(tab2 + 1))) {
                auto colon = tok.find(':');
                long doc = 0, tf = 0;
                if (colon == std::string_view::npos || !parse_long(tok.substr(0, colon), doc) ||
                    !parse_long(tok.substr(colon + 1), tf) || doc < 0 ||
                    static_cast<std::size_t>(doc) >= index.doc_ids_.size())
                    throw Error("corrupt postings.txt in " + dir.string());
                list.push_back({static_cast<std::uint32_t>(doc), static_cast<std::uint32_t>(tf)});
                index.forward_[static_cast<std::size_t>(doc)].push_back(
                    {term, static_cast<std::uint32_t>(tf)});
            }
        }
        return index;
    }

private:
    std::uint32_t intern(const std::string& term) {
        auto [it, fresh] = term_ids_.emplace(term, static_cast<std::uint32_t>(terms_.size()));
        if (fresh) {
            terms_.push_back(term);
            postings_.emplace_back();
        }
        return it->second;
    }

    AnalyzerConfig config_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> doc_ordinals_;
    std::vector<std::uint32_t> doc_lengths_;
    std::uint64_t total_length_ = 0;
    std::vector<std::string> terms_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::vector<TermCount>> forward_;
};

/// Text indexed for a document: title (if any) followed by contents.
inline std::string indexable_text(const Document& doc) {
    if (doc.title.empty()) return doc.contents;
    return doc.title + "\n" + doc.contents;
}

template <typename DocumentRange>
InvertedIndex build_index(const DocumentRange& corpus, const AnalyzerConfig& config) {
    InvertedIndex index(config);
    for (const Document& doc : corpus) index.add_document(doc.doc_id, tokenize(indexable_text(doc), config));
    if (index.doc_count() == 0) throw Error("cannot build an index from an empty corpus");
    return index;
}

inline InvertedIndex build_index(const std::filesystem::path& corpus_path,
                                 const AnalyzerConfig& config) {
    InvertedIndex index(config);
    for_each_document(corpus_path, [&](Document doc) {
        index.add_document(doc.doc_id, tokenize(indexable_text(doc), config));
    });
    if (index.doc_count() == 0) throw Error("cannot build an index from an empty corpus");
    return index;
}

/// Lucene-style idf, always non-negative.
inline double bm25_idf(std::size_t doc_count, std::size_t df) {
    const double n = static_cast<double>(doc_count);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

inline double bm25_term_score(double tf, double doc_len, double avgdl, double idf,
                              const BM25Params& p) {
    const double norm = p.k1 * (1.0 - p.b + p.b * doc_len / avgdl);
    return idf * (tf * (p.k1 + 1.0)) / (tf + norm);
}

/// Term-at-a-time BM25. Only documents containing at least one query term
/// with positive weight are ranked.
inline ResultList bm25_search(const InvertedIndex& index, const WeightedQuery& query,
                              const BM25Params& params, std::size_t depth = kDefaultDepth) {
    if (depth == 0) throw Error("depth must be at least 1");
    std::vector<double> scores(index.doc_count(), 0.0);
    std::vector<char> hit(index.doc_count(), 0);
    const double avgdl = index.avgdl();
    for (const auto& [term, weight] : query.weights) {
        if (!(weight > 0)) continue;
        auto postings = index.postings(term);
        if (postings.empty()) continue;
        const double idf = bm25_idf(index.doc_count(), postings.size());
        for (const auto& p : postings) {
            scores[p.doc] += weight * bm25_term_score(p.tf, index.doc_length(p.doc), avgdl, idf, params);
            hit[p.doc] = 1;
        }
    }
    ResultList out;
    for (std::uint32_t d = 0; d < scores.size(); ++d)
        if (hit[d]) out.push_back({index.doc_id(d), scores[d]});
    finalize_ranking(out, depth);
    return out;
}

/// Maximum-likelihood query model over the analyzed query text.
inline WeightedQuery query_from_text(const std::string& query_id, std::string_view text,
                                     const AnalyzerConfig& config) {
    WeightedQuery q{query_id, {}};
    auto terms = tokenize(text, config);
    for (const auto& t : terms) q.weights[t] += 1.0;
    for (auto& [t, w] : q.weights) w /= static_cast<double>(terms.size());
    return q;
}

}  // namespace fbkit
