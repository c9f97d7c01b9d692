#pragma once

/// \file analysis.hpp
/// Text analysis for sparse indexing: lowercasing, stopword removal and
/// Porter stemming. Also passage sharding for dense/learned-sparse ingestion.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fbkit/porter.hpp"
#include "fbkit/types.hpp"

namespace fbkit {

/// Classic 33-word English stopword list.
inline const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",   "and",   "are",  "as",    "at",   "be",    "but",  "by",
        "for",  "if",   "in",    "into", "is",    "it",   "no",    "not",  "of",
        "on",   "or",   "such",  "that", "the",   "their", "then", "there", "these",
        "they", "this", "to",    "was",  "will",  "with"};
    return words;
}

/// Analyzer settings. The stemmer is always Porter; `stem` exists only so
/// tests can inspect unstemmed tokens.
struct AnalyzerConfig {
    std::set<std::string> stopwords = default_stopwords();
    bool stem = true;

    friend bool operator==(const AnalyzerConfig&, const AnalyzerConfig&) = default;

    /// Stable textual fingerprint recorded in index manifests.
    std::string signature() const {
        std::string s = stem ? "porter" : "nostem";
        s += ";stop=";
        for (const auto& w : stopwords) {
            s += w;
            s += ',';
        }
        return s;
    }
};

/// One word per line; blank lines ignored. Words are lowercased.
inline std::set<std::string> read_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        auto parts = split_whitespace(line);
        if (parts.empty()) continue;
        std::string w(parts.front());
        for (auto& c : w)
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        words.insert(std::move(w));
    }
    return words;
}

namespace detail {

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and are kept inside tokens.
inline bool is_token_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline bool is_ascii_word(std::string_view w) {
    for (unsigned char c : w)
        if (c >= 0x80) return false;
    return true;
}

}  // namespace detail

/// Splits text into maximal runs of letters/digits, lowercases, drops
/// stopwords and stems what remains. Numbers are kept.
inline std::vector<std::string> tokenize(std::string_view text, const AnalyzerConfig& config) {
    static const PorterStemmer stemmer;
    std::vector<std::string> terms;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !detail::is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && detail::is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::string word(text.substr(start, i - start));
        for (auto& c : word)
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (config.stopwords.contains(word)) continue;
        if (config.stem && detail::is_ascii_word(word)) word = stemmer.stem(word);
        if (!word.empty()) terms.push_back(std::move(word));
    }
    return terms;
}

// ---------------------------------------------------------------- passages

struct Passage {
    std::string passage_id;
    std::string doc_id;
    std::string text;
    std::size_t first_sentence = 0;
    std::size_t sentence_count = 0;
};

/// Approximate sentence segmentation: a sentence ends at '.', '!' or '?'
/// followed by whitespace (or end of text). Sentences are trimmed.
inline std::vector<std::string> split_sentences(std::string_view text) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    std::vector<std::string> out;
    auto push = [&](std::size_t from, std::size_t to) {
        while (from < to && is_space(text[from])) ++from;
        while (to > from && is_space(text[to - 1])) --to;
        if (to > from) out.emplace_back(text.substr(from, to - from));
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_space(text[i + 1]))) {
            push(start, i + 1);
            start = i + 1;
        }
    }
    push(start, text.size());
    return out;
}

/// Sliding sentence windows over a document. Windows start at multiples of
/// `stride`; sharding stops after the first window that runs past the end
/// of the document, so every non-final passage holds exactly `window`
/// sentences. Each passage is prefixed with the document title.
inline std::vector<Passage> shard_passages(const Document& doc, std::size_t window = 10,
                                           std::size_t stride = 5) {
    if (window == 0 || stride == 0) throw Error("window and stride must be positive");
    auto sentences = split_sentences(doc.contents);
    std::vector<Passage> out;
    for (std::size_t offset = 0; offset < sentences.size(); offset += stride) {
        std::size_t end = std::min(sentences.size(), offset + window);
        Passage p;
        p.passage_id = doc.doc_id + "#p" + std::to_string(out.size());
        p.doc_id = doc.doc_id;
        p.first_sentence = offset;
        p.sentence_count = end - offset;
        p.text = doc.title;
        for (std::size_t s = offset; s < end; ++s) {
            if (!p.text.empty()) p.text += ' ';
            p.text += sentences[s];
        }
        out.push_back(std::move(p));
        if (offset + window > sentences.size()) break;
    }
    return out;
}

/// Inverse of the `doc_id#pN` passage naming convention.
inline std::string doc_id_of_passage(std::string_view passage_id) {
    auto pos = passage_id.rfind("#p");
    if (pos == std::string_view::npos || pos + 2 >= passage_id.size()) return std::string(passage_id);
    for (std::size_t i = pos + 2; i < passage_id.size(); ++i)
        if (passage_id[i] < '0' || passage_id[i] > '9') return std::string(passage_id);
    return std::string(passage_id.substr(0, pos));
}

}  // namespace fbkit
