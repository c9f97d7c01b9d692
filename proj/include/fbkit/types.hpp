#pragma once

/// \file types.hpp
/// Core data model shared by every stage: documents, topics, generated
/// documents, ranked runs, relevance judgments and query folds.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fbkit {

/// Raised for every malformed input and violated precondition.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultDepth = 1000;

struct Document {
    std::string doc_id;
    std::string title;
    std::string contents;
};

struct Topic {
    std::string query_id;
    std::string text;
};

/// LLM-generated text for one query; produced externally and ingested.
struct GeneratedDocument {
    std::string query_id;
    std::string gen_type;
    std::string text;
};

struct ScoredId {
    std::string id;
    double score = 0.0;

    friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

/// One query's ranking, best first.
using ResultList = std::vector<ScoredId>;

/// Canonical ordering: score descending, then id ascending.
inline bool ranks_before(const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

/// Sorts into canonical order and keeps the best `depth` entries.
inline void finalize_ranking(ResultList& list, std::size_t depth) {
    if (list.size() > depth) {
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(depth),
                          list.end(), ranks_before);
        list.resize(depth);
    } else {
        std::sort(list.begin(), list.end(), ranks_before);
    }
}

struct RankedRun {
    std::string run_tag;
    std::map<std::string, ResultList> queries;

    friend bool operator==(const RankedRun&, const RankedRun&) = default;
};

/// query_id -> (doc_id -> grade)
struct Qrels {
    std::map<std::string, std::map<std::string, int>> judgments;

    const std::map<std::string, int>* find(const std::string& query_id) const {
        auto it = judgments.find(query_id);
        return it == judgments.end() ? nullptr : &it->second;
    }
};

/// Named disjoint sets of query ids used for cross-validation.
struct FoldSet {
    std::map<std::string, std::set<std::string>> folds;

    /// Fold name containing `query_id`, or empty if none does.
    std::string fold_of(const std::string& query_id) const {
        for (const auto& [name, members] : folds)
            if (members.contains(query_id)) return name;
        return {};
    }

    std::set<std::string> all_queries() const {
        std::set<std::string> out;
        for (const auto& [name, members] : folds) out.insert(members.begin(), members.end());
        return out;
    }
};

/// Fixed-dimension dense vector (query, passage or generated document).
struct EmbeddingVector {
    std::string id;
    std::vector<double> components;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Term-weight map as produced by a learned sparse encoder.
struct SparseRep {
    std::string id;
    std::map<std::string, double> weights;

    friend bool operator==(const SparseRep&, const SparseRep&) = default;
};

/// Shortest decimal that round-trips, e.g. 0.4 -> "0.4", 60 -> "60".
inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_long(std::string_view s, long& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

}  // namespace fbkit
