#pragma once

/// \file io.hpp
/// Readers and writers for every on-disk format:
///   corpus      JSON lines {doc_id, title, contents}
///   topics      query_id<TAB>text
///   qrels       TREC 4-column
///   runs        TREC 6-column
///   generated   JSON lines {query_id, gen_type, text}
///   vectors     JSON lines {id, vector: [...]} / {id, weights: {...}}
///   folds       JSON object {fold_name: [query_id, ...]}

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fbkit/types.hpp"

namespace fbkit {

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

inline bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

/// Calls fn(line_number, json) for each non-blank line of a JSON-lines file.
template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
    auto in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ": malformed record at line " + std::to_string(line_no));
        }
        if (!record.is_object())
            throw Error(path.string() + ": malformed record at line " + std::to_string(line_no));
        fn(line_no, record);
    }
}

inline std::string string_field(const nlohmann::json& record, const char* name,
                                const std::filesystem::path& path, std::size_t line_no,
                                bool required = true) {
    auto it = record.find(name);
    if (it == record.end() || it->is_null()) {
        if (!required) return {};
        throw Error(path.string() + ": missing field '" + name + "' at line " +
                    std::to_string(line_no));
    }
    if (!it->is_string())
        throw Error(path.string() + ": field '" + name + "' is not a string at line " +
                    std::to_string(line_no));
    return it->get<std::string>();
}

inline std::string format_score(double score) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", score);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------- corpus

/// Streams documents in file order. Rejects malformed lines and duplicate ids.
template <typename Fn>
void for_each_document(const std::filesystem::path& path, Fn&& fn) {
    std::unordered_set<std::string> seen;
    detail::for_each_json_line(path, [&](std::size_t line_no, const nlohmann::json& rec) {
        Document doc;
        doc.doc_id = detail::string_field(rec, "doc_id", path, line_no);
        doc.title = detail::string_field(rec, "title", path, line_no, false);
        doc.contents = detail::string_field(rec, "contents", path, line_no);
        if (doc.doc_id.empty())
            throw Error(path.string() + ": empty doc_id at line " + std::to_string(line_no));
        if (!seen.insert(doc.doc_id).second)
            throw Error("duplicate doc_id " + doc.doc_id + " at line " + std::to_string(line_no));
        fn(std::move(doc));
    });
}

inline std::vector<Document> read_corpus(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for_each_document(path, [&](Document d) { docs.push_back(std::move(d)); });
    return docs;
}

inline void write_corpus(const std::vector<Document>& docs, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& d : docs) {
        nlohmann::ordered_json rec;
        rec["doc_id"] = d.doc_id;
        rec["title"] = d.title;
        rec["contents"] = d.contents;
        out << rec.dump() << '\n';
    }
}

// ---------------------------------------------------------------- topics

inline std::vector<Topic> read_topics(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    std::vector<Topic> topics;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::is_blank(line)) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            throw Error(path.string() + ": expected query_id<TAB>text at line " +
                        std::to_string(line_no));
        Topic t{line.substr(0, tab), line.substr(tab + 1)};
        if (!seen.insert(t.query_id).second)
            throw Error("duplicate query_id " + t.query_id + " at line " + std::to_string(line_no));
        topics.push_back(std::move(t));
    }
    return topics;
}

inline void write_topics(const std::vector<Topic>& topics, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& t : topics) out << t.query_id << '\t' << t.text << '\n';
}

// ---------------------------------------------------------------- qrels

inline Qrels read_qrels(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto cols = split_whitespace(line);
        if (cols.empty()) continue;
        long grade = 0;
        if (cols.size() != 4 || !parse_long(cols[3], grade))
            throw Error(path.string() + ": expected 4 columns at line " + std::to_string(line_no));
        if (grade < 0)
            throw Error(path.string() + ": negative grade at line " + std::to_string(line_no));
        auto& per_query = qrels.judgments[std::string(cols[0])];
        if (!per_query.emplace(std::string(cols[2]), static_cast<int>(grade)).second)
            throw Error(path.string() + ": duplicate judgment for " + std::string(cols[2]) +
                        " at line " + std::to_string(line_no));
    }
    return qrels;
}

inline void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& [qid, docs] : qrels.judgments)
        for (const auto& [doc, grade] : docs) out << qid << " 0 " << doc << ' ' << grade << '\n';
}

// ---------------------------------------------------------------- runs

inline RankedRun read_run(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    struct Row {
        long rank;
        ScoredId item;
    };
    std::map<std::string, std::vector<Row>> rows;
    RankedRun run;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto cols = split_whitespace(line);
        if (cols.empty()) continue;
        long rank = 0;
        double score = 0.0;
        if (cols.size() != 6 || !parse_long(cols[3], rank) || !parse_double(cols[4], score))
            throw Error(path.string() + ": expected 6 columns at line " + std::to_string(line_no));
        if (rank < 1) throw Error(path.string() + ": ranks must start at 1 (line " +
                                  std::to_string(line_no) + ")");
        if (run.run_tag.empty()) run.run_tag = std::string(cols[5]);
        rows[std::string(cols[0])].push_back({rank, {std::string(cols[2]), score}});
    }
    for (auto& [qid, list] : rows) {
        std::sort(list.begin(), list.end(),
                  [](const Row& a, const Row& b) { return a.rank < b.rank; });
        std::unordered_set<std::string> seen;
        auto& out = run.queries[qid];
        out.reserve(list.size());
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].rank != static_cast<long>(i + 1))
                throw Error(path.string() + ": ranks for query " + qid +
                            " are not contiguous from 1");
            if (!seen.insert(list[i].item.id).second)
                throw Error(path.string() + ": duplicate item " + list[i].item.id +
                            " for query " + qid);
            out.push_back(std::move(list[i].item));
        }
    }
    return run;
}

/// Writes entries in stored order; ranks are 1..n per query.
inline void write_run(const RankedRun& run, std::ostream& out) {
    const std::string tag = run.run_tag.empty() ? "fbkit" : run.run_tag;
    for (const auto& [qid, list] : run.queries) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            out << qid << " Q0 " << list[i].id << ' ' << (i + 1) << ' '
                << detail::format_score(list[i].score) << ' ' << tag << '\n';
        }
    }
}

inline void write_run(const RankedRun& run, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_run(run, out);
}

// ---------------------------------------------------------------- generated documents

inline std::vector<GeneratedDocument> read_generated(const std::filesystem::path& path) {
    std::vector<GeneratedDocument> gens;
    detail::for_each_json_line(path, [&](std::size_t line_no, const nlohmann::json& rec) {
        GeneratedDocument g;
        g.query_id = detail::string_field(rec, "query_id", path, line_no);
        g.gen_type = detail::string_field(rec, "gen_type", path, line_no, false);
        g.text = detail::string_field(rec, "text", path, line_no);
        if (g.query_id.empty() || g.text.empty())
            throw Error(path.string() + ": empty query_id or text at line " +
                        std::to_string(line_no));
        gens.push_back(std::move(g));
    });
    return gens;
}

inline void write_generated(const std::vector<GeneratedDocument>& gens,
                            const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& g : gens) {
        nlohmann::ordered_json rec;
        rec["query_id"] = g.query_id;
        rec["gen_type"] = g.gen_type;
        rec["text"] = g.text;
        out << rec.dump() << '\n';
    }
}

/// Groups generated documents by query, optionally keeping one gen_type only.
inline std::map<std::string, std::vector<GeneratedDocument>> group_generated(
    const std::vector<GeneratedDocument>& gens, const std::string& gen_type_filter = {}) {
    std::map<std::string, std::vector<GeneratedDocument>> out;
    for (const auto& g : gens)
        if (gen_type_filter.empty() || g.gen_type == gen_type_filter) out[g.query_id].push_back(g);
    return out;
}

// ---------------------------------------------------------------- folds

inline FoldSet folds_from_json(const nlohmann::json& j, const std::string& origin) {
    if (!j.is_object()) throw Error(origin + ": folds must be a JSON object");
    FoldSet folds;
    std::map<std::string, std::string> owner;
    for (const auto& [name, members] : j.items()) {
        if (!members.is_array()) throw Error(origin + ": fold " + name + " must be an array");
        auto& fold = folds.folds[name];
        for (const auto& m : members) {
            if (!m.is_string()) throw Error(origin + ": fold " + name + " has a non-string id");
            auto qid = m.get<std::string>();
            auto [it, fresh] = owner.emplace(qid, name);
            if (!fresh) throw Error("query " + qid + " in multiple folds");
            fold.insert(qid);
        }
    }
    return folds;
}

inline FoldSet read_folds(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
        throw Error(path.string() + ": malformed folds file");
    }
    return folds_from_json(j, path.string());
}

inline void write_folds(const FoldSet& folds, const std::filesystem::path& path) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, members] : folds.folds)
        j[name] = std::vector<std::string>(members.begin(), members.end());
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- vectors

/// A vector tagged with the query and generation type it belongs to.
/// Plain passage/query files leave query_id and gen_type empty.
struct TaggedEmbedding {
    std::string query_id;
    std::string gen_type;
    EmbeddingVector vec;
};

struct TaggedSparseRep {
    std::string query_id;
    std::string gen_type;
    SparseRep rep;
};

namespace detail {

/// For generated-content vectors without explicit fields, ids follow
/// `query_id#gen_type[...]`.
inline void split_generated_id(const std::string& id, std::string& query_id,
                               std::string& gen_type) {
    auto hash = id.find('#');
    if (query_id.empty()) query_id = id.substr(0, hash);
    if (gen_type.empty() && hash != std::string::npos) gen_type = id.substr(hash + 1);
}

}  // namespace detail

inline std::vector<TaggedEmbedding> read_embeddings(const std::filesystem::path& path) {
    std::vector<TaggedEmbedding> out;
    std::size_t dim = 0;
    detail::for_each_json_line(path, [&](std::size_t line_no, const nlohmann::json& rec) {
        TaggedEmbedding e;
        e.vec.id = detail::string_field(rec, "id", path, line_no);
        e.query_id = detail::string_field(rec, "query_id", path, line_no, false);
        e.gen_type = detail::string_field(rec, "gen_type", path, line_no, false);
        auto it = rec.find("vector");
        if (it == rec.end() || !it->is_array() || it->empty())
            throw Error(path.string() + ": missing vector at line " + std::to_string(line_no));
        for (const auto& x : *it) {
            if (!x.is_number())
                throw Error(path.string() + ": non-numeric component at line " +
                            std::to_string(line_no));
            double v = x.get<double>();
            if (!std::isfinite(v))
                throw Error(path.string() + ": non-finite component at line " +
                            std::to_string(line_no));
            e.vec.components.push_back(v);
        }
        if (dim == 0) dim = e.vec.components.size();
        if (e.vec.components.size() != dim)
            throw Error(path.string() + ": dimension mismatch at line " + std::to_string(line_no));
        out.push_back(std::move(e));
    });
    return out;
}

inline void write_embeddings(const std::vector<TaggedEmbedding>& vecs,
                             const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& e : vecs) {
        nlohmann::ordered_json rec;
        rec["id"] = e.vec.id;
        if (!e.query_id.empty()) rec["query_id"] = e.query_id;
        if (!e.gen_type.empty()) rec["gen_type"] = e.gen_type;
        rec["vector"] = e.vec.components;
        out << rec.dump() << '\n';
    }
}

inline std::vector<TaggedSparseRep> read_sparse_reps(const std::filesystem::path& path) {
    std::vector<TaggedSparseRep> out;
    detail::for_each_json_line(path, [&](std::size_t line_no, const nlohmann::json& rec) {
        TaggedSparseRep r;
        r.rep.id = detail::string_field(rec, "id", path, line_no);
        r.query_id = detail::string_field(rec, "query_id", path, line_no, false);
        r.gen_type = detail::string_field(rec, "gen_type", path, line_no, false);
        auto it = rec.find("weights");
        if (it == rec.end() || !it->is_object())
            throw Error(path.string() + ": missing weights at line " + std::to_string(line_no));
        for (const auto& [term, w] : it->items()) {
            if (!w.is_number())
                throw Error(path.string() + ": non-numeric weight at line " +
                            std::to_string(line_no));
            double v = w.get<double>();
            if (!std::isfinite(v) || v < 0)
                throw Error(path.string() + ": weights must be finite and non-negative (line " +
                            std::to_string(line_no) + ")");
            if (v > 0) r.rep.weights[term] = v;
        }
        out.push_back(std::move(r));
    });
    return out;
}

inline void write_sparse_reps(const std::vector<TaggedSparseRep>& reps,
                              const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    for (const auto& r : reps) {
        nlohmann::ordered_json rec;
        rec["id"] = r.rep.id;
        if (!r.query_id.empty()) rec["query_id"] = r.query_id;
        if (!r.gen_type.empty()) rec["gen_type"] = r.gen_type;
        nlohmann::ordered_json w = nlohmann::ordered_json::object();
        for (const auto& [term, v] : r.rep.weights) w[term] = v;
        rec["weights"] = std::move(w);
        out << rec.dump() << '\n';
    }
}

/// Groups generated-content vectors by query, optionally filtered by gen_type.
template <typename Tagged>
auto group_by_query(std::vector<Tagged> items, const std::string& gen_type_filter = {}) {
    std::map<std::string, std::vector<Tagged>> out;
    for (auto& item : items) {
        const std::string& id = [&]() -> const std::string& {
            if constexpr (requires { item.vec; }) return item.vec.id;
            else return item.rep.id;
        }();
        detail::split_generated_id(id, item.query_id, item.gen_type);
        if (!gen_type_filter.empty() && item.gen_type != gen_type_filter) continue;
        out[item.query_id].push_back(std::move(item));
    }
    return out;
}

// ---------------------------------------------------------------- expanded queries

/// Debug dump: `query_id<TAB>term:weight,...`, weights descending.
inline void write_expanded_queries(
    const std::map<std::string, std::map<std::string, double>>& queries, std::ostream& out) {
    for (const auto& [qid, weights] : queries) {
        std::vector<std::pair<std::string, double>> sorted(weights.begin(), weights.end());
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        out << qid << '\t';
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (i) out << ',';
            out << sorted[i].first << ':' << format_number(sorted[i].second);
        }
        out << '\n';
    }
}

}  // namespace fbkit
