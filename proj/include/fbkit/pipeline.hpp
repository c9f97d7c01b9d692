#pragma once

/// \file pipeline.hpp
/// Experiment configurations: which paradigm, which feedback, which
/// inputs. Turns a configuration into per-query retrieval functions that
/// the CLI and the tuner share.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fbkit/analysis.hpp"
#include "fbkit/dense.hpp"
#include "fbkit/feedback.hpp"
#include "fbkit/fusion.hpp"
#include "fbkit/index.hpp"
#include "fbkit/io.hpp"
#include "fbkit/learned_sparse.hpp"
#include "fbkit/tuning.hpp"

namespace fbkit {

enum class Paradigm { Sparse, Dense, LearnedSparse };
enum class Feedback { None, PRF, GRF, PRFGRF };

inline Paradigm parse_paradigm(std::string_view s) {
    if (s == "sparse") return Paradigm::Sparse;
    if (s == "dense") return Paradigm::Dense;
    if (s == "learned-sparse") return Paradigm::LearnedSparse;
    throw Error("unknown paradigm: " + std::string(s));
}

inline Feedback parse_feedback(std::string_view s) {
    if (s == "none") return Feedback::None;
    if (s == "prf") return Feedback::PRF;
    if (s == "grf") return Feedback::GRF;
    if (s == "prf+grf") return Feedback::PRFGRF;
    throw Error("unknown feedback type: " + std::string(s));
}

inline std::string to_string(Paradigm p) {
    switch (p) {
        case Paradigm::Sparse: return "sparse";
        case Paradigm::Dense: return "dense";
        case Paradigm::LearnedSparse: return "learned-sparse";
    }
    return {};
}

inline std::string to_string(Feedback f) {
    switch (f) {
        case Feedback::None: return "none";
        case Feedback::PRF: return "prf";
        case Feedback::GRF: return "grf";
        case Feedback::PRFGRF: return "prf+grf";
    }
    return {};
}

/// Input locations. Unused entries stay empty.
struct InputPaths {
    std::filesystem::path index;
    std::filesystem::path corpus;  // used to build an in-memory index when `index` is empty
    std::filesystem::path topics;
    std::filesystem::path stopwords;
    std::filesystem::path gen_docs;
    std::string gen_type;  // restricts generated content to one type
    std::filesystem::path doc_vectors;
    std::filesystem::path query_vectors;
    std::filesystem::path gen_vectors;
};

struct ExperimentConfig {
    Paradigm paradigm = Paradigm::Sparse;
    Feedback feedback = Feedback::None;
    Assignment params;
    InputPaths inputs;
    std::size_t depth = kDefaultDepth;
    std::string run_tag;
};

/// Parameter defaults per paradigm; user values override these.
inline Assignment default_params(Paradigm paradigm) {
    Assignment a;
    switch (paradigm) {
        case Paradigm::Sparse:
            a = {{"k1", 0.9}, {"b", 0.4}, {"fb_docs", 10.0}, {"fb_terms", 10.0}, {"orig_weight", 0.5}};
            break;
        case Paradigm::Dense:
            a = {{"alpha", 0.5}, {"beta", 0.5}, {"prf_depth", 5.0}};
            break;
        case Paradigm::LearnedSparse:
            a = {{"fb_docs", 10.0}, {"fb_terms", 20.0}, {"orig_weight", 0.5}, {"beta", 0.5}, {"theta", 20.0}};
            break;
    }
    a["lambda"] = 0.5;
    a["rrf_k"] = 60.0;
    return a;
}

/// Parameter names that influence a given (paradigm, feedback) run.
inline std::vector<std::string> relevant_params(Paradigm paradigm, Feedback feedback) {
    if (feedback == Feedback::PRFGRF) {
        std::set<std::string> names = {"lambda", "rrf_k"};
        for (auto f : {Feedback::PRF, Feedback::GRF})
            for (auto& n : relevant_params(paradigm, f)) names.insert(n);
        return {names.begin(), names.end()};
    }
    switch (paradigm) {
        case Paradigm::Sparse:
            if (feedback == Feedback::None) return {"b", "k1"};
            if (feedback == Feedback::PRF) return {"b", "fb_docs", "fb_terms", "k1", "orig_weight"};
            if (feedback == Feedback::GRF) return {"b", "fb_terms", "k1", "orig_weight"};
            break;
        case Paradigm::Dense:
            if (feedback == Feedback::None) return {};
            if (feedback == Feedback::PRF) return {"alpha", "beta", "prf_depth"};
            if (feedback == Feedback::GRF) return {"alpha", "beta"};
            break;
        case Paradigm::LearnedSparse:
            if (feedback == Feedback::None) return {};
            if (feedback == Feedback::PRF) return {"fb_docs", "fb_terms", "orig_weight"};
            if (feedback == Feedback::GRF) return {"beta", "theta"};
            break;
    }
    return {"lambda", "rrf_k"};
}

/// Default tuning grids (ranges explored for each method).
inline ParamGrid default_grid(Paradigm paradigm, Feedback feedback) {
    const auto unit = numeric_range(0.1, 0.9, 0.1);
    ParamGrid g;
    switch (paradigm) {
        case Paradigm::Sparse:
            if (feedback == Feedback::None)
                return g.add_numbers("k1", numeric_range(0.1, 5.0, 0.2))
                    .add_numbers("b", numeric_range(0.1, 1.0, 0.1));
            if (feedback == Feedback::PRF)
                return g.add_numbers("fb_terms", numeric_range(10, 100, 10))
                    .add_numbers("fb_docs", numeric_range(10, 100, 10))
                    .add_numbers("orig_weight", unit);
            if (feedback == Feedback::GRF)
                return g.add_numbers("fb_terms", numeric_range(10, 100, 10)).add_numbers("orig_weight", unit);
            break;
        case Paradigm::Dense:
            if (feedback == Feedback::None) return g;
            if (feedback == Feedback::PRF)
                return g.add_numbers("prf_depth", {2, 3, 5, 7, 10, 17})
                    .add_numbers("alpha", unit)
                    .add_numbers("beta", unit);
            if (feedback == Feedback::GRF) return g.add_numbers("alpha", unit).add_numbers("beta", unit);
            break;
        case Paradigm::LearnedSparse:
            if (feedback == Feedback::None) return g;
            if (feedback == Feedback::PRF)
                return g.add_numbers("fb_docs", {5, 10, 15, 20, 25, 30})
                    .add_numbers("fb_terms", {20, 40, 60, 80, 100})
                    .add_numbers("orig_weight", unit);
            if (feedback == Feedback::GRF)
                return g.add_numbers("theta", {20, 40, 60, 80, 100}).add_numbers("beta", unit);
            break;
    }
    return g.add_numbers("lambda", numeric_range(0.0, 1.0, 0.1));
}

/// Self-describing tag, e.g. "sparse+prf_b0.4_fb_docs10_..."
inline std::string make_run_tag(Paradigm paradigm, Feedback feedback, const Assignment& params) {
    std::string tag = to_string(paradigm) + "+" + to_string(feedback);
    for (const auto& name : relevant_params(paradigm, feedback)) {
        auto it = params.find(name);
        if (it != params.end()) tag += "_" + name + to_string(it->second);
    }
    return tag;
}

inline int integer_param(const Assignment& a, const std::string& name) {
    double v = number(a, name);
    if (v != std::floor(v)) throw Error("parameter " + name + " must be an integer");
    return static_cast<int>(v);
}

/// Everything a configuration reads from disk, loaded once and shared
/// read-only by all per-query runs.
struct ExperimentData {
    AnalyzerConfig analyzer;
    std::vector<Topic> topics;
    std::optional<InvertedIndex> index;
    std::map<std::string, std::vector<GeneratedDocument>> generated;
    std::optional<VectorStore> dense_store;
    std::optional<SparseStore> sparse_store;
    std::map<std::string, EmbeddingVector> dense_queries;
    std::map<std::string, std::vector<EmbeddingVector>> dense_generated;
    std::map<std::string, SparseRep> sparse_queries;
    std::map<std::string, std::vector<SparseRep>> sparse_generated;

    const Topic& topic(const std::string& qid) const {
        for (const auto& t : topics)
            if (t.query_id == qid) return t;
        throw Error("unknown topic " + qid);
    }
};

namespace detail {

inline void require_path(const std::filesystem::path& p, const char* what) {
    if (p.empty()) throw Error(std::string("missing required input: ") + what);
    if (!std::filesystem::exists(p)) throw Error(std::string(what) + " not found: " + p.string());
}

inline void require_coverage(const std::vector<Topic>& topics, const auto& by_query, const char* what) {
    std::string missing;
    for (const auto& t : topics)
        if (!by_query.contains(t.query_id)) missing += (missing.empty() ? "" : ", ") + t.query_id;
    if (!missing.empty()) throw Error(std::string("no ") + what + " for queries: " + missing);
}

}  // namespace detail

/// Loads and validates the inputs needed by `paradigm` with `feedback`.
/// Missing generated content is reported for all queries at once, before
/// any retrieval happens.
inline std::shared_ptr<ExperimentData> load_experiment_data(Paradigm paradigm, Feedback feedback,
                                                            const InputPaths& in) {
    auto data = std::make_shared<ExperimentData>();
    if (!in.stopwords.empty()) data->analyzer.stopwords = read_stopwords(in.stopwords);
    detail::require_path(in.topics, "topics");
    data->topics = read_topics(in.topics);
    const bool needs_grf = feedback == Feedback::GRF || feedback == Feedback::PRFGRF;

    switch (paradigm) {
        case Paradigm::Sparse:
            if (!in.index.empty()) {
                detail::require_path(in.index, "index");
                data->index = InvertedIndex::load(in.index, &data->analyzer);
            } else {
                detail::require_path(in.corpus, "index or corpus");
                data->index = build_index(in.corpus, data->analyzer);
            }
            if (needs_grf) {
                detail::require_path(in.gen_docs, "generated documents");
                data->generated = group_generated(read_generated(in.gen_docs), in.gen_type);
                detail::require_coverage(data->topics, data->generated, "generated documents");
            }
            break;
        case Paradigm::Dense:
            detail::require_path(in.doc_vectors, "document vectors");
            detail::require_path(in.query_vectors, "query vectors");
            data->dense_store = VectorStore::load(in.doc_vectors);
            for (auto& e : read_embeddings(in.query_vectors)) data->dense_queries[e.vec.id] = e.vec;
            detail::require_coverage(data->topics, data->dense_queries, "query vectors");
            if (needs_grf) {
                detail::require_path(in.gen_vectors, "generated vectors");
                for (auto& [qid, items] : group_by_query(read_embeddings(in.gen_vectors), in.gen_type))
                    for (auto& item : items) data->dense_generated[qid].push_back(std::move(item.vec));
                detail::require_coverage(data->topics, data->dense_generated, "generated vectors");
            }
            break;
        case Paradigm::LearnedSparse:
            detail::require_path(in.doc_vectors, "document representations");
            detail::require_path(in.query_vectors, "query representations");
            data->sparse_store = SparseStore::load(in.doc_vectors);
            for (auto& r : read_sparse_reps(in.query_vectors)) data->sparse_queries[r.rep.id] = r.rep;
            detail::require_coverage(data->topics, data->sparse_queries, "query representations");
            if (needs_grf) {
                detail::require_path(in.gen_vectors, "generated representations");
                for (auto& [qid, items] : group_by_query(read_sparse_reps(in.gen_vectors), in.gen_type))
                    for (auto& item : items) data->sparse_generated[qid].push_back(std::move(item.rep));
                detail::require_coverage(data->topics, data->sparse_generated, "generated representations");
            }
            break;
    }
    return data;
}

/// Expanded sparse query for one topic (used by runs and the debug dump).
inline WeightedQuery sparse_query(const ExperimentData& data, Feedback feedback, const Assignment& p,
                                  const Topic& topic) {
    const auto& index = *data.index;
    auto query = query_from_text(topic.query_id, topic.text, data.analyzer);
    if (query.weights.empty()) return query;
    const BM25Params bm25{number(p, "k1"), number(p, "b")};
    if (feedback == Feedback::PRF) {
        const int fb_docs = integer_param(p, "fb_docs");
        auto first = bm25_search(index, query, bm25, static_cast<std::size_t>(fb_docs));
        if (first.empty()) return query;
        return rm3_expand(query, relevance_model(index, first, fb_docs), integer_param(p, "fb_terms"),
                          number(p, "orig_weight"));
    }
    if (feedback == Feedback::GRF) {
        return grf_sparse_expand(query, data.generated.at(topic.query_id), data.analyzer,
                                 {integer_param(p, "fb_terms"), number(p, "orig_weight")});
    }
    return query;
}

/// One query's document ranking for a single-signal configuration
/// (feedback none, prf or grf).
inline ResultList run_single(const ExperimentData& data, Paradigm paradigm, Feedback feedback,
                             const Assignment& p, const Topic& topic, std::size_t depth) {
    switch (paradigm) {
        case Paradigm::Sparse: {
            auto query = sparse_query(data, feedback, p, topic);
            if (query.weights.empty()) return {};
            return bm25_search(*data.index, query, {number(p, "k1"), number(p, "b")}, depth);
        }
        case Paradigm::Dense: {
            const auto& q = data.dense_queries.at(topic.query_id);
            const auto& store = *data.dense_store;
            if (feedback == Feedback::PRF)
                return dense_prf(store, q,
                                 {number(p, "alpha"), number(p, "beta"), integer_param(p, "prf_depth")},
                                 depth);
            if (feedback == Feedback::GRF)
                return dense_grf(store, q, data.dense_generated.at(topic.query_id), number(p, "alpha"),
                                 number(p, "beta"), depth);
            return dense_baseline(store, q, depth);
        }
        case Paradigm::LearnedSparse: {
            const auto& q = data.sparse_queries.at(topic.query_id);
            const auto& store = *data.sparse_store;
            if (feedback == Feedback::PRF)
                return ls_prf(store, q,
                              {integer_param(p, "fb_docs"), integer_param(p, "fb_terms"),
                               number(p, "orig_weight")},
                              depth);
            if (feedback == Feedback::GRF)
                return ls_grf(store, q, data.sparse_generated.at(topic.query_id),
                              {number(p, "beta"), integer_param(p, "theta")}, depth);
            return ls_baseline(store, q, depth);
        }
    }
    return {};
}

/// Per-query retrieval function for `feedback` in {none, prf, grf,
/// prf+grf}. For prf+grf both constituent rankings are produced and fused.
inline TunablePipeline make_pipeline(std::shared_ptr<const ExperimentData> data, Paradigm paradigm,
                                     Feedback feedback, Assignment fixed, std::size_t depth) {
    TunablePipeline pipe;
    pipe.config_key = to_string(paradigm) + "+" + to_string(feedback) + "|fixed:" + to_string(fixed);
    pipe.run_query = [data, paradigm, feedback, fixed = std::move(fixed), depth](const Assignment& tuned,
                                                                                const Topic& topic) {
        Assignment p = fixed;
        for (const auto& [k, v] : tuned) p[k] = v;
        if (feedback != Feedback::PRFGRF) return run_single(*data, paradigm, feedback, p, topic, depth);
        RankedRun prf{"prf", {{topic.query_id, run_single(*data, paradigm, Feedback::PRF, p, topic, depth)}}};
        RankedRun grf{"grf", {{topic.query_id, run_single(*data, paradigm, Feedback::GRF, p, topic, depth)}}};
        auto fused = wrrf(prf, grf, {number(p, "lambda"), integer_param(p, "rrf_k")}, depth);
        return fused.queries.at(topic.query_id);
    };
    return pipe;
}

/// Runs a configuration over every topic.
inline RankedRun run_experiment_config(const ExperimentConfig& config,
                                       std::shared_ptr<const ExperimentData> data = nullptr) {
    if (!data) data = load_experiment_data(config.paradigm, config.feedback, config.inputs);
    Assignment params = default_params(config.paradigm);
    for (const auto& [k, v] : config.params) params[k] = v;
    auto pipe = make_pipeline(data, config.paradigm, config.feedback, params, config.depth);
    RankedRun run;
    run.run_tag = config.run_tag.empty() ? make_run_tag(config.paradigm, config.feedback, params)
                                         : config.run_tag;
    for (const auto& topic : data->topics) run.queries[topic.query_id] = pipe.run_query({}, topic);
    return run;
}

/// Fuses two runs one query at a time; used to tune lambda by cross-validation.
inline TunablePipeline make_fusion_pipeline(RankedRun prf, RankedRun grf, Assignment fixed,
                                            std::size_t depth) {
    TunablePipeline pipe;
    std::ostringstream content;
    write_run(prf, content);
    write_run(grf, content);
    pipe.config_key = "wrrf|" + hex64(fnv1a(content.str())) + "|fixed:" + to_string(fixed);
    auto shared_prf = std::make_shared<const RankedRun>(std::move(prf));
    auto shared_grf = std::make_shared<const RankedRun>(std::move(grf));
    pipe.run_query = [shared_prf, shared_grf, fixed = std::move(fixed), depth](const Assignment& tuned,
                                                                              const Topic& topic) {
        Assignment p = fixed;
        for (const auto& [k, v] : tuned) p[k] = v;
        auto lookup = [&](const RankedRun& r) {
            auto it = r.queries.find(topic.query_id);
            return it == r.queries.end() ? ResultList{} : it->second;
        };
        RankedRun a{"prf", {{topic.query_id, lookup(*shared_prf)}}};
        RankedRun b{"grf", {{topic.query_id, lookup(*shared_grf)}}};
        return wrrf(a, b, {number(p, "lambda"), integer_param(p, "rrf_k")}, depth)
            .queries.at(topic.query_id);
    };
    return pipe;
}

}  // namespace fbkit
