#pragma once

/// \file dense.hpp
/// Exhaustive inner-product retrieval over passage embeddings, max-passage
/// document aggregation, and Rocchio-style feedback (pseudo-relevant
/// passages or generated documents).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
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

/// passage_id -> doc_id
using PassageMap = std::unordered_map<std::string, std::string>;

/// Collapses a passage ranking into a document ranking, scoring each
/// document by its best passage. Output is truncated to `depth`.
inline ResultList max_passage(const ResultList& passages, const PassageMap& doc_of,
                              std::size_t depth = kDefaultDepth) {
    std::unordered_map<std::string, std::size_t> slot;
    ResultList docs;
    for (const auto& p : passages) {
        auto it = doc_of.find(p.id);
        if (it == doc_of.end()) throw Error("passage " + p.id + " has no document mapping");
        auto [s, fresh] = slot.emplace(it->second, docs.size());
        if (fresh) docs.push_back({it->second, p.score});
        else docs[s->second].score = std::max(docs[s->second].score, p.score);
    }
    finalize_ranking(docs, depth);
    return docs;
}

/// Reads `passage_id<TAB>doc_id` lines.
inline PassageMap read_passage_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    PassageMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto cols = split_whitespace(line);
        if (cols.empty()) continue;
        if (cols.size() != 2)
            throw Error(path.string() + ": expected passage_id<TAB>doc_id at line " +
                        std::to_string(line_no));
        map[std::string(cols[0])] = std::string(cols[1]);
    }
    return map;
}

struct StoreFiles {
    std::filesystem::path vectors;
    std::optional<std::filesystem::path> mapping;
    std::optional<std::size_t> dimension;
};

/// A `.json` path is a store manifest {dimension, vectors, mapping};
/// anything else is a vector file whose ids follow `doc_id#pN`.
inline StoreFiles resolve_store_files(const std::filesystem::path& path, const char* vectors_key) {
    if (path.extension() != ".json") return {path, std::nullopt, std::nullopt};
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains(vectors_key))
        throw Error(path.string() + ": store manifest needs a '" + vectors_key + "' entry");
    const auto base = path.parent_path();
    StoreFiles files{base / j[vectors_key].get<std::string>(), std::nullopt, std::nullopt};
    if (j.contains("mapping")) files.mapping = base / j["mapping"].get<std::string>();
    if (j.contains("dimension")) files.dimension = j["dimension"].get<std::size_t>();
    return files;
}

struct RocchioParams {
    double alpha = 0.5;
    double beta = 0.5;
    int depth = 5;  // feedback passages, PRF only
};

class VectorStore {
public:
    VectorStore() = default;

    VectorStore(std::vector<EmbeddingVector> passages, PassageMap doc_of)
        : passages_(std::move(passages)), doc_of_(std::move(doc_of)) {
        if (passages_.empty()) throw Error("vector store is empty");
        dimension_ = passages_.front().components.size();
        if (dimension_ == 0) throw Error("vector store has zero dimension");
        for (std::size_t i = 0; i < passages_.size(); ++i) {
            const auto& p = passages_[i];
            if (p.components.size() != dimension_)
                throw Error("passage " + p.id + " has dimension " +
                            std::to_string(p.components.size()) + ", expected " +
                            std::to_string(dimension_));
            for (double x : p.components)
                if (!std::isfinite(x)) throw Error("passage " + p.id + " has a non-finite component");
            if (!slot_.emplace(p.id, i).second) throw Error("duplicate passage id " + p.id);
            if (!doc_of_.contains(p.id)) throw Error("passage " + p.id + " has no document mapping");
        }
    }

    /// Store whose passage -> document mapping follows the `doc_id#pN` convention.
    static VectorStore from_vectors(std::vector<EmbeddingVector> passages) {
        PassageMap map;
        for (const auto& p : passages) map[p.id] = doc_id_of_passage(p.id);
        return VectorStore(std::move(passages), std::move(map));
    }

    static VectorStore load(const std::filesystem::path& path) {
        auto files = resolve_store_files(path, "vectors");
        std::vector<EmbeddingVector> vecs;
        for (auto& t : read_embeddings(files.vectors)) vecs.push_back(std::move(t.vec));
        VectorStore store = files.mapping ? VectorStore(std::move(vecs), read_passage_map(*files.mapping))
                                          : from_vectors(std::move(vecs));
        if (files.dimension && *files.dimension != store.dimension())
            throw Error(path.string() + ": manifest dimension disagrees with vectors");
        return store;
    }

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return passages_.size(); }
    std::span<const EmbeddingVector> passages() const { return passages_; }
    const PassageMap& passage_map() const { return doc_of_; }

    const EmbeddingVector& vector(const std::string& id) const {
        lookups_->fetch_add(1, std::memory_order_relaxed);
        auto it = slot_.find(id);
        if (it == slot_.end()) throw Error("unknown passage " + id);
        return passages_[it->second];
    }

    /// Access counters: full scans (searches) and single-vector lookups.
    std::size_t scan_count() const { return scans_->load(); }
    std::size_t lookup_count() const { return lookups_->load(); }
    void reset_counters() const {
        scans_->store(0);
        lookups_->store(0);
    }
    void note_scan() const { scans_->fetch_add(1, std::memory_order_relaxed); }

private:
    std::size_t dimension_ = 0;
    std::vector<EmbeddingVector> passages_;
    PassageMap doc_of_;
    std::unordered_map<std::string, std::size_t> slot_;
    std::shared_ptr<std::atomic<std::size_t>> scans_ = std::make_shared<std::atomic<std::size_t>>(0);
    std::shared_ptr<std::atomic<std::size_t>> lookups_ =
        std::make_shared<std::atomic<std::size_t>>(0);
};

inline double inner_product(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

/// Exact top-`depth` passages by inner product; ties by ascending id.
inline ResultList dense_search(const VectorStore& store, std::span<const double> query,
                               std::size_t depth = kDefaultDepth) {
    if (depth == 0) throw Error("depth must be at least 1");
    if (query.size() != store.dimension())
        throw Error("query dimension " + std::to_string(query.size()) +
                    " does not match store dimension " + std::to_string(store.dimension()));
    store.note_scan();
    ResultList out;
    out.reserve(store.size());
    for (const auto& p : store.passages()) out.push_back({p.id, inner_product(query, p.components)});
    finalize_ranking(out, depth);
    return out;
}

/// α·Q + β·mean(feedback). The mean is accumulated in extended precision
/// over a canonical ordering of the inputs, so it does not depend on the
/// order of `feedback`.
inline EmbeddingVector rocchio_combine(const EmbeddingVector& query,
                                       std::span<const EmbeddingVector> feedback, double alpha,
                                       double beta) {
    if (feedback.empty()) throw Error("rocchio feedback set is empty for " + query.id);
    const std::size_t dim = query.components.size();
    std::vector<const std::vector<double>*> ordered;
    ordered.reserve(feedback.size());
    for (const auto& f : feedback) {
        if (f.components.size() != dim)
            throw Error("feedback vector " + f.id + " has dimension " +
                        std::to_string(f.components.size()) + ", expected " + std::to_string(dim));
        ordered.push_back(&f.components);
    }
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return *a < *b; });

    EmbeddingVector out{query.id, std::vector<double>(dim)};
    const auto m = static_cast<long double>(ordered.size());
    for (std::size_t i = 0; i < dim; ++i) {
        long double sum = 0.0L;
        for (const auto* v : ordered) sum += (*v)[i];
        const double mean = static_cast<double>(sum / m);
        out.components[i] = alpha * query.components[i] + beta * mean;
    }
    return out;
}

/// Rocchio pseudo-relevance feedback: first-pass search, mean of the top
/// `params.depth` passage vectors, second-pass search, max-passage.
inline ResultList dense_prf(const VectorStore& store, const EmbeddingVector& query,
                            const RocchioParams& params, std::size_t depth = kDefaultDepth) {
    if (params.depth < 1) throw Error("feedback depth must be at least 1");
    auto first = dense_search(store, query.components, static_cast<std::size_t>(params.depth));
    std::vector<EmbeddingVector> fb;
    fb.reserve(first.size());
    for (const auto& hit : first) fb.push_back(store.vector(hit.id));
    auto combined = rocchio_combine(query, fb, params.alpha, params.beta);
    return max_passage(dense_search(store, combined.components, store.size()), store.passage_map(),
                       depth);
}

/// Generative feedback: combine the query with the generated-document
/// vectors, then a single search. No first-pass retrieval happens.
inline ResultList dense_grf(const VectorStore& store, const EmbeddingVector& query,
                            std::span<const EmbeddingVector> generated, double alpha, double beta,
                            std::size_t depth = kDefaultDepth) {
    if (generated.empty()) throw Error("missing generated vectors for query " + query.id);
    auto combined = rocchio_combine(query, generated, alpha, beta);
    return max_passage(dense_search(store, combined.components, store.size()), store.passage_map(),
                       depth);
}

/// Plain dense retrieval, aggregated to documents.
inline ResultList dense_baseline(const VectorStore& store, const EmbeddingVector& query,
                                 std::size_t depth = kDefaultDepth) {
    return max_passage(dense_search(store, query.components, store.size()), store.passage_map(),
                       depth);
}

}  // namespace fbkit
