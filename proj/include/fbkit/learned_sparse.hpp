#pragma once

/// \file learned_sparse.hpp
/// Impact retrieval over pre-computed learned sparse term weights, with
/// generative and pseudo-relevance feedback over the same representations.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fbkit/dense.hpp"
#include "fbkit/io.hpp"
#include "fbkit/types.hpp"

namespace fbkit {

struct LSGRFParams {
    double beta = 0.5;  // original query weight
    int theta = 20;     // expansion terms
};

struct LSPRFParams {
    int fb_docs = 10;
    int fb_terms = 20;
    double original_query_weight = 0.5;
};

class SparseStore {
public:
    SparseStore() = default;

    SparseStore(std::vector<SparseRep> passages, PassageMap doc_of)
        : passages_(std::move(passages)), doc_of_(std::move(doc_of)) {
        if (passages_.empty()) throw Error("sparse store is empty");
        std::unordered_map<std::string, std::size_t> seen;
        for (std::size_t i = 0; i < passages_.size(); ++i) {
            const auto& p = passages_[i];
            if (!seen.emplace(p.id, i).second) throw Error("duplicate passage id " + p.id);
            if (!doc_of_.contains(p.id)) throw Error("passage " + p.id + " has no document mapping");
            for (const auto& [term, w] : p.weights) {
                if (!std::isfinite(w) || w < 0)
                    throw Error("passage " + p.id + " has an invalid weight for " + term);
                if (w > 0) postings_[term].push_back({static_cast<std::uint32_t>(i), w});
            }
        }
        slot_ = std::move(seen);
    }

    static SparseStore from_reps(std::vector<SparseRep> passages) {
        PassageMap map;
        for (const auto& p : passages) map[p.id] = doc_id_of_passage(p.id);
        return SparseStore(std::move(passages), std::move(map));
    }

    static SparseStore load(const std::filesystem::path& path) {
        auto files = resolve_store_files(path, "reps");
        std::vector<SparseRep> reps;
        for (auto& t : read_sparse_reps(files.vectors)) reps.push_back(std::move(t.rep));
        return files.mapping ? SparseStore(std::move(reps), read_passage_map(*files.mapping))
                             : from_reps(std::move(reps));
    }

    std::size_t size() const { return passages_.size(); }
    std::span<const SparseRep> passages() const { return passages_; }
    const PassageMap& passage_map() const { return doc_of_; }

    const SparseRep& rep(const std::string& id) const {
        auto it = slot_.find(id);
        if (it == slot_.end()) throw Error("unknown passage " + id);
        return passages_[it->second];
    }

    struct Impact {
        std::uint32_t passage;
        double weight;
    };

    std::span<const Impact> postings(const std::string& term) const {
        auto it = postings_.find(term);
        if (it == postings_.end()) return {};
        return it->second;
    }

private:
    std::vector<SparseRep> passages_;
    PassageMap doc_of_;
    std::unordered_map<std::string, std::size_t> slot_;
    std::unordered_map<std::string, std::vector<Impact>> postings_;
};

/// Sparse dot product Σ_w q(w)·p(w).
inline double impact_score(const SparseRep& query, const SparseRep& passage) {
    double score = 0.0;
    for (const auto& [term, qw] : query.weights) {
        auto it = passage.weights.find(term);
        if (it != passage.weights.end()) score += qw * it->second;
    }
    return score;
}

/// Exact top-`depth` passages by sparse dot product. Passages sharing no
/// term with the query are not returned.
inline ResultList impact_search(const SparseStore& store, const SparseRep& query,
                                std::size_t depth = kDefaultDepth) {
    if (depth == 0) throw Error("depth must be at least 1");
    if (query.weights.empty()) throw Error("query representation " + query.id + " is empty");
    std::vector<double> scores(store.size(), 0.0);
    std::vector<char> hit(store.size(), 0);
    for (const auto& [term, qw] : query.weights) {
        for (const auto& imp : store.postings(term)) {
            scores[imp.passage] += qw * imp.weight;
            hit[imp.passage] = 1;
        }
    }
    ResultList out;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (hit[i]) out.push_back({store.passages()[i].id, scores[i]});
    finalize_ranking(out, depth);
    return out;
}

inline SparseRep l1_normalize(const SparseRep& rep) {
    double sum = 0.0;
    for (const auto& [t, w] : rep.weights) sum += w;
    if (!(sum > 0)) throw Error("representation " + rep.id + " has zero total mass");
    SparseRep out{rep.id, {}};
    for (const auto& [t, w] : rep.weights)
        if (w > 0) out.weights[t] = w / sum;
    return out;
}

/// Normalizes each representation, sums them termwise and normalizes the
/// sum. Inputs are summed in a canonical order with extended precision, so
/// the result is independent of input order.
inline SparseRep aggregate_generated(std::span<const SparseRep> reps, std::string id = "aggregate") {
    if (reps.empty()) throw Error("cannot aggregate an empty list of representations");
    std::vector<SparseRep> normalized;
    normalized.reserve(reps.size());
    for (const auto& r : reps) normalized.push_back(l1_normalize(r));
    std::sort(normalized.begin(), normalized.end(),
              [](const SparseRep& a, const SparseRep& b) { return a.weights < b.weights; });

    std::map<std::string, long double> sum;
    for (const auto& r : normalized)
        for (const auto& [t, w] : r.weights) sum[t] += w;
    long double total = 0.0L;
    for (const auto& [t, w] : sum) total += w;
    SparseRep out{std::move(id), {}};
    for (const auto& [t, w] : sum) out.weights[t] = static_cast<double>(w / total);
    return out;
}

/// Top `n` terms by weight, ties by ascending term.
inline std::vector<std::string> top_terms(const SparseRep& rep, std::size_t n) {
    std::vector<std::pair<std::string, double>> entries(rep.weights.begin(), rep.weights.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (entries.size() > n) entries.resize(n);
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (auto& e : entries) out.push_back(std::move(e.first));
    return out;
}

/// β·LS(w|Q) plus (1 − β)·LS(w|D_LLM) for the θ strongest generated terms.
inline SparseRep ls_grf_combine(const SparseRep& query, const SparseRep& generated,
                                const LSGRFParams& params) {
    if (!(params.beta > 0.0 && params.beta <= 1.0)) throw Error("beta must lie in (0, 1]");
    if (params.theta < 1) throw Error("theta must be at least 1");
    SparseRep out{query.id, {}};
    for (const auto& [t, w] : query.weights) out.weights[t] = params.beta * w;
    for (const auto& t : top_terms(generated, static_cast<std::size_t>(params.theta)))
        out.weights[t] += (1.0 - params.beta) * generated.weights.at(t);
    std::erase_if(out.weights, [](const auto& kv) { return !(kv.second > 0); });
    return out;
}

/// Same combination with the top `fb_docs` first-pass passage
/// representations as the feedback set.
inline SparseRep ls_prf_combine(const SparseRep& query, std::span<const SparseRep> first_pass,
                                const LSPRFParams& params) {
    if (first_pass.empty()) throw Error("empty feedback set for " + query.id);
    if (params.fb_docs < 1) throw Error("fb_docs must be at least 1");
    auto n = std::min(first_pass.size(), static_cast<std::size_t>(params.fb_docs));
    auto feedback = aggregate_generated(first_pass.first(n), query.id + "#prf");
    return ls_grf_combine(query, feedback, {params.original_query_weight, params.fb_terms});
}

// ---------------------------------------------------------------- pipelines

inline ResultList ls_baseline(const SparseStore& store, const SparseRep& query,
                              std::size_t depth = kDefaultDepth) {
    return max_passage(impact_search(store, l1_normalize(query), store.size()),
                       store.passage_map(), depth);
}

inline ResultList ls_grf(const SparseStore& store, const SparseRep& query,
                         std::span<const SparseRep> generated, const LSGRFParams& params,
                         std::size_t depth = kDefaultDepth) {
    if (generated.empty()) throw Error("missing generated representations for query " + query.id);
    auto combined = ls_grf_combine(l1_normalize(query), aggregate_generated(generated), params);
    return max_passage(impact_search(store, combined, store.size()), store.passage_map(), depth);
}

inline ResultList ls_prf(const SparseStore& store, const SparseRep& query,
                         const LSPRFParams& params, std::size_t depth = kDefaultDepth) {
    auto normalized = l1_normalize(query);
    if (params.fb_docs < 1) throw Error("fb_docs must be at least 1");
    auto first = impact_search(store, normalized, static_cast<std::size_t>(params.fb_docs));
    if (first.empty()) throw Error("empty feedback set for " + query.id);
    std::vector<SparseRep> fb;
    fb.reserve(first.size());
    for (const auto& hit : first) fb.push_back(store.rep(hit.id));
    auto combined = ls_prf_combine(normalized, fb, params);
    return max_passage(impact_search(store, combined, store.size()), store.passage_map(), depth);
}

}  // namespace fbkit
