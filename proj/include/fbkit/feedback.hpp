#pragma once

/// \file feedback.hpp
/// Sparse query expansion: RM3 pseudo-relevance feedback from first-pass
/// documents and generative feedback from LLM-generated text.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fbkit/analysis.hpp"
#include "fbkit/index.hpp"
#include "fbkit/types.hpp"

namespace fbkit {

/// term -> probability; sums to 1 when non-empty.
using TermDistribution = std::map<std::string, double>;

struct RM3Params {
    int fb_docs = 10;
    int fb_terms = 10;
    double original_query_weight = 0.5;
};

struct GRFSparseParams {
    int fb_terms = 10;
    double original_query_weight = 0.5;
};

inline double total_mass(const std::map<std::string, double>& weights) {
    double sum = 0.0;
    for (const auto& [t, w] : weights) sum += w;
    return sum;
}

inline void normalize_in_place(std::map<std::string, double>& weights) {
    const double sum = total_mass(weights);
    for (auto& [t, w] : weights) w /= sum;
}

/// Keeps the `n` most probable terms (ties: ascending term) and renormalizes.
inline TermDistribution truncate_top(const TermDistribution& dist, std::size_t n) {
    if (dist.size() <= n) {
        TermDistribution out = dist;
        normalize_in_place(out);
        return out;
    }
    std::vector<std::pair<std::string, double>> entries(dist.begin(), dist.end());
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    entries.resize(n);
    TermDistribution out(entries.begin(), entries.end());
    normalize_in_place(out);
    return out;
}

/// Score-weighted relevance model (RM1) over the top `fb_docs` documents of
/// a first-pass ranking: p(w) ∝ Σ_d s(d)·tf(w,d)/|d|, with first-pass
/// scores normalized to sum to one over the feedback set.
inline TermDistribution relevance_model(const InvertedIndex& index, const ResultList& first_pass,
                                        int fb_docs) {
    if (first_pass.empty() || fb_docs < 1) throw Error("empty feedback set");
    const std::size_t n = std::min(first_pass.size(), static_cast<std::size_t>(fb_docs));

    double score_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) score_sum += first_pass[i].score;

    std::map<std::uint32_t, double> mass;
    for (std::size_t i = 0; i < n; ++i) {
        auto ordinal = index.ordinal_of(first_pass[i].id);
        if (!ordinal) throw Error("feedback document " + first_pass[i].id + " is not in the index");
        const double len = index.doc_length(*ordinal);
        if (len == 0) continue;
        const double doc_weight =
            score_sum > 0 ? first_pass[i].score / score_sum : 1.0 / static_cast<double>(n);
        for (const auto& tc : index.doc_terms(*ordinal)) mass[tc.term] += doc_weight * (tc.tf / len);
    }

    TermDistribution model;
    for (const auto& [term, m] : mass)
        if (m > 0) model[index.term(term)] = m;
    if (model.empty()) throw Error("empty feedback set");
    normalize_in_place(model);
    return model;
}

/// Interpolates a normalized query with the truncated feedback model:
/// weight(w) = λ·p_q(w) + (1 − λ)·p_fb(w). Zero weights are dropped.
inline WeightedQuery rm3_expand(const WeightedQuery& query, const TermDistribution& feedback,
                                int fb_terms, double original_query_weight) {
    if (std::abs(total_mass(query.weights) - 1.0) > 1e-9)
        throw Error("query " + query.query_id + " is not normalized");
    if (fb_terms < 1) throw Error("fb_terms must be at least 1");
    if (!(original_query_weight >= 0.0 && original_query_weight <= 1.0))
        throw Error("original_query_weight must lie in [0, 1]");
    const double lambda = original_query_weight;
    const auto fb = truncate_top(feedback, static_cast<std::size_t>(fb_terms));

    WeightedQuery out{query.query_id, {}};
    for (const auto& [term, p] : query.weights) out.weights[term] = lambda * p;
    for (const auto& [term, p] : fb) out.weights[term] += (1.0 - lambda) * p;
    std::erase_if(out.weights, [](const auto& kv) { return !(kv.second > 0); });
    return out;
}

/// Maximum-likelihood language model of the concatenated generated texts.
inline TermDistribution generated_language_model(const std::vector<GeneratedDocument>& gens,
                                                 const AnalyzerConfig& config) {
    std::string text;
    for (const auto& g : gens) {
        if (!text.empty()) text += '\n';
        text += g.text;
    }
    auto terms = tokenize(text, config);
    if (terms.empty()) throw Error("empty feedback set");
    TermDistribution model;
    for (const auto& t : terms) model[t] += 1.0;
    for (auto& [t, c] : model) c /= static_cast<double>(terms.size());
    return model;
}

/// Generative feedback for sparse retrieval. Needs no first-pass retrieval.
inline WeightedQuery grf_sparse_expand(const WeightedQuery& query,
                                       const std::vector<GeneratedDocument>& gens,
                                       const AnalyzerConfig& config, const GRFSparseParams& params) {
    if (gens.empty()) throw Error("no generated documents for query " + query.query_id);
    if (params.original_query_weight <= 0.0 || params.original_query_weight > 1.0)
        throw Error("original_query_weight must lie in (0, 1]");
    return rm3_expand(query, generated_language_model(gens, config), params.fb_terms,
                      params.original_query_weight);
}

}  // namespace fbkit
