#pragma once

/// \file fusion.hpp
/// Reciprocal rank fusion and its weighted two-run variant, which mixes a
/// pseudo-relevance feedback run with a generative feedback run.

#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fbkit/types.hpp"

namespace fbkit {

struct WRRFParams {
    double lambda = 0.5;  // weight of the PRF run; the GRF run gets 1 - lambda
    int k = 60;
};

/// Tag recording the fusion parameters, e.g. "wrrf_l0.4_k60".
inline std::string wrrf_tag(const WRRFParams& p) {
    return "wrrf_l" + format_number(p.lambda) + "_k" + std::to_string(p.k);
}

namespace detail {

inline void require_same_queries(std::span<const RankedRun* const> runs) {
    std::set<std::string> all;
    for (const auto* r : runs)
        for (const auto& [qid, list] : r->queries) all.insert(qid);
    for (const auto& qid : all)
        for (const auto* r : runs)
            if (!r->queries.contains(qid))
                throw Error("query " + qid + " is missing from run '" + r->run_tag + "'");
}

/// Σ_runs weight_r / (k + rank_r(d)) for one query; absent documents add nothing.
inline ResultList fuse_query(std::span<const ResultList* const> lists, std::span<const double> weights,
                             int k, std::size_t depth) {
    std::unordered_map<std::string, std::size_t> slot;
    ResultList out;
    for (std::size_t r = 0; r < lists.size(); ++r) {
        const auto& list = *lists[r];
        for (std::size_t i = 0; i < list.size(); ++i) {
            const double contribution = weights[r] / static_cast<double>(k + static_cast<long>(i) + 1);
            auto [it, fresh] = slot.emplace(list[i].id, out.size());
            if (fresh) out.push_back({list[i].id, contribution});
            else out[it->second].score += contribution;
        }
    }
    finalize_ranking(out, depth);
    return out;
}

}  // namespace detail

/// Weighted reciprocal rank fusion:
/// score(d) = λ/(k + r_prf(d)) + (1 − λ)/(k + r_grf(d)), each term present
/// only when d appears in that run. Ranks are 1-based list positions.
inline RankedRun wrrf(const RankedRun& prf, const RankedRun& grf, const WRRFParams& params,
                      std::size_t depth = kDefaultDepth) {
    if (params.k < 1) throw Error("rrf k must be at least 1");
    if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) throw Error("lambda must lie in [0, 1]");
    if (depth == 0) throw Error("depth must be at least 1");
    const RankedRun* runs[] = {&prf, &grf};
    detail::require_same_queries(runs);
    const double weights[] = {params.lambda, 1.0 - params.lambda};
    RankedRun out{wrrf_tag(params), {}};
    for (const auto& [qid, prf_list] : prf.queries) {
        const ResultList* lists[] = {&prf_list, &grf.queries.at(qid)};
        out.queries[qid] = detail::fuse_query(lists, weights, params.k, depth);
    }
    return out;
}

/// Unweighted reciprocal rank fusion over any number of runs.
inline RankedRun rrf(std::span<const RankedRun> runs, int k = 60, std::size_t depth = kDefaultDepth) {
    if (runs.empty()) throw Error("rrf needs at least one run");
    if (k < 1) throw Error("rrf k must be at least 1");
    if (depth == 0) throw Error("depth must be at least 1");
    std::vector<const RankedRun*> ptrs;
    for (const auto& r : runs) ptrs.push_back(&r);
    detail::require_same_queries(ptrs);
    std::vector<double> weights(runs.size(), 1.0);
    RankedRun out{"rrf_k" + std::to_string(k), {}};
    for (const auto& [qid, first] : runs.front().queries) {
        std::vector<const ResultList*> lists;
        for (const auto& r : runs) lists.push_back(&r.queries.at(qid));
        out.queries[qid] = detail::fuse_query(lists, weights, k, depth);
    }
    return out;
}

}  // namespace fbkit
