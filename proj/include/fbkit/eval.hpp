#pragma once

/// \file eval.hpp
/// Effectiveness metrics (MAP, nDCG@k, Recall@k) and the paired t-test.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fbkit/types.hpp"

namespace fbkit {

enum class MetricKind { AveragePrecision, NDCG, Recall };

struct MetricSpec {
    MetricKind kind = MetricKind::Recall;
    std::size_t cutoff = 1000;  // unused for AveragePrecision

    std::string name() const {
        switch (kind) {
            case MetricKind::AveragePrecision: return "map";
            case MetricKind::NDCG: return "ndcg@" + std::to_string(cutoff);
            case MetricKind::Recall: return "recall@" + std::to_string(cutoff);
        }
        return {};
    }

    friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Parses one metric name: `map`, `ndcg@K`, `recall@K` (also `r@K`).
inline MetricSpec parse_metric(std::string_view text) {
    std::string s(text);
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "map" || s == "ap") return {MetricKind::AveragePrecision, 0};
    auto at = s.find('@');
    if (at != std::string::npos) {
        long k = 0;
        if (!parse_long(std::string_view(s).substr(at + 1), k) || k < 1)
            throw Error("metric cutoff must be a positive integer: " + std::string(text));
        auto head = s.substr(0, at);
        if (head == "ndcg") return {MetricKind::NDCG, static_cast<std::size_t>(k)};
        if (head == "recall" || head == "r") return {MetricKind::Recall, static_cast<std::size_t>(k)};
    }
    throw Error("unknown metric: " + std::string(text));
}

/// Comma-separated list, e.g. "map,ndcg@10,recall@1000".
inline std::vector<MetricSpec> parse_metrics(std::string_view text) {
    std::vector<MetricSpec> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        auto item = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
        if (!item.empty()) out.push_back(parse_metric(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw Error("no metrics given");
    return out;
}

inline std::vector<MetricSpec> default_metrics() {
    return {{MetricKind::AveragePrecision, 0}, {MetricKind::NDCG, 10}, {MetricKind::Recall, 1000}};
}

struct EvalOptions {
    std::size_t depth = kDefaultDepth;
    /// Judged queries absent from the run count as zero (otherwise only
    /// queries present in the run are evaluated).
    bool zero_fill_missing = false;
    /// Restricts evaluation to these queries when set.
    std::optional<std::set<std::string>> queries;
};

struct EvalReport {
    std::vector<MetricSpec> metrics;
    std::map<std::string, std::map<std::string, double>> per_query;
    std::map<std::string, double> means;
    std::vector<std::string> skipped;  // present in the run, but no relevant judgments

    double value(const std::string& query_id, const std::string& metric) const {
        return per_query.at(query_id).at(metric);
    }
};

namespace metrics {

/// Judgments for one query: doc_id -> grade.
using Judged = std::map<std::string, int>;

inline std::size_t relevant_count(const Judged& judged) {
    std::size_t n = 0;
    for (const auto& [d, g] : judged)
        if (g >= 1) ++n;
    return n;
}

inline bool is_relevant(const Judged& judged, const std::string& doc) {
    auto it = judged.find(doc);
    return it != judged.end() && it->second >= 1;
}

inline double average_precision(const ResultList& ranked, const Judged& judged) {
    const auto total = relevant_count(judged);
    if (total == 0) return 0.0;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (is_relevant(judged, ranked[i].id)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(total);
}

inline double recall(const ResultList& ranked, const Judged& judged, std::size_t k) {
    const auto total = relevant_count(judged);
    if (total == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        if (is_relevant(judged, ranked[i].id)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(total);
}

inline double gain(int grade) { return grade > 0 ? std::exp2(static_cast<double>(grade)) - 1.0 : 0.0; }

inline double ndcg(const ResultList& ranked, const Judged& judged, std::size_t k) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
        auto it = judged.find(ranked[i].id);
        if (it != judged.end()) dcg += gain(it->second) / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> grades;
    for (const auto& [d, g] : judged)
        if (g > 0) grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double ideal = 0.0;
    for (std::size_t i = 0; i < grades.size() && i < k; ++i)
        ideal += gain(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
    return ideal > 0 ? dcg / ideal : 0.0;
}

inline double compute(const MetricSpec& spec, const ResultList& ranked, const Judged& judged) {
    switch (spec.kind) {
        case MetricKind::AveragePrecision: return average_precision(ranked, judged);
        case MetricKind::NDCG: return ndcg(ranked, judged, spec.cutoff);
        case MetricKind::Recall: return recall(ranked, judged, spec.cutoff);
    }
    return 0.0;
}

}  // namespace metrics

/// Metric values for a single query; the list is canonicalized (score
/// descending, id ascending) and cut at `depth` first.
inline std::map<std::string, double> evaluate_query(ResultList ranked, const metrics::Judged& judged,
                                                    const std::vector<MetricSpec>& specs,
                                                    std::size_t depth = kDefaultDepth) {
    finalize_ranking(ranked, depth);
    std::map<std::string, double> out;
    for (const auto& spec : specs) out[spec.name()] = metrics::compute(spec, ranked, judged);
    return out;
}

inline void compute_means(EvalReport& report) {
    report.means.clear();
    for (const auto& spec : report.metrics) {
        double sum = 0.0;
        for (const auto& [qid, values] : report.per_query) sum += values.at(spec.name());
        report.means[spec.name()] =
            report.per_query.empty() ? 0.0 : sum / static_cast<double>(report.per_query.size());
    }
}

/// Per-query metrics and their means. `judgments` is called once per
/// evaluated query to fetch its qrels (nullptr when unjudged), which lets
/// callers track access.
template <typename JudgmentSource>
EvalReport evaluate_with(const RankedRun& run, JudgmentSource&& judgments,
                         const std::vector<std::string>& judged_queries,
                         const std::vector<MetricSpec>& specs, const EvalOptions& options = {}) {
    EvalReport report;
    report.metrics = specs;
    std::set<std::string> candidates;
    for (const auto& [qid, list] : run.queries) candidates.insert(qid);
    if (options.zero_fill_missing) candidates.insert(judged_queries.begin(), judged_queries.end());
    static const ResultList empty;
    for (const auto& qid : candidates) {
        if (options.queries && !options.queries->contains(qid)) continue;
        const metrics::Judged* judged = judgments(qid);
        if (!judged) continue;  // no qrels for this query
        if (metrics::relevant_count(*judged) == 0) {
            report.skipped.push_back(qid);
            continue;
        }
        auto it = run.queries.find(qid);
        report.per_query[qid] =
            evaluate_query(it == run.queries.end() ? empty : it->second, *judged, specs, options.depth);
    }
    compute_means(report);
    return report;
}

inline EvalReport evaluate(const RankedRun& run, const Qrels& qrels,
                           const std::vector<MetricSpec>& specs, const EvalOptions& options = {}) {
    std::vector<std::string> judged;
    for (const auto& [qid, docs] : qrels.judgments) judged.push_back(qid);
    return evaluate_with(run, [&](const std::string& qid) { return qrels.find(qid); }, judged, specs,
                         options);
}

inline std::string format_metric_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// Per-query TSV (`query_id<TAB>metric<TAB>value`) followed by `all` rows.
inline void write_report(const EvalReport& report, std::ostream& out) {
    for (const auto& [qid, values] : report.per_query)
        for (const auto& spec : report.metrics)
            out << qid << '\t' << spec.name() << '\t' << format_metric_value(values.at(spec.name()))
                << '\n';
    for (const auto& spec : report.metrics)
        out << "all\t" << spec.name() << '\t' << format_metric_value(report.means.at(spec.name()))
            << '\n';
    out << "all\tnum_q\t" << report.per_query.size() << '\n';
    if (!report.skipped.empty()) out << "all\tnum_skipped\t" << report.skipped.size() << '\n';
}

// ---------------------------------------------------------------- significance

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool significant = false;
    bool degenerate = false;  // zero variance with non-zero mean difference
    std::size_t n = 0;
    double mean_difference = 0.0;
    std::vector<std::string> unmatched;  // queries present in only one report
};

/// Two-sided paired t-test on per-query differences (a − b), α = 0.05.
inline TTestResult paired_ttest(const EvalReport& a, const EvalReport& b, const std::string& metric,
                                double alpha = 0.05) {
    TTestResult res;
    std::vector<double> diffs;
    for (const auto& [qid, values] : a.per_query) {
        auto it = b.per_query.find(qid);
        if (it == b.per_query.end()) {
            res.unmatched.push_back(qid);
            continue;
        }
        diffs.push_back(values.at(metric) - it->second.at(metric));
    }
    for (const auto& [qid, values] : b.per_query)
        if (!a.per_query.contains(qid)) res.unmatched.push_back(qid);
    res.n = diffs.size();
    if (res.n < 2) throw Error("paired t-test needs at least 2 shared queries");

    const double n = static_cast<double>(res.n);
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= n;
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    res.mean_difference = mean;

    // Differences equal up to rounding count as zero variance.
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
        if (mean == 0.0) return res;
        res.degenerate = true;
        res.t_statistic = mean > 0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
        res.p_value = 0.0;
        res.significant = true;
        return res;
    }
    res.t_statistic = mean / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t_statistic)));
    res.significant = res.p_value < alpha;
    return res;
}

}  // namespace fbkit
