#pragma once

/// \file tuning.hpp
/// Cross-validated grid search and zero-shot parameter transfer.
///
/// Every grid point is run for every tunable topic (optionally through an
/// on-disk cache). For each fold, the winning point is chosen from the
/// training topics only; the held-out topics are then scored with it. All
/// qrels access goes through TrackedQrels, which records which queries
/// were looked up in which phase so leakage can be audited afterwards.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fbkit/eval.hpp"
#include "fbkit/types.hpp"

namespace fbkit {

using ParamValue = std::variant<double, std::string>;

inline std::string to_string(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
    return std::get<std::string>(v);
}

/// Parameter name -> value. Names sort alphabetically.
using Assignment = std::map<std::string, ParamValue>;

inline std::string to_string(const Assignment& a) {
    std::string s;
    for (const auto& [name, value] : a) {
        if (!s.empty()) s += ',';
        s += name + '=' + to_string(value);
    }
    return s;
}

inline double number(const Assignment& a, const std::string& name) {
    auto it = a.find(name);
    if (it == a.end()) throw Error("missing parameter " + name);
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    throw Error("parameter " + name + " is not numeric");
}

inline double number_or(const Assignment& a, const std::string& name, double fallback) {
    return a.contains(name) ? number(a, name) : fallback;
}

/// Ordered parameter axes; enumeration is full factorial with the last
/// axis varying fastest.
class ParamGrid {
public:
    ParamGrid() = default;

    ParamGrid& add(std::string name, std::vector<ParamValue> values) {
        if (values.empty()) throw Error("parameter " + name + " has no candidate values");
        for (const auto& [n, v] : axes_)
            if (n == name) throw Error("parameter " + name + " listed twice");
        axes_.emplace_back(std::move(name), std::move(values));
        return *this;
    }

    ParamGrid& add_numbers(std::string name, const std::vector<double>& values) {
        return add(std::move(name), std::vector<ParamValue>(values.begin(), values.end()));
    }

    const std::vector<std::pair<std::string, std::vector<ParamValue>>>& axes() const { return axes_; }

    const std::vector<ParamValue>& values(const std::string& name) const {
        for (const auto& [n, v] : axes_)
            if (n == name) return v;
        throw Error("grid has no parameter " + name);
    }

    std::vector<Assignment> points() const {
        std::vector<Assignment> out;
        if (axes_.empty()) {
            out.emplace_back();
            return out;
        }
        std::vector<std::size_t> idx(axes_.size(), 0);
        while (true) {
            Assignment a;
            for (std::size_t i = 0; i < axes_.size(); ++i) a[axes_[i].first] = axes_[i].second[idx[i]];
            out.push_back(std::move(a));
            std::size_t i = axes_.size();
            while (i > 0) {
                --i;
                if (++idx[i] < axes_[i].second.size()) break;
                idx[i] = 0;
                if (i == 0) return out;
            }
        }
    }

    std::set<std::string> names() const {
        std::set<std::string> s;
        for (const auto& [n, v] : axes_) s.insert(n);
        return s;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [n, values] : axes_) {
            auto arr = nlohmann::ordered_json::array();
            for (const auto& v : values) {
                if (const auto* d = std::get_if<double>(&v)) arr.push_back(*d);
                else arr.push_back(std::get<std::string>(v));
            }
            j[n] = std::move(arr);
        }
        return j;
    }

    static ParamGrid from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw Error("parameter grid must be a JSON object");
        ParamGrid grid;
        for (const auto& [name, values] : j.items()) {
            if (!values.is_array()) throw Error("grid entry " + name + " must be an array");
            std::vector<ParamValue> vals;
            for (const auto& v : values) {
                if (v.is_number()) vals.emplace_back(v.get<double>());
                else if (v.is_string()) vals.emplace_back(v.get<std::string>());
                else throw Error("grid entry " + name + " has an unsupported value");
            }
            grid.add(name, std::move(vals));
        }
        return grid;
    }

private:
    std::vector<std::pair<std::string, std::vector<ParamValue>>> axes_;
};

/// Evenly spaced values `from, from+step, ..., <= to`, rounded to 10 decimals
/// so that e.g. 0.1-steps land on their shortest decimal representation.
inline std::vector<double> numeric_range(double from, double to, double step) {
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(std::round((from + step * i) * 1e10) / 1e10);
    return out;
}

/// A parameterized retrieval configuration. `config_key` identifies
/// everything except the tuned parameters (used for caching).
struct TunablePipeline {
    std::string config_key;
    std::function<ResultList(const Assignment&, const Topic&)> run_query;
};

/// Qrels wrapper that logs which queries were looked up in which phase.
class TrackedQrels {
public:
    explicit TrackedQrels(const Qrels& qrels) : qrels_(&qrels) {}

    void set_phase(std::string phase) {
        std::lock_guard lock(mutex_);
        phase_ = std::move(phase);
    }

    const std::map<std::string, int>* lookup(const std::string& query_id) const {
        std::lock_guard lock(mutex_);
        log_[phase_].insert(query_id);
        return qrels_->find(query_id);
    }

    std::set<std::string> accessed(const std::string& phase) const {
        std::lock_guard lock(mutex_);
        auto it = log_.find(phase);
        return it == log_.end() ? std::set<std::string>{} : it->second;
    }

    std::map<std::string, std::set<std::string>> log() const {
        std::lock_guard lock(mutex_);
        return log_;
    }

private:
    const Qrels* qrels_;
    mutable std::mutex mutex_;
    std::string phase_;
    mutable std::map<std::string, std::set<std::string>> log_;
};

inline std::string selection_phase(const std::string& fold) { return "select:" + fold; }
inline std::string report_phase(const std::string& fold) { return "report:" + fold; }

struct TuningOptions {
    MetricSpec objective{MetricKind::Recall, 1000};
    std::vector<MetricSpec> report_metrics = default_metrics();
    std::size_t depth = kDefaultDepth;
    std::optional<std::filesystem::path> cache_dir;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct FoldOutcome {
    std::string fold;
    std::size_t winner_index = 0;
    Assignment winner;
    std::vector<double> training_means;  // objective per grid point
    std::vector<std::string> training_queries;
    std::vector<std::string> held_out_queries;
    std::map<std::string, std::map<std::string, double>> held_out;
};

struct TuningResult {
    ParamGrid grid;
    std::vector<Assignment> points;
    std::vector<FoldOutcome> folds;
    EvalReport aggregate;    // held-out metrics across all folds
    RankedRun held_out_run;  // each query ranked with its fold's winner
    std::map<std::string, double> winner_spread;  // max - min per numeric parameter

    const FoldOutcome& fold(const std::string& name) const {
        for (const auto& f : folds)
            if (f.fold == name) return f;
        throw Error("no fold " + name);
    }
};

// ---------------------------------------------------------------- cache

/// FNV-1a, 64 bit; stable across platforms.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

/// Per-(configuration, query) result cache. Each entry is a file written
/// atomically via rename.
class ResultCache {
public:
    explicit ResultCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::optional<ResultList> get(const std::string& config, const std::string& query_id) const {
        std::ifstream in(path_for(config, query_id), std::ios::binary);
        if (!in) return std::nullopt;
        std::string header;
        if (!std::getline(in, header) || header != header_for(config, query_id)) return std::nullopt;
        ResultList list;
        std::string line;
        while (std::getline(in, line)) {
            auto tab = line.find('\t');
            double score = 0;
            if (tab == std::string::npos || !parse_double(std::string_view(line).substr(tab + 1), score))
                return std::nullopt;
            list.push_back({line.substr(0, tab), score});
        }
        return list;
    }

    void put(const std::string& config, const std::string& query_id, const ResultList& list) const {
        auto target = path_for(config, query_id);
        std::filesystem::create_directories(target.parent_path());
        auto tmp = target;
        tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << header_for(config, query_id) << '\n';
            for (const auto& e : list) out << e.id << '\t' << format_number(e.score) << '\n';
            if (!out) throw Error("failed writing cache entry " + tmp.string());
        }
        std::filesystem::rename(tmp, target);
    }

private:
    static std::string header_for(const std::string& config, const std::string& query_id) {
        return "#" + hex64(fnv1a(config)) + "\t" + query_id;
    }

    std::filesystem::path path_for(const std::string& config, const std::string& query_id) const {
        return dir_ / hex64(fnv1a(config)) / (hex64(fnv1a(query_id)) + ".tsv");
    }

    std::filesystem::path dir_;
};

// ---------------------------------------------------------------- grid search

namespace detail {

/// Runs every grid point over every topic; results[point][topic].
inline std::vector<std::vector<ResultList>> run_grid(const TunablePipeline& pipeline,
                                                     const std::vector<Assignment>& points,
                                                     const std::vector<Topic>& topics,
                                                     const TuningOptions& options) {
    std::vector<std::vector<ResultList>> results(points.size(), std::vector<ResultList>(topics.size()));
    std::optional<ResultCache> cache;
    if (options.cache_dir) cache.emplace(*options.cache_dir);

    auto work = [&](std::size_t p) {
        const std::string config = pipeline.config_key + "|" + to_string(points[p]) +
                                   "|depth=" + std::to_string(options.depth);
        for (std::size_t t = 0; t < topics.size(); ++t) {
            if (cache) {
                if (auto hit = cache->get(config, topics[t].query_id)) {
                    results[p][t] = std::move(*hit);
                    continue;
                }
            }
            auto list = pipeline.run_query(points[p], topics[t]);
            finalize_ranking(list, options.depth);
            if (cache) cache->put(config, topics[t].query_id, list);
            results[p][t] = std::move(list);
        }
    };

    unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, points.size()));
    if (threads <= 1) {
        for (std::size_t p = 0; p < points.size(); ++p) work(p);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) {
        pool.emplace_back([&] {
            for (std::size_t p = next++; p < points.size(); p = next++) {
                try {
                    work(p);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return results;
}

}  // namespace detail

/// Cross-validated grid search maximizing the mean objective over each
/// fold's training topics; ties go to the earliest grid point.
inline TuningResult grid_search_cv(const TunablePipeline& pipeline, const ParamGrid& grid,
                                   const FoldSet& folds, const std::vector<Topic>& topics,
                                   TrackedQrels& qrels, const TuningOptions& options = {}) {
    if (folds.folds.empty()) throw Error("no folds given");
    std::map<std::string, const Topic*> by_id;
    for (const auto& t : topics) by_id[t.query_id] = &t;

    // Tunable topics: the union of the folds, in query-id order.
    std::vector<Topic> tunable;
    std::map<std::string, std::size_t> position;
    for (const auto& qid : folds.all_queries()) {
        auto it = by_id.find(qid);
        if (it == by_id.end()) throw Error("fold query " + qid + " is not in the topic set");
        position[qid] = tunable.size();
        tunable.push_back(*it->second);
    }

    TuningResult result;
    result.grid = grid;
    result.points = grid.points();
    auto runs = detail::run_grid(pipeline, result.points, tunable, options);

    std::vector<MetricSpec> reported = options.report_metrics;
    if (std::find(reported.begin(), reported.end(), options.objective) == reported.end())
        reported.push_back(options.objective);
    const std::string objective = options.objective.name();
    result.aggregate.metrics = reported;
    result.held_out_run.run_tag = pipeline.config_key;

    for (const auto& [fold_name, members] : folds.folds) {
        FoldOutcome outcome;
        outcome.fold = fold_name;
        for (const auto& t : tunable)
            if (!members.contains(t.query_id)) outcome.training_queries.push_back(t.query_id);
        if (outcome.training_queries.empty())
            throw Error("fold " + fold_name + " leaves no training topics");

        qrels.set_phase(selection_phase(fold_name));
        outcome.training_means.assign(result.points.size(), 0.0);
        for (std::size_t p = 0; p < result.points.size(); ++p) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& qid : outcome.training_queries) {
                const auto* judged = qrels.lookup(qid);
                if (!judged || metrics::relevant_count(*judged) == 0) continue;
                ResultList list = runs[p][position.at(qid)];
                finalize_ranking(list, options.depth);
                sum += metrics::compute(options.objective, list, *judged);
                ++n;
            }
            outcome.training_means[p] = n ? sum / static_cast<double>(n) : 0.0;
        }
        outcome.winner_index = static_cast<std::size_t>(
            std::max_element(outcome.training_means.begin(), outcome.training_means.end()) -
            outcome.training_means.begin());
        outcome.winner = result.points[outcome.winner_index];

        qrels.set_phase(report_phase(fold_name));
        for (const auto& qid : members) {
            outcome.held_out_queries.push_back(qid);
            const auto& list = runs[outcome.winner_index][position.at(qid)];
            result.held_out_run.queries[qid] = list;
            const auto* judged = qrels.lookup(qid);
            if (!judged) continue;
            if (metrics::relevant_count(*judged) == 0) {
                result.aggregate.skipped.push_back(qid);
                continue;
            }
            auto values = evaluate_query(list, *judged, reported, options.depth);
            outcome.held_out[qid] = values;
            result.aggregate.per_query[qid] = std::move(values);
        }
        result.folds.push_back(std::move(outcome));
    }
    qrels.set_phase("done");
    std::sort(result.aggregate.skipped.begin(), result.aggregate.skipped.end());
    compute_means(result.aggregate);

    for (const auto& [name, values] : grid.axes()) {
        if (!std::holds_alternative<double>(values.front())) continue;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& f : result.folds) {
            lo = std::min(lo, number(f.winner, name));
            hi = std::max(hi, number(f.winner, name));
        }
        result.winner_spread[name] = hi - lo;
    }
    return result;
}

inline TuningResult grid_search_cv(const TunablePipeline& pipeline, const ParamGrid& grid,
                                   const FoldSet& folds, const std::vector<Topic>& topics,
                                   const Qrels& qrels, const TuningOptions& options = {}) {
    TrackedQrels tracked(qrels);
    return grid_search_cv(pipeline, grid, folds, topics, tracked, options);
}

/// Averages fold winners across tuning results and snaps each numeric
/// parameter to the nearest grid value (ties toward the smaller value).
/// Non-numeric parameters must agree across all folds.
inline Assignment zero_shot_transfer(const std::vector<TuningResult>& sources,
                                     const std::vector<Topic>& target_topics) {
    if (sources.empty()) throw Error("zero-shot transfer needs at least one tuning result");
    if (target_topics.empty()) throw Error("zero-shot transfer needs target topics");
    const auto& grid = sources.front().grid;
    for (const auto& s : sources)
        if (s.grid.names() != grid.names()) throw Error("tuning results use different grid schemas");

    Assignment out;
    for (const auto& [name, candidates] : grid.axes()) {
        std::vector<ParamValue> winners;
        for (const auto& s : sources)
            for (const auto& f : s.folds) winners.push_back(f.winner.at(name));
        if (winners.empty()) throw Error("tuning results contain no folds");

        if (std::holds_alternative<std::string>(winners.front())) {
            for (const auto& w : winners)
                if (w != winners.front())
                    throw Error("parameter " + name +
                                " has disagreeing fold winners; set it explicitly");
            out[name] = winners.front();
            continue;
        }
        double mean = 0.0;
        for (const auto& w : winners) mean += std::get<double>(w);
        mean /= static_cast<double>(winners.size());

        std::optional<double> best;
        double best_gap = 0.0;
        for (const auto& c : candidates) {
            double v = std::get<double>(c);
            double gap = std::abs(v - mean);
            constexpr double kTieTolerance = 1e-9;
            if (!best || gap < best_gap - kTieTolerance ||
                (std::abs(gap - best_gap) <= kTieTolerance && v < *best)) {
                best = v;
                best_gap = gap;
            }
        }
        out[name] = *best;
    }
    return out;
}

/// Machine-readable tuning report.
inline nlohmann::ordered_json tuning_report_json(const TuningResult& r) {
    nlohmann::ordered_json j;
    j["grid"] = r.grid.to_json();
    j["objective_points"] = r.points.size();
    auto folds = nlohmann::ordered_json::array();
    for (const auto& f : r.folds) {
        nlohmann::ordered_json fj;
        fj["fold"] = f.fold;
        fj["winner"] = to_string(f.winner);
        fj["winner_index"] = f.winner_index;
        fj["training_objective"] = f.training_means[f.winner_index];
        fj["held_out_queries"] = f.held_out.size();
        folds.push_back(std::move(fj));
    }
    j["folds"] = std::move(folds);
    nlohmann::ordered_json means = nlohmann::ordered_json::object();
    for (const auto& spec : r.aggregate.metrics) means[spec.name()] = r.aggregate.means.at(spec.name());
    j["held_out_means"] = std::move(means);
    j["num_q"] = r.aggregate.per_query.size();
    nlohmann::ordered_json spread = nlohmann::ordered_json::object();
    for (const auto& [name, v] : r.winner_spread) spread[name] = v;
    j["winner_spread"] = std::move(spread);
    return j;
}

}  // namespace fbkit
