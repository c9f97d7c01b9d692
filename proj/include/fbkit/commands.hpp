#pragma once

/// \file commands.hpp
/// Implementations behind the `fbkit` subcommands. Each command is a thin
/// composition of library calls so the CLI and the library agree byte for
/// byte.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbkit/analysis.hpp"
#include "fbkit/eval.hpp"
#include "fbkit/fusion.hpp"
#include "fbkit/index.hpp"
#include "fbkit/io.hpp"
#include "fbkit/pipeline.hpp"
#include "fbkit/tuning.hpp"

namespace fbkit {

namespace detail {

inline bool is_empty_dir(const std::filesystem::path& dir) {
    return std::filesystem::is_directory(dir) && std::filesystem::directory_iterator(dir) ==
                                                     std::filesystem::directory_iterator();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_output(path);
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------- index

struct IndexArgs {
    std::filesystem::path corpus;
    std::filesystem::path out_dir;
    std::filesystem::path stopwords;
    bool force = false;
};

inline InvertedIndex cmd_index(const IndexArgs& args) {
    if (!std::filesystem::exists(args.corpus)) throw Error("corpus not found: " + args.corpus.string());
    if (std::filesystem::exists(args.out_dir) && !detail::is_empty_dir(args.out_dir)) {
        if (!args.force)
            throw Error("refusing to overwrite existing " + args.out_dir.string() + " (use --force)");
        if (!std::filesystem::exists(args.out_dir / "manifest.json"))
            throw Error(args.out_dir.string() + " is not an index directory; not overwriting it");
        for (const char* f : {"manifest.json", "docs.tsv", "postings.txt"})
            std::filesystem::remove(args.out_dir / f);
    }
    AnalyzerConfig config;
    if (!args.stopwords.empty()) config.stopwords = read_stopwords(args.stopwords);
    auto index = build_index(args.corpus, config);
    index.save(args.out_dir);
    return index;
}

// ---------------------------------------------------------------- shard

/// Writes each document's passages as a JSONL corpus whose doc_id is the
/// passage id (`doc_id#pN`). Returns the number of passages.
inline std::size_t cmd_shard(const std::filesystem::path& corpus, const std::filesystem::path& out_path,
                             std::size_t window = 10, std::size_t stride = 5) {
    if (!std::filesystem::exists(corpus)) throw Error("corpus not found: " + corpus.string());
    auto out = detail::open_output(out_path);
    std::size_t n = 0;
    for_each_document(corpus, [&](Document doc) {
        for (const auto& p : shard_passages(doc, window, stride)) {
            nlohmann::ordered_json rec;
            rec["doc_id"] = p.passage_id;
            rec["contents"] = p.text;
            out << rec.dump() << '\n';
            ++n;
        }
    });
    if (!out) throw Error("failed writing " + out_path.string());
    return n;
}

// ---------------------------------------------------------------- retrieve

struct RetrieveArgs {
    ExperimentConfig config;
    std::filesystem::path out;
    std::filesystem::path expanded_queries;  // sparse only; optional debug dump
    bool force = false;
};

inline void refuse_overwrite(const std::filesystem::path& path, bool force) {
    if (!force && std::filesystem::exists(path))
        throw Error("refusing to overwrite existing " + path.string() + " (use --force)");
}

inline RankedRun cmd_retrieve(const RetrieveArgs& args) {
    refuse_overwrite(args.out, args.force);
    auto data = load_experiment_data(args.config.paradigm, args.config.feedback, args.config.inputs);
    auto run = run_experiment_config(args.config, data);
    write_run(run, args.out);
    if (!args.expanded_queries.empty()) {
        if (args.config.paradigm != Paradigm::Sparse)
            throw Error("expanded query dumps are only available for the sparse paradigm");
        Assignment p = default_params(args.config.paradigm);
        for (const auto& [k, v] : args.config.params) p[k] = v;
        const auto fb = args.config.feedback == Feedback::PRFGRF ? Feedback::PRF : args.config.feedback;
        std::map<std::string, std::map<std::string, double>> dump;
        for (const auto& t : data->topics) dump[t.query_id] = sparse_query(*data, fb, p, t).weights;
        auto out = detail::open_output(args.expanded_queries);
        write_expanded_queries(dump, out);
    }
    return run;
}

// ---------------------------------------------------------------- fuse

struct FuseArgs {
    std::filesystem::path prf_run;
    std::filesystem::path grf_run;
    WRRFParams params;
    std::size_t depth = kDefaultDepth;
    std::filesystem::path out;
    bool force = false;
};

inline RankedRun cmd_fuse(const FuseArgs& args) {
    refuse_overwrite(args.out, args.force);
    auto fused = wrrf(read_run(args.prf_run), read_run(args.grf_run), args.params, args.depth);
    write_run(fused, args.out);
    return fused;
}

// ---------------------------------------------------------------- eval / ttest

struct EvalArgs {
    std::filesystem::path run;
    std::filesystem::path qrels;
    std::vector<MetricSpec> metrics = default_metrics();
    EvalOptions options;
};

inline EvalReport cmd_eval(const EvalArgs& args, std::ostream& out) {
    auto report = evaluate(read_run(args.run), read_qrels(args.qrels), args.metrics, args.options);
    write_report(report, out);
    return report;
}

struct TTestArgs {
    std::filesystem::path run_a;
    std::filesystem::path run_b;
    std::filesystem::path qrels;
    MetricSpec metric{MetricKind::Recall, 1000};
};

inline void write_ttest(const TTestResult& r, const std::string& metric, std::ostream& out) {
    out << "metric\t" << metric << '\n'
        << "n\t" << r.n << '\n'
        << "mean_difference\t" << format_metric_value(r.mean_difference) << '\n'
        << "t_statistic\t" << format_number(r.t_statistic) << '\n'
        << "p_value\t" << format_number(r.p_value) << '\n'
        << "significant_at_0.05\t" << (r.significant ? "yes" : "no") << '\n';
    if (r.degenerate) out << "note\tzero variance in differences; p-value is degenerate\n";
}

inline TTestResult cmd_ttest(const TTestArgs& args, std::ostream& out, std::ostream& warn = std::cerr) {
    auto qrels = read_qrels(args.qrels);
    auto a = evaluate(read_run(args.run_a), qrels, {args.metric});
    auto b = evaluate(read_run(args.run_b), qrels, {args.metric});
    auto res = paired_ttest(a, b, args.metric.name());
    if (!res.unmatched.empty())
        warn << "warning: " << res.unmatched.size()
             << " queries are evaluated in only one run; using the intersection\n";
    write_ttest(res, args.metric.name(), out);
    return res;
}

// ---------------------------------------------------------------- tune

struct TuneArgs {
    ExperimentConfig config;
    std::optional<ParamGrid> grid;  // default grid for the configuration when unset
    std::filesystem::path folds;
    std::filesystem::path qrels;
    std::filesystem::path out_dir;
    TuningOptions options;
    bool force = false;
};

inline void refuse_nonempty_dir(const std::filesystem::path& dir, bool force) {
    if (!force && std::filesystem::exists(dir) && !detail::is_empty_dir(dir))
        throw Error("refusing to write into non-empty " + dir.string() + " (use --force)");
}

/// Writes report.json, heldout.run, one run per fold and the aggregate
/// evaluation (same layout as `eval`).
inline void write_tuning_outputs(const TuningResult& result, const std::filesystem::path& dir,
                                 const std::string& run_tag) {
    detail::write_text(dir / "report.json", tuning_report_json(result).dump(2) + "\n");
    RankedRun held_out = result.held_out_run;
    held_out.run_tag = run_tag;
    write_run(held_out, dir / "heldout.run");
    for (const auto& f : result.folds) {
        RankedRun fold_run{run_tag, {}};
        for (const auto& qid : f.held_out_queries) fold_run.queries[qid] = held_out.queries.at(qid);
        write_run(fold_run, dir / ("fold_" + f.fold + ".run"));
    }
    auto out = detail::open_output(dir / "eval.tsv");
    write_report(result.aggregate, out);
}

inline TuningResult cmd_tune(const TuneArgs& args) {
    refuse_nonempty_dir(args.out_dir, args.force);
    auto data = load_experiment_data(args.config.paradigm, args.config.feedback, args.config.inputs);
    Assignment fixed = default_params(args.config.paradigm);
    for (const auto& [k, v] : args.config.params) fixed[k] = v;
    auto grid = args.grid ? *args.grid : default_grid(args.config.paradigm, args.config.feedback);
    auto pipe = make_pipeline(data, args.config.paradigm, args.config.feedback, fixed, args.config.depth);
    TuningOptions options = args.options;
    options.depth = args.config.depth;
    auto result = grid_search_cv(pipe, grid, read_folds(args.folds), data->topics,
                                 read_qrels(args.qrels), options);
    const auto tag = args.config.run_tag.empty()
                         ? to_string(args.config.paradigm) + "+" + to_string(args.config.feedback) + "_cv"
                         : args.config.run_tag;
    write_tuning_outputs(result, args.out_dir, tag);
    return result;
}

// ---------------------------------------------------------------- experiment

/// Full recipe in one paradigm: baseline, PRF and GRF runs tuned by
/// cross-validation, weighted fusion of the two feedback runs with lambda
/// tuned the same way, evaluation and significance tests.
struct ExperimentSpec {
    Paradigm paradigm = Paradigm::Sparse;
    InputPaths inputs;
    std::filesystem::path qrels;
    std::filesystem::path folds;
    std::filesystem::path output_dir;
    Assignment fixed;
    std::map<std::string, ParamGrid> grids;  // keys: baseline, prf, grf, fusion
    std::vector<MetricSpec> metrics = default_metrics();
    std::size_t depth = kDefaultDepth;
    unsigned threads = 0;

    /// Reads the JSON config; relative paths resolve against its directory.
    static ExperimentSpec from_json_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path.string());
        auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw Error(path.string() + ": malformed config");
        const auto base = path.parent_path();
        auto resolve = [&](const char* key) -> std::filesystem::path {
            if (!j.contains(key)) return {};
            std::filesystem::path p = j[key].get<std::string>();
            return p.is_absolute() ? p : base / p;
        };
        ExperimentSpec s;
        s.paradigm = parse_paradigm(j.value("paradigm", "sparse"));
        s.inputs.index = resolve("index");
        s.inputs.corpus = resolve("corpus");
        s.inputs.topics = resolve("topics");
        s.inputs.stopwords = resolve("stopwords");
        s.inputs.gen_docs = resolve("gen_docs");
        s.inputs.gen_type = j.value("gen_type", "");
        s.inputs.doc_vectors = resolve("doc_vectors");
        s.inputs.query_vectors = resolve("query_vectors");
        s.inputs.gen_vectors = resolve("gen_vectors");
        s.qrels = resolve("qrels");
        s.folds = resolve("folds");
        s.output_dir = resolve("output_dir");
        s.depth = j.value("depth", kDefaultDepth);
        s.threads = j.value("threads", 0u);
        if (j.contains("metrics")) s.metrics = parse_metrics(j["metrics"].get<std::string>());
        if (j.contains("params")) {
            for (const auto& [k, v] : j["params"].items()) {
                if (v.is_number()) s.fixed[k] = v.get<double>();
                else if (v.is_string()) s.fixed[k] = v.get<std::string>();
                else throw Error(path.string() + ": unsupported value for parameter " + k);
            }
        }
        if (j.contains("grids"))
            for (const auto& [k, v] : j["grids"].items()) s.grids[k] = ParamGrid::from_json(v);
        return s;
    }
};

struct ExperimentOutcome {
    std::map<std::string, TuningResult> tuning;  // baseline, prf, grf, prf+grf
    std::map<std::string, RankedRun> runs;
    std::map<std::string, std::filesystem::path> run_files;
    nlohmann::ordered_json report;
};

inline ExperimentOutcome cmd_experiment(const ExperimentSpec& spec, bool force = false,
                                        std::optional<std::filesystem::path> cache_dir = std::nullopt) {
    if (spec.output_dir.empty()) throw Error("experiment config needs an output_dir");
    refuse_nonempty_dir(spec.output_dir, force);
    detail::require_path(spec.qrels, "qrels");
    detail::require_path(spec.folds, "folds");

    auto data = load_experiment_data(spec.paradigm, Feedback::PRFGRF, spec.inputs);
    const auto folds = read_folds(spec.folds);
    const auto qrels = read_qrels(spec.qrels);
    Assignment fixed = default_params(spec.paradigm);
    for (const auto& [k, v] : spec.fixed) fixed[k] = v;

    TuningOptions options;
    options.report_metrics = spec.metrics;
    options.depth = spec.depth;
    options.threads = spec.threads;
    options.cache_dir = cache_dir;

    auto grid_for = [&](const std::string& key, Feedback fb) {
        auto it = spec.grids.find(key);
        return it != spec.grids.end() ? it->second : default_grid(spec.paradigm, fb);
    };

    ExperimentOutcome outcome;
    const std::string prefix = to_string(spec.paradigm);
    const std::vector<std::pair<std::string, Feedback>> stages = {
        {"baseline", Feedback::None}, {"prf", Feedback::PRF}, {"grf", Feedback::GRF}};
    for (const auto& [name, fb] : stages) {
        auto pipe = make_pipeline(data, spec.paradigm, fb, fixed, spec.depth);
        auto result = grid_search_cv(pipe, grid_for(name, fb), folds, data->topics, qrels, options);
        result.held_out_run.run_tag = prefix + "+" + to_string(fb) + "_cv";
        outcome.runs[name] = result.held_out_run;
        outcome.tuning.emplace(name, std::move(result));
    }

    auto fusion = make_fusion_pipeline(outcome.runs.at("prf"), outcome.runs.at("grf"), fixed, spec.depth);
    auto fused = grid_search_cv(fusion, grid_for("fusion", Feedback::PRFGRF), folds, data->topics, qrels,
                                options);
    fused.held_out_run.run_tag = prefix + "+prf+grf_cv";
    outcome.runs["prf+grf"] = fused.held_out_run;
    outcome.tuning.emplace("prf+grf", std::move(fused));

    auto& report = outcome.report;
    report["paradigm"] = prefix;
    for (const auto& [name, result] : outcome.tuning) {
        const auto file = spec.output_dir / "runs" / (name + ".run");
        write_run(outcome.runs.at(name), file);
        outcome.run_files[name] = file;
        auto out = detail::open_output(spec.output_dir / "eval" / (name + ".tsv"));
        write_report(result.aggregate, out);
        report["systems"][name] = tuning_report_json(result);
    }

    const std::vector<std::pair<std::string, std::string>> comparisons = {
        {"prf+grf", "prf"}, {"prf+grf", "grf"}, {"grf", "prf"}, {"prf", "baseline"}, {"grf", "baseline"}};
    for (const auto& [a, b] : comparisons) {
        for (const auto& spec_metric : spec.metrics) {
            const auto metric = spec_metric.name();
            const auto& ra = outcome.tuning.at(a).aggregate;
            const auto& rb = outcome.tuning.at(b).aggregate;
            nlohmann::ordered_json tj;
            if (ra.per_query.size() < 2 || rb.per_query.size() < 2) {
                tj["note"] = "fewer than 2 evaluated queries";
                report["ttests"][a + " vs " + b][metric] = std::move(tj);
                continue;
            }
            auto t = paired_ttest(ra, rb, metric);
            tj["mean_difference"] = t.mean_difference;
            tj["t_statistic"] = std::isfinite(t.t_statistic) ? nlohmann::ordered_json(t.t_statistic)
                                                             : nlohmann::ordered_json(format_number(t.t_statistic));
            tj["p_value"] = t.p_value;
            tj["significant"] = t.significant;
            tj["degenerate"] = t.degenerate;
            report["ttests"][a + " vs " + b][metric] = std::move(tj);
        }
    }
    detail::write_text(spec.output_dir / "report.json", report.dump(2) + "\n");
    return outcome;
}

}  // namespace fbkit
