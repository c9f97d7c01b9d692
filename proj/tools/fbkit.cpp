// Command-line front end for the fbkit library.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbkit/commands.hpp"

namespace {

struct RunFlags {
    std::string paradigm = "sparse";
    std::string feedback = "none";
    std::string index, corpus, topics, stopwords, gen_docs, gen_type, doc_vectors, query_vectors,
        gen_vectors, run_tag;
    std::optional<double> k1, b, fb_docs, fb_terms, orig_weight, alpha, beta, theta, prf_depth, lambda,
        rrf_k;
    std::size_t depth = fbkit::kDefaultDepth;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
    app->add_option("--paradigm", f.paradigm, "sparse, dense or learned-sparse")
        ->check(CLI::IsMember({"sparse", "dense", "learned-sparse"}));
    app->add_option("--feedback", f.feedback, "none, prf, grf or prf+grf")
        ->check(CLI::IsMember({"none", "prf", "grf", "prf+grf"}));
    app->add_option("--index", f.index, "Index directory (sparse)");
    app->add_option("--corpus", f.corpus, "Corpus JSONL; indexed in memory when --index is absent");
    app->add_option("--topics", f.topics, "Topics TSV")->required();
    app->add_option("--stopwords", f.stopwords, "Stopword file (one word per line)");
    app->add_option("--gen-docs", f.gen_docs, "Generated documents JSONL");
    app->add_option("--gen-type", f.gen_type, "Only use generated content of this type");
    app->add_option("--doc-vectors", f.doc_vectors, "Passage vector store");
    app->add_option("--query-vectors", f.query_vectors, "Query vectors");
    app->add_option("--gen-vectors", f.gen_vectors, "Generated-document vectors");
    app->add_option("--run-tag", f.run_tag, "Override the run tag");
    app->add_option("--k1", f.k1);
    app->add_option("--b", f.b);
    app->add_option("--fb-docs", f.fb_docs);
    app->add_option("--fb-terms", f.fb_terms);
    app->add_option("--orig-weight", f.orig_weight);
    app->add_option("--alpha", f.alpha);
    app->add_option("--beta", f.beta);
    app->add_option("--theta", f.theta);
    app->add_option("--prf-depth", f.prf_depth, "Feedback depth for dense Rocchio");
    app->add_option("--lambda", f.lambda);
    app->add_option("--rrf-k", f.rrf_k);
    app->add_option("--depth", f.depth, "Ranking depth")->check(CLI::Range(1, 1000));
}

fbkit::ExperimentConfig to_config(const RunFlags& f) {
    fbkit::ExperimentConfig c;
    c.paradigm = fbkit::parse_paradigm(f.paradigm);
    c.feedback = fbkit::parse_feedback(f.feedback);
    c.inputs = {f.index,    f.corpus,      f.topics,        f.stopwords,  f.gen_docs,
                f.gen_type, f.doc_vectors, f.query_vectors, f.gen_vectors};
    c.depth = f.depth;
    c.run_tag = f.run_tag;
    auto set = [&](const char* name, const std::optional<double>& v) {
        if (v) c.params[name] = *v;
    };
    set("k1", f.k1);
    set("b", f.b);
    set("fb_docs", f.fb_docs);
    set("fb_terms", f.fb_terms);
    set("orig_weight", f.orig_weight);
    set("alpha", f.alpha);
    set("beta", f.beta);
    set("theta", f.theta);
    set("prf_depth", f.prf_depth);
    set("lambda", f.lambda);
    set("rrf_k", f.rrf_k);
    return c;
}

std::optional<std::filesystem::path> cache_dir_from_env() {
    if (const char* dir = std::getenv("FBKIT_CACHE_DIR"); dir && *dir) return std::filesystem::path(dir);
    return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feedback retrieval experiments: sparse, dense and learned-sparse"};
    app.require_subcommand(1);

    // index
    fbkit::IndexArgs index_args;
    std::string index_corpus, index_out, index_stop;
    auto* index_cmd = app.add_subcommand("index", "Build a BM25 index from a JSONL corpus");
    index_cmd->add_option("--corpus", index_corpus)->required();
    index_cmd->add_option("--out", index_out, "Index directory")->required();
    index_cmd->add_option("--stopwords", index_stop);
    index_cmd->add_flag("--force", index_args.force, "Replace an existing index");

    // retrieve
    RunFlags retrieve_flags;
    std::string retrieve_out, expanded_out;
    bool retrieve_force = false;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Produce a run for one configuration");
    add_run_flags(retrieve_cmd, retrieve_flags);
    retrieve_cmd->add_option("--out", retrieve_out, "Run file")->required();
    retrieve_cmd->add_option("--expanded-queries", expanded_out, "Write expanded sparse queries here");
    retrieve_cmd->add_flag("--force", retrieve_force);

    // fuse
    fbkit::FuseArgs fuse_args;
    std::string fuse_prf, fuse_grf, fuse_out;
    auto* fuse_cmd = app.add_subcommand("fuse", "Weighted reciprocal rank fusion of a PRF and a GRF run");
    fuse_cmd->add_option("--prf-run", fuse_prf)->required();
    fuse_cmd->add_option("--grf-run", fuse_grf)->required();
    fuse_cmd->add_option("--lambda", fuse_args.params.lambda)->check(CLI::Range(0.0, 1.0));
    fuse_cmd->add_option("--rrf-k", fuse_args.params.k)->check(CLI::PositiveNumber);
    fuse_cmd->add_option("--depth", fuse_args.depth)->check(CLI::Range(1, 1000));
    fuse_cmd->add_option("--out", fuse_out)->required();
    fuse_cmd->add_flag("--force", fuse_args.force);

    // eval
    std::string eval_run, eval_qrels, eval_metrics = "map,ndcg@10,recall@1000";
    std::size_t eval_depth = fbkit::kDefaultDepth;
    bool eval_zero_fill = false;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a run against qrels");
    eval_cmd->add_option("--run", eval_run)->required();
    eval_cmd->add_option("--qrels", eval_qrels)->required();
    eval_cmd->add_option("--metrics", eval_metrics, "Comma-separated, e.g. map,ndcg@10,recall@1000");
    eval_cmd->add_option("--depth", eval_depth)->check(CLI::Range(1, 1000));
    eval_cmd->add_flag("--zero-fill", eval_zero_fill, "Score judged queries missing from the run as 0");

    // ttest
    std::string tt_a, tt_b, tt_qrels, tt_metric = "recall@1000";
    auto* ttest_cmd = app.add_subcommand("ttest", "Paired two-sided t-test between two runs");
    ttest_cmd->add_option("--run-a", tt_a)->required();
    ttest_cmd->add_option("--run-b", tt_b)->required();
    ttest_cmd->add_option("--qrels", tt_qrels)->required();
    ttest_cmd->add_option("--metric", tt_metric);

    // tune
    RunFlags tune_flags;
    std::string tune_grid, tune_folds, tune_qrels, tune_out, tune_objective = "recall@1000",
                                                               tune_metrics = "map,ndcg@10,recall@1000";
    unsigned tune_threads = 0;
    bool tune_force = false;
    auto* tune_cmd = app.add_subcommand("tune", "Cross-validated grid search");
    add_run_flags(tune_cmd, tune_flags);
    tune_cmd->add_option("--grid", tune_grid, "JSON file mapping each parameter to its candidate values");
    tune_cmd->add_option("--folds", tune_folds)->required();
    tune_cmd->add_option("--qrels", tune_qrels)->required();
    tune_cmd->add_option("--objective", tune_objective);
    tune_cmd->add_option("--metrics", tune_metrics);
    tune_cmd->add_option("--threads", tune_threads);
    tune_cmd->add_option("--out", tune_out, "Output directory")->required();
    tune_cmd->add_flag("--force", tune_force);

    // experiment
    std::string exp_config;
    bool exp_force = false;
    auto* exp_cmd = app.add_subcommand("experiment", "Baseline, PRF, GRF and fused runs with CV and t-tests");
    exp_cmd->add_option("config", exp_config, "Experiment JSON config")->required();
    exp_cmd->add_flag("--force", exp_force);

    // shard
    std::string shard_corpus, shard_out;
    std::size_t shard_window = 10, shard_stride = 5;
    bool shard_force = false;
    auto* shard_cmd = app.add_subcommand("shard", "Split documents into overlapping sentence passages");
    shard_cmd->add_option("--corpus", shard_corpus)->required();
    shard_cmd->add_option("--out", shard_out, "Passage JSONL")->required();
    shard_cmd->add_option("--window", shard_window)->check(CLI::PositiveNumber);
    shard_cmd->add_option("--stride", shard_stride)->check(CLI::PositiveNumber);
    shard_cmd->add_flag("--force", shard_force);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*index_cmd) {
            index_args.corpus = index_corpus;
            index_args.out_dir = index_out;
            index_args.stopwords = index_stop;
            auto index = fbkit::cmd_index(index_args);
            std::cerr << "indexed " << index.doc_count() << " documents, " << index.vocabulary_size()
                      << " terms\n";
        } else if (*retrieve_cmd) {
            fbkit::RetrieveArgs args{to_config(retrieve_flags), retrieve_out, expanded_out, retrieve_force};
            fbkit::cmd_retrieve(args);
        } else if (*fuse_cmd) {
            fuse_args.prf_run = fuse_prf;
            fuse_args.grf_run = fuse_grf;
            fuse_args.out = fuse_out;
            fbkit::cmd_fuse(fuse_args);
        } else if (*eval_cmd) {
            fbkit::EvalArgs args;
            args.run = eval_run;
            args.qrels = eval_qrels;
            args.metrics = fbkit::parse_metrics(eval_metrics);
            args.options.depth = eval_depth;
            args.options.zero_fill_missing = eval_zero_fill;
            fbkit::cmd_eval(args, std::cout);
        } else if (*ttest_cmd) {
            fbkit::cmd_ttest({tt_a, tt_b, tt_qrels, fbkit::parse_metric(tt_metric)}, std::cout);
        } else if (*tune_cmd) {
            fbkit::TuneArgs args;
            args.config = to_config(tune_flags);
            if (!tune_grid.empty()) {
                std::ifstream in(tune_grid);
                if (!in) throw fbkit::Error("cannot open " + tune_grid);
                auto j = nlohmann::json::parse(in, nullptr, false);
                if (j.is_discarded()) throw fbkit::Error(tune_grid + ": malformed JSON");
                args.grid = fbkit::ParamGrid::from_json(j);
            }
            args.folds = tune_folds;
            args.qrels = tune_qrels;
            args.out_dir = tune_out;
            args.options.objective = fbkit::parse_metric(tune_objective);
            args.options.report_metrics = fbkit::parse_metrics(tune_metrics);
            args.options.threads = tune_threads;
            args.options.cache_dir = cache_dir_from_env();
            args.force = tune_force;
            fbkit::cmd_tune(args);
        } else if (*exp_cmd) {
            auto spec = fbkit::ExperimentSpec::from_json_file(exp_config);
            auto outcome = fbkit::cmd_experiment(spec, exp_force, cache_dir_from_env());
            for (const auto& [name, file] : outcome.run_files) std::cerr << name << ": " << file.string() << '\n';
        } else if (*shard_cmd) {
            fbkit::refuse_overwrite(shard_out, shard_force);
            fbkit::cmd_shard(shard_corpus, shard_out, shard_window, shard_stride);
        }
    } catch (const std::exception& e) {
        std::cerr << "fbkit: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
