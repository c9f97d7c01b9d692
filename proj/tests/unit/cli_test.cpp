#include <gtest/gtest.h>

#include "fbkit/pipeline.hpp"
#include "../support/test_support.hpp"

using namespace fbkit;
using testing_support::fixture;
using testing_support::quote;
using testing_support::run_cli;
using testing_support::ScratchDir;

namespace {

std::string synthetic(const std::string& name) { return quote(fixture("synthetic/" + name)); }

std::vector<std::string> ids_of(const ResultList& list) {
    std::vector<std::string> out;
    for (const auto& e : list) out.push_back(e.id);
    return out;
}

}  // namespace

TEST(CliIndex, BuildsIndexWithManifest) {
    ScratchDir dir;
    testing_support::spit(dir / "c.jsonl",
                          "{\"doc_id\":\"a\",\"contents\":\"apples\"}\n{\"doc_id\":\"b\",\"contents\":\"pears\"}\n"
                          "{\"doc_id\":\"c\",\"title\":\"fruit\",\"contents\":\"plums\"}\n");
    auto r = run_cli("index --corpus " + quote(dir / "c.jsonl") + " --out " + quote(dir / "idx"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_TRUE(std::filesystem::exists(dir / "idx" / "manifest.json"));
    EXPECT_EQ(InvertedIndex::load(dir / "idx").doc_count(), 3u);
}

TEST(CliIndex, MissingCorpusIsNamed) {
    ScratchDir dir;
    auto r = run_cli("index --corpus " + quote(dir / "nope.jsonl") + " --out " + quote(dir / "idx"));
    EXPECT_NE(r.exit_code, 0);
    EXPECT_NE(r.output.find((dir / "nope.jsonl").string()), std::string::npos) << r.output;
}

TEST(CliIndex, RefusesToOverwriteWithoutForce) {
    ScratchDir dir;
    const auto cmd = "index --corpus " + synthetic("corpus.jsonl") + " --out " + quote(dir / "idx");
    ASSERT_EQ(run_cli(cmd).exit_code, 0);
    auto again = run_cli(cmd);
    EXPECT_NE(again.exit_code, 0);
    EXPECT_NE(again.output.find("--force"), std::string::npos) << again.output;
    EXPECT_EQ(run_cli(cmd + " --force").exit_code, 0);
}

TEST(CliRetrieve, SparseBaselineMatchesLibrary) {
    ScratchDir dir;
    ASSERT_EQ(run_cli("index --corpus " + synthetic("corpus.jsonl") + " --out " + quote(dir / "idx")).exit_code, 0);
    auto r = run_cli("retrieve --paradigm sparse --feedback none --index " + quote(dir / "idx") + " --topics " +
                     synthetic("topics.tsv") + " --out " + quote(dir / "bm25.run"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    auto run = read_run(dir / "bm25.run");
    auto idx = build_index(read_corpus(fixture("synthetic/corpus.jsonl")), AnalyzerConfig{});
    for (const auto& t : read_topics(fixture("synthetic/topics.tsv"))) {
        auto expected = bm25_search(idx, query_from_text(t.query_id, t.text, AnalyzerConfig{}), {0.9, 0.4});
        EXPECT_EQ(ids_of(run.queries.at(t.query_id)), ids_of(expected)) << t.query_id;
    }
    EXPECT_EQ(run.run_tag, "sparse+none_b0.4_k10.9");
}

TEST(CliRetrieve, DenseGRFMatchesLibraryComposition) {
    ScratchDir dir;
    auto r = run_cli("retrieve --paradigm dense --feedback grf --doc-vectors " +
                     quote(fixture("dense/passages.jsonl")) + " --query-vectors " +
                     quote(fixture("dense/queries.jsonl")) + " --gen-vectors " +
                     quote(fixture("dense/generated.jsonl")) + " --topics " + quote(fixture("dense/topics.tsv")) +
                     " --alpha 0.6 --beta 0.4 --out " + quote(dir / "dense.run"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    auto run = read_run(dir / "dense.run");

    auto store = VectorStore::load(fixture("dense/passages.jsonl"));
    std::map<std::string, EmbeddingVector> queries;
    for (auto& e : read_embeddings(fixture("dense/queries.jsonl"))) queries[e.vec.id] = e.vec;
    auto gens = group_by_query(read_embeddings(fixture("dense/generated.jsonl")));
    for (const auto& [qid, q] : queries) {
        std::vector<EmbeddingVector> g;
        for (const auto& item : gens.at(qid)) g.push_back(item.vec);
        auto combined = rocchio_combine(q, g, 0.6, 0.4);
        auto expected = max_passage(dense_search(store, combined.components), store.passage_map());
        EXPECT_EQ(ids_of(run.queries.at(qid)), ids_of(expected)) << qid;
    }
}

TEST(CliRetrieve, LearnedSparsePRFHandTrace) {
    // Same trace as the library test: a = 17/12, b = 1/4. Run files keep six
    // decimals.
    ScratchDir dir;
    auto r = run_cli("retrieve --paradigm learned-sparse --feedback prf --doc-vectors " +
                     quote(fixture("learned_sparse/passages.jsonl")) + " --query-vectors " +
                     quote(fixture("learned_sparse/queries.jsonl")) + " --topics " +
                     quote(fixture("learned_sparse/topics.tsv")) + " --fb-docs 1 --fb-terms 1 --orig-weight 0.5 --out " +
                     quote(dir / "ls.run"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    auto list = read_run(dir / "ls.run").queries.at("q1");
    ASSERT_EQ(list.size(), 2u);
    EXPECT_EQ(list[0].id, "a");
    EXPECT_NEAR(list[0].score, 17.0 / 12.0, 5e-7);
    EXPECT_EQ(list[1].id, "b");
    EXPECT_NEAR(list[1].score, 0.25, 5e-7);
}

TEST(CliRetrieve, MissingGeneratedContentListsQueries) {
    ScratchDir dir;
    testing_support::spit(dir / "gen.jsonl", "{\"query_id\":\"q01\",\"gen_type\":\"answer\",\"text\":\"words\"}\n");
    auto r = run_cli("retrieve --paradigm sparse --feedback grf --corpus " + synthetic("corpus.jsonl") +
                     " --topics " + synthetic("topics.tsv") + " --gen-docs " + quote(dir / "gen.jsonl") +
                     " --out " + quote(dir / "x.run"));
    EXPECT_NE(r.exit_code, 0);
    EXPECT_NE(r.output.find("q02"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("q20"), std::string::npos) << r.output;
    EXPECT_FALSE(std::filesystem::exists(dir / "x.run"));
}

TEST(CliRetrieve, ForceRerunIsByteIdentical) {
    ScratchDir dir;
    const auto cmd = "retrieve --paradigm sparse --feedback prf --corpus " + synthetic("corpus.jsonl") +
                     " --topics " + synthetic("topics.tsv") + " --out " + quote(dir / "prf.run");
    ASSERT_EQ(run_cli(cmd).exit_code, 0);
    auto first = testing_support::slurp(dir / "prf.run");
    EXPECT_NE(run_cli(cmd).exit_code, 0);
    ASSERT_EQ(run_cli(cmd + " --force").exit_code, 0);
    EXPECT_EQ(testing_support::slurp(dir / "prf.run"), first);
}

TEST(CliFuse, HalfLambdaFollowsRRF) {
    ScratchDir dir;
    const auto base = " --corpus " + synthetic("corpus.jsonl") + " --topics " + synthetic("topics.tsv");
    ASSERT_EQ(run_cli("retrieve --feedback prf" + base + " --out " + quote(dir / "prf.run")).exit_code, 0);
    ASSERT_EQ(run_cli("retrieve --feedback grf --gen-docs " + synthetic("generated.jsonl") + base + " --out " +
                      quote(dir / "grf.run"))
                  .exit_code,
              0);
    auto r = run_cli("fuse --prf-run " + quote(dir / "prf.run") + " --grf-run " + quote(dir / "grf.run") +
                     " --lambda 0.5 --out " + quote(dir / "fused.run"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    auto fused = read_run(dir / "fused.run");
    EXPECT_EQ(fused.run_tag, "wrrf_l0.5_k60");
    std::vector<RankedRun> both = {read_run(dir / "prf.run"), read_run(dir / "grf.run")};
    auto plain = rrf(both);
    for (const auto& [qid, list] : plain.queries) EXPECT_EQ(ids_of(fused.queries.at(qid)), ids_of(list)) << qid;
}

TEST(CliEval, PerfectRunScoresOne) {
    ScratchDir dir;
    testing_support::spit(dir / "perfect.run", "q1 Q0 d1 1 2.0 perfect\nq1 Q0 d9 2 1.0 perfect\n");
    testing_support::spit(dir / "qrels.txt", "q1 0 d1 2\nq1 0 d5 0\n");
    auto r = run_cli("eval --run " + quote(dir / "perfect.run") + " --qrels " + quote(dir / "qrels.txt") +
                     " --metrics ndcg@10,map");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("all\tndcg@10\t1.000000"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("all\tmap\t1.000000"), std::string::npos) << r.output;
}

TEST(CliTTest, ReportsStatistic) {
    ScratchDir dir;
    // Recall@1 per query: run a hits q1..q4, run b hits q1 only, so the
    // differences are (0, 1, 1, 1, 0).
    std::string a, b, qrels;
    for (int q = 1; q <= 5; ++q) {
        const auto qid = "q" + std::to_string(q);
        const std::string hit = qid + " Q0 rel 1 2 x\n" + qid + " Q0 junk 2 1 x\n";
        const std::string miss = qid + " Q0 junk 1 2 x\n" + qid + " Q0 rel 2 1 x\n";
        a += q <= 4 ? hit : miss;
        b += q == 1 ? hit : miss;
        qrels += qid + " 0 rel 1\n";
    }
    testing_support::spit(dir / "a.run", a);
    testing_support::spit(dir / "b.run", b);
    testing_support::spit(dir / "qrels.txt", qrels);
    auto r = run_cli("ttest --run-a " + quote(dir / "a.run") + " --run-b " + quote(dir / "b.run") + " --qrels " +
                     quote(dir / "qrels.txt") + " --metric recall@1");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("n\t5\n"), std::string::npos) << r.output;
    // mean 0.6, sample variance 0.3, t = 0.6 / sqrt(0.3 / 5)
    auto at = r.output.find("t_statistic\t");
    ASSERT_NE(at, std::string::npos) << r.output;
    const double t = std::stod(r.output.substr(at + 12));
    EXPECT_NEAR(t, 0.6 / std::sqrt(0.3 / 5.0), 1e-9);
    EXPECT_NEAR(t, testing_support::oracle_t({0, 1, 1, 1, 0}), 1e-9);
}

TEST(CliTune, SingletonGridEqualsEval) {
    ScratchDir dir;
    const auto base = " --corpus " + synthetic("corpus.jsonl") + " --topics " + synthetic("topics.tsv");
    testing_support::spit(dir / "grid.json", R"({"fb_docs":[2],"orig_weight":[0.6]})");
    auto tune = run_cli("tune --feedback prf" + base + " --grid " + quote(dir / "grid.json") + " --folds " +
                        synthetic("folds.json") + " --qrels " + synthetic("qrels.txt") + " --out " +
                        quote(dir / "tune"));
    ASSERT_EQ(tune.exit_code, 0) << tune.output;
    ASSERT_EQ(run_cli("retrieve --feedback prf --fb-docs 2 --orig-weight 0.6" + base + " --out " +
                      quote(dir / "plain.run"))
                  .exit_code,
              0);
    auto eval = run_cli("eval --run " + quote(dir / "plain.run") + " --qrels " + synthetic("qrels.txt"));
    ASSERT_EQ(eval.exit_code, 0);
    EXPECT_EQ(testing_support::slurp(dir / "tune" / "eval.tsv"), eval.output);
}

TEST(CliShard, WritesPassages) {
    ScratchDir dir;
    testing_support::spit(dir / "c.jsonl", "{\"doc_id\":\"d\",\"title\":\"T\",\"contents\":\"One. Two. Three.\"}\n");
    ASSERT_EQ(run_cli("shard --corpus " + quote(dir / "c.jsonl") + " --out " + quote(dir / "p.jsonl")).exit_code, 0);
    auto passages = read_corpus(dir / "p.jsonl");
    ASSERT_EQ(passages.size(), 1u);
    EXPECT_EQ(passages[0].doc_id, "d#p0");
    EXPECT_EQ(passages[0].contents, "T One. Two. Three.");
}
