#include <gtest/gtest.h>

#include "fbkit/dense.hpp"
#include "../support/properties.hpp"
#include "../support/test_support.hpp"

using namespace fbkit;

namespace {

EmbeddingVector v(std::string id, std::vector<double> c) { return {std::move(id), std::move(c)}; }

std::vector<std::string> ids(const ResultList& list) {
    std::vector<std::string> out;
    for (const auto& e : list) out.push_back(e.id);
    return out;
}

}  // namespace

TEST(DenseSearch, ZeroQueryRanksById) {
    auto store = VectorStore::from_vectors({v("c#p0", {1, 2}), v("a#p0", {3, 4}), v("b#p0", {-1, 0})});
    auto got = dense_search(store, std::vector<double>{0, 0});
    EXPECT_EQ(ids(got), (std::vector<std::string>{"a#p0", "b#p0", "c#p0"}));
    for (const auto& e : got) EXPECT_EQ(e.score, 0.0);
}

TEST(DenseSearch, HandDotProducts) {
    auto store = VectorStore::from_vectors({v("x", {0.2, 5}), v("y", {0.9, -1}), v("z", {-0.5, 3})});
    auto got = dense_search(store, std::vector<double>{1, 0});
    EXPECT_EQ(ids(got), (std::vector<std::string>{"y", "x", "z"}));
    EXPECT_DOUBLE_EQ(got[0].score, 0.9);
    EXPECT_DOUBLE_EQ(got[2].score, -0.5);
}

TEST(DenseSearch, DuplicateVectorsAreAdjacentAndEqual) {
    auto store = VectorStore::from_vectors({v("p1", {1, 1}), v("p2", {0, 2}), v("p3", {1, 1})});
    auto got = dense_search(store, std::vector<double>{1, 0.5});
    ASSERT_EQ(ids(got), (std::vector<std::string>{"p1", "p3", "p2"}));
    EXPECT_EQ(got[0].score, got[1].score);
}

TEST(DenseSearch, DimensionMismatchIsAnError) {
    auto store = VectorStore::from_vectors({v("p", {1, 1})});
    EXPECT_THROW(dense_search(store, std::vector<double>{1, 0, 0}), Error);
    EXPECT_THROW(VectorStore::from_vectors({v("p", {1, 1}), v("q", {1})}), Error);
}

TEST(DenseSearch, MatchesBruteForceOnRandomStore) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<EmbeddingVector> vecs;
    for (int i = 0; i < 3000; ++i) {
        std::vector<double> c(12);
        for (auto& x : c) x = g(rng);
        vecs.push_back(v("d" + std::to_string(i) + "#p0", c));
    }
    auto store = VectorStore::from_vectors(vecs);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> q(12);
        for (auto& x : q) x = g(rng);
        std::vector<std::pair<double, std::string>> brute;
        for (const auto& e : vecs) {
            double s = 0;
            for (int i = 0; i < 12; ++i) s += q[static_cast<std::size_t>(i)] * e.components[static_cast<std::size_t>(i)];
            brute.emplace_back(-s, e.id);
        }
        std::sort(brute.begin(), brute.end());
        auto got = dense_search(store, q, 100);
        ASSERT_EQ(got.size(), 100u);
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].id, brute[i].second);
            EXPECT_NEAR(got[i].score, -brute[i].first, 1e-6);
        }
    }
}

TEST(MaxPassage, TakesBestPassage) {
    PassageMap map = {{"d#p0", "d"}, {"d#p1", "d"}};
    auto got = max_passage({{"d#p1", 5.0}, {"d#p0", 3.0}}, map);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0], (ScoredId{"d", 5.0}));
}

TEST(MaxPassage, SinglePassageDocsKeepOrder) {
    PassageMap map = {{"x#p0", "x"}, {"y#p0", "y"}, {"z#p0", "z"}};
    auto got = max_passage({{"z#p0", 3.0}, {"x#p0", 2.0}, {"y#p0", 1.0}}, map);
    EXPECT_EQ(ids(got), (std::vector<std::string>{"z", "x", "y"}));
}

TEST(MaxPassage, HandTwoDocRanking) {
    PassageMap map = {{"a#p0", "a"}, {"a#p1", "a"}, {"b#p0", "b"}, {"b#p1", "b"}};
    auto got = max_passage({{"b#p0", 0.9}, {"a#p1", 0.8}, {"a#p0", 0.7}, {"b#p1", 0.1}}, map);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0], (ScoredId{"b", 0.9}));
    EXPECT_EQ(got[1], (ScoredId{"a", 0.8}));
}

TEST(MaxPassage, UnmappedPassageIsAnError) {
    EXPECT_THROW(max_passage({{"x", 1.0}}, PassageMap{}), Error);
}

TEST(MaxPassage, IdempotentOnDocumentRuns) {
    PassageMap identity = {{"a", "a"}, {"b", "b"}, {"c", "c"}};
    ResultList run = {{"b", 2.0}, {"a", 1.0}, {"c", 1.0}};
    EXPECT_EQ(max_passage(run, identity), run);
    EXPECT_EQ(max_passage(max_passage(run, identity), identity), run);
}

TEST(Rocchio, IdentityWhenBetaIsZero) {
    auto q = v("q", {0.3, -1.7, 2.25});
    auto out = rocchio_combine(q, std::vector{v("f", {9, 9, 9})}, 1.0, 0.0);
    EXPECT_EQ(out.components, q.components);
}

TEST(Rocchio, HandArithmetic) {
    auto out = rocchio_combine(v("q", {1, 0}), std::vector{v("a", {0, 1}), v("b", {0, 3})}, 0.5, 0.5);
    EXPECT_EQ(out.components, (std::vector<double>{0.5, 1.0}));
}

TEST(Rocchio, RepeatedFeedbackVectorGivesSameResult) {
    auto q = v("q", {0.1, 0.2, 0.3});
    auto f = v("f", {0.7, -0.3, 1.0 / 3.0});
    auto one = rocchio_combine(q, std::vector{f}, 0.6, 0.4);
    for (int m = 2; m <= 50; ++m) {
        std::vector<EmbeddingVector> fb(static_cast<std::size_t>(m), f);
        EXPECT_EQ(rocchio_combine(q, fb, 0.6, 0.4).components, one.components) << m;
    }
}

TEST(Rocchio, EmptyFeedbackIsAnError) {
    EXPECT_THROW(rocchio_combine(v("q", {1}), std::vector<EmbeddingVector>{}, 0.5, 0.5), Error);
}

TEST(DensePRF, SaturatedDepthUsesMeanOfAllPassages) {
    auto store = VectorStore::from_vectors({v("a#p0", {1, 0}), v("b#p0", {0, 1}), v("c#p0", {1, 1})});
    auto q = v("q", {1, 0.2});
    auto got = dense_prf(store, q, {0.5, 0.5, 10});
    // mean = (2/3, 2/3); combined = (0.5 + 1/3, 0.1 + 1/3).
    const double x = 0.5 + 1.0 / 3.0, y = 0.1 + 1.0 / 3.0;
    ASSERT_EQ(ids(got), (std::vector<std::string>{"c", "a", "b"}));
    EXPECT_NEAR(got[0].score, x + y, 1e-12);
    EXPECT_NEAR(got[1].score, x, 1e-12);
    EXPECT_NEAR(got[2].score, y, 1e-12);
}

TEST(DensePRF, ZeroBetaReproducesFirstPass) {
    auto store = VectorStore::from_vectors(
        {v("a#p0", {1, 0}), v("b#p0", {0, 1}), v("c#p0", {1, 1}), v("c#p1", {-2, 0.5})});
    auto q = v("q", {0.3, 0.9});
    EXPECT_EQ(dense_prf(store, q, {1.0, 0.0, 2}), dense_baseline(store, q));
}

TEST(DensePRF, FivePassageHandTrace) {
    // Passages: a#p0 (1,0) a#p1 (0,2) b#p0 (2,1) c#p0 (-1,1) d#p0 (0.5,0.5).
    // q = (1,1): first pass b#p0 3, a#p1 2, ... -> feedback {b#p0, a#p1},
    // mean (1, 1.5), combined 0.5*(1,1) + 0.5*(1,1.5) = (1, 1.25).
    // Second pass: a#p0 1, a#p1 2.5, b#p0 3.25, c#p0 0.25, d#p0 1.125.
    auto store = VectorStore::from_vectors({v("a#p0", {1, 0}), v("a#p1", {0, 2}), v("b#p0", {2, 1}),
                                            v("c#p0", {-1, 1}), v("d#p0", {0.5, 0.5})});
    auto got = dense_prf(store, v("q", {1, 1}), {0.5, 0.5, 2});
    ASSERT_EQ(got.size(), 4u);
    EXPECT_EQ(got[0], (ScoredId{"b", 3.25}));
    EXPECT_EQ(got[1], (ScoredId{"a", 2.5}));
    EXPECT_EQ(got[2], (ScoredId{"d", 1.125}));
    EXPECT_EQ(got[3], (ScoredId{"c", 0.25}));
}

TEST(DenseGRF, QueryAsOwnFeedbackIsBaseline) {
    auto store = VectorStore::from_vectors({v("a#p0", {1, 0}), v("b#p0", {0, 1}), v("b#p1", {0.7, 0.7})});
    auto q = v("q", {0.25, 0.5});
    EXPECT_EQ(dense_grf(store, q, std::vector{q}, 0.5, 0.5), dense_baseline(store, q));
}

TEST(DenseGRF, ThreeGeneratedVectorsHandTrace) {
    // mean of (3,0), (0,3), (0,0) = (1,1); 0.5*(2,0) + 0.5*(1,1) = (1.5, 0.5).
    auto store = VectorStore::from_vectors({v("a#p0", {1, 0}), v("b#p0", {0, 1}), v("c#p0", {1, 1})});
    auto gens = std::vector{v("g1", {3, 0}), v("g2", {0, 3}), v("g3", {0, 0})};
    auto got = dense_grf(store, v("q", {2, 0}), gens, 0.5, 0.5);
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0], (ScoredId{"c", 2.0}));
    EXPECT_EQ(got[1], (ScoredId{"a", 1.5}));
    EXPECT_EQ(got[2], (ScoredId{"b", 0.5}));
}

TEST(DenseGRF, PermutationOfGeneratedVectorsIsBitIdentical) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<EmbeddingVector> store_vecs, gens;
    for (int i = 0; i < 40; ++i) store_vecs.push_back(v("d" + std::to_string(i) + "#p0", {u(rng), u(rng), u(rng)}));
    for (int i = 0; i < 7; ++i) gens.push_back(v("g" + std::to_string(i), {u(rng), u(rng), u(rng)}));
    auto store = VectorStore::from_vectors(store_vecs);
    auto q = v("q", {u(rng), u(rng), u(rng)});
    auto reference = dense_grf(store, q, gens, 0.4, 0.6);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(gens.begin(), gens.end(), rng);
        EXPECT_EQ(dense_grf(store, q, gens, 0.4, 0.6), reference);
    }
}

TEST(DenseGRF, SingleSearchAndNoFirstPass) {
    auto store = VectorStore::from_vectors({v("a#p0", {1, 0}), v("b#p0", {0, 1})});
    store.reset_counters();
    dense_grf(store, v("q", {1, 1}), std::vector{v("g", {0, 1})}, 0.5, 0.5);
    EXPECT_EQ(store.scan_count(), 1u);
    EXPECT_EQ(store.lookup_count(), 0u);
    store.reset_counters();
    dense_prf(store, v("q", {1, 1}), {0.5, 0.5, 1});
    EXPECT_EQ(store.scan_count(), 2u);
}

TEST(DenseGRF, MissingGeneratedVectorsNameQuery) {
    auto store = VectorStore::from_vectors({v("a#p0", {1, 0})});
    try {
        dense_grf(store, v("q9", {1, 1}), std::vector<EmbeddingVector>{}, 0.5, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("q9"), std::string::npos);
    }
}

TEST(VectorStoreFiles, ManifestWithMappingFile) {
    testing_support::ScratchDir dir;
    testing_support::spit(dir / "vecs.jsonl", "{\"id\":\"s1\",\"vector\":[1,0]}\n{\"id\":\"s2\",\"vector\":[0,1]}\n");
    testing_support::spit(dir / "map.tsv", "s1\tdocA\ns2\tdocA\n");
    testing_support::spit(dir / "store.json", R"({"dimension":2,"vectors":"vecs.jsonl","mapping":"map.tsv"})");
    auto store = VectorStore::load(dir / "store.json");
    EXPECT_EQ(store.dimension(), 2u);
    auto got = dense_baseline(store, v("q", {1, 2}));
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0], (ScoredId{"docA", 2.0}));
    testing_support::spit(dir / "bad.json", R"({"dimension":3,"vectors":"vecs.jsonl","mapping":"map.tsv"})");
    EXPECT_THROW(VectorStore::load(dir / "bad.json"), Error);
}

TEST(Rocchio, RandomizedAlgebra) {
    auto tally = testing_support::rocchio_properties(200, 11);
    EXPECT_TRUE(tally.ok()) << (tally.failures.empty() ? "no checks" : tally.failures.front());
}
