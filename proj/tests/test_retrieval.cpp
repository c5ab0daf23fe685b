#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <grasp/graph.hpp>
#include <grasp/llm.hpp>
#include <grasp/retrieval.hpp>

#include "test_util.hpp"

using namespace grasp;
using testutil::axis;
using testutil::sparse_vec;

namespace {

/// Corpus engineered so the BM25 inputs are round numbers: three
/// propositions with lexical lengths 3/4/5 (average 4), the query term
/// appearing once, in the shortest one only.
GraphIndex make_zeta_index() {
    return testutil::build_graph(
        {{"z1", {{"Zeta churns restlessly", sparse_vec(4, {{0, 0.8}, {1, 0.6}})}}},
         {"z2", {{"one two three four", axis(4, 1)}}},
         {"z3", {{"five six seven eight nine", axis(4, 2)}}}},
        {});
}

const double kZetaBm25 = std::log(5.0 / 3.0) * 2.2 / 1.975;

SearchStatement zeta_query() {
    return {"About zeta", {"zeta"}, axis(4, 0)};
}

GraphIndex make_entity_index() {
    // One passage with three axis-aligned propositions; a degree-3 hub
    // entity and a degree-1 satellite sharing proposition 0.
    return testutil::build_graph(
        {{"e1",
          {{"First fact.", axis(4, 0)},
           {"Second fact.", axis(4, 1)},
           {"Third fact.", axis(4, 2)}}}},
        {{"Hub", "Topic", {0, 1, 2}, axis(4, 3)},
         {"Solo", "Topic", {0}, axis(4, 3)}});
}

GraphIndex make_vote_index() {
    return testutil::build_graph(
        {{"v1", {{"A one.", axis(4, 0)}, {"A two.", axis(4, 1)}}},
         {"v2", {{"B one.", axis(4, 2)}}}},
        {});
}

}  // namespace

TEST_CASE("bm25_score matches the hand-derived value") {
    GraphIndex index = make_zeta_index();
    // idf = ln((3 - 1 + 0.5) / (1 + 0.5)) = ln(5/3); tf-part =
    // 1 * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 3/4)) = 2.2 / 1.975.
    CHECK(bm25_score(index, {"zeta"}, 0) ==
          Catch::Approx(kZetaBm25).margin(1e-12));

    SECTION("duplicate query terms count once") {
        CHECK(bm25_score(index, {"zeta zeta", "Zeta"}, 0) ==
              Catch::Approx(kZetaBm25).margin(1e-12));
    }
    SECTION("keywords are tokenized; each distinct term contributes") {
        CHECK(bm25_score(index, {"zeta churns"}, 0) ==
              Catch::Approx(2.0 * kZetaBm25).margin(1e-12));
    }
    SECTION("terms absent from the proposition contribute nothing") {
        CHECK(bm25_score(index, {"four"}, 0) == 0.0);
        CHECK(bm25_score(index, {"zeta"}, 1) == 0.0);
    }
    SECTION("unknown vocabulary is skipped") {
        CHECK(bm25_score(index, {"xylophone"}, 0) == 0.0);
    }
    SECTION("unknown prop id throws") {
        CHECK_THROWS_AS(bm25_score(index, {"zeta"}, 99), DataError);
    }
}

TEST_CASE("common terms are clamped to zero idf, never negative") {
    GraphIndex index = testutil::build_graph(
        {{"c1", {{"common alpha", axis(4, 0)}}},
         {"c2", {{"common beta", axis(4, 1)}}}},
        {});
    // df = N = 2 -> ln(0.5/2.5) < 0 -> clamped.
    CHECK(bm25_score(index, {"common"}, 0) == 0.0);
    SearchStatement stmt{"q", {"common"}, axis(4, 0)};
    CHECK(hybrid_score(index, stmt, 0, 0.2) == 1.0);  // pure cosine survives
}

TEST_CASE("hybrid score composes cosine and damped bm25") {
    GraphIndex index = make_zeta_index();
    SearchStatement stmt = zeta_query();
    const double expected = 0.8 + 0.2 * std::log(1.0 + kZetaBm25);
    CHECK(hybrid_score(index, stmt, 0, 0.2) ==
          Catch::Approx(expected).margin(1e-12));
    CHECK(hybrid_score(index, stmt, 1, 0.2) == Catch::Approx(0.0).margin(1e-12));
    // lambda scales only the sparse half.
    CHECK(hybrid_score(index, stmt, 0, 0.0) == Catch::Approx(0.8).margin(1e-12));
}

TEST_CASE("search_propositions ranks, breaks ties by id, and excludes first") {
    GraphIndex index = make_zeta_index();
    SearchStatement stmt = zeta_query();

    std::vector<RankedProposition> ranked =
        search_propositions(index, stmt, 50, {}, 0.2);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].prop_id == 0);
    CHECK(ranked[0].rank == 1);
    CHECK(ranked[1].prop_id == 1);  // 0.0 ties resolved toward lower id
    CHECK(ranked[2].prop_id == 2);
    CHECK(ranked[2].rank == 3);

    SECTION("exclusions apply before the cutoff") {
        std::vector<RankedProposition> rest =
            search_propositions(index, stmt, 2, {0}, 0.2);
        REQUIRE(rest.size() == 2);
        CHECK(rest[0].prop_id == 1);
        CHECK(rest[1].prop_id == 2);
        CHECK(rest[0].rank == 1);
    }
    SECTION("m truncates") {
        CHECK(search_propositions(index, stmt, 1, {}, 0.2).size() == 1);
    }
    SECTION("m must be positive") {
        CHECK_THROWS_AS(search_propositions(index, stmt, 0, {}, 0.2), UsageError);
    }
    SECTION("excluding everything yields an empty list") {
        CHECK(search_propositions(index, stmt, 5, {0, 1, 2}, 0.2).empty());
    }
}

TEST_CASE("aggregate_entities applies the degree-damped sum") {
    GraphIndex index = make_entity_index();
    std::vector<RankedProposition> ranked = {{0, 0.7, 1}, {1, 0.8, 2}};

    std::vector<ScoredEntity> scored = aggregate_entities(index, ranked, 5);
    REQUIRE(scored.size() == 2);
    CHECK(scored[0].entity_id == 0);
    CHECK(scored[0].score == Catch::Approx(0.75).margin(1e-12));  // 1.5/sqrt(4)
    CHECK(scored[1].entity_id == 1);
    CHECK(scored[1].score == Catch::Approx(0.7 / std::sqrt(2.0)).margin(1e-12));

    SECTION("k truncates after sorting") {
        auto top = aggregate_entities(index, ranked, 1);
        REQUIRE(top.size() == 1);
        CHECK(top[0].entity_id == 0);
    }
    SECTION("ties fall to the lower entity id") {
        // Only proposition 0 is ranked: Hub gets 0.5/2, Solo 0.5/sqrt(2);
        // make them tie by using two single-prop entities instead.
        GraphIndex pair = testutil::build_graph(
            {{"p", {{"Shared.", axis(4, 0)}}}},
            {{"A", "T", {0}, axis(4, 1)}, {"B", "T", {0}, axis(4, 2)}});
        auto out = aggregate_entities(pair, {{0, 0.5, 1}}, 5);
        REQUIRE(out.size() == 2);
        CHECK(out[0].entity_id == 0);
        CHECK(out[1].entity_id == 1);
        CHECK(out[0].score == out[1].score);
    }
    SECTION("entities without ranked propositions are absent") {
        auto out = aggregate_entities(index, {{1, 0.9, 1}}, 5);
        REQUIRE(out.size() == 1);
        CHECK(out[0].entity_id == 0);  // Solo holds only prop 0
    }
    SECTION("k must be positive") {
        CHECK_THROWS_AS(aggregate_entities(index, ranked, 0), UsageError);
    }
}

TEST_CASE("rank_pool_by_cosine ignores bm25 and keeps ids stable") {
    GraphIndex index = make_zeta_index();
    SearchStatement stmt = zeta_query();
    auto ranked = rank_pool_by_cosine(index, stmt, {2, 1, 0});
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].prop_id == 0);
    CHECK(ranked[0].score == Catch::Approx(0.8).margin(1e-12));
    CHECK(ranked[1].prop_id == 1);  // tie at 0.0 -> lower id first
    CHECK(ranked[2].prop_id == 2);
    CHECK(ranked[1].rank == 2);
}

TEST_CASE("vote_passages implements rank voting") {
    GraphIndex index = make_vote_index();

    SECTION("a single proposition at rank 1 is worth one half") {
        auto out = vote_passages(index, {{0, 0.9, 1}}, 5, Weighting::rankvote);
        REQUIRE(out.size() == 1);
        CHECK(out[0].passage_id == "v1");
        CHECK(out[0].score == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("votes accumulate per source passage") {
        std::vector<RankedProposition> pool = {{0, 0.9, 1}, {2, 0.5, 2},
                                               {1, 0.4, 3}};
        auto out = vote_passages(index, pool, 5, Weighting::rankvote);
        REQUIRE(out.size() == 2);
        CHECK(out[0].passage_id == "v1");
        CHECK(out[0].score == Catch::Approx(0.75).margin(1e-12));  // 1/2 + 1/4
        CHECK(out[1].passage_id == "v2");
        CHECK(out[1].score == Catch::Approx(1.0 / 3.0).margin(1e-12));
    }
    SECTION("uniform weighting counts propositions") {
        std::vector<RankedProposition> pool = {{0, 0.9, 1}, {2, 0.5, 2},
                                               {1, 0.4, 3}};
        auto out = vote_passages(index, pool, 5, Weighting::uniform);
        REQUIRE(out.size() == 2);
        CHECK(out[0].passage_id == "v1");
        CHECK(out[0].score == 2.0);
        CHECK(out[1].score == 1.0);
    }
    SECTION("score ties order by passage id") {
        auto out = vote_passages(index, {{0, 0.9, 2}, {2, 0.8, 2}}, 5,
                                 Weighting::rankvote);
        REQUIRE(out.size() == 2);
        CHECK(out[0].passage_id == "v1");
        CHECK(out[1].passage_id == "v2");
        CHECK(out[0].score == out[1].score);
    }
    SECTION("d truncates") {
        auto out = vote_passages(index, {{0, 0.9, 1}, {2, 0.5, 2}}, 1,
                                 Weighting::rankvote);
        REQUIRE(out.size() == 1);
        CHECK(out[0].passage_id == "v1");
    }
    SECTION("d must be positive") {
        CHECK_THROWS_AS(vote_passages(index, {}, 0, Weighting::rankvote),
                        UsageError);
    }
}

TEST_CASE("rank_passages pools selected entities minus exclusions") {
    GraphIndex index = testutil::build_graph(
        {{"r1", {{"One.", axis(4, 0)}, {"Two.", axis(4, 1)}}},
         {"r2", {{"Three.", axis(4, 2)}}}},
        {{"A", "T", {0, 1}, axis(4, 3)}, {"B", "T", {1, 2}, axis(4, 3)}});
    SearchStatement stmt{"q", {}, sparse_vec(4, {{1, 0.6}, {2, 0.8}})};

    PassageRanking out =
        rank_passages(index, stmt, {0, 1}, 2, Weighting::rankvote, {0});
    REQUIRE(out.ranked_pool.size() == 2);  // union {0,1,2} minus {0}
    CHECK(out.ranked_pool[0].prop_id == 2);  // cos 0.8
    CHECK(out.ranked_pool[1].prop_id == 1);  // cos 0.6
    REQUIRE(out.passages.size() == 2);
    CHECK(out.passages[0].passage_id == "r2");  // 1/2
    CHECK(out.passages[0].score == Catch::Approx(0.5).margin(1e-12));
    CHECK(out.passages[1].passage_id == "r1");  // 1/3
    CHECK(out.passages[1].score == Catch::Approx(1.0 / 3.0).margin(1e-12));

    SECTION("a fully excluded pool is reported as empty, not an error") {
        PassageRanking empty =
            rank_passages(index, stmt, {0}, 2, Weighting::rankvote, {0, 1});
        CHECK(empty.passages.empty());
        CHECK(empty.ranked_pool.empty());
    }
}

TEST_CASE("dpr_rank_passages orders stored passage embeddings by cosine") {
    GraphIndex index = testutil::build_graph({{"d1", {}}, {"d2", {}}, {"d3", {}}},
                                             {});
    SECTION("refuses to run without embeddings") {
        CHECK_THROWS_WITH(dpr_rank_passages(index, axis(4, 0), 2),
                          Catch::Matchers::ContainsSubstring(
                              "no passage embeddings"));
    }
    SECTION("ranks by dot product with id tie-break") {
        index.passage_embeddings["d1"] = axis(4, 0);
        index.passage_embeddings["d2"] = sparse_vec(4, {{0, 0.6}, {1, 0.8}});
        index.passage_embeddings["d3"] = axis(4, 1);
        Vec query = sparse_vec(4, {{0, 0.6}, {1, 0.8}});
        auto out = dpr_rank_passages(index, query, 2);
        REQUIRE(out.size() == 2);
        CHECK(out[0].passage_id == "d2");
        CHECK(out[0].score == Catch::Approx(1.0).margin(1e-12));
        CHECK(out[1].passage_id == "d3");
        CHECK(out[1].score == Catch::Approx(0.8).margin(1e-12));
    }
}

TEST_CASE("single_pass_retrieve covers all three modes") {
    GraphIndex graph = testutil::build_graph(
        {{"s1", {{"One.", axis(4, 0)}, {"Two.", axis(4, 1)}}},
         {"s2", {{"Three.", axis(4, 2)}}}},
        {{"A", "T", {0, 1}, axis(4, 3)}, {"B", "T", {2}, axis(4, 3)}});
    auto embed = [](const std::string&) { return axis(4, 0); };
    RetrievalParams params;

    SECTION("full mode routes through entities") {
        auto out = single_pass_retrieve(graph, "q", 2, params, embed);
        REQUIRE(out.size() == 2);
        CHECK(out[0].passage_id == "s1");  // 1/2 + 1/3
        CHECK(out[0].score == Catch::Approx(5.0 / 6.0).margin(1e-12));
        CHECK(out[1].passage_id == "s2");  // 1/4
        CHECK(out[1].score == Catch::Approx(0.25).margin(1e-12));
    }
    SECTION("an entity-less index votes the hybrid pool directly") {
        GraphIndex flat = testutil::build_graph(
            {{"s1", {{"One.", axis(4, 0)}, {"Two.", axis(4, 1)}}},
             {"s2", {{"Three.", axis(4, 2)}}}},
            {});
        auto out = single_pass_retrieve(flat, "q", 2, params, embed);
        REQUIRE(out.size() == 2);
        CHECK(out[0].passage_id == "s1");
        CHECK(out[0].score == Catch::Approx(5.0 / 6.0).margin(1e-12));
        CHECK(out[1].score == Catch::Approx(0.25).margin(1e-12));
    }
    SECTION("dpr mode uses passage embeddings") {
        graph.passage_embeddings["s1"] = axis(4, 1);
        graph.passage_embeddings["s2"] = axis(4, 0);
        graph.manifest.has_passage_embeddings = true;
        RetrievalParams dpr = params;
        dpr.mode = RetrievalMode::dpr_bypass;
        auto out = single_pass_retrieve(graph, "q", 1, dpr, embed);
        REQUIRE(out.size() == 1);
        CHECK(out[0].passage_id == "s2");
    }
    SECTION("k must be positive") {
        CHECK_THROWS_AS(single_pass_retrieve(graph, "q", 0, params, embed),
                        UsageError);
    }
}

// ---------------------------------------------------------------------------
// Randomized agreement with brute-force re-implementations of the scoring
// formulas, over hash-embedded micro-indexes.

namespace {

struct RandomIndex {
    GraphIndex index;
    std::vector<std::string> vocab;
};

RandomIndex make_random_index(unsigned seed, int n_passages, int n_props,
                              int n_entities) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> vocab = {"alpha", "beta",  "gamma", "delta",
                                      "epsilon", "zeta", "eta",   "theta"};
    MockLlmBackend hasher(16, seed);

    std::vector<testutil::PassageSpec> passages(n_passages);
    for (int i = 0; i < n_passages; ++i)
        passages[static_cast<size_t>(i)].id = "rp" + std::to_string(i);
    for (int i = 0; i < n_props; ++i) {
        std::string text;
        int words = 2 + static_cast<int>(rng() % 4);
        for (int w = 0; w < words; ++w) {
            if (w) text += " ";
            text += vocab[rng() % vocab.size()];
        }
        size_t host = rng() % static_cast<size_t>(n_passages);
        passages[host].props.push_back(
            {text, hasher.hash_vector("prop " + std::to_string(i) + " " + text)});
    }
    // Drop passages that received no propositions to keep ids contiguous.
    std::vector<testutil::PassageSpec> used;
    for (auto& ps : passages)
        if (!ps.props.empty()) used.push_back(std::move(ps));

    long total_props = 0;
    for (const auto& ps : used) total_props += static_cast<long>(ps.props.size());

    std::vector<testutil::EntitySpec> entities;
    for (int e = 0; e < n_entities; ++e) {
        std::set<long> members;
        int want = 1 + static_cast<int>(rng() % 4);
        for (int t = 0; t < want; ++t)
            members.insert(static_cast<long>(rng() % static_cast<size_t>(total_props)));
        entities.push_back({"ent" + std::to_string(e), "Type",
                            {members.begin(), members.end()},
                            hasher.hash_vector("entity " + std::to_string(e))});
    }
    return {testutil::build_graph(used, entities), vocab};
}

double oracle_bm25(const GraphIndex& index,
                   const std::vector<std::string>& keywords, long prop_id) {
    std::set<std::string> terms;
    for (const auto& kw : keywords)
        for (const auto& tok : lexical_tokens(kw)) terms.insert(tok);
    double n = static_cast<double>(index.bm25.lengths.size());
    double avgdl = index.bm25.average_length();
    double len = index.bm25.lengths[static_cast<size_t>(prop_id)];
    double score = 0.0;
    for (const auto& term : terms) {
        auto df_it = index.bm25.doc_freq.find(term);
        auto tf_it = index.bm25.term_counts[static_cast<size_t>(prop_id)].find(term);
        if (df_it == index.bm25.doc_freq.end() ||
            tf_it == index.bm25.term_counts[static_cast<size_t>(prop_id)].end())
            continue;
        double idf = std::log((n - df_it->second + 0.5) / (df_it->second + 0.5));
        if (idf < 0) idf = 0;
        double tf = tf_it->second;
        score += idf * tf * (1.2 + 1.0) /
                 (tf + 1.2 * (1.0 - 0.75 + 0.75 * len / avgdl));
    }
    return score;
}

double oracle_sigma(const GraphIndex& index, const SearchStatement& stmt,
                    long prop_id, double lambda) {
    double c = 0.0;
    const Vec& e = index.proposition(prop_id).embedding;
    for (size_t i = 0; i < e.size(); ++i) c += stmt.embedding[i] * e[i];
    return c + lambda * std::log(1.0 + oracle_bm25(index, stmt.keywords, prop_id));
}

}  // namespace

TEST_CASE("retrieval primitives agree with brute-force oracles") {
    for (unsigned seed = 1; seed <= 25; ++seed) {
        DYNAMIC_SECTION("seed " << seed) {
            RandomIndex r = make_random_index(seed, 5, 30, 8);
            const GraphIndex& index = r.index;
            std::mt19937_64 rng(seed * 977 + 13);
            MockLlmBackend hasher(16, 4242);

            SearchStatement stmt;
            stmt.statement = "query " + std::to_string(seed);
            stmt.embedding = hasher.hash_vector(stmt.statement);
            int n_kw = 1 + static_cast<int>(rng() % 3);
            for (int i = 0; i < n_kw; ++i)
                stmt.keywords.push_back(r.vocab[rng() % r.vocab.size()]);

            std::set<long> excluded;
            for (int i = 0; i < 5; ++i)
                excluded.insert(static_cast<long>(rng() % index.propositions.size()));
            int m = 1 + static_cast<int>(rng() % 20);

            // --- search_propositions vs full brute ranking
            std::vector<RankedProposition> brute;
            for (const auto& p : index.propositions) {
                if (excluded.count(p.prop_id)) continue;
                brute.push_back({p.prop_id,
                                 oracle_sigma(index, stmt, p.prop_id, 0.2), 0});
            }
            std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.prop_id < b.prop_id;
            });
            if (brute.size() > static_cast<size_t>(m))
                brute.resize(static_cast<size_t>(m));

            auto ranked = search_propositions(index, stmt, m, excluded, 0.2);
            REQUIRE(ranked.size() == brute.size());
            for (size_t i = 0; i < ranked.size(); ++i) {
                CHECK(ranked[i].prop_id == brute[i].prop_id);
                CHECK(ranked[i].score ==
                      Catch::Approx(brute[i].score).margin(1e-12));
                CHECK(ranked[i].rank == static_cast<int>(i) + 1);
                CHECK_FALSE(excluded.count(ranked[i].prop_id));
            }

            // --- lambda = 0 degenerates to pure cosine order
            auto cosine_only = search_propositions(index, stmt, m, excluded, 0.0);
            std::vector<RankedProposition> cos_brute;
            for (const auto& p : index.propositions) {
                if (excluded.count(p.prop_id)) continue;
                double c = dot(stmt.embedding, p.embedding);
                cos_brute.push_back({p.prop_id, c, 0});
            }
            std::sort(cos_brute.begin(), cos_brute.end(),
                      [](const auto& a, const auto& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.prop_id < b.prop_id;
                      });
            if (cos_brute.size() > static_cast<size_t>(m))
                cos_brute.resize(static_cast<size_t>(m));
            REQUIRE(cosine_only.size() == cos_brute.size());
            for (size_t i = 0; i < cosine_only.size(); ++i)
                CHECK(cosine_only[i].prop_id == cos_brute[i].prop_id);

            // --- aggregate_entities vs brute accumulation
            int k = 1 + static_cast<int>(rng() % 6);
            std::map<long, double> sums;
            for (const auto& rp : ranked)
                for (long eid : index.entities_of_prop(rp.prop_id))
                    sums[eid] += rp.score;
            std::vector<ScoredEntity> agg_brute;
            for (const auto& [eid, sum] : sums)
                agg_brute.push_back(
                    {eid, sum / std::sqrt(1.0 + double(index.degree(eid)))});
            std::sort(agg_brute.begin(), agg_brute.end(),
                      [](const auto& a, const auto& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.entity_id < b.entity_id;
                      });
            if (agg_brute.size() > static_cast<size_t>(k))
                agg_brute.resize(static_cast<size_t>(k));

            auto agg = aggregate_entities(index, ranked, k);
            REQUIRE(agg.size() == agg_brute.size());
            for (size_t i = 0; i < agg.size(); ++i) {
                CHECK(agg[i].entity_id == agg_brute[i].entity_id);
                CHECK(agg[i].score ==
                      Catch::Approx(agg_brute[i].score).margin(1e-12));
            }

            // --- rank_passages pool contents and vote agreement
            if (!agg.empty()) {
                std::vector<long> selected;
                for (const auto& c : agg) selected.push_back(c.entity_id);
                PassageRanking pr = rank_passages(index, stmt, selected, 3,
                                                  Weighting::rankvote, excluded);
                std::set<long> expected_pool;
                for (long eid : selected)
                    for (long pid : index.entity(eid).prop_ids)
                        if (!excluded.count(pid)) expected_pool.insert(pid);
                std::set<long> got_pool;
                for (const auto& rp : pr.ranked_pool) got_pool.insert(rp.prop_id);
                CHECK(got_pool == expected_pool);
                for (size_t i = 1; i < pr.ranked_pool.size(); ++i) {
                    bool ordered =
                        pr.ranked_pool[i - 1].score > pr.ranked_pool[i].score ||
                        (pr.ranked_pool[i - 1].score == pr.ranked_pool[i].score &&
                         pr.ranked_pool[i - 1].prop_id < pr.ranked_pool[i].prop_id);
                    CHECK(ordered);
                }

                std::map<std::string, double> votes;
                for (const auto& rp : pr.ranked_pool)
                    votes[index.proposition(rp.prop_id).passage_id] +=
                        1.0 / (1.0 + rp.rank);
                for (const auto& sp : pr.passages)
                    CHECK(sp.score ==
                          Catch::Approx(votes.at(sp.passage_id)).margin(1e-12));
                for (size_t i = 1; i < pr.passages.size(); ++i)
                    CHECK(pr.passages[i - 1].score >= pr.passages[i].score);
            }
        }
    }
}
