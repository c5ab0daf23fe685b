#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <grasp/eval.hpp>
#include <grasp/llm.hpp>

#include "test_util.hpp"

using namespace grasp;
using testutil::axis;

// ---------------------------------------------------------------------------
// Answer-string metrics

TEST_CASE("normalize_answer lowercases, strips punctuation and articles") {
    CHECK(normalize_answer("The Big, Red Dog!") ==
          std::vector<std::string>{"big", "red", "dog"});
    CHECK(normalize_answer("An apple a day") ==
          std::vector<std::string>{"apple", "day"});
    CHECK(normalize_answer("   ") == std::vector<std::string>{});
    CHECK(normalize_answer("15th-century") ==
          std::vector<std::string>{"15th", "century"});
}

TEST_CASE("exact_match ignores case, punctuation, and articles") {
    CHECK(exact_match("The 15th Century.", {"15th century"}) == 1);
    CHECK(exact_match("16th century", {"15th century"}) == 0);
    CHECK(exact_match("Paris", {"London", "paris"}) == 1);
    CHECK(exact_match("", {""}) == 1);
    CHECK_THROWS_AS(exact_match("x", {}), UsageError);
}

TEST_CASE("token_f1 hand values") {
    CHECK(token_f1("the big red dog", {"big red cat"}) ==
          Catch::Approx(2.0 / 3.0).margin(1e-12));
    // Duplicate tokens are clipped by the gold bag.
    CHECK(token_f1("red red", {"red"}) == Catch::Approx(2.0 / 3.0).margin(1e-12));
    CHECK(token_f1("", {""}) == 1.0);
    CHECK(token_f1("", {"x"}) == 0.0);
    CHECK(token_f1("x", {""}) == 0.0);
    CHECK(token_f1("totally disjoint", {"nothing shared"}) == 0.0);
    SECTION("maximum over gold aliases") {
        CHECK(token_f1("big red cat", {"the big red dog", "Big Red Cat"}) == 1.0);
    }
    CHECK_THROWS_AS(token_f1("x", {}), UsageError);
}

TEST_CASE("EM implies perfect F1 across randomized answer pairs") {
    const std::vector<std::string> words = {"alpha", "beta",  "gamma", "the",
                                            "a",     "An",    "Delta", "1678",
                                            "red,",  "dog!",  ""};
    std::mt19937 rng(20260814u);
    auto random_answer = [&] {
        std::uniform_int_distribution<int> len(0, 5);
        std::uniform_int_distribution<size_t> pick(0, words.size() - 1);
        std::string out;
        int n = len(rng);
        for (int i = 0; i < n; ++i) {
            if (!out.empty()) out += ' ';
            out += words[pick(rng)];
        }
        return out;
    };
    int em_hits = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::string> golds = {random_answer()};
        if (trial % 3 == 0) golds.push_back(random_answer());
        // Half the trials reuse a gold (possibly re-decorated) as the
        // prediction so the EM=1 branch is exercised often.
        std::string pred = (trial % 2 == 0) ? golds[0] + "." : random_answer();
        int em = exact_match(pred, golds);
        double f1 = token_f1(pred, golds);
        CHECK(f1 >= 0.0);
        CHECK(f1 <= 1.0);
        if (em == 1) {
            ++em_hits;
            CHECK(f1 == 1.0);
        }
        EvalRecord rec = make_eval_record("q", pred, golds, 10.0);
        if (rec.em == 1) CHECK(rec.f1 == 1.0);
    }
    CHECK(em_hits > 100);  // the generator really does hit the EM branch
}

TEST_CASE("make_eval_record scores prediction against golds") {
    EvalRecord rec = make_eval_record("q7", "The Greystone Abbey",
                                      {"Greystone Abbey"}, 123.0);
    CHECK(rec.question_id == "q7");
    CHECK(rec.em == 1);
    CHECK(rec.f1 == 1.0);
    CHECK(rec.tokens == 123.0);
    CHECK_FALSE(rec.difficulty_r.has_value());

    EvalRecord miss = make_eval_record("q8", "the big red dog",
                                       {"big red cat"}, 1.0);
    CHECK(miss.em == 0);
    CHECK(miss.f1 == Catch::Approx(2.0 / 3.0).margin(1e-12));
}

// ---------------------------------------------------------------------------
// LLM judge

TEST_CASE("parse_judge_verdict reads the leading token") {
    CHECK(parse_judge_verdict("Yes") == JudgeVerdict::yes);
    CHECK(parse_judge_verdict("  yes.") == JudgeVerdict::yes);
    CHECK(parse_judge_verdict("**Yes**") == JudgeVerdict::yes);
    CHECK(parse_judge_verdict("Yes, partially correct.") ==
          JudgeVerdict::partial);
    CHECK(parse_judge_verdict("yes partially") == JudgeVerdict::partial);
    CHECK(parse_judge_verdict("No, the prediction is wrong.") ==
          JudgeVerdict::no);
    CHECK_FALSE(parse_judge_verdict("Maybe").has_value());
    CHECK_FALSE(parse_judge_verdict("").has_value());
    CHECK_FALSE(parse_judge_verdict("123 yes").has_value());
}

TEST_CASE("judge joins gold aliases and respects mode semantics") {
    auto mock = std::make_shared<MockLlmBackend>(8, 0);
    LlmGateway gateway(mock);

    SECTION("gold aliases appear joined by semicolons") {
        mock->push_fixture("Yes", Stage::judge);
        JudgeVerdict v = judge("Q?", "pred", {"first gold", "second gold"},
                               JudgeMode::lr2, gateway, "q1");
        CHECK(v == JudgeVerdict::yes);
        auto calls = mock->recorded_calls();
        REQUIRE(calls.size() == 1);
        CHECK_THAT(calls[0].user_text, Catch::Matchers::ContainsSubstring(
                                           "first gold; second gold"));
        CHECK_THAT(calls[0].user_text,
                   Catch::Matchers::ContainsSubstring("pred"));
    }
    SECTION("one re-prompt is allowed") {
        mock->push_fixture("Hmm, let me think.");
        mock->push_fixture("No");
        CHECK(judge("Q?", "p", {"g"}, JudgeMode::lr2, gateway, "q1") ==
              JudgeVerdict::no);
        CHECK(mock->recorded_calls().size() == 2);
    }
    SECTION("two unparsable responses yield unparsed") {
        mock->push_fixture("Hmm.");
        mock->push_fixture("Still hmm.");
        CHECK(judge("Q?", "p", {"g"}, JudgeMode::lr2, gateway, "q1") ==
              JudgeVerdict::unparsed);
    }
    SECTION("strict mode downgrades a partial verdict") {
        mock->push_fixture("Yes, partially");
        CHECK(judge("Q?", "p", {"g"}, JudgeMode::lr1, gateway, "q1") ==
              JudgeVerdict::no);
        mock->push_fixture("Yes, partially");
        CHECK(judge("Q?", "p", {"g"}, JudgeMode::lr2, gateway, "q1") ==
              JudgeVerdict::partial);
    }
    SECTION("gold answers are required") {
        CHECK_THROWS_AS(judge("Q?", "p", {}, JudgeMode::lr1, gateway, "q1"),
                        UsageError);
    }
}

// ---------------------------------------------------------------------------
// Retrieval metrics

TEST_CASE("recall_of counts unique gold hits") {
    CHECK(recall_of({"a", "b", "x"}, {"a", "b", "c"}) ==
          Catch::Approx(2.0 / 3.0).margin(1e-12));
    CHECK(recall_of({"a", "a"}, {"a", "b"}) == 0.5);
    CHECK(recall_of({}, {"a"}) == 0.0);
    CHECK_THROWS_AS(recall_of({"a"}, {}), UsageError);
}

TEST_CASE("ndcg_at_5 hand values") {
    CHECK(ndcg_at_5({9, 4, 7}, {4}) ==
          Catch::Approx(1.0 / std::log2(3.0)).margin(1e-12));
    CHECK(ndcg_at_5({1, 2, 3}, {1, 2, 3}) == Catch::Approx(1.0).margin(1e-12));
    SECTION("hits beyond the cutoff do not count") {
        CHECK(ndcg_at_5({1, 2, 3, 4, 5, 6}, {6}) == 0.0);
    }
    SECTION("the ideal DCG is capped at five relevant units") {
        CHECK(ndcg_at_5({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5, 6, 7}) ==
              Catch::Approx(1.0).margin(1e-12));
    }
    CHECK_THROWS_AS(ndcg_at_5({1}, {}), UsageError);
}

TEST_CASE("retrieval evaluation on the worked corpus") {
    testutil::WorkedSetup setup = testutil::make_worked_setup();
    auto embed = [&](const std::string& text) {
        return setup.gateway->embed_one(text, EmbedPurpose::statement);
    };
    RetrievalParams params;

    QuestionRecord wx1;
    wx1.question_id = "wx1";
    wx1.question =
        "In which century was the monastery founded by the teacher of Saint "
        "Alaric established?";
    wx1.gold_answers = {"15th century"};
    wx1.gold_passage_ids = {"p1", "p2", "p3"};
    wx1.gold_sub_questions = {
        "Who was the teacher of Saint Alaric?",
        "Which monastery did Bishop Godwin of Merton found?",
        "In which century was Greystone Abbey established?"};

    SECTION("single_pass ranks gold passages first") {
        RetrievalEvalResult r = run_retrieval_eval(
            setup.index, {wx1}, RetrievalEvalMode::single_pass, 4, params, embed);
        REQUIRE(r.rows.size() == 1);
        CHECK(r.rows[0].retrieved ==
              std::vector<std::string>{"p3", "p2", "p1", "p4"});
        CHECK(r.rows[0].recall == 1.0);
        CHECK(r.rows[0].unit_ndcg == Catch::Approx(1.0).margin(1e-12));
        CHECK(r.mean_recall == 1.0);
        CHECK(r.skipped.empty());
    }
    SECTION("simulated_agentic pools the per-sub-question retrievals") {
        RetrievalEvalResult r = run_retrieval_eval(
            setup.index, {wx1}, RetrievalEvalMode::simulated_agentic, 2, params,
            embed);
        REQUIRE(r.rows.size() == 1);
        CHECK(r.rows[0].retrieved ==
              std::vector<std::string>{"p1", "p2", "p3"});
        CHECK(r.rows[0].recall == 1.0);
        CHECK(r.mean_recall == 1.0);
    }
    SECTION("records without the required golds are skipped") {
        QuestionRecord no_gold = wx1;
        no_gold.question_id = "ng";
        no_gold.gold_passage_ids.clear();
        QuestionRecord no_subq = wx1;
        no_subq.question_id = "ns";
        no_subq.gold_sub_questions.clear();

        RetrievalEvalResult sp = run_retrieval_eval(
            setup.index, {wx1, no_gold, no_subq},
            RetrievalEvalMode::single_pass, 4, params, embed);
        CHECK(sp.rows.size() == 2);  // no_subq still eligible here
        CHECK(sp.skipped == std::vector<std::string>{"ng"});

        RetrievalEvalResult sim = run_retrieval_eval(
            setup.index, {wx1, no_gold, no_subq},
            RetrievalEvalMode::simulated_agentic, 4, params, embed);
        CHECK(sim.rows.size() == 1);
        CHECK(sim.skipped == std::vector<std::string>{"ng", "ns"});
    }
    SECTION("unit NDCG falls back to the full unit set when the pool misses") {
        RetrievalParams tight = params;
        tight.m = 2;  // pool = the two cosine hits, props 4 and 2
        std::set<std::string> gold{"p4"};
        CHECK(unit_ndcg_for_question(setup.index, wx1.question, gold, tight,
                                     embed) == 0.0);
        std::set<std::string> missing{"not-a-passage"};
        CHECK(unit_ndcg_for_question(setup.index, wx1.question, missing, tight,
                                     embed) == 0.0);
    }
}

TEST_CASE("dpr retrieval rows skip unit NDCG") {
    GraphIndex g = testutil::build_graph(
        {{"d1", {{"One.", axis(4, 0)}}}, {"d2", {{"Two.", axis(4, 1)}}}}, {});
    g.passage_embeddings["d1"] = axis(4, 0);
    g.passage_embeddings["d2"] = axis(4, 1);
    g.manifest.has_passage_embeddings = true;

    RetrievalParams params;
    params.mode = RetrievalMode::dpr_bypass;
    QuestionRecord rec;
    rec.question_id = "d";
    rec.question = "about one";
    rec.gold_passage_ids = {"d1"};
    auto embed = [&](const std::string&) { return axis(4, 0); };

    RetrievalEvalResult r = run_retrieval_eval(
        g, {rec}, RetrievalEvalMode::single_pass, 1, params, embed);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].retrieved == std::vector<std::string>{"d1"});
    CHECK(r.rows[0].recall == 1.0);
    CHECK(r.rows[0].unit_ndcg == 0.0);
}

// ---------------------------------------------------------------------------
// Difficulty estimation

TEST_CASE("estimate_difficulty smooths the closed-book success rate") {
    auto mock = std::make_shared<MockLlmBackend>(8, 0);
    LlmGateway gateway(mock);

    SECTION("five of ten correct gives r = 1/2 and unit weight") {
        for (int i = 0; i < 5; ++i) mock->push_fixture("The Gold Answer.");
        for (int i = 0; i < 5; ++i) mock->push_fixture("something else");
        DifficultyEstimate est =
            estimate_difficulty("Q?", {"gold answer"}, gateway, "q1", 10);
        CHECK(est.correct == 5);
        CHECK(est.samples == 10);
        CHECK(est.excluded == 0);
        CHECK(est.r == 0.5);
        CHECK(surprisal_weight(est.r) == 1.0);
    }
    SECTION("all correct keeps r below one") {
        for (int i = 0; i < 10; ++i) mock->push_fixture("gold answer");
        DifficultyEstimate est =
            estimate_difficulty("Q?", {"gold answer"}, gateway, "q1", 10);
        CHECK(est.r == Catch::Approx(10.5 / 11.0).margin(1e-12));
    }
    SECTION("none correct keeps r above zero") {
        for (int i = 0; i < 10; ++i) mock->push_fixture("wrong");
        DifficultyEstimate est =
            estimate_difficulty("Q?", {"gold answer"}, gateway, "q1", 10);
        CHECK(est.r == Catch::Approx(0.5 / 11.0).margin(1e-12));
    }
    SECTION("the sampling prompt and temperature are fixed") {
        mock->push_fixture("gold answer", Stage::difficulty);
        estimate_difficulty("What is it?", {"gold answer"}, gateway, "q1", 1);
        auto calls = mock->recorded_calls();
        REQUIRE(calls.size() == 1);
        CHECK(calls[0].user_text ==
              "Answer the following question as briefly as possible.\n\n"
              "Question: What is it?\nAnswer:");
        CHECK(calls[0].temperature == 1.0);
    }
    SECTION("argument validation") {
        CHECK_THROWS_AS(estimate_difficulty("Q?", {"g"}, gateway, "q1", 0),
                        UsageError);
        CHECK_THROWS_AS(estimate_difficulty("Q?", {}, gateway, "q1", 1),
                        UsageError);
    }
}

namespace {

// Backend whose Nth complete() calls fail transiently; used to drive the
// difficulty sampler's retry-then-exclude path.
class FlakyBackend : public LlmBackend {
public:
    explicit FlakyBackend(std::set<int> fail_on) : fail_on_(std::move(fail_on)) {}

    BackendCompletion complete(Stage, const std::string&, const std::string&,
                               double, const std::optional<std::string>&) override {
        ++calls_;
        if (fail_on_.count(calls_)) throw TransientBackendError("flaky call");
        return {"gold answer", 3, 2};
    }
    std::vector<Vec> embed(const std::vector<std::string>&, EmbedPurpose) override {
        throw BackendError("embed not supported in this test");
    }
    std::string chat_model_name() const override { return "flaky-chat"; }
    std::string embedding_model_name() const override { return "flaky-embed"; }

    int calls() const { return calls_; }

private:
    std::set<int> fail_on_;
    int calls_ = 0;
};

GatewayOptions no_retry_options() {
    GatewayOptions opts;
    opts.max_retries = 0;
    opts.sleeper = [](double) {};
    return opts;
}

}  // namespace

TEST_CASE("a failing sample is retried once, then excluded") {
    SECTION("double failure excludes the sample and shrinks n") {
        auto flaky = std::make_shared<FlakyBackend>(std::set<int>{2, 3});
        LlmGateway gateway(flaky, no_retry_options());
        DifficultyEstimate est =
            estimate_difficulty("Q?", {"gold answer"}, gateway, "q1", 3);
        CHECK(flaky->calls() == 4);
        CHECK(est.correct == 2);
        CHECK(est.excluded == 1);
        CHECK(est.samples == 2);
        CHECK(est.r == Catch::Approx(2.5 / 3.0).margin(1e-12));
    }
    SECTION("a single failure is absorbed by the retry") {
        auto flaky = std::make_shared<FlakyBackend>(std::set<int>{1});
        LlmGateway gateway(flaky, no_retry_options());
        DifficultyEstimate est =
            estimate_difficulty("Q?", {"gold answer"}, gateway, "q1", 1);
        CHECK(est.correct == 1);
        CHECK(est.excluded == 0);
        CHECK(est.r == Catch::Approx(1.5 / 2.0).margin(1e-12));
    }
    SECTION("the effective sample count is floored at one") {
        auto flaky = std::make_shared<FlakyBackend>(std::set<int>{1, 2});
        LlmGateway gateway(flaky, no_retry_options());
        DifficultyEstimate est =
            estimate_difficulty("Q?", {"gold answer"}, gateway, "q1", 1);
        CHECK(est.correct == 0);
        CHECK(est.excluded == 1);
        CHECK(est.samples == 1);
        CHECK(est.r == Catch::Approx(0.5 / 2.0).margin(1e-12));
    }
}

// ---------------------------------------------------------------------------
// Success economy

TEST_CASE("surprisal_weight demands r strictly inside (0,1)") {
    CHECK(surprisal_weight(0.5) == 1.0);
    CHECK(surprisal_weight(0.25) == 2.0);
    CHECK_THROWS_AS(surprisal_weight(0.0), DataError);
    CHECK_THROWS_AS(surprisal_weight(1.0), DataError);
    CHECK_THROWS_AS(surprisal_weight(1.2), DataError);
}

TEST_CASE("success_economy divides tokens by weighted correct answers") {
    EvalRecord a = make_eval_record("qa", "gold", {"gold"}, 400.0);
    a.difficulty_r = 0.25;  // w = 2
    EvalRecord b = make_eval_record("qb", "wrong", {"gold"}, 600.0);

    SuccessEconomyReport report = success_economy({a, b});
    CHECK(report.defined);
    CHECK(report.total_tokens == 1000);
    CHECK(report.weighted_correct == 2.0);
    CHECK(report.cw == 500.0);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].w == 2.0);
    CHECK_FALSE(report.rows[1].w.has_value());

    SECTION("no correct answers leaves the metric undefined") {
        SuccessEconomyReport r = success_economy({b});
        CHECK_FALSE(r.defined);
        CHECK(r.cw == 0.0);
        CHECK(r.total_tokens == 600);
    }
    SECTION("a correct record without difficulty is an error") {
        EvalRecord c = make_eval_record("qc", "gold", {"gold"}, 1.0);
        CHECK_THROWS_WITH(success_economy({c}),
                          Catch::Matchers::ContainsSubstring(
                              "missing difficulty r") &&
                              Catch::Matchers::ContainsSubstring("qc"));
    }
    SECTION("incorrect records may carry difficulty without effect") {
        EvalRecord d = make_eval_record("qd", "wrong", {"gold"}, 100.0);
        d.difficulty_r = 0.5;
        SuccessEconomyReport r = success_economy({a, d});
        CHECK(r.weighted_correct == 2.0);
        CHECK(r.total_tokens == 500);
        CHECK(r.cw == 250.0);
    }
}

// ---------------------------------------------------------------------------
// Planner hop accuracy

TEST_CASE("plan_accuracy groups by hop count with an overall row") {
    std::vector<PlanAccuracyInput> inputs = {
        {"q1", 2, 2, 1},  // match, correct
        {"q2", 3, 2, 0},  // over-plan, wrong
        {"q3", 3, 3, 0},  // match, wrong
        {"q4", 3, 3, 1},  // match, correct
    };
    std::vector<PlanAccuracyRow> table = plan_accuracy(inputs);
    REQUIRE(table.size() == 3);

    const PlanAccuracyRow& h2 = table[0];
    CHECK(h2.hops == 2);
    CHECK(h2.n == 2);
    CHECK(h2.plan_accuracy == 0.5);
    CHECK(h2.avg_deviation == 0.5);
    REQUIRE(h2.em_match.has_value());
    CHECK(*h2.em_match == 1.0);
    REQUIRE(h2.em_no_match.has_value());
    CHECK(*h2.em_no_match == 0.0);

    const PlanAccuracyRow& h3 = table[1];
    CHECK(h3.hops == 3);
    CHECK(h3.n == 2);
    CHECK(h3.plan_accuracy == 1.0);
    CHECK(h3.avg_deviation == 0.0);
    CHECK(*h3.em_match == 0.5);
    CHECK_FALSE(h3.em_no_match.has_value());

    const PlanAccuracyRow& all = table[2];
    CHECK(all.hops == 0);
    CHECK(all.n == 4);
    CHECK(all.plan_accuracy == 0.75);
    CHECK(all.avg_deviation == 0.25);
    CHECK(*all.em_match == Catch::Approx(2.0 / 3.0).margin(1e-12));
    CHECK(*all.em_no_match == 0.0);

    SECTION("empty input yields a single empty overall row") {
        std::vector<PlanAccuracyRow> empty = plan_accuracy({});
        REQUIRE(empty.size() == 1);
        CHECK(empty[0].hops == 0);
        CHECK(empty[0].n == 0);
        CHECK_FALSE(empty[0].em_match.has_value());
    }
}
