#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "grasp/common.hpp"
#include "grasp/corpus.hpp"
#include "grasp/llm.hpp"
#include "grasp/prompts.hpp"
#include "grasp/retrieval.hpp"

namespace grasp {

// ---------------------------------------------------------------------------
// Answer-string metrics

/// Standard multi-hop QA normalization: lowercase, strip punctuation, drop
/// articles, collapse whitespace. Returns the token list.
inline std::vector<std::string> normalize_answer(const std::string& answer) {
    std::vector<std::string> tokens;
    for (auto& tok : lexical_tokens(answer)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

inline int exact_match(const std::string& prediction,
                       const std::vector<std::string>& gold_answers) {
    if (gold_answers.empty()) throw UsageError("exact_match requires gold answers");
    std::vector<std::string> pred = normalize_answer(prediction);
    for (const auto& gold : gold_answers)
        if (pred == normalize_answer(gold)) return 1;
    return 0;
}

/// Max over gold aliases of the harmonic mean of token precision/recall on
/// normalized bags. Two empty bags count as a perfect match so that EM=1
/// always implies F1=1.
inline double token_f1(const std::string& prediction,
                       const std::vector<std::string>& gold_answers) {
    if (gold_answers.empty()) throw UsageError("token_f1 requires gold answers");
    std::vector<std::string> pred = normalize_answer(prediction);
    std::map<std::string, int> pred_bag;
    for (const auto& t : pred) ++pred_bag[t];
    double best = 0.0;
    for (const auto& gold : gold_answers) {
        std::vector<std::string> g = normalize_answer(gold);
        if (pred.empty() && g.empty()) {
            best = 1.0;
            continue;
        }
        if (pred.empty() || g.empty()) continue;
        std::map<std::string, int> gold_bag;
        for (const auto& t : g) ++gold_bag[t];
        int overlap = 0;
        for (const auto& [tok, n] : pred_bag) {
            auto it = gold_bag.find(tok);
            if (it != gold_bag.end()) overlap += std::min(n, it->second);
        }
        if (overlap == 0) continue;
        double precision = static_cast<double>(overlap) / pred.size();
        double recall = static_cast<double>(overlap) / g.size();
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

// ---------------------------------------------------------------------------
// LLM judge

enum class JudgeMode { lr1, lr2 };
enum class JudgeVerdict { yes, partial, no, unparsed };

inline std::string judge_verdict_name(JudgeVerdict v) {
    switch (v) {
        case JudgeVerdict::yes: return "yes";
        case JudgeVerdict::partial: return "partial";
        case JudgeVerdict::no: return "no";
        case JudgeVerdict::unparsed: return "unparsed";
    }
    return "unparsed";
}

/// Parse the leading verdict token; "Yes, partially" is checked before
/// "Yes".
inline std::optional<JudgeVerdict> parse_judge_verdict(const std::string& raw) {
    std::string t = lower_ascii(trim(raw));
    size_t start = 0;
    while (start < t.size() &&
           !std::isalnum(static_cast<unsigned char>(t[start])))
        ++start;
    t = t.substr(start);
    if (starts_with_icase(t, "yes, partially") ||
        starts_with_icase(t, "yes partially"))
        return JudgeVerdict::partial;
    if (starts_with_icase(t, "yes")) return JudgeVerdict::yes;
    if (starts_with_icase(t, "no")) return JudgeVerdict::no;
    return std::nullopt;
}

/// Render the LR-1 or LR-2 prompt and parse the verdict; one re-prompt on
/// an unparsable response, then "unparsed".
inline JudgeVerdict judge(const std::string& question, const std::string& prediction,
                          const std::vector<std::string>& gold_answers,
                          JudgeMode mode, LlmGateway& gateway,
                          const std::string& question_id) {
    if (gold_answers.empty()) throw UsageError("judge requires gold answers");
    std::string truths;
    for (size_t i = 0; i < gold_answers.size(); ++i) {
        if (i) truths += "; ";
        truths += gold_answers[i];
    }
    CompletionRequest req;
    req.stage = Stage::judge;
    req.user_text = prompts::render(
        mode == JudgeMode::lr1 ? prompts::kJudgeStrict : prompts::kJudgeLenient,
        {{"question", question},
         {"prediction", prediction},
         {"ground_truths", truths}});
    req.question_id = question_id;
    for (int attempt = 0; attempt < 2; ++attempt) {
        CompletionResponse resp = gateway.complete(req);
        if (auto verdict = parse_judge_verdict(resp.text)) {
            // LR-1 has no partial option; a stray "Yes, partially" under
            // LR-1 does not count as strict agreement.
            if (mode == JudgeMode::lr1 && *verdict == JudgeVerdict::partial)
                return JudgeVerdict::no;
            return *verdict;
        }
    }
    return JudgeVerdict::unparsed;
}

// ---------------------------------------------------------------------------
// Retrieval metrics

inline double recall_of(const std::vector<std::string>& retrieved,
                        const std::set<std::string>& gold) {
    if (gold.empty()) throw UsageError("recall requires a non-empty gold set");
    std::set<std::string> seen;
    size_t hit = 0;
    for (const auto& id : retrieved)
        if (gold.count(id) && seen.insert(id).second) ++hit;
    return static_cast<double>(hit) / static_cast<double>(gold.size());
}

/// Binary-gain NDCG with discount 1/log2(rank+1), 1-based ranks, cut at 5.
inline double ndcg_at_5(const std::vector<long>& ranking,
                        const std::set<long>& relevant) {
    if (relevant.empty()) throw UsageError("ndcg_at_5 requires relevant ids");
    const size_t cut = 5;
    double dcg = 0.0;
    for (size_t i = 0; i < ranking.size() && i < cut; ++i)
        if (relevant.count(ranking[i]))
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double ideal = 0.0;
    for (size_t i = 0; i < std::min(cut, relevant.size()); ++i)
        ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return ideal == 0.0 ? 0.0 : dcg / ideal;
}

enum class RetrievalEvalMode { single_pass, simulated_agentic };

inline std::string retrieval_eval_mode_name(RetrievalEvalMode m) {
    return m == RetrievalEvalMode::single_pass ? "single_pass"
                                               : "simulated_agentic";
}

struct RetrievalEvalRow {
    std::string question_id;
    double recall = 0.0;
    double unit_ndcg = 0.0;
    std::vector<std::string> retrieved;
};

struct RetrievalEvalResult {
    RetrievalEvalMode mode = RetrievalEvalMode::single_pass;
    std::vector<RetrievalEvalRow> rows;
    std::vector<std::string> skipped;  // question_ids lacking required golds
    double mean_recall = 0.0;
    double mean_unit_ndcg = 0.0;
};

/// NDCG@5 over the question's hybrid proposition ranking, a unit judged
/// relevant when its source passage is gold.
inline double unit_ndcg_for_question(const GraphIndex& index,
                                     const std::string& question,
                                     const std::set<std::string>& gold,
                                     const RetrievalParams& params,
                                     const std::function<Vec(const std::string&)>& embed) {
    SearchStatement stmt{question, {}, embed(question)};
    std::vector<RankedProposition> ranked =
        search_propositions(index, stmt, params.m, {}, params.lambda);
    std::vector<long> ids;
    std::set<long> relevant;
    for (const auto& rp : ranked) {
        ids.push_back(rp.prop_id);
        if (gold.count(index.proposition(rp.prop_id).passage_id))
            relevant.insert(rp.prop_id);
    }
    if (relevant.empty()) {
        // No gold unit reachable in the pool: score the full unit set.
        for (const auto& p : index.propositions)
            if (gold.count(p.passage_id)) relevant.insert(p.prop_id);
        if (relevant.empty()) return 0.0;
    }
    return ndcg_at_5(ids, relevant);
}

/// Table 2 evaluation: single_pass retrieves k passages for the raw
/// question; simulated_agentic retrieves k per gold sub-question and pools
/// the union. Questions without the required gold fields are skipped.
inline RetrievalEvalResult run_retrieval_eval(
    const GraphIndex& index, const std::vector<QuestionRecord>& records,
    RetrievalEvalMode mode, int k, const RetrievalParams& params,
    const std::function<Vec(const std::string&)>& embed) {
    RetrievalEvalResult result;
    result.mode = mode;
    double recall_sum = 0.0;
    double ndcg_sum = 0.0;
    for (const auto& rec : records) {
        if (rec.gold_passage_ids.empty()) {
            result.skipped.push_back(rec.question_id);
            continue;
        }
        if (mode == RetrievalEvalMode::simulated_agentic &&
            rec.gold_sub_questions.empty()) {
            result.skipped.push_back(rec.question_id);
            continue;
        }
        std::set<std::string> gold(rec.gold_passage_ids.begin(),
                                   rec.gold_passage_ids.end());
        RetrievalEvalRow row;
        row.question_id = rec.question_id;
        if (mode == RetrievalEvalMode::single_pass) {
            for (const auto& sp :
                 single_pass_retrieve(index, rec.question, k, params, embed))
                row.retrieved.push_back(sp.passage_id);
        } else {
            std::set<std::string> pooled;
            for (const auto& subq : rec.gold_sub_questions)
                for (const auto& sp :
                     single_pass_retrieve(index, subq, k, params, embed))
                    pooled.insert(sp.passage_id);
            row.retrieved.assign(pooled.begin(), pooled.end());
        }
        row.recall = recall_of(row.retrieved, gold);
        row.unit_ndcg = params.mode == RetrievalMode::dpr_bypass
                            ? 0.0
                            : unit_ndcg_for_question(index, rec.question, gold,
                                                     params, embed);
        recall_sum += row.recall;
        ndcg_sum += row.unit_ndcg;
        result.rows.push_back(std::move(row));
    }
    if (!result.rows.empty()) {
        result.mean_recall = recall_sum / static_cast<double>(result.rows.size());
        result.mean_unit_ndcg = ndcg_sum / static_cast<double>(result.rows.size());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Difficulty and success economy

struct DifficultyEstimate {
    double r = 0.0;     // smoothed closed-book success rate, in (0,1)
    int correct = 0;
    int samples = 0;    // effective n after exclusions
    int excluded = 0;
};

inline double surprisal_weight(double r) {
    if (r <= 0.0 || r >= 1.0)
        throw DataError("difficulty r must lie in (0,1), got " + std::to_string(r));
    return -std::log2(r);
}

/// Closed-book difficulty: sample the backbone n times at the given
/// temperature and smooth the EM-correct fraction, r = (c + 0.5)/(n + 1).
/// A sample whose backend call fails is retried once, then excluded with n
/// decremented (floored at 1).
inline DifficultyEstimate estimate_difficulty(const std::string& question,
                                              const std::vector<std::string>& gold_answers,
                                              LlmGateway& gateway,
                                              const std::string& question_id,
                                              int n, double temperature = 1.0) {
    if (n < 1) throw UsageError("difficulty sampling requires n >= 1");
    if (gold_answers.empty())
        throw UsageError("difficulty sampling requires gold answers");
    DifficultyEstimate est;
    CompletionRequest req;
    req.stage = Stage::difficulty;
    req.user_text = "Answer the following question as briefly as possible.\n\n"
                    "Question: " + question + "\nAnswer:";
    req.question_id = question_id;
    req.temperature = temperature;
    for (int i = 0; i < n; ++i) {
        std::optional<std::string> text;
        for (int attempt = 0; attempt < 2 && !text; ++attempt) {
            try {
                text = gateway.complete(req).text;
            } catch (const BackendError&) {
            }
        }
        if (!text) {
            ++est.excluded;
            continue;
        }
        if (exact_match(*text, gold_answers)) ++est.correct;
    }
    est.samples = std::max(1, n - est.excluded);
    est.r = (static_cast<double>(est.correct) + 0.5) /
            (static_cast<double>(est.samples) + 1.0);
    return est;
}

struct EvalRecord {
    std::string question_id;
    std::string prediction;
    std::vector<std::string> gold_answers;
    int em = 0;
    double f1 = 0.0;
    std::optional<JudgeVerdict> judge_lr1;
    std::optional<JudgeVerdict> judge_lr2;
    double tokens = 0.0;                 // T_i, indexing share included
    std::optional<double> difficulty_r;  // r_i
    std::vector<std::vector<std::string>> retrieved_passage_ids;  // per hop
};

/// Score prediction vs golds into a record (keeps EM=1 => F1=1 by
/// construction).
inline EvalRecord make_eval_record(const std::string& question_id,
                                   const std::string& prediction,
                                   const std::vector<std::string>& gold_answers,
                                   double tokens) {
    EvalRecord rec;
    rec.question_id = question_id;
    rec.prediction = prediction;
    rec.gold_answers = gold_answers;
    rec.em = exact_match(prediction, gold_answers);
    rec.f1 = rec.em ? 1.0 : token_f1(prediction, gold_answers);
    rec.tokens = tokens;
    return rec;
}

struct SuccessEconomyRow {
    std::string question_id;
    int em = 0;
    double tokens = 0.0;
    std::optional<double> r;
    std::optional<double> w;
};

struct SuccessEconomyReport {
    bool defined = false;          // false when no record has EM=1
    double cw = 0.0;               // tokens per weighted correct answer
    long total_tokens = 0;         // sum of T_i, rounded at report time
    double weighted_correct = 0.0; // sum of w_i * 1[EM_i = 1]
    std::vector<SuccessEconomyRow> rows;
};

/// Eq.: C_w = sum(T_i) / sum(w_i * 1[EM_i=1]) with w_i = -log2(r_i).
/// Records that are EM-correct must carry a difficulty estimate.
inline SuccessEconomyReport success_economy(const std::vector<EvalRecord>& records) {
    std::vector<std::string> missing;
    for (const auto& rec : records)
        if (rec.em == 1 && !rec.difficulty_r) missing.push_back(rec.question_id);
    if (!missing.empty()) {
        std::string msg = "missing difficulty r for correct question(s):";
        for (const auto& id : missing) msg += " " + id;
        throw DataError(msg);
    }
    SuccessEconomyReport report;
    double token_sum = 0.0;
    for (const auto& rec : records) {
        SuccessEconomyRow row;
        row.question_id = rec.question_id;
        row.em = rec.em;
        row.tokens = rec.tokens;
        row.r = rec.difficulty_r;
        if (rec.difficulty_r) row.w = surprisal_weight(*rec.difficulty_r);
        token_sum += rec.tokens;
        if (rec.em == 1) report.weighted_correct += *row.w;
        report.rows.push_back(std::move(row));
    }
    report.total_tokens = std::llround(token_sum);
    report.defined = report.weighted_correct > 0.0;
    if (report.defined)
        report.cw = static_cast<double>(report.total_tokens) /
                    report.weighted_correct;
    return report;
}

// ---------------------------------------------------------------------------
// Planner hop accuracy (Table 4)

struct PlanAccuracyInput {
    std::string question_id;
    int planned = 0;   // number of sub-questions the planner produced
    int hops = 0;      // gold hop count
    int em = 0;
};

struct PlanAccuracyRow {
    int hops = 0;                    // 0 = overall row
    int n = 0;
    double plan_accuracy = 0.0;      // fraction with planned == hops
    double avg_deviation = 0.0;      // mean(planned - hops), signed
    std::optional<double> em_match;
    std::optional<double> em_no_match;
};

/// Plan accuracy per true hop count: the fraction where the planned step
/// count equals the hop count, the mean signed deviation, and EM split by
/// whether the plan matched.
inline std::vector<PlanAccuracyRow> plan_accuracy(
    const std::vector<PlanAccuracyInput>& inputs) {
    std::map<int, std::vector<const PlanAccuracyInput*>> by_hops;
    for (const auto& in : inputs) by_hops[in.hops].push_back(&in);

    auto summarize = [](int hops, const std::vector<const PlanAccuracyInput*>& rows) {
        PlanAccuracyRow out;
        out.hops = hops;
        out.n = static_cast<int>(rows.size());
        int matches = 0;
        double dev = 0.0;
        int em_m = 0, n_m = 0, em_nm = 0, n_nm = 0;
        for (const auto* r : rows) {
            bool match = r->planned == r->hops;
            matches += match ? 1 : 0;
            dev += static_cast<double>(r->planned - r->hops);
            if (match) {
                ++n_m;
                em_m += r->em;
            } else {
                ++n_nm;
                em_nm += r->em;
            }
        }
        out.plan_accuracy = rows.empty() ? 0.0 : static_cast<double>(matches) / rows.size();
        out.avg_deviation = rows.empty() ? 0.0 : dev / rows.size();
        if (n_m) out.em_match = static_cast<double>(em_m) / n_m;
        if (n_nm) out.em_no_match = static_cast<double>(em_nm) / n_nm;
        return out;
    };

    std::vector<PlanAccuracyRow> table;
    std::vector<const PlanAccuracyInput*> all;
    for (const auto& [hops, rows] : by_hops) {
        table.push_back(summarize(hops, rows));
        all.insert(all.end(), rows.begin(), rows.end());
    }
    table.push_back(summarize(0, all));  // overall
    return table;
}

}  // namespace grasp
