#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "grasp/agent.hpp"
#include "grasp/config.hpp"
#include "grasp/corpus.hpp"
#include "grasp/eval.hpp"
#include "grasp/graph_io.hpp"
#include "grasp/http_backend.hpp"
#include "grasp/indexer.hpp"
#include "grasp/llm.hpp"

namespace grasp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Shared command plumbing

struct BackendBundle {
    std::shared_ptr<LlmBackend> backend;
    std::shared_ptr<MockLlmBackend> mock;  // non-null only for the mock backend
    std::unique_ptr<LlmGateway> gateway;
};

inline BackendBundle make_gateway(const RunConfig& cfg) {
    BackendBundle bundle;
    if (cfg.backend == "mock") {
        auto mock = std::make_shared<MockLlmBackend>(
            static_cast<size_t>(cfg.embedding_dim), cfg.seed);
        if (!cfg.fixtures.empty()) mock->load_fixture_file(cfg.fixtures);
        if (!cfg.vector_table.empty()) mock->load_vector_table(cfg.vector_table);
        bundle.mock = mock;
        bundle.backend = mock;
    } else {
        HttpBackendConfig hc;
        hc.base_url = cfg.base_url;
        hc.chat_model = cfg.chat_model;
        hc.embedding_model = cfg.embedding_model;
        bundle.backend = std::make_shared<HttpLlmBackend>(hc);
    }
    GatewayOptions opts;
    opts.max_in_flight = cfg.max_in_flight;
    opts.max_retries = cfg.max_retries;
    opts.jitter_seed = cfg.seed;
    bundle.gateway = std::make_unique<LlmGateway>(bundle.backend, opts);
    return bundle;
}

inline void print_resolved_config(const RunConfig& cfg, std::ostream& out) {
    out << "resolved config: " << cfg.to_json().dump() << "\n";
}

/// Shortest JSON round-trip representation; keeps report files and CSVs
/// deterministic without fixed-width padding.
inline std::string num_repr(double v) { return ojson(v).dump(); }

inline void atomic_write(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw DataError("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// Trace files are named after the question id with path-hostile bytes
/// replaced so ids remain usable as filenames on any filesystem.
inline std::string trace_filename(const std::string& question_id) {
    std::string out;
    for (char c : question_id) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
            c == '_' || c == '.')
            out += c;
        else
            out += '_';
    }
    if (out.empty()) out = "_";
    return out + ".json";
}

inline json read_json_file_strict(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

struct StoredTrace {
    std::string question_id;
    std::string final_answer;
    std::string failure_reason;
    long tokens_total = 0;
    int planned = 0;  // sub-questions in the plan
};

inline StoredTrace load_stored_trace(const fs::path& path) {
    json j = read_json_file_strict(path);
    StoredTrace t;
    try {
        t.question_id = j.at("question_id").get<std::string>();
        t.final_answer = j.at("final_answer").get<std::string>();
        t.failure_reason = j.value("failure_reason", std::string());
        t.tokens_total = j.at("tokens").at("total").get<long>();
        t.planned = static_cast<int>(j.at("plan").at("sub_questions").size());
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": not a trace file: " + e.what());
    }
    return t;
}

/// Indexing token record written by `index`, read back for amortization.
inline long read_indexing_tokens(const fs::path& index_dir,
                                 std::vector<std::string>* warnings) {
    fs::path path = index_dir / "indexing_tokens.json";
    if (!fs::exists(path)) {
        if (warnings)
            warnings->push_back("no " + path.string() +
                                "; amortized indexing share is 0");
        return 0;
    }
    json j = read_json_file_strict(path);
    try {
        return j.at("total_tokens").get<long>();
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

/// Load traces for the gold questions; golds without a trace are reported
/// in `missing`, trace files matching no gold id in `orphans`.
inline std::vector<StoredTrace> collect_traces(
    const std::vector<QuestionRecord>& golds, const fs::path& traces_dir,
    std::vector<std::string>& missing, std::vector<std::string>& orphans) {
    std::vector<StoredTrace> traces;
    std::set<std::string> expected;
    for (const auto& gold : golds) {
        fs::path path = traces_dir / trace_filename(gold.question_id);
        expected.insert(trace_filename(gold.question_id));
        if (!fs::exists(path)) {
            missing.push_back(gold.question_id);
            continue;
        }
        StoredTrace t = load_stored_trace(path);
        if (t.question_id != gold.question_id)
            throw DataError(path.string() + ": trace question_id '" +
                            t.question_id + "' does not match '" +
                            gold.question_id + "'");
        traces.push_back(std::move(t));
    }
    if (fs::exists(traces_dir))
        for (const auto& entry : fs::directory_iterator(traces_dir)) {
            if (!entry.is_regular_file()) continue;
            fs::path p = entry.path();
            if (p.extension() != ".json") continue;
            if (!expected.count(p.filename().string()))
                orphans.push_back(p.filename().string());
        }
    std::sort(orphans.begin(), orphans.end());
    return traces;
}

inline std::string verdict_cell(const std::optional<JudgeVerdict>& v) {
    return v ? judge_verdict_name(*v) : std::string();
}

inline void write_per_question_csv(const std::vector<EvalRecord>& records,
                                   const fs::path& path) {
    std::string csv = "question_id,em,f1,judge_lr1,judge_lr2,tokens,r,w\n";
    for (const auto& rec : records) {
        csv += TokenLedger::csv_field(rec.question_id) + ',' +
               std::to_string(rec.em) + ',' + num_repr(rec.f1) + ',' +
               verdict_cell(rec.judge_lr1) + ',' + verdict_cell(rec.judge_lr2) +
               ',' + num_repr(rec.tokens) + ',';
        if (rec.difficulty_r) {
            csv += num_repr(*rec.difficulty_r) + ',' +
                   num_repr(surprisal_weight(*rec.difficulty_r));
        } else {
            csv += ',';
        }
        csv += '\n';
    }
    atomic_write(path, csv);
}

// ---------------------------------------------------------------------------
// index

inline int cmd_index(const RunConfig& cfg) {
    cfg.validate();
    print_resolved_config(cfg, std::cout);
    if (cfg.corpus.empty()) throw UsageError("index requires --corpus");

    fs::path index_dir(cfg.index_dir);
    if (fs::exists(index_dir / "manifest.json") && !cfg.force)
        throw DataError("index already exists at " + cfg.index_dir +
                        " (use --force to rebuild)");

    CorpusBatch corpus = load_corpus(cfg.corpus,
                                     parse_source_format(cfg.corpus_format),
                                     cfg.longbench_delimiter);
    BackendBundle bundle = make_gateway(cfg);

    IndexBuildOptions opts;
    opts.unit = cfg.unit;
    opts.batch_size = cfg.effective_batch_size();
    opts.lambda = cfg.lambda;
    opts.tau = cfg.tau;
    opts.embed_passages = cfg.embed_passages;

    auto start = std::chrono::steady_clock::now();
    IndexBuildStats stats;
    GraphIndex index = build_index(corpus, *bundle.gateway, opts, &stats);
    persist_index(index, cfg.index_dir);

    const TokenLedger& ledger = bundle.gateway->ledger();
    long input = 0, output = 0;
    for (const auto& e : ledger.entries()) {
        input += e.input_tokens;
        output += e.output_tokens;
    }
    ojson tokens;
    tokens["input_tokens"] = input;
    tokens["output_tokens"] = output;
    tokens["total_tokens"] = input + output;
    tokens["extraction_calls"] = stats.extraction_calls;
    ojson failures = ojson::array();
    for (const auto& [pid, reason] : stats.failures) {
        ojson f;
        f["passage_id"] = pid;
        f["reason"] = reason;
        failures.push_back(f);
    }
    tokens["failed_passages"] = failures;
    atomic_write(index_dir / "indexing_tokens.json", tokens.dump(2) + "\n");
    {
        std::ofstream out(index_dir / "ledger.csv", std::ios::binary);
        if (!out) throw DataError("cannot write indexing ledger");
        ledger.export_csv(out);
    }

    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    std::cout << "indexed " << stats.passages << " passages -> "
              << stats.propositions << " propositions, " << stats.entities
              << " entities (" << stats.failed_passages
              << " failed passages) using " << (input + output) << " tokens in "
              << format_fixed(seconds, 2) << "s\n";
    for (const auto& [pid, reason] : stats.failures)
        std::cerr << "warning: passage " << pid << " failed extraction: "
                  << reason << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// answer

inline int cmd_answer(const RunConfig& cfg) {
    cfg.validate();
    print_resolved_config(cfg, std::cout);

    std::vector<QuestionRecord> records;
    if (!cfg.question.empty()) {
        QuestionRecord rec;
        rec.question_id = "adhoc";
        rec.question = cfg.question;
        records.push_back(std::move(rec));
    } else if (!cfg.questions.empty()) {
        records = load_question_set(cfg.questions);
    } else {
        throw UsageError("answer requires --questions or --question");
    }
    for (const auto& rec : records)
        if (trim(rec.question).empty())
            throw UsageError("question '" + rec.question_id + "' is empty");
    {
        std::set<std::string> names;
        for (const auto& rec : records)
            if (!names.insert(trace_filename(rec.question_id)).second)
                throw DataError("question ids collide as trace filenames: " +
                                rec.question_id);
    }

    GraphIndex index = load_index(cfg.index_dir);
    size_t configured_dim =
        cfg.backend == "mock" ? static_cast<size_t>(cfg.embedding_dim) : 0;
    for (const auto& w :
         manifest_warnings(index.manifest, configured_dim, cfg.chat_model,
                           cfg.embedding_model))
        std::cerr << "warning: " << w << "\n";

    BackendBundle bundle = make_gateway(cfg);
    AgentParams params;
    params.retrieval = cfg.retrieval_params();
    params.max_iterations = cfg.max_iterations;
    params.max_sub_questions = cfg.max_sub_questions;

    fs::create_directories(cfg.traces_dir);
    auto start = std::chrono::steady_clock::now();
    std::mutex io_mu;
    std::atomic<size_t> next{0};
    std::atomic<long> answered{0};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto worker = [&]() {
        while (true) {
            {
                std::lock_guard<std::mutex> lock(error_mu);
                if (first_error) return;
            }
            size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            const QuestionRecord& rec = records[i];
            try {
                auto q_start = std::chrono::steady_clock::now();
                PipelineResult result = answer_question(
                    index, *bundle.gateway, params, rec.question_id,
                    rec.question);
                ojson trace =
                    trace_to_json(result, bundle.gateway->ledger(), params);
                atomic_write(fs::path(cfg.traces_dir) /
                                 trace_filename(rec.question_id),
                             trace.dump(2) + "\n");
                double q_seconds =
                    std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - q_start)
                        .count();
                long tokens =
                    bundle.gateway->ledger().total_for(rec.question_id);
                std::lock_guard<std::mutex> lock(io_mu);
                std::cout << rec.question_id << ": answer=\""
                          << result.final_answer << "\" tokens=" << tokens
                          << " time=" << format_fixed(q_seconds, 2) << "s";
                if (!result.failure_reason.empty())
                    std::cout << " failure=" << result.failure_reason;
                std::cout << "\n";
                ++answered;
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int n_workers = std::min<int>(cfg.workers,
                                  static_cast<int>(records.size()));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    std::cout << "answered " << answered.load() << " question(s) using "
              << bundle.gateway->ledger().grand_total() << " tokens in "
              << format_fixed(seconds, 2) << "s; traces in " << cfg.traces_dir
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval qa

inline int cmd_eval_qa(const RunConfig& cfg) {
    cfg.validate();
    print_resolved_config(cfg, std::cout);
    if (cfg.questions.empty()) throw UsageError("eval qa requires --questions");

    std::vector<QuestionRecord> golds = load_question_set(cfg.questions);
    std::vector<std::string> missing, orphans, warnings;
    std::vector<StoredTrace> traces =
        collect_traces(golds, cfg.traces_dir, missing, orphans);
    if (traces.empty())
        throw DataError("no traces found under " + cfg.traces_dir);

    long indexing_total = read_indexing_tokens(cfg.index_dir, &warnings);
    double share = static_cast<double>(indexing_total) /
                   static_cast<double>(traces.size());

    std::map<std::string, const QuestionRecord*> gold_by_id;
    for (const auto& g : golds) gold_by_id[g.question_id] = &g;

    BackendBundle bundle;
    if (cfg.judge_enabled) bundle = make_gateway(cfg);

    std::vector<EvalRecord> records;
    double em_sum = 0.0, f1_sum = 0.0;
    long lr1_yes = 0, lr1_unparsed = 0;
    long lr2_yes = 0, lr2_partial = 0, lr2_unparsed = 0;
    for (const auto& t : traces) {
        const QuestionRecord& gold = *gold_by_id.at(t.question_id);
        EvalRecord rec = make_eval_record(t.question_id, t.final_answer,
                                          gold.gold_answers,
                                          static_cast<double>(t.tokens_total) +
                                              share);
        if (cfg.judge_enabled) {
            rec.judge_lr1 = judge(gold.question, t.final_answer,
                                  gold.gold_answers, JudgeMode::lr1,
                                  *bundle.gateway, t.question_id);
            rec.judge_lr2 = judge(gold.question, t.final_answer,
                                  gold.gold_answers, JudgeMode::lr2,
                                  *bundle.gateway, t.question_id);
            if (*rec.judge_lr1 == JudgeVerdict::yes) ++lr1_yes;
            if (*rec.judge_lr1 == JudgeVerdict::unparsed) ++lr1_unparsed;
            if (*rec.judge_lr2 == JudgeVerdict::yes) ++lr2_yes;
            if (*rec.judge_lr2 == JudgeVerdict::partial) ++lr2_partial;
            if (*rec.judge_lr2 == JudgeVerdict::unparsed) ++lr2_unparsed;
        }
        em_sum += rec.em;
        f1_sum += rec.f1;
        records.push_back(std::move(rec));
    }

    double n = static_cast<double>(records.size());
    ojson summary;
    summary["n"] = records.size();
    summary["em"] = em_sum / n;
    summary["f1"] = f1_sum / n;
    if (cfg.judge_enabled) {
        ojson j;
        j["lr1_yes"] = static_cast<double>(lr1_yes) / n;
        j["lr1_unparsed"] = lr1_unparsed;
        j["lr2_yes"] = static_cast<double>(lr2_yes) / n;
        j["lr2_partial"] = static_cast<double>(lr2_partial) / n;
        j["lr2_unparsed"] = lr2_unparsed;
        summary["judge"] = j;
    } else {
        summary["judge"] = nullptr;
    }
    summary["indexing_tokens_amortized"] = indexing_total;
    summary["missing_traces"] = missing;
    summary["orphan_traces"] = orphans;

    fs::path out_dir(cfg.out_dir);
    atomic_write(out_dir / "qa_summary.json", summary.dump(2) + "\n");
    write_per_question_csv(records, out_dir / "qa_per_question.csv");

    std::cout << "qa eval over " << records.size() << " question(s): em="
              << num_repr(em_sum / n) << " f1=" << num_repr(f1_sum / n);
    if (cfg.judge_enabled)
        std::cout << " lr1_yes=" << num_repr(static_cast<double>(lr1_yes) / n)
                  << " lr2_yes=" << num_repr(static_cast<double>(lr2_yes) / n)
                  << " lr2_partial="
                  << num_repr(static_cast<double>(lr2_partial) / n);
    std::cout << "\n";
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    int mismatches = static_cast<int>(missing.size() + orphans.size());
    for (const auto& id : missing)
        std::cerr << "warning: no trace for question " << id << "\n";
    for (const auto& f : orphans)
        std::cerr << "warning: trace " << f << " matches no gold question\n";
    if (mismatches)
        std::cerr << "warning: " << mismatches
                  << " trace/gold mismatch(es) excluded\n";
    std::cout << "reports in " << cfg.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval retrieval

inline int cmd_eval_retrieval(const RunConfig& cfg) {
    cfg.validate();
    print_resolved_config(cfg, std::cout);
    if (cfg.questions.empty())
        throw UsageError("eval retrieval requires --questions");

    std::vector<QuestionRecord> golds = load_question_set(cfg.questions);
    GraphIndex index = load_index(cfg.index_dir);
    BackendBundle bundle = make_gateway(cfg);
    RetrievalParams params = cfg.retrieval_params();
    auto embed = [&](const std::string& text) {
        return bundle.gateway->embed_one(text, EmbedPurpose::statement);
    };

    ojson modes;
    std::vector<std::pair<RetrievalEvalMode, const char*>> runs = {
        {RetrievalEvalMode::single_pass, "single_pass"},
        {RetrievalEvalMode::simulated_agentic, "simulated_agentic"}};
    std::string csv = "question_id,mode,recall,unit_ndcg\n";
    for (const auto& [mode, name] : runs) {
        RetrievalEvalResult result =
            run_retrieval_eval(index, golds, mode, cfg.eval_k, params, embed);
        ojson block;
        block["n"] = result.rows.size();
        block["mean_recall"] = result.mean_recall;
        block["mean_unit_ndcg"] = result.mean_unit_ndcg;
        block["skipped"] = result.skipped;
        ojson rows = ojson::array();
        for (const auto& row : result.rows) {
            ojson r;
            r["question_id"] = row.question_id;
            r["recall"] = row.recall;
            r["unit_ndcg"] = row.unit_ndcg;
            r["retrieved"] = row.retrieved;
            rows.push_back(r);
            csv += TokenLedger::csv_field(row.question_id) + ',' + name + ',' +
                   num_repr(row.recall) + ',' + num_repr(row.unit_ndcg) + '\n';
        }
        block["rows"] = rows;
        modes[name] = block;
        std::cout << name << ": n=" << result.rows.size()
                  << " recall@" << cfg.eval_k << "="
                  << num_repr(result.mean_recall) << " unit_ndcg@5="
                  << num_repr(result.mean_unit_ndcg) << " (skipped "
                  << result.skipped.size() << ")\n";
    }

    ojson summary;
    summary["k"] = cfg.eval_k;
    summary["weighting"] = cfg.weighting;
    summary["mode"] = cfg.mode;
    summary["modes"] = modes;
    fs::path out_dir(cfg.out_dir);
    atomic_write(out_dir / "retrieval_summary.json", summary.dump(2) + "\n");
    atomic_write(out_dir / "retrieval_per_question.csv", csv);
    std::cout << "reports in " << cfg.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval economy

inline int cmd_eval_economy(const RunConfig& cfg) {
    cfg.validate();
    print_resolved_config(cfg, std::cout);
    if (cfg.questions.empty())
        throw UsageError("eval economy requires --questions");

    std::vector<QuestionRecord> golds = load_question_set(cfg.questions);
    std::vector<std::string> missing, orphans, warnings;
    std::vector<StoredTrace> traces =
        collect_traces(golds, cfg.traces_dir, missing, orphans);
    if (traces.empty())
        throw DataError("no traces found under " + cfg.traces_dir);

    long indexing_total = read_indexing_tokens(cfg.index_dir, &warnings);
    double share = static_cast<double>(indexing_total) /
                   static_cast<double>(traces.size());
    std::map<std::string, const QuestionRecord*> gold_by_id;
    for (const auto& g : golds) gold_by_id[g.question_id] = &g;

    BackendBundle bundle = make_gateway(cfg);
    std::vector<EvalRecord> records;
    for (const auto& t : traces) {
        const QuestionRecord& gold = *gold_by_id.at(t.question_id);
        EvalRecord rec = make_eval_record(t.question_id, t.final_answer,
                                          gold.gold_answers,
                                          static_cast<double>(t.tokens_total) +
                                              share);
        DifficultyEstimate est = estimate_difficulty(
            gold.question, gold.gold_answers, *bundle.gateway, t.question_id,
            cfg.difficulty_n, cfg.difficulty_temperature);
        rec.difficulty_r = est.r;
        records.push_back(std::move(rec));
    }

    SuccessEconomyReport report = success_economy(records);

    ojson summary;
    summary["n"] = records.size();
    summary["defined"] = report.defined;
    if (report.defined)
        summary["cw"] = report.cw;
    else
        summary["cw"] = nullptr;
    summary["total_tokens"] = report.total_tokens;
    summary["weighted_correct"] = report.weighted_correct;
    summary["indexing_tokens_amortized"] = indexing_total;
    summary["difficulty_n"] = cfg.difficulty_n;
    summary["missing_traces"] = missing;
    summary["orphan_traces"] = orphans;
    fs::path out_dir(cfg.out_dir);
    atomic_write(out_dir / "economy_summary.json", summary.dump(2) + "\n");
    write_per_question_csv(records, out_dir / "economy_per_question.csv");

    if (report.defined)
        std::cout << "C_w = " << num_repr(report.cw)
                  << " tokens per weighted correct answer (total_tokens="
                  << report.total_tokens << ", weighted_correct="
                  << num_repr(report.weighted_correct) << ")\n";
    else
        std::cout << "C_w undefined: no EM-correct answers (total_tokens="
                  << report.total_tokens << ")\n";
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& id : missing)
        std::cerr << "warning: no trace for question " << id << "\n";
    for (const auto& f : orphans)
        std::cerr << "warning: trace " << f << " matches no gold question\n";
    std::cout << "reports in " << cfg.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval plan

inline int cmd_eval_plan(const RunConfig& cfg) {
    cfg.validate();
    print_resolved_config(cfg, std::cout);
    if (cfg.questions.empty())
        throw UsageError("eval plan requires --questions");

    std::vector<QuestionRecord> golds = load_question_set(cfg.questions);
    std::vector<std::string> missing, orphans;
    std::vector<StoredTrace> traces =
        collect_traces(golds, cfg.traces_dir, missing, orphans);
    std::map<std::string, const QuestionRecord*> gold_by_id;
    for (const auto& g : golds) gold_by_id[g.question_id] = &g;

    std::vector<PlanAccuracyInput> inputs;
    std::vector<std::string> no_hops;
    for (const auto& t : traces) {
        const QuestionRecord& gold = *gold_by_id.at(t.question_id);
        if (!gold.hop_count) {
            no_hops.push_back(t.question_id);
            continue;
        }
        PlanAccuracyInput in;
        in.question_id = t.question_id;
        in.planned = t.planned;
        in.hops = *gold.hop_count;
        in.em = exact_match(t.final_answer, gold.gold_answers) ? 1 : 0;
        inputs.push_back(in);
    }
    if (inputs.empty())
        throw DataError("no questions with both a trace and a hop count");

    std::vector<PlanAccuracyRow> rows = plan_accuracy(inputs);

    ojson summary;
    summary["n"] = inputs.size();
    ojson jrows = ojson::array();
    std::cout << "hops      n  plan_acc  avg_dev  em|match  em|no_match\n";
    for (const auto& row : rows) {
        ojson r;
        r["hops"] = row.hops;  // 0 = overall
        r["n"] = row.n;
        r["plan_accuracy"] = row.plan_accuracy;
        r["avg_deviation"] = row.avg_deviation;
        r["em_match"] = row.em_match ? ojson(*row.em_match) : ojson(nullptr);
        r["em_no_match"] =
            row.em_no_match ? ojson(*row.em_no_match) : ojson(nullptr);
        jrows.push_back(r);
        std::string label = row.hops == 0 ? "all" : std::to_string(row.hops);
        std::cout << label << "\t" << row.n << "\t"
                  << format_fixed(row.plan_accuracy, 4) << "\t"
                  << format_fixed(row.avg_deviation, 4) << "\t"
                  << (row.em_match ? format_fixed(*row.em_match, 4) : "-")
                  << "\t"
                  << (row.em_no_match ? format_fixed(*row.em_no_match, 4)
                                      : "-")
                  << "\n";
    }
    summary["rows"] = jrows;
    summary["skipped_no_hops"] = no_hops;
    summary["missing_traces"] = missing;
    summary["orphan_traces"] = orphans;
    fs::path out_dir(cfg.out_dir);
    atomic_write(out_dir / "plan_summary.json", summary.dump(2) + "\n");

    for (const auto& id : missing)
        std::cerr << "warning: no trace for question " << id << "\n";
    for (const auto& id : no_hops)
        std::cerr << "warning: question " << id << " has no hop count\n";
    std::cout << "reports in " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace grasp
