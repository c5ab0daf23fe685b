// Command-line front end: index construction, agentic answering, and the
// evaluation suite. Precedence for settings is flags > --config file >
// built-in defaults; secrets (API key) come only from the environment.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "grasp/commands.hpp"
#include "grasp/config.hpp"

namespace {

struct FlagHolders {
    std::optional<std::string> config;
    std::optional<std::string> corpus, corpus_format, longbench_delimiter;
    std::optional<std::string> questions, index_dir, traces_dir, out_dir;
    std::optional<std::string> backend, base_url, chat_model, embedding_model;
    std::optional<std::string> fixtures, vector_table;
    std::optional<int> embedding_dim, max_in_flight, max_retries;
    std::optional<std::string> unit;
    std::optional<int> batch_size;
    std::optional<double> tau;
    std::optional<double> lambda;
    std::optional<int> m, k_entities, d_passages;
    std::optional<std::string> weighting, mode;
    std::optional<int> max_iterations, max_sub_questions;
    std::optional<int> difficulty_n;
    std::optional<double> difficulty_temperature;
    std::optional<int> eval_k;
    std::optional<uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> question;
    bool judge = false;
    bool force = false;
    bool embed_passages = false;
    CLI::Option* judge_opt = nullptr;
    CLI::Option* force_opt = nullptr;
    CLI::Option* embed_passages_opt = nullptr;
};

void register_options(CLI::App& app, FlagHolders& f) {
    app.add_option("--config", f.config, "JSON config file (flags override it)");
    app.add_option("--corpus", f.corpus, "corpus JSONL file");
    app.add_option("--corpus-format", f.corpus_format,
                   "corpus layout: retrieval_split or longbench");
    app.add_option("--longbench-delimiter", f.longbench_delimiter,
                   "passage delimiter for longbench contexts");
    app.add_option("--questions", f.questions, "question set JSONL file");
    app.add_option("--index-dir", f.index_dir, "graph index directory");
    app.add_option("--traces-dir", f.traces_dir, "answer trace directory");
    app.add_option("--out-dir", f.out_dir, "evaluation report directory");
    app.add_option("--backend", f.backend, "model backend: mock or http");
    app.add_option("--base-url", f.base_url, "http backend base URL");
    app.add_option("--chat-model", f.chat_model, "chat model name");
    app.add_option("--embedding-model", f.embedding_model,
                   "embedding model name");
    app.add_option("--fixtures", f.fixtures,
                   "mock backend completion fixture file");
    app.add_option("--vector-table", f.vector_table,
                   "mock backend injected-vector file");
    app.add_option("--embedding-dim", f.embedding_dim,
                   "mock embedding dimension");
    app.add_option("--max-in-flight", f.max_in_flight,
                   "max concurrent backend requests");
    app.add_option("--max-retries", f.max_retries,
                   "retries per transient backend failure");
    app.add_option("--unit", f.unit, "index unit: proposition or sentence");
    app.add_option("--batch-size", f.batch_size,
                   "passages per extraction call (-1 = auto)");
    app.add_option("--tau", f.tau, "entity dedup cosine threshold");
    f.embed_passages_opt = app.add_flag("--embed-passages", f.embed_passages,
                                        "also store passage embeddings");
    app.add_option("--lambda", f.lambda, "BM25 weight in the hybrid score");
    app.add_option("--m", f.m, "propositions retrieved per search");
    app.add_option("--k-entities", f.k_entities, "entities kept per iteration");
    app.add_option("--d-passages", f.d_passages, "passages read per iteration");
    app.add_option("--weighting", f.weighting,
                   "passage vote weighting: rankvote or uniform");
    app.add_option("--mode", f.mode, "retrieval mode: full, dpr, or sentence");
    app.add_option("--max-iterations", f.max_iterations,
                   "search iterations per sub-question");
    app.add_option("--max-sub-questions", f.max_sub_questions,
                   "cap on planner sub-questions");
    f.judge_opt = app.add_flag("--judge,!--no-judge", f.judge,
                               "run LLM judges during eval qa");
    app.add_option("--difficulty-n", f.difficulty_n,
                   "closed-book samples per question");
    app.add_option("--difficulty-temperature", f.difficulty_temperature,
                   "temperature for difficulty sampling");
    app.add_option("--eval-k", f.eval_k, "k for retrieval recall@k");
    app.add_option("--seed", f.seed, "seed for mock embeddings and jitter");
    app.add_option("--workers", f.workers, "parallel answer workers");
    f.force_opt = app.add_flag("--force", f.force,
                               "overwrite an existing index");
    app.add_option("--question", f.question,
                   "answer a single ad-hoc question");
}

grasp::RunConfig assemble(const FlagHolders& f) {
    grasp::RunConfig cfg;
    if (f.config) cfg = grasp::RunConfig::from_file(*f.config);
    if (f.corpus) cfg.corpus = *f.corpus;
    if (f.corpus_format) cfg.corpus_format = *f.corpus_format;
    if (f.longbench_delimiter) cfg.longbench_delimiter = *f.longbench_delimiter;
    if (f.questions) cfg.questions = *f.questions;
    if (f.index_dir) cfg.index_dir = *f.index_dir;
    if (f.traces_dir) cfg.traces_dir = *f.traces_dir;
    if (f.out_dir) cfg.out_dir = *f.out_dir;
    if (f.backend) cfg.backend = *f.backend;
    if (f.base_url) cfg.base_url = *f.base_url;
    if (f.chat_model) cfg.chat_model = *f.chat_model;
    if (f.embedding_model) cfg.embedding_model = *f.embedding_model;
    if (f.fixtures) cfg.fixtures = *f.fixtures;
    if (f.vector_table) cfg.vector_table = *f.vector_table;
    if (f.embedding_dim) cfg.embedding_dim = *f.embedding_dim;
    if (f.max_in_flight) cfg.max_in_flight = *f.max_in_flight;
    if (f.max_retries) cfg.max_retries = *f.max_retries;
    if (f.unit) cfg.unit = *f.unit;
    if (f.batch_size) cfg.batch_size = *f.batch_size;
    if (f.tau) cfg.tau = *f.tau;
    if (f.embed_passages_opt->count()) cfg.embed_passages = f.embed_passages;
    if (f.lambda) cfg.lambda = *f.lambda;
    if (f.m) cfg.m = *f.m;
    if (f.k_entities) cfg.k_entities = *f.k_entities;
    if (f.d_passages) cfg.d_passages = *f.d_passages;
    if (f.weighting) cfg.weighting = *f.weighting;
    if (f.mode) cfg.mode = *f.mode;
    if (f.max_iterations) cfg.max_iterations = *f.max_iterations;
    if (f.max_sub_questions) cfg.max_sub_questions = *f.max_sub_questions;
    if (f.judge_opt->count()) cfg.judge_enabled = f.judge;
    if (f.difficulty_n) cfg.difficulty_n = *f.difficulty_n;
    if (f.difficulty_temperature)
        cfg.difficulty_temperature = *f.difficulty_temperature;
    if (f.eval_k) cfg.eval_k = *f.eval_k;
    if (f.seed) cfg.seed = *f.seed;
    if (f.workers) cfg.workers = *f.workers;
    if (f.force_opt->count()) cfg.force = f.force;
    if (f.question) cfg.question = *f.question;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grasp: agentic multi-hop QA over an entity/proposition/"
                 "passage graph index"};
    app.require_subcommand(1);

    FlagHolders flags;
    register_options(app, flags);

    CLI::App* index_cmd =
        app.add_subcommand("index", "Build a graph index from a corpus");
    CLI::App* answer_cmd = app.add_subcommand(
        "answer", "Answer questions with the agentic pipeline");
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluation suite");
    eval_cmd->require_subcommand(1);
    CLI::App* eval_qa = eval_cmd->add_subcommand(
        "qa", "Score stored traces: EM, F1, optional LLM judges");
    CLI::App* eval_retrieval = eval_cmd->add_subcommand(
        "retrieval", "Retrieval recall@k and unit NDCG@5");
    CLI::App* eval_economy = eval_cmd->add_subcommand(
        "economy", "Difficulty-weighted token cost per correct answer");
    CLI::App* eval_plan = eval_cmd->add_subcommand(
        "plan", "Planned step count vs gold hop count");
    for (CLI::App* sub :
         {index_cmd, answer_cmd, eval_cmd, eval_qa, eval_retrieval,
          eval_economy, eval_plan})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        grasp::RunConfig cfg = assemble(flags);
        if (index_cmd->parsed()) return grasp::cmd_index(cfg);
        if (answer_cmd->parsed()) return grasp::cmd_answer(cfg);
        if (eval_qa->parsed()) return grasp::cmd_eval_qa(cfg);
        if (eval_retrieval->parsed()) return grasp::cmd_eval_retrieval(cfg);
        if (eval_economy->parsed()) return grasp::cmd_eval_economy(cfg);
        if (eval_plan->parsed()) return grasp::cmd_eval_plan(cfg);
        std::cerr << "usage error: no subcommand selected\n";
        return 1;
    } catch (const grasp::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const grasp::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const grasp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
