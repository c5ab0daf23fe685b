#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "grasp/common.hpp"
#include "grasp/corpus.hpp"
#include "grasp/retrieval.hpp"

namespace grasp {

/// Everything a run needs; defaults are the reference constants
/// (lambda=0.2, tau=0.7, m=50, k=5, d=2, 2 iterations, <=4 sub-questions,
/// difficulty n=10). Loaded from a JSON file, overridden by flags.
struct RunConfig {
    // Data locations
    std::string corpus;
    std::string corpus_format = "retrieval_split";
    std::string longbench_delimiter = "\n\n";
    std::string questions;
    std::string index_dir = "index";
    std::string traces_dir = "traces";
    std::string out_dir = "eval_out";

    // Backend
    std::string backend = "mock";  // mock | http
    std::string base_url;
    std::string chat_model;
    std::string embedding_model;
    std::string fixtures;          // mock completion fixture file
    std::string vector_table;      // mock injected-vector file
    int embedding_dim = 64;
    int max_in_flight = 4;
    int max_retries = 3;

    // Index build
    std::string unit = "proposition";
    int batch_size = -1;           // -1: 10 for retrieval_split, 1 for longbench
    double tau = 0.7;
    bool embed_passages = false;

    // Retrieval
    double lambda = 0.2;
    int m = 50;
    int k_entities = 5;
    int d_passages = 2;
    std::string weighting = "rankvote";
    std::string mode = "full";

    // Agent
    int max_iterations = 2;
    int max_sub_questions = 4;

    // Eval
    bool judge_enabled = false;
    int difficulty_n = 10;
    double difficulty_temperature = 1.0;
    int eval_k = 5;

    // Run control
    uint64_t seed = 0;
    int workers = 1;
    bool force = false;
    std::string question;          // single ad-hoc question (answer command)

    int effective_batch_size() const {
        if (batch_size > 0) return batch_size;
        return corpus_format == "longbench" ? 1 : 10;
    }

    RetrievalParams retrieval_params() const {
        RetrievalParams p;
        p.lambda = lambda;
        p.m = m;
        p.k_entities = k_entities;
        p.d_passages = d_passages;
        p.weighting = parse_weighting(weighting);
        p.mode = parse_retrieval_mode(mode);
        return p;
    }

    void validate() const {
        if (m < 1 || k_entities < 1 || d_passages < 1)
            throw UsageError("m, k_entities and d_passages must be >= 1");
        if (max_iterations < 1) throw UsageError("max_iterations must be >= 1");
        if (max_sub_questions < 1)
            throw UsageError("max_sub_questions must be >= 1");
        if (difficulty_n < 1) throw UsageError("difficulty_n must be >= 1");
        if (eval_k < 1) throw UsageError("eval_k must be >= 1");
        if (workers < 1) throw UsageError("workers must be >= 1");
        if (embedding_dim < 1) throw UsageError("embedding_dim must be >= 1");
        if (backend != "mock" && backend != "http")
            throw UsageError("backend must be 'mock' or 'http'");
        if (unit != "proposition" && unit != "sentence")
            throw UsageError("unit must be 'proposition' or 'sentence'");
        if (tau < 0.0 || tau > 1.0) throw UsageError("tau must lie in [0,1]");
        parse_weighting(weighting);
        parse_retrieval_mode(mode);
        parse_source_format(corpus_format);
        if (batch_size == 0 || batch_size < -1)
            throw UsageError("batch_size must be positive (or -1 for auto)");
    }

    ojson to_json() const {
        ojson j;
        j["corpus"] = corpus;
        j["corpus_format"] = corpus_format;
        j["longbench_delimiter"] = longbench_delimiter;
        j["questions"] = questions;
        j["index_dir"] = index_dir;
        j["traces_dir"] = traces_dir;
        j["out_dir"] = out_dir;
        j["backend"] = backend;
        j["base_url"] = base_url;
        j["chat_model"] = chat_model;
        j["embedding_model"] = embedding_model;
        j["fixtures"] = fixtures;
        j["vector_table"] = vector_table;
        j["embedding_dim"] = embedding_dim;
        j["max_in_flight"] = max_in_flight;
        j["max_retries"] = max_retries;
        j["unit"] = unit;
        j["batch_size"] = effective_batch_size();
        j["tau"] = tau;
        j["embed_passages"] = embed_passages;
        j["lambda"] = lambda;
        j["m"] = m;
        j["k_entities"] = k_entities;
        j["d_passages"] = d_passages;
        j["weighting"] = weighting;
        j["mode"] = mode;
        j["max_iterations"] = max_iterations;
        j["max_sub_questions"] = max_sub_questions;
        j["judge_enabled"] = judge_enabled;
        j["difficulty_n"] = difficulty_n;
        j["difficulty_temperature"] = difficulty_temperature;
        j["eval_k"] = eval_k;
        j["seed"] = seed;
        j["workers"] = workers;
        j["force"] = force;
        j["question"] = question;
        return j;
    }

    /// Merge values from a config file; unknown keys are usage errors so
    /// typos surface instead of silently keeping defaults.
    void apply_json(const json& j, const std::string& where) {
        if (!j.is_object()) throw UsageError(where + ": config must be an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& key = it.key();
            const json& v = it.value();
            try {
                if (key == "corpus") corpus = v.get<std::string>();
                else if (key == "corpus_format") corpus_format = v.get<std::string>();
                else if (key == "longbench_delimiter")
                    longbench_delimiter = v.get<std::string>();
                else if (key == "questions") questions = v.get<std::string>();
                else if (key == "index_dir") index_dir = v.get<std::string>();
                else if (key == "traces_dir") traces_dir = v.get<std::string>();
                else if (key == "out_dir") out_dir = v.get<std::string>();
                else if (key == "backend") backend = v.get<std::string>();
                else if (key == "base_url") base_url = v.get<std::string>();
                else if (key == "chat_model") chat_model = v.get<std::string>();
                else if (key == "embedding_model")
                    embedding_model = v.get<std::string>();
                else if (key == "fixtures") fixtures = v.get<std::string>();
                else if (key == "vector_table") vector_table = v.get<std::string>();
                else if (key == "embedding_dim") embedding_dim = v.get<int>();
                else if (key == "max_in_flight") max_in_flight = v.get<int>();
                else if (key == "max_retries") max_retries = v.get<int>();
                else if (key == "unit") unit = v.get<std::string>();
                else if (key == "batch_size") batch_size = v.get<int>();
                else if (key == "tau") tau = v.get<double>();
                else if (key == "embed_passages") embed_passages = v.get<bool>();
                else if (key == "lambda") lambda = v.get<double>();
                else if (key == "m") m = v.get<int>();
                else if (key == "k_entities") k_entities = v.get<int>();
                else if (key == "d_passages") d_passages = v.get<int>();
                else if (key == "weighting") weighting = v.get<std::string>();
                else if (key == "mode") mode = v.get<std::string>();
                else if (key == "max_iterations") max_iterations = v.get<int>();
                else if (key == "max_sub_questions")
                    max_sub_questions = v.get<int>();
                else if (key == "judge_enabled") judge_enabled = v.get<bool>();
                else if (key == "difficulty_n") difficulty_n = v.get<int>();
                else if (key == "difficulty_temperature")
                    difficulty_temperature = v.get<double>();
                else if (key == "eval_k") eval_k = v.get<int>();
                else if (key == "seed") seed = v.get<uint64_t>();
                else if (key == "workers") workers = v.get<int>();
                else if (key == "force") force = v.get<bool>();
                else if (key == "question") question = v.get<std::string>();
                else
                    throw UsageError(where + ": unknown config key '" + key + "'");
            } catch (const json::exception& e) {
                throw UsageError(where + ": bad value for '" + key + "': " +
                                 e.what());
            }
        }
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw UsageError(path + ": " + e.what());
        }
        RunConfig cfg;
        cfg.apply_json(j, path);
        return cfg;
    }
};

}  // namespace grasp
