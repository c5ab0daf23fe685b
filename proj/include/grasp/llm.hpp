#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "grasp/common.hpp"

namespace grasp {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// Pipeline stage a model call belongs to; recorded on every ledger row.
enum class Stage {
    extraction,
    planning,
    rewriting,
    selection,
    evaluation,
    synthesis,
    judge,
    difficulty,
};

inline std::string stage_name(Stage s) {
    switch (s) {
        case Stage::extraction: return "extraction";
        case Stage::planning: return "planning";
        case Stage::rewriting: return "rewriting";
        case Stage::selection: return "selection";
        case Stage::evaluation: return "evaluation";
        case Stage::synthesis: return "synthesis";
        case Stage::judge: return "judge";
        case Stage::difficulty: return "difficulty";
    }
    return "unknown";
}

/// Stage temperatures: extractors run colder than generators; difficulty
/// sampling is deliberately hot.
inline double default_temperature(Stage s) {
    switch (s) {
        case Stage::extraction: return 0.1;
        case Stage::difficulty: return 1.0;
        default: return 0.2;
    }
}

/// Ledger attribution key for work not tied to any question.
inline const char* kIndexingQuestionId = "indexing";

struct CompletionRequest {
    Stage stage = Stage::extraction;
    std::string system_text;
    std::string user_text;
    std::string question_id = kIndexingQuestionId;
    std::optional<double> temperature;        // defaulted per stage when unset
    std::optional<std::string> reasoning;     // opaque backend pass-through
};

struct CompletionResponse {
    std::string text;
    long input_tokens = 0;
    long output_tokens = 0;
    long call_id = 0;
};

/// What to embed; lets backends route to purpose-specific models if needed.
enum class EmbedPurpose { proposition, statement, type_label, passage };

struct LedgerEntry {
    long call_id = 0;
    Stage stage = Stage::extraction;
    std::string question_id;
    long input_tokens = 0;
    long output_tokens = 0;
    // Full payloads kept for traces and audits; not part of the CSV export.
    std::string system_text;
    std::string user_text;
    std::string response_text;
};

/// Append-only record of every completion call in a run.
class TokenLedger {
public:
    long append(LedgerEntry e) {
        std::lock_guard<std::mutex> lock(mu_);
        e.call_id = next_id_++;
        entries_.push_back(std::move(e));
        return entries_.back().call_id;
    }

    std::vector<LedgerEntry> entries() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_;
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.size();
    }

    long total_for(const std::string& question_id) const {
        std::lock_guard<std::mutex> lock(mu_);
        long t = 0;
        for (const auto& e : entries_)
            if (e.question_id == question_id)
                t += e.input_tokens + e.output_tokens;
        return t;
    }

    long indexing_total() const { return total_for(kIndexingQuestionId); }

    long grand_total() const {
        std::lock_guard<std::mutex> lock(mu_);
        long t = 0;
        for (const auto& e : entries_) t += e.input_tokens + e.output_tokens;
        return t;
    }

    void export_csv(std::ostream& out) const {
        out << "call_id,stage,question_id,input_tokens,output_tokens\n";
        for (const auto& e : entries()) {
            out << e.call_id << ',' << stage_name(e.stage) << ','
                << csv_field(e.question_id) << ',' << e.input_tokens << ','
                << e.output_tokens << '\n';
        }
    }

    static std::string csv_field(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += "\"\"";
            else out.push_back(c);
        }
        out += "\"";
        return out;
    }

private:
    mutable std::mutex mu_;
    std::vector<LedgerEntry> entries_;
    long next_id_ = 1;
};

/// Per-question token totals with indexing cost amortized evenly.
struct QuestionTokenReport {
    std::string question_id;
    long inference_tokens = 0;
    double amortized_indexing = 0.0;
    double total = 0.0;  // inference + amortized share
};

struct LedgerReport {
    std::vector<QuestionTokenReport> per_question;
    long indexing_total = 0;
    long inference_total = 0;   // every non-indexing row, listed or not
    long unattributed = 0;      // non-indexing rows outside `question_ids`
    long grand_total = 0;       // == indexing_total + inference_total
};

/// Build per-question totals over `question_ids`, splitting the one-time
/// indexing cost evenly across them. Amortization stays exact by deferring
/// the division: share = indexing_total / N in double, applied per question.
inline LedgerReport ledger_report(const TokenLedger& ledger,
                                  const std::vector<std::string>& question_ids) {
    LedgerReport rep;
    std::map<std::string, long> per;
    for (const auto& e : ledger.entries()) {
        long t = e.input_tokens + e.output_tokens;
        if (e.question_id == kIndexingQuestionId)
            rep.indexing_total += t;
        else {
            rep.inference_total += t;
            per[e.question_id] += t;
        }
    }
    rep.grand_total = rep.indexing_total + rep.inference_total;
    double share = question_ids.empty()
                       ? 0.0
                       : static_cast<double>(rep.indexing_total) /
                             static_cast<double>(question_ids.size());
    long listed = 0;
    for (const auto& qid : question_ids) {
        QuestionTokenReport q;
        q.question_id = qid;
        auto it = per.find(qid);
        q.inference_tokens = it == per.end() ? 0 : it->second;
        listed += q.inference_tokens;
        q.amortized_indexing = share;
        q.total = static_cast<double>(q.inference_tokens) + share;
        rep.per_question.push_back(std::move(q));
    }
    rep.unattributed = rep.inference_total - listed;
    return rep;
}

/// Raw completion as produced by a backend, before ledger bookkeeping.
struct BackendCompletion {
    std::string text;
    long input_tokens = 0;
    long output_tokens = 0;
};

/// Retryable backend failure (timeouts, 429/5xx, connection errors).
struct TransientBackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Transport-level interface the gateway drives. Implementations must be
/// safe to call from multiple threads.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual BackendCompletion complete(Stage stage, const std::string& system_text,
                                       const std::string& user_text,
                                       double temperature,
                                       const std::optional<std::string>& reasoning) = 0;
    virtual std::vector<Vec> embed(const std::vector<std::string>& texts,
                                   EmbedPurpose purpose) = 0;
    virtual std::string chat_model_name() const = 0;
    virtual std::string embedding_model_name() const = 0;
};

/// Deterministic offline backend: completions come from a FIFO fixture
/// queue, token counts are whitespace token counts, and embeddings are
/// text-seeded hash vectors unless an injected table overrides them.
class MockLlmBackend : public LlmBackend {
public:
    struct Fixture {
        std::string text;
        std::optional<Stage> expect_stage;
    };

    explicit MockLlmBackend(size_t dimension = 64, uint64_t seed = 0)
        : dimension_(dimension), seed_(seed) {}

    void push_fixture(std::string text, std::optional<Stage> expect_stage = {}) {
        std::lock_guard<std::mutex> lock(mu_);
        fixtures_.push_back({std::move(text), expect_stage});
    }

    /// Fixture file: JSON array of strings or {"stage","text"} objects.
    void load_fixture_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open fixture file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
        if (!j.is_array()) throw DataError(path + ": expected a JSON array");
        for (const auto& item : j) {
            if (item.is_string()) {
                push_fixture(item.get<std::string>());
            } else if (item.is_object() && item.contains("text")) {
                std::optional<Stage> st;
                if (item.contains("stage"))
                    st = parse_stage(item["stage"].get<std::string>());
                push_fixture(item["text"].get<std::string>(), st);
            } else {
                throw DataError(path + ": fixture entries must be strings or "
                                       "{stage,text} objects");
            }
        }
    }

    /// Injected vectors are used verbatim (no renormalization) so tests can
    /// pin exact cosine values.
    void inject_vector(const std::string& text, Vec v) {
        std::lock_guard<std::mutex> lock(mu_);
        if (!vector_table_.empty() || !v.empty()) dimension_ = v.size();
        vector_table_[text] = std::move(v);
    }

    /// Vector table file: JSON object text -> [floats].
    void load_vector_table(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open vector table: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
        if (!j.is_object()) throw DataError(path + ": expected a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it)
            inject_vector(it.key(), it.value().get<Vec>());
    }

    BackendCompletion complete(Stage stage, const std::string& system_text,
                               const std::string& user_text, double temperature,
                               const std::optional<std::string>&) override {
        Fixture fx;
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (fixtures_.empty())
                throw DataError("mock fixture queue exhausted (stage " +
                                stage_name(stage) + ")");
            fx = std::move(fixtures_.front());
            fixtures_.pop_front();
            calls_.push_back({stage, system_text, user_text, temperature});
        }
        if (fx.expect_stage && *fx.expect_stage != stage)
            throw DataError("mock fixture order violation: expected stage " +
                            stage_name(*fx.expect_stage) + ", got " +
                            stage_name(stage));
        BackendCompletion out;
        out.text = fx.text;
        out.input_tokens =
            whitespace_token_count(system_text) + whitespace_token_count(user_text);
        out.output_tokens = whitespace_token_count(fx.text);
        return out;
    }

    std::vector<Vec> embed(const std::vector<std::string>& texts,
                           EmbedPurpose) override {
        std::vector<Vec> out;
        out.reserve(texts.size());
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& t : texts) {
            auto it = vector_table_.find(t);
            out.push_back(it != vector_table_.end() ? it->second : hash_vector(t));
        }
        return out;
    }

    std::string chat_model_name() const override { return "mock-chat"; }
    std::string embedding_model_name() const override { return "mock-embed"; }

    size_t fixtures_remaining() const {
        std::lock_guard<std::mutex> lock(mu_);
        return fixtures_.size();
    }

    struct RecordedCall {
        Stage stage;
        std::string system_text;
        std::string user_text;
        double temperature;
    };

    std::vector<RecordedCall> recorded_calls() const {
        std::lock_guard<std::mutex> lock(mu_);
        return calls_;
    }

    static Stage parse_stage(const std::string& s) {
        for (Stage st : {Stage::extraction, Stage::planning, Stage::rewriting,
                         Stage::selection, Stage::evaluation, Stage::synthesis,
                         Stage::judge, Stage::difficulty})
            if (stage_name(st) == s) return st;
        throw DataError("unknown stage name '" + s + "'");
    }

    /// Deterministic unit vector seeded by the text hash. Components are
    /// drawn as raw mt19937_64 output mapped to [-1, 1) (distribution
    /// classes are implementation-defined), normalized in double, then
    /// rounded through float32 so persisted copies reload bit-identically.
    Vec hash_vector(const std::string& text) const {
        std::mt19937_64 eng(fnv1a64(text) ^ (seed_ * 0x9e3779b97f4a7c15ULL));
        Vec v(dimension_);
        for (double& x : v) {
            double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;  // [0,1)
            x = 2.0 * u - 1.0;
        }
        double n = norm(v);
        for (double& x : v) x = static_cast<double>(static_cast<float>(x / n));
        return v;
    }

private:
    size_t dimension_;
    uint64_t seed_;
    mutable std::mutex mu_;
    std::deque<Fixture> fixtures_;
    std::map<std::string, Vec> vector_table_;
    std::vector<RecordedCall> calls_;
};

/// Chat-completions + embeddings HTTP backend configuration. The API key is
/// read from the environment only; everything else may come from config.
struct HttpBackendConfig {
    std::string base_url;            // e.g. http://host:port
    std::string chat_model;
    std::string embedding_model;
    std::string chat_path = "/v1/chat/completions";
    std::string embedding_path = "/v1/embeddings";
    std::string api_key_env = "GRASP_API_KEY";
    int timeout_seconds = 120;
};

struct GatewayOptions {
    int max_in_flight = 4;
    int max_retries = 3;             // 4 attempts total
    double backoff_base_seconds = 1.0;
    uint64_t jitter_seed = 0;
    // Injectable for tests; wall-clock sleep by default.
    std::function<void(double)> sleeper;
};

/// Front door for all model traffic: applies stage temperatures, enforces a
/// concurrency cap, retries transient failures with exponential backoff and
/// jitter, and records every completion in the token ledger.
class LlmGateway {
public:
    LlmGateway(std::shared_ptr<LlmBackend> backend, GatewayOptions options = {})
        : backend_(std::move(backend)),
          options_(std::move(options)),
          jitter_(options_.jitter_seed),
          slots_(options_.max_in_flight < 1 ? 1 : options_.max_in_flight) {
        if (!options_.sleeper)
            options_.sleeper = [](double seconds) {
                std::this_thread::sleep_for(
                    std::chrono::duration<double>(seconds));
            };
    }

    CompletionResponse complete(const CompletionRequest& req) {
        double temperature =
            req.temperature ? *req.temperature : default_temperature(req.stage);
        BackendCompletion raw = with_retries([&] {
            return backend_->complete(req.stage, req.system_text, req.user_text,
                                      temperature, req.reasoning);
        }, "completion (stage " + stage_name(req.stage) + ")");
        LedgerEntry e;
        e.stage = req.stage;
        e.question_id = req.question_id;
        e.input_tokens = raw.input_tokens;
        e.output_tokens = raw.output_tokens;
        e.system_text = req.system_text;
        e.user_text = req.user_text;
        e.response_text = raw.text;
        CompletionResponse resp;
        resp.text = std::move(raw.text);
        resp.input_tokens = e.input_tokens;
        resp.output_tokens = e.output_tokens;
        resp.call_id = ledger_.append(std::move(e));
        return resp;
    }

    /// Embed a batch of texts. Outputs must be unit vectors; the gateway
    /// verifies rather than renormalizes so injected test vectors pass
    /// through exactly. Embedding traffic is not token-ledgered: reported
    /// token costs count model completions only.
    std::vector<Vec> embed(const std::vector<std::string>& texts,
                           EmbedPurpose purpose) {
        for (const auto& t : texts)
            if (t.empty())
                throw DataError("cannot embed an empty string");
        if (texts.empty()) return {};
        std::vector<Vec> out = with_retries(
            [&] { return backend_->embed(texts, purpose); }, "embedding");
        if (out.size() != texts.size())
            throw BackendError("embedding count mismatch: got " +
                               std::to_string(out.size()) + " for " +
                               std::to_string(texts.size()) + " texts");
        for (const Vec& v : out) {
            if (!dimension_) dimension_ = v.size();
            if (v.size() != *dimension_)
                throw BackendError("inconsistent embedding dimension");
            double n = norm(v);
            if (std::abs(n - 1.0) > 1e-6)
                throw BackendError("backend returned a non-unit embedding (norm " +
                                   std::to_string(n) + ")");
        }
        return out;
    }

    Vec embed_one(const std::string& text, EmbedPurpose purpose) {
        return embed(std::vector<std::string>{text}, purpose)[0];
    }

    TokenLedger& ledger() { return ledger_; }
    const TokenLedger& ledger() const { return ledger_; }
    LlmBackend& backend() { return *backend_; }
    std::optional<size_t> embedding_dimension() const { return dimension_; }

private:
    class SlotGuard {
    public:
        explicit SlotGuard(LlmGateway& g) : g_(g) {
            std::unique_lock<std::mutex> lock(g_.slot_mu_);
            g_.slot_cv_.wait(lock, [&] { return g_.slots_ > 0; });
            --g_.slots_;
        }
        ~SlotGuard() {
            {
                std::lock_guard<std::mutex> lock(g_.slot_mu_);
                ++g_.slots_;
            }
            g_.slot_cv_.notify_one();
        }

    private:
        LlmGateway& g_;
    };

    template <typename F>
    auto with_retries(F&& f, const std::string& what) -> decltype(f()) {
        SlotGuard guard(*this);
        int attempt = 0;
        for (;;) {
            try {
                return f();
            } catch (const TransientBackendError& e) {
                if (attempt >= options_.max_retries)
                    throw BackendError(what + " failed after " +
                                       std::to_string(attempt + 1) +
                                       " attempts: " + e.what());
                double delay = options_.backoff_base_seconds *
                               std::pow(2.0, attempt) * (0.5 + next_jitter());
                options_.sleeper(delay);
                ++attempt;
            }
        }
    }

    double next_jitter() {
        std::lock_guard<std::mutex> lock(jitter_mu_);
        return static_cast<double>(jitter_() >> 11) * 0x1.0p-53;
    }

    std::shared_ptr<LlmBackend> backend_;
    GatewayOptions options_;
    TokenLedger ledger_;
    std::mt19937_64 jitter_;
    std::mutex jitter_mu_;
    std::mutex slot_mu_;
    std::condition_variable slot_cv_;
    int slots_;
    std::optional<size_t> dimension_;
};

}  // namespace grasp
