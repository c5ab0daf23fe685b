#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "grasp/llm.hpp"

namespace grasp {

/// Backend speaking the common chat-completions + embeddings JSON protocol.
/// 429/5xx and transport errors are transient (the gateway retries them);
/// other 4xx responses are permanent failures.
class HttpLlmBackend : public LlmBackend {
public:
    explicit HttpLlmBackend(HttpBackendConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty())
            throw UsageError("http backend requires a base_url");
        if (config_.chat_model.empty() || config_.embedding_model.empty())
            throw UsageError("http backend requires chat and embedding model names");
        if (const char* key = std::getenv(config_.api_key_env.c_str()))
            api_key_ = key;
    }

    BackendCompletion complete(Stage, const std::string& system_text,
                               const std::string& user_text, double temperature,
                               const std::optional<std::string>& reasoning) override {
        ojson body;
        body["model"] = config_.chat_model;
        body["messages"] = ojson::array();
        if (!system_text.empty())
            body["messages"].push_back({{"role", "system"}, {"content", system_text}});
        body["messages"].push_back({{"role", "user"}, {"content", user_text}});
        body["temperature"] = temperature;
        if (reasoning) body["reasoning_effort"] = *reasoning;

        json resp = post_json(config_.chat_path, body);
        try {
            BackendCompletion out;
            out.text = resp.at("choices").at(0).at("message").at("content")
                           .get<std::string>();
            const auto& usage = resp.at("usage");
            out.input_tokens = usage.at("prompt_tokens").get<long>();
            out.output_tokens = usage.at("completion_tokens").get<long>();
            return out;
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed completion response: ") +
                               e.what());
        }
    }

    std::vector<Vec> embed(const std::vector<std::string>& texts,
                           EmbedPurpose) override {
        ojson body;
        body["model"] = config_.embedding_model;
        body["input"] = texts;
        json resp = post_json(config_.embedding_path, body);
        try {
            std::vector<Vec> out(texts.size());
            for (const auto& item : resp.at("data")) {
                size_t idx = item.at("index").get<size_t>();
                if (idx >= out.size())
                    throw BackendError("embedding index out of range");
                Vec v = item.at("embedding").get<Vec>();
                double n = norm(v);
                if (n == 0.0) throw BackendError("backend returned a zero embedding");
                for (double& x : v) x /= n;
                out[idx] = std::move(v);
            }
            for (const Vec& v : out)
                if (v.empty()) throw BackendError("missing embedding in response");
            return out;
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed embedding response: ") +
                               e.what());
        }
    }

    std::string chat_model_name() const override { return config_.chat_model; }
    std::string embedding_model_name() const override {
        return config_.embedding_model;
    }

private:
    json post_json(const std::string& path, const ojson& body) {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!api_key_.empty())
            headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res)
            throw TransientBackendError("connection to " + config_.base_url +
                                        " failed: " + httplib::to_string(res.error()));
        if (res->status == 429 || res->status >= 500)
            throw TransientBackendError("HTTP " + std::to_string(res->status) +
                                        " from " + path);
        if (res->status != 200)
            throw BackendError("HTTP " + std::to_string(res->status) + " from " +
                               path + ": " + res->body);
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw BackendError(std::string("non-JSON response from ") + path +
                               ": " + e.what());
        }
    }

    HttpBackendConfig config_;
    std::string api_key_;
};

}  // namespace grasp
