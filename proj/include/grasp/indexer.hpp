#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "grasp/corpus.hpp"
#include "grasp/extraction.hpp"
#include "grasp/graph.hpp"
#include "grasp/llm.hpp"

namespace grasp {

/// Split passage text into sentence units. A boundary is [.!?] followed by
/// whitespace and an uppercase letter, and only counts once the current
/// segment has at least 3 word tokens (protects abbreviations like
/// "J. R. R."). A short trailing remainder is folded into the previous
/// sentence.
inline std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    size_t start = 0;
    size_t i = 0;
    auto segment_tokens = [&](size_t from, size_t to) {
        return lexical_tokens(std::string_view(text).substr(from, to - from)).size();
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            size_t j = i + 1;
            while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?'))
                ++j;
            size_t k = j;
            while (k < text.size() &&
                   std::isspace(static_cast<unsigned char>(text[k])))
                ++k;
            bool boundary = k > j && k < text.size() &&
                            std::isupper(static_cast<unsigned char>(text[k])) &&
                            segment_tokens(start, j) >= 3;
            if (boundary) {
                std::string seg = trim(text.substr(start, j - start));
                if (!seg.empty()) sentences.push_back(seg);
                start = k;
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        ++i;
    }
    std::string rest = trim(text.substr(start));
    if (!rest.empty()) {
        if (lexical_tokens(rest).size() < 3 && !sentences.empty())
            sentences.back() += " " + rest;
        else
            sentences.push_back(rest);
    }
    return sentences;
}

struct IndexBuildOptions {
    std::string unit = "proposition";  // or "sentence"
    int batch_size = 10;
    double lambda = 0.2;
    double tau = 0.7;
    bool embed_passages = false;
};

struct IndexBuildStats {
    size_t passages = 0;
    size_t propositions = 0;
    size_t entities = 0;
    size_t failed_passages = 0;
    std::vector<std::pair<std::string, std::string>> failures;
    long extraction_calls = 0;
};

namespace detail {

inline ExtractionResult extract_batch(LlmGateway& gateway,
                                      const std::vector<Passage>& batch,
                                      int batch_size, long& calls) {
    PromptPayload payload = build_extraction_request(batch, batch_size);
    CompletionRequest req;
    req.stage = Stage::extraction;
    req.system_text = payload.system_text;
    req.user_text = payload.user_text;
    req.question_id = kIndexingQuestionId;
    CompletionResponse resp = gateway.complete(req);
    ++calls;
    return parse_extraction_output(resp.text, batch);
}

}  // namespace detail

/// Build a GraphIndex from a corpus: batched joint extraction (with one
/// singleton retry per failed passage), proposition and type-label
/// embedding, and entity resolution. Sentence-unit builds skip the model
/// and the entity layer entirely.
inline GraphIndex build_index(const CorpusBatch& corpus, LlmGateway& gateway,
                              const IndexBuildOptions& options,
                              IndexBuildStats* stats_out = nullptr) {
    if (options.unit != "proposition" && options.unit != "sentence")
        throw UsageError("unknown index unit '" + options.unit + "'");
    if (options.batch_size < 1)
        throw UsageError("batch_size must be >= 1");

    GraphIndex index;
    index.manifest.unit = options.unit;
    index.manifest.lambda = options.lambda;
    index.manifest.tau = options.tau;
    index.manifest.chat_model = gateway.backend().chat_model_name();
    index.manifest.embedding_model = gateway.backend().embedding_model_name();
    index.manifest.corpus_hash = corpus_hash(corpus);
    index.manifest.has_passage_embeddings = options.embed_passages;
    IndexBuildStats stats;

    for (const Passage& p : corpus.passages) index.add_passage(p);
    stats.passages = corpus.passages.size();

    for (size_t batch_start = 0; batch_start < corpus.passages.size();
         batch_start += static_cast<size_t>(options.batch_size)) {
        std::vector<Passage> batch(
            corpus.passages.begin() + static_cast<long>(batch_start),
            corpus.passages.begin() +
                static_cast<long>(std::min(batch_start +
                                               static_cast<size_t>(options.batch_size),
                                           corpus.passages.size())));

        ExtractionResult result;
        if (options.unit == "sentence") {
            for (const Passage& p : batch) {
                PassageExtraction pe;
                pe.passage_id = p.passage_id;
                int local = 0;
                for (auto& s : split_sentences(p.text))
                    pe.propositions.push_back({local++, std::move(s)});
                result.passages.push_back(std::move(pe));
            }
        } else {
            result = detail::extract_batch(gateway, batch, options.batch_size,
                                           stats.extraction_calls);
            // One singleton retry per failed passage; a retry that yields
            // propositions replaces the first attempt.
            std::set<std::string> retried;
            std::vector<std::pair<std::string, std::string>> final_failures;
            for (const auto& [pid, reason] : result.failures) {
                if (!retried.insert(pid).second) continue;
                const Passage* src = nullptr;
                for (const Passage& p : batch)
                    if (p.passage_id == pid) src = &p;
                if (!src) continue;
                bool had_content = false;
                for (const auto& pe : result.passages)
                    if (pe.passage_id == pid && !pe.propositions.empty())
                        had_content = true;
                ExtractionResult retry;
                try {
                    retry = detail::extract_batch(gateway, {*src}, 1,
                                                  stats.extraction_calls);
                } catch (const DataError&) {
                    final_failures.emplace_back(pid, reason + " (retry unusable)");
                    continue;
                }
                bool retry_ok = !retry.passages.empty() &&
                                !retry.passages.front().propositions.empty();
                if (retry_ok) {
                    // Swap in the retried extraction.
                    std::vector<PassageExtraction> kept;
                    for (auto& pe : result.passages)
                        if (pe.passage_id != pid) kept.push_back(std::move(pe));
                    kept.push_back(std::move(retry.passages.front()));
                    result.passages = std::move(kept);
                    if (retry.failed(pid))
                        final_failures.emplace_back(
                            pid, retry.failures.front().second + " (after retry)");
                } else if (had_content) {
                    final_failures.emplace_back(pid, reason + " (kept partial)");
                } else {
                    final_failures.emplace_back(pid, reason + " (retry failed)");
                }
            }
            result.failures = std::move(final_failures);
        }

        // Restore corpus order after any retry reshuffling.
        std::map<std::string, size_t> order;
        for (size_t i = 0; i < batch.size(); ++i) order[batch[i].passage_id] = i;
        std::sort(result.passages.begin(), result.passages.end(),
                  [&order](const PassageExtraction& a, const PassageExtraction& b) {
                      return order.at(a.passage_id) < order.at(b.passage_id);
                  });

        std::vector<std::string> prop_texts;
        for (const auto& pe : result.passages)
            for (const auto& prop : pe.propositions) prop_texts.push_back(prop.text);
        std::vector<Vec> prop_embeddings;
        if (!prop_texts.empty())
            prop_embeddings = gateway.embed(prop_texts, EmbedPurpose::proposition);

        std::map<std::string, Vec> type_embeddings;
        std::vector<std::string> labels;
        for (const auto& pe : result.passages)
            for (const auto& ent : pe.entities)
                if (!type_embeddings.count(ent.entity_type)) {
                    type_embeddings[ent.entity_type] = {};
                    labels.push_back(ent.entity_type);
                }
        if (!labels.empty()) {
            std::vector<Vec> vecs = gateway.embed(labels, EmbedPurpose::type_label);
            for (size_t i = 0; i < labels.size(); ++i)
                type_embeddings[labels[i]] = std::move(vecs[i]);
        }

        index.insert_extraction(result, prop_embeddings, type_embeddings);
        for (auto& f : result.failures) stats.failures.push_back(std::move(f));
    }

    if (options.embed_passages) {
        std::vector<std::string> texts;
        for (const Passage& p : corpus.passages) texts.push_back(p.text);
        std::vector<Vec> vecs = gateway.embed(texts, EmbedPurpose::passage);
        for (size_t i = 0; i < corpus.passages.size(); ++i)
            index.passage_embeddings[corpus.passages[i].passage_id] =
                std::move(vecs[i]);
    }

    stats.propositions = index.propositions.size();
    stats.entities = index.entities.size();
    stats.failed_passages = stats.failures.size();
    if (stats_out) *stats_out = stats;
    return index;
}

}  // namespace grasp
