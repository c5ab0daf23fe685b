#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grasp/common.hpp"

namespace grasp {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// Where a corpus came from: a retrieval-setting passage file, or LongBench
/// records whose long contexts are chunked locally into pseudo-passages.
enum class SourceFormat { retrieval_split, longbench };

inline std::string source_format_name(SourceFormat f) {
    return f == SourceFormat::retrieval_split ? "retrieval_split" : "longbench";
}

inline SourceFormat parse_source_format(const std::string& s) {
    if (s == "retrieval_split") return SourceFormat::retrieval_split;
    if (s == "longbench") return SourceFormat::longbench;
    throw UsageError("unknown corpus format '" + s +
                     "' (expected retrieval_split or longbench)");
}

struct Passage {
    std::string passage_id;
    std::string title;
    std::string text;

    bool operator==(const Passage&) const = default;
};

struct CorpusBatch {
    std::vector<Passage> passages;
    SourceFormat source_format = SourceFormat::retrieval_split;
};

struct QuestionRecord {
    std::string question_id;
    std::string question;
    std::vector<std::string> gold_answers;
    std::vector<std::string> gold_passage_ids;   // empty when unavailable
    std::optional<int> hop_count;
    std::vector<std::string> gold_sub_questions; // empty when unavailable
};

namespace detail {

inline json parse_jsonl_line(const std::string& path, size_t line_no,
                             const std::string& line) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
}

inline std::string require_string(const json& j, const char* key,
                                  const std::string& where) {
    if (!j.contains(key) || !j[key].is_string())
        throw DataError(where + ": missing or non-string field '" + key + "'");
    return j[key].get<std::string>();
}

}  // namespace detail

/// Split a LongBench context into pseudo-passages on `delimiter`, dropping
/// whitespace-only pieces.
inline std::vector<std::string> split_context(const std::string& context,
                                              const std::string& delimiter) {
    std::vector<std::string> pieces;
    if (delimiter.empty()) {
        pieces.push_back(context);
        return pieces;
    }
    size_t start = 0;
    while (start <= context.size()) {
        size_t pos = context.find(delimiter, start);
        std::string piece = pos == std::string::npos
                                ? context.substr(start)
                                : context.substr(start, pos - start);
        if (!trim(piece).empty()) pieces.push_back(trim(piece));
        if (pos == std::string::npos) break;
        start = pos + delimiter.size();
    }
    return pieces;
}

/// Load a passage corpus.
///
/// retrieval_split: JSONL of {"passage_id","title","text"}.
/// longbench: JSONL of {"question_id","context"}; each context is chunked on
/// `longbench_delimiter` into synthetic passages "<question_id>#<k>".
inline CorpusBatch load_corpus(const std::string& path, SourceFormat format,
                               const std::string& longbench_delimiter = "\n\n") {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    CorpusBatch batch;
    batch.source_format = format;
    std::map<std::string, size_t> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = detail::parse_jsonl_line(path, line_no, line);
        std::string where = path + ":" + std::to_string(line_no);
        if (format == SourceFormat::retrieval_split) {
            Passage p;
            p.passage_id = detail::require_string(j, "passage_id", where);
            p.title = detail::require_string(j, "title", where);
            p.text = detail::require_string(j, "text", where);
            if (p.passage_id.empty())
                throw DataError(where + ": empty passage_id");
            if (trim(p.text).empty())
                throw DataError(where + ": empty text for passage '" +
                                p.passage_id + "'");
            if (!seen.emplace(p.passage_id, line_no).second)
                throw DataError(where + ": duplicate passage_id '" +
                                p.passage_id + "'");
            batch.passages.push_back(std::move(p));
        } else {
            std::string qid = detail::require_string(j, "question_id", where);
            std::string context = detail::require_string(j, "context", where);
            if (qid.empty()) throw DataError(where + ": empty question_id");
            std::vector<std::string> pieces =
                split_context(context, longbench_delimiter);
            if (pieces.empty())
                throw DataError(where + ": context of '" + qid +
                                "' has no non-empty chunks");
            for (size_t k = 0; k < pieces.size(); ++k) {
                Passage p;
                p.passage_id = qid + "#" + std::to_string(k);
                p.title = p.passage_id;
                p.text = pieces[k];
                if (!seen.emplace(p.passage_id, line_no).second)
                    throw DataError(where + ": duplicate passage_id '" +
                                    p.passage_id + "'");
                batch.passages.push_back(std::move(p));
            }
        }
    }
    if (batch.passages.empty())
        throw DataError("corpus is empty: " + path);
    return batch;
}

/// Write a batch back out in the canonical retrieval_split layout.
inline void save_corpus(const CorpusBatch& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write corpus file: " + path);
    for (const Passage& p : batch.passages) {
        ojson j;
        j["passage_id"] = p.passage_id;
        j["title"] = p.title;
        j["text"] = p.text;
        out << j.dump() << "\n";
    }
}

/// Load a question set: JSONL of {"question_id","question","answers"} plus
/// optional "gold_passage_ids", "hops", and "sub_questions".
inline std::vector<QuestionRecord> load_question_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open question file: " + path);
    std::vector<QuestionRecord> records;
    std::map<std::string, size_t> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = detail::parse_jsonl_line(path, line_no, line);
        std::string where = path + ":" + std::to_string(line_no);
        QuestionRecord r;
        r.question_id = detail::require_string(j, "question_id", where);
        r.question = detail::require_string(j, "question", where);
        if (r.question_id.empty()) throw DataError(where + ": empty question_id");
        if (trim(r.question).empty())
            throw DataError(where + ": empty question for '" + r.question_id + "'");
        if (!seen.emplace(r.question_id, line_no).second)
            throw DataError(where + ": duplicate question_id '" + r.question_id +
                            "'");
        if (!j.contains("answers") || !j["answers"].is_array())
            throw DataError(where + ": missing 'answers' array for '" +
                            r.question_id + "'");
        for (const auto& a : j["answers"]) {
            if (!a.is_string())
                throw DataError(where + ": non-string answer for '" +
                                r.question_id + "'");
            r.gold_answers.push_back(a.get<std::string>());
        }
        if (r.gold_answers.empty())
            throw DataError(where + ": empty answer list for '" + r.question_id +
                            "'");
        if (j.contains("gold_passage_ids")) {
            if (!j["gold_passage_ids"].is_array())
                throw DataError(where + ": 'gold_passage_ids' must be an array");
            for (const auto& g : j["gold_passage_ids"])
                r.gold_passage_ids.push_back(g.get<std::string>());
        }
        if (j.contains("hops") && !j["hops"].is_null()) {
            if (!j["hops"].is_number_integer())
                throw DataError(where + ": 'hops' must be an integer");
            int h = j["hops"].get<int>();
            if (h < 2)
                throw DataError(where + ": 'hops' must be >= 2 for '" +
                                r.question_id + "'");
            r.hop_count = h;
        }
        if (j.contains("sub_questions")) {
            if (!j["sub_questions"].is_array())
                throw DataError(where + ": 'sub_questions' must be an array");
            for (const auto& s : j["sub_questions"])
                r.gold_sub_questions.push_back(s.get<std::string>());
        }
        records.push_back(std::move(r));
    }
    if (records.empty()) throw DataError("question set is empty: " + path);
    return records;
}

inline std::string corpus_hash(const CorpusBatch& batch) {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s, char sep) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= static_cast<unsigned char>(sep);
        h *= 1099511628211ULL;
    };
    for (const Passage& p : batch.passages) {
        mix(p.passage_id, '\x1f');
        mix(p.title, '\x1f');
        mix(p.text, '\x1e');
    }
    return to_hex(h);
}

}  // namespace grasp
