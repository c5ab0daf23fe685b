#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "grasp/common.hpp"
#include "grasp/corpus.hpp"
#include "grasp/prompts.hpp"

namespace grasp {

struct ExtractedProposition {
    int local_index = 0;            // 0-based, contiguous within the passage
    std::string text;
};

struct ExtractedEntity {
    std::string canonical_name;
    std::string entity_type;
    std::vector<int> proposition_indices;  // local, non-empty
};

struct PassageExtraction {
    std::string passage_id;
    std::vector<ExtractedProposition> propositions;
    std::vector<ExtractedEntity> entities;
};

struct ExtractionResult {
    std::vector<PassageExtraction> passages;
    // Passages whose output was missing or not fully usable; the build
    // continues without (or with a partial view of) them.
    std::vector<std::pair<std::string, std::string>> failures;  // id, reason

    bool failed(const std::string& passage_id) const {
        for (const auto& [id, reason] : failures)
            if (id == passage_id) return true;
        return false;
    }
};

struct PromptPayload {
    std::string system_text;
    std::string user_text;
};

/// Build one joint-extraction request for up to `batch_size` passages. The
/// instruction prompt is the system text; numbered passage blocks form the
/// user text.
inline PromptPayload build_extraction_request(const std::vector<Passage>& batch,
                                              int batch_size) {
    if (batch_size < 1)
        throw UsageError("extraction batch_size must be >= 1");
    if (batch.empty())
        throw UsageError("extraction batch is empty");
    if (batch.size() > static_cast<size_t>(batch_size))
        throw UsageError("extraction batch has " + std::to_string(batch.size()) +
                         " passages, limit is " + std::to_string(batch_size));
    PromptPayload payload;
    payload.system_text = std::string(prompts::kJointExtraction);
    std::string user;
    for (size_t i = 0; i < batch.size(); ++i) {
        user += "Passage [" + std::to_string(i) + "]:\n";
        user += "Document Title: " + batch[i].title + "\n";
        user += "Content: " + batch[i].text + "\n";
        if (i + 1 < batch.size()) user += "\n";
    }
    payload.user_text = std::move(user);
    return payload;
}

namespace detail {

/// "Passage [3]:" header -> 3; tolerates surrounding whitespace and a
/// missing colon.
inline std::optional<int> parse_passage_header(const std::string& line) {
    std::string t = trim(line);
    if (!starts_with_icase(t, "passage")) return std::nullopt;
    size_t open = t.find('[');
    if (open == std::string::npos) return std::nullopt;
    size_t close = t.find(']', open);
    if (close == std::string::npos) return std::nullopt;
    std::string num = trim(t.substr(open + 1, close - open - 1));
    if (num.empty() || num.size() > 9) return std::nullopt;
    for (char c : num)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    return std::stoi(num);
}

/// "[2] some text" -> (2, "some text").
inline std::optional<std::pair<int, std::string>> parse_proposition_line(
    const std::string& line) {
    std::string t = trim(line);
    if (t.empty() || t[0] != '[') return std::nullopt;
    size_t close = t.find(']');
    if (close == std::string::npos) return std::nullopt;
    std::string num = trim(t.substr(1, close - 1));
    if (num.empty() || num.size() > 9) return std::nullopt;
    for (char c : num)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    std::string text = trim(t.substr(close + 1));
    if (text.empty()) return std::nullopt;
    return std::make_pair(std::stoi(num), text);
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    for (;;) {
        size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

/// Parse the model's joint-extraction output for `batch`. Tolerant by
/// design: unusable blocks are flagged per passage instead of aborting the
/// build. Only a completely unparseable response throws.
///
/// Failure handling per passage:
///  - block missing, or propositions absent/non-contiguous: flagged, no
///    content is kept (entity references would be unreliable);
///  - malformed entity row or out-of-range proposition index: that row is
///    dropped and the passage flagged, everything else is kept;
///  - empty entity type: defaulted to "Entity" (not a failure).
inline ExtractionResult parse_extraction_output(const std::string& raw,
                                                const std::vector<Passage>& batch) {
    std::vector<std::string> lines = split_lines(raw);

    // Carve the response into per-passage blocks.
    std::vector<std::pair<int, std::vector<std::string>>> blocks;
    std::vector<std::string>* current = nullptr;
    for (const auto& line : lines) {
        if (auto idx = detail::parse_passage_header(line)) {
            blocks.emplace_back(*idx, std::vector<std::string>{});
            current = &blocks.back().second;
        } else if (current) {
            current->push_back(line);
        }
    }
    if (blocks.empty())
        throw DataError("extraction output contains no passage blocks");

    ExtractionResult result;
    auto flag = [&result](const std::string& id, const std::string& reason) {
        result.failures.emplace_back(id, reason);
    };

    std::set<size_t> seen;
    std::vector<std::optional<PassageExtraction>> parsed(batch.size());
    std::vector<std::optional<std::string>> parse_errors(batch.size());

    for (const auto& [idx, block_lines] : blocks) {
        if (idx < 0 || static_cast<size_t>(idx) >= batch.size())
            continue;  // unattributable block
        size_t i = static_cast<size_t>(idx);
        if (!seen.insert(i).second) {
            parse_errors[i] = parse_errors[i].value_or("") + "; duplicate block";
            continue;  // first block wins
        }

        PassageExtraction pe;
        pe.passage_id = batch[i].passage_id;
        std::string soft_error;

        enum class Section { none, propositions, entities };
        Section section = Section::none;
        bool hard_fail = false;
        std::vector<std::pair<int, std::string>> props;
        for (const auto& line : block_lines) {
            std::string t = trim(line);
            if (t.empty()) continue;
            if (starts_with_icase(t, "propositions")) {
                section = Section::propositions;
                continue;
            }
            if (starts_with_icase(t, "entities")) {
                section = Section::entities;
                continue;
            }
            if (section == Section::propositions) {
                if (auto p = detail::parse_proposition_line(t)) {
                    props.push_back(*p);
                } else {
                    parse_errors[i] = "malformed proposition line: " + t;
                    hard_fail = true;
                    break;
                }
            } else if (section == Section::entities) {
                std::vector<std::string> fields = detail::split_on(t, '|');
                if (fields.size() != 3) {
                    soft_error = "malformed entity row: " + t;
                    continue;
                }
                ExtractedEntity ent;
                ent.canonical_name = trim(fields[0]);
                ent.entity_type = trim(fields[1]);
                if (ent.canonical_name.empty()) {
                    soft_error = "entity row with empty name";
                    continue;
                }
                if (ent.entity_type.empty()) ent.entity_type = "Entity";
                bool ok = true;
                for (const auto& tok : lexical_tokens(fields[2])) {
                    bool digits = !tok.empty() && tok.size() <= 9;
                    for (char c : tok)
                        if (!std::isdigit(static_cast<unsigned char>(c)))
                            digits = false;
                    if (!digits) {
                        ok = false;
                        break;
                    }
                    ent.proposition_indices.push_back(std::stoi(tok));
                }
                if (!ok || ent.proposition_indices.empty()) {
                    soft_error = "entity row with bad proposition indices: " + t;
                    continue;
                }
                pe.entities.push_back(std::move(ent));
            }
        }
        if (hard_fail) continue;

        // Proposition indices must be exactly 0..n-1 in order; anything else
        // makes entity references unreliable.
        if (props.empty()) {
            parse_errors[i] = "no propositions";
            continue;
        }
        bool contiguous = true;
        for (size_t k = 0; k < props.size(); ++k)
            if (props[k].first != static_cast<int>(k)) contiguous = false;
        if (!contiguous) {
            parse_errors[i] = "non-contiguous proposition indices";
            continue;
        }
        for (size_t k = 0; k < props.size(); ++k)
            pe.propositions.push_back({static_cast<int>(k), props[k].second});

        // Validate entity references against the proposition count.
        int n = static_cast<int>(pe.propositions.size());
        std::vector<ExtractedEntity> kept;
        for (auto& ent : pe.entities) {
            bool in_range = true;
            for (int pi : ent.proposition_indices)
                if (pi < 0 || pi >= n) in_range = false;
            if (!in_range) {
                soft_error = "entity '" + ent.canonical_name +
                             "' references an out-of-range proposition";
                continue;
            }
            kept.push_back(std::move(ent));
        }
        pe.entities = std::move(kept);
        if (!soft_error.empty()) parse_errors[i] = soft_error;
        parsed[i] = std::move(pe);
    }

    for (size_t i = 0; i < batch.size(); ++i) {
        if (parsed[i]) {
            result.passages.push_back(std::move(*parsed[i]));
            if (parse_errors[i]) flag(batch[i].passage_id, *parse_errors[i]);
        } else {
            flag(batch[i].passage_id,
                 parse_errors[i] ? *parse_errors[i] : "missing passage block");
        }
    }
    return result;
}

}  // namespace grasp
