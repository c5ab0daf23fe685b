#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "grasp/graph.hpp"
#include "grasp/llm.hpp"
#include "grasp/prompts.hpp"
#include "grasp/retrieval.hpp"

namespace grasp {

struct SubQuestion {
    int index = 0;                  // 1-based position in the plan
    std::string text;
    std::vector<int> dependencies;  // #N references, all < index
};

struct Plan {
    std::string rational_plan;
    std::vector<SubQuestion> sub_questions;
    std::vector<std::string> flags;
};

struct HistoryEntry {
    std::string sub_question;
    std::string answer;
};

enum class ActionKind { done, query_again };

struct EvidenceAction {
    ActionKind kind = ActionKind::query_again;
    std::string answer;
    std::vector<long> supporting_prop_ids;
    std::string node_findings;
    std::string reasoning_frontier;
    std::string new_search_statement;
    std::vector<std::string> keywords;
};

struct CandidateTrace {
    long entity_id = 0;
    std::string name;
    std::string type_label;
    double score = 0.0;
};

struct IterationTrace {
    int iteration = 0;  // 1-based
    std::string statement;
    std::vector<std::string> keywords;
    std::vector<CandidateTrace> candidates;
    std::vector<long> selected_entities;
    std::vector<ScoredPassage> passages;
    std::vector<long> pooled_prop_ids;  // rank_passages candidate pool
    std::optional<EvidenceAction> action;
    std::vector<std::string> flags;
};

struct SubAgentTrace {
    int index = 0;
    std::string sub_question;
    std::vector<IterationTrace> iterations;
    std::string answer;
    bool terminal = false;  // finished via DONE
    std::vector<std::string> flags;
};

struct PipelineResult {
    std::string question_id;
    std::string question;
    Plan plan;
    std::vector<SubAgentTrace> sub_agents;
    std::vector<HistoryEntry> history;
    std::string final_answer;
    std::string rationale;
    std::string failure_reason;  // empty on success
    std::vector<std::string> flags;
};

struct AgentParams {
    RetrievalParams retrieval;
    int max_iterations = 2;
    int max_sub_questions = 4;
};

/// Internal: a model response the agent could not interpret even after its
/// re-prompt budget.
struct AgentParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Response parsing

/// Remove "[ID: ...]" citation tags and tidy leftover whitespace.
inline std::string strip_citation_tags(const std::string& text) {
    std::string out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t open = text.find("[ID:", pos);
        if (open == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        size_t close = text.find(']', open);
        if (close == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        out += text.substr(pos, open - pos);
        pos = close + 1;
    }
    // Collapse doubled spaces and space-before-punctuation artifacts.
    std::string tidy;
    for (char c : out) {
        if (c == ' ' && !tidy.empty() && tidy.back() == ' ') continue;
        if ((c == '.' || c == ',' || c == ';') && !tidy.empty() && tidy.back() == ' ')
            tidy.pop_back();
        tidy.push_back(c);
    }
    return trim(tidy);
}

namespace detail {

inline bool is_int_token(const std::string& s) {
    if (s.empty() || s.size() > 9) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

inline std::vector<long> extract_int_list(const std::string& text) {
    std::vector<long> out;
    for (const auto& tok : lexical_tokens(text))
        if (is_int_token(tok)) out.push_back(std::stol(tok));
    return out;
}

/// First "[...]" group in `text` whose content is only integers and
/// separators; nullopt when there is none.
inline std::optional<std::vector<long>> bracketed_int_list(const std::string& text) {
    size_t pos = 0;
    while ((pos = text.find('[', pos)) != std::string::npos) {
        size_t close = text.find(']', pos);
        if (close == std::string::npos) return std::nullopt;
        std::string inner = text.substr(pos + 1, close - pos - 1);
        bool ints_only = !trim(inner).empty();
        for (char c : inner) {
            if (std::isdigit(static_cast<unsigned char>(c)) || c == ',' ||
                std::isspace(static_cast<unsigned char>(c)))
                continue;
            ints_only = false;
            break;
        }
        if (ints_only) return extract_int_list(inner);
        pos = close + 1;
    }
    return std::nullopt;
}

/// Keyword list parser shared by the rewrite and evaluation outputs.
/// Accepts ["a", "b"], quoted strings, or a plain comma-separated list.
inline std::vector<std::string> parse_keyword_list(const std::string& raw) {
    std::string text = trim(raw);
    size_t open = text.find('[');
    size_t close = text.rfind(']');
    if (open != std::string::npos && close != std::string::npos && close > open)
        text = text.substr(open + 1, close - open - 1);
    std::vector<std::string> keywords;
    // Prefer quoted segments when present.
    std::vector<std::string> quoted;
    for (size_t i = 0; i < text.size();) {
        if (text[i] == '"' || text[i] == '\'' || text[i] == '`') {
            char q = text[i] == '`' ? '\'' : text[i];
            size_t start = i + 1;
            while (start < text.size() && (text[start] == '`' || text[start] == text[i]))
                ++start;
            size_t end = start;
            while (end < text.size() && text[end] != q && text[end] != '\'' &&
                   text[end] != '"')
                ++end;
            if (end > start) quoted.push_back(text.substr(start, end - start));
            i = end + 1;
        } else {
            ++i;
        }
    }
    if (!quoted.empty()) {
        for (auto& q : quoted) {
            std::string t = trim(q);
            if (!t.empty()) keywords.push_back(std::move(t));
        }
        return keywords;
    }
    size_t start = 0;
    for (;;) {
        size_t pos = text.find(',', start);
        std::string piece = pos == std::string::npos
                                ? text.substr(start)
                                : text.substr(start, pos - start);
        std::string t = trim(piece);
        if (!t.empty()) keywords.push_back(std::move(t));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return keywords;
}

/// Does the trimmed line start with "<label>:" (case-insensitive), after
/// optional bullet markers? Returns the text after the colon.
inline std::optional<std::string> labeled_value(const std::string& line,
                                                std::string_view label) {
    std::string t = trim(line);
    while (!t.empty() && (t[0] == '-' || t[0] == '*' || t[0] == '>'))
        t = trim(t.substr(1));
    if (!starts_with_icase(t, label)) return std::nullopt;
    std::string rest = trim(t.substr(label.size()));
    // Tolerate markdown emphasis around the label: "**Label:** value".
    while (!rest.empty() && rest[0] == '*') rest = trim(rest.substr(1));
    if (rest.empty() || rest[0] != ':') return std::nullopt;
    std::string value = trim(rest.substr(1));
    while (!value.empty() && value[0] == '*') value = trim(value.substr(1));
    return value;
}

inline std::string strip_quotes(const std::string& s) {
    std::string t = trim(s);
    while (t.size() >= 2 &&
           ((t.front() == '"' && t.back() == '"') ||
            (t.front() == '\'' && t.back() == '\'') ||
            (t.front() == '`' && t.back() == '`')))
        t = trim(t.substr(1, t.size() - 2));
    return t;
}

}  // namespace detail

/// Parse the planner's response. Throws AgentParseError when no usable
/// sub-question list is present or a dependency points forward; an
/// over-long list is truncated and flagged instead.
inline Plan parse_plan(const std::string& raw, int max_sub_questions) {
    Plan plan;
    std::vector<std::string> lines = split_lines(raw);

    enum class Section { preamble, rational, subqs };
    Section section = Section::preamble;
    std::vector<std::string> rational_parts;
    for (const auto& line : lines) {
        if (auto v = detail::labeled_value(line, "rational plan")) {
            section = Section::rational;
            if (!v->empty()) rational_parts.push_back(*v);
            continue;
        }
        std::string t = trim(line);
        if (starts_with_icase(t, "sub-questions") ||
            starts_with_icase(t, "sub questions") ||
            starts_with_icase(t, "subquestions")) {
            section = Section::subqs;
            continue;
        }
        if (section == Section::rational && !t.empty()) {
            rational_parts.push_back(t);
        } else if (section == Section::subqs && !t.empty()) {
            // "N. text" or "N) text"
            size_t i = 0;
            while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i])))
                ++i;
            if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
                std::string text = trim(t.substr(i + 1));
                if (!text.empty()) {
                    SubQuestion sq;
                    sq.index = static_cast<int>(plan.sub_questions.size()) + 1;
                    sq.text = text;
                    plan.sub_questions.push_back(std::move(sq));
                }
            } else if (!plan.sub_questions.empty()) {
                plan.sub_questions.back().text += " " + t;
            }
        }
    }
    for (size_t i = 0; i < rational_parts.size(); ++i) {
        if (i) plan.rational_plan += " ";
        plan.rational_plan += rational_parts[i];
    }
    if (plan.sub_questions.empty())
        throw AgentParseError("planner response has no sub-questions");
    if (plan.rational_plan.empty()) plan.flags.push_back("missing_rational_plan");
    if (plan.sub_questions.size() > static_cast<size_t>(max_sub_questions)) {
        plan.sub_questions.resize(static_cast<size_t>(max_sub_questions));
        plan.flags.push_back("sub_question_overflow");
    }
    for (auto& sq : plan.sub_questions) {
        for (size_t pos = 0; (pos = sq.text.find('#', pos)) != std::string::npos;
             ++pos) {
            size_t end = pos + 1;
            while (end < sq.text.size() &&
                   std::isdigit(static_cast<unsigned char>(sq.text[end])))
                ++end;
            if (end == pos + 1) continue;
            int ref = std::stoi(sq.text.substr(pos + 1, end - pos - 1));
            if (ref < 1 || ref >= sq.index)
                throw AgentParseError("sub-question " + std::to_string(sq.index) +
                                      " references #" + std::to_string(ref) +
                                      ", which is not an earlier step");
            sq.dependencies.push_back(ref);
        }
    }
    return plan;
}

/// Parse "Search Statement: ... / Keywords: [...]" from a rewrite response.
/// Returns nullopt when no non-empty statement can be found.
inline std::optional<std::pair<std::string, std::vector<std::string>>>
parse_search_statement(const std::string& raw) {
    std::string statement;
    std::vector<std::string> keywords;
    for (const auto& line : split_lines(raw)) {
        if (auto v = detail::labeled_value(line, "search statement")) {
            if (statement.empty())
                statement = strip_citation_tags(detail::strip_quotes(*v));
        } else if (auto k = detail::labeled_value(line, "keywords")) {
            if (keywords.empty()) keywords = detail::parse_keyword_list(*k);
        }
    }
    if (statement.empty()) return std::nullopt;
    return std::make_pair(statement, keywords);
}

/// Parse the selected node ids from a selection response, keeping offer
/// order of `offered` out of it: result preserves the model's stated order,
/// minus ids that were never offered (reported via `dropped`).
inline std::vector<long> parse_selection(const std::string& raw,
                                         const std::vector<long>& offered,
                                         int* dropped = nullptr) {
    std::optional<std::vector<long>> ids;
    for (const auto& line : split_lines(raw)) {
        if (auto v = detail::labeled_value(line, "node_ids")) {
            if (auto b = detail::bracketed_int_list(*v)) ids = *b;
            else {
                auto flat = detail::extract_int_list(*v);
                if (!flat.empty()) ids = flat;
            }
            if (ids) break;
        }
    }
    if (!ids) ids = detail::bracketed_int_list(raw);
    if (!ids) {
        if (dropped) *dropped = 0;
        return {};
    }
    std::set<long> offer_set(offered.begin(), offered.end());
    std::vector<long> selected;
    std::set<long> taken;
    int invalid = 0;
    for (long id : *ids) {
        if (!offer_set.count(id)) {
            ++invalid;
            continue;
        }
        if (taken.insert(id).second) selected.push_back(id);
    }
    if (dropped) *dropped = invalid;
    return selected;
}

/// Parse an evidence-evaluation response. Returns nullopt when no action
/// field is recognizable, or when QUERY_AGAIN lacks a usable new statement.
inline std::optional<EvidenceAction> parse_evidence_action(const std::string& raw) {
    // "reasoning" is recognized so free-form rationale lines do not get
    // folded into the preceding field; its value is otherwise unused.
    static const std::vector<std::string> kFields = {
        "action",          "answer",
        "supporting_prop_ids", "node_findings",
        "reasoning_frontier",  "new_search_statement",
        "keywords",        "reasoning"};
    std::map<std::string, std::string> values;
    std::string current;
    for (const auto& line : split_lines(raw)) {
        bool matched = false;
        for (const auto& field : kFields) {
            if (auto v = detail::labeled_value(line, field)) {
                values[field] = *v;
                current = field;
                matched = true;
                break;
            }
        }
        if (!matched && !current.empty() && !trim(line).empty())
            values[current] += " " + trim(line);
    }
    auto it = values.find("action");
    if (it == values.end()) return std::nullopt;
    std::string action = lower_ascii(detail::strip_quotes(it->second));
    EvidenceAction out;
    if (action.find("query_again") != std::string::npos ||
        action.find("query again") != std::string::npos)
        out.kind = ActionKind::query_again;
    else if (action.find("done") != std::string::npos)
        out.kind = ActionKind::done;
    else
        return std::nullopt;
    if (values.count("answer"))
        out.answer = detail::strip_quotes(values["answer"]);
    if (values.count("supporting_prop_ids"))
        out.supporting_prop_ids =
            detail::extract_int_list(values["supporting_prop_ids"]);
    if (values.count("node_findings"))
        out.node_findings = trim(values["node_findings"]);
    if (values.count("reasoning_frontier"))
        out.reasoning_frontier = detail::strip_quotes(values["reasoning_frontier"]);
    if (values.count("new_search_statement"))
        out.new_search_statement = strip_citation_tags(
            detail::strip_quotes(values["new_search_statement"]));
    if (values.count("keywords"))
        out.keywords = detail::parse_keyword_list(values["keywords"]);
    if (out.kind == ActionKind::query_again && out.new_search_statement.empty())
        return std::nullopt;
    return out;
}

/// Extract the final answer after the last "So the answer is:" marker,
/// trimming trailing punctuation. Falls back to the last non-empty line
/// when the marker is missing (flagged by the caller).
inline std::pair<std::string, bool> parse_synthesis_answer(const std::string& raw) {
    static const std::string marker = "so the answer is:";
    std::string lower = lower_ascii(raw);
    size_t pos = lower.rfind(marker);
    std::string answer;
    bool found = pos != std::string::npos;
    if (found) {
        answer = raw.substr(pos + marker.size());
    } else {
        for (const auto& line : split_lines(raw)) {
            std::string t = trim(line);
            if (!t.empty()) answer = t;
        }
        while (!answer.empty() && (answer[0] == '-' || answer[0] == '*'))
            answer = trim(answer.substr(1));
    }
    answer = strip_citation_tags(answer);
    answer = trim(answer);
    while (!answer.empty()) {
        char c = answer.back();
        if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':' ||
            c == '"' || c == '\'')
            answer.pop_back();
        else
            break;
    }
    return {trim(answer), found};
}

// ---------------------------------------------------------------------------
// Deterministic prompt-context rendering

inline std::string render_history(const std::vector<HistoryEntry>& history) {
    if (history.empty()) return "(none)";
    std::string out;
    for (size_t i = 0; i < history.size(); ++i) {
        if (i) out += "\n";
        out += "Step " + std::to_string(i + 1) + " Answer: " + history[i].answer;
    }
    return out;
}

inline std::string render_research(const std::vector<HistoryEntry>& history) {
    std::string out;
    for (size_t i = 0; i < history.size(); ++i) {
        if (i) out += "\n\n";
        out += "Step #" + std::to_string(i + 1) + ":\n";
        out += "Q: " + history[i].sub_question + "\n";
        out += "A: " + history[i].answer;
    }
    return out;
}

inline std::string render_candidates(const std::vector<CandidateTrace>& candidates) {
    std::string out;
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (i) out += "\n";
        out += "node_id: " + std::to_string(candidates[i].entity_id) + " | " +
               candidates[i].name + " | type: " + candidates[i].type_label +
               " | score: " + format_fixed(candidates[i].score, 4);
    }
    return out;
}

inline std::string render_id_list(const std::set<long>& ids) {
    if (ids.empty()) return "none";
    std::string out = "[";
    bool first = true;
    for (long id : ids) {
        if (!first) out += ", ";
        out += std::to_string(id);
        first = false;
    }
    return out + "]";
}

/// Everything the sub-agent has observed so far; rendered into the
/// selection ({state_context}) and evaluation ({state_block}) prompts.
struct ObservationState {
    std::string original_question;
    std::string rational_plan;
    std::string sub_question;
    std::string statement;
    std::vector<HistoryEntry> history;
    std::vector<std::string> node_findings;
    std::set<long> visited_entity_ids;
    std::set<long> visited_prop_ids;
    int iteration = 1;
    int max_iterations = 2;
};

inline std::string render_state_context(const ObservationState& s) {
    std::string out;
    out += "Original Question: " + s.original_question + "\n";
    out += "Rational Plan: " + s.rational_plan + "\n";
    out += "Context History:\n" + render_history(s.history) + "\n";
    out += "Iteration: " + std::to_string(s.iteration) + " of " +
           std::to_string(s.max_iterations) + "\n";
    out += "Findings from visited nodes:\n";
    if (s.node_findings.empty()) {
        out += "(none)\n";
    } else {
        for (const auto& f : s.node_findings) out += "- " + f + "\n";
    }
    out += "Already visited node IDs: " + render_id_list(s.visited_entity_ids);
    return out;
}

inline std::string render_state_block(const ObservationState& s) {
    std::string out;
    out += "Original Question: " + s.original_question + "\n";
    out += "Sub-question: " + s.sub_question + "\n";
    out += "Search Statement: " + s.statement + "\n";
    out += "Context History:\n" + render_history(s.history) + "\n";
    out += "Iteration: " + std::to_string(s.iteration) + " of " +
           std::to_string(s.max_iterations) + "\n";
    out += "Findings from visited nodes:\n";
    if (s.node_findings.empty()) {
        out += "(none)\n";
    } else {
        for (const auto& f : s.node_findings) out += "- " + f + "\n";
    }
    out += "Already visited node IDs: " + render_id_list(s.visited_entity_ids) + "\n";
    out += "Already seen proposition IDs: " + render_id_list(s.visited_prop_ids);
    return out;
}

/// Evidence block: each surfaced passage with the pooled propositions that
/// belong to it, ascending by proposition id.
inline std::string render_evidence(const GraphIndex& index,
                                   const std::vector<ScoredPassage>& passages,
                                   const std::vector<RankedProposition>& pool) {
    std::string out;
    for (size_t i = 0; i < passages.size(); ++i) {
        const Passage& p = index.passage(passages[i].passage_id);
        if (i) out += "\n\n";
        out += "Passage " + p.passage_id + " (" + p.title + "):\n";
        out += p.text + "\n";
        out += "Propositions:";
        std::vector<long> ids;
        for (const auto& rp : pool)
            if (index.proposition(rp.prop_id).passage_id == p.passage_id)
                ids.push_back(rp.prop_id);
        std::sort(ids.begin(), ids.end());
        for (long id : ids)
            out += "\n[ID: " + std::to_string(id) + "] " +
                   index.proposition(id).text;
    }
    return out;
}

inline std::string render_passage_evidence(const GraphIndex& index,
                                           const std::vector<ScoredPassage>& passages) {
    std::string out;
    for (size_t i = 0; i < passages.size(); ++i) {
        const Passage& p = index.passage(passages[i].passage_id);
        if (i) out += "\n\n";
        out += "Passage " + p.passage_id + " (" + p.title + "):\n" + p.text;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Agent operations

struct AgentContext {
    const GraphIndex& index;
    LlmGateway& gateway;
    AgentParams params;
    std::string question_id;
};

/// Internal: the planner failed both attempts; the pipeline reports a
/// failed question instead of crashing the run.
struct PlanFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Plan make_plan(AgentContext& ctx, const std::string& question) {
    CompletionRequest req;
    req.stage = Stage::planning;
    req.system_text = std::string(prompts::kPlanner);
    req.user_text = "Question: " + question;
    req.question_id = ctx.question_id;
    for (int attempt = 0; attempt < 2; ++attempt) {
        CompletionResponse resp = ctx.gateway.complete(req);
        try {
            Plan plan = parse_plan(resp.text, ctx.params.max_sub_questions);
            if (attempt > 0) plan.flags.push_back("plan_reprompted");
            return plan;
        } catch (const AgentParseError& e) {
            if (attempt > 0) throw PlanFailure(e.what());
        }
    }
    throw PlanFailure("unreachable");
}

/// Rewrite a sub-question into a search statement (one re-prompt allowed).
/// nullopt means the sub-agent must abort with an empty answer.
inline std::optional<SearchStatement> rewrite_query(
    AgentContext& ctx, const std::string& question, const Plan& plan,
    const std::vector<HistoryEntry>& history, const SubQuestion& subq,
    std::vector<std::string>& flags) {
    CompletionRequest req;
    req.stage = Stage::rewriting;
    req.user_text = prompts::render(prompts::kQueryRewrite,
                                    {{"original_question", question},
                                     {"rational_plan", plan.rational_plan},
                                     {"context_history", render_history(history)},
                                     {"current_sub_question", subq.text}});
    req.question_id = ctx.question_id;
    for (int attempt = 0; attempt < 2; ++attempt) {
        CompletionResponse resp = ctx.gateway.complete(req);
        if (auto parsed = parse_search_statement(resp.text)) {
            if (attempt > 0) flags.push_back("rewrite_reprompted");
            SearchStatement stmt;
            stmt.statement = parsed->first;
            stmt.keywords = parsed->second;
            stmt.embedding =
                ctx.gateway.embed_one(stmt.statement, EmbedPurpose::statement);
            return stmt;
        }
    }
    flags.push_back("rewrite_parse_failure");
    return std::nullopt;
}

/// Ask the model which candidate entities to traverse. Invalid ids are
/// dropped; an empty result falls back to the top-scored candidate.
inline std::vector<long> select_entities(AgentContext& ctx,
                                         const ObservationState& state,
                                         const std::vector<CandidateTrace>& candidates,
                                         std::vector<std::string>& flags) {
    CompletionRequest req;
    req.stage = Stage::selection;
    req.user_text = prompts::render(
        prompts::kEntitySelection,
        {{"state_context", render_state_context(state)},
         {"sub_question", state.sub_question},
         {"search_statement", state.statement},
         {"candidates", render_candidates(candidates)}});
    req.question_id = ctx.question_id;
    CompletionResponse resp = ctx.gateway.complete(req);
    std::vector<long> offered;
    offered.reserve(candidates.size());
    for (const auto& c : candidates) offered.push_back(c.entity_id);
    int dropped = 0;
    std::vector<long> selected = parse_selection(resp.text, offered, &dropped);
    if (dropped > 0) flags.push_back("selection_dropped_invalid");
    if (selected.empty()) {
        selected.push_back(offered.front());
        flags.push_back("selection_fallback_top1");
    }
    return selected;
}

/// Evaluate gathered evidence (one re-prompt allowed). A response that
/// remains unparsable degrades to QUERY_AGAIN with the statement unchanged,
/// consuming the iteration.
inline EvidenceAction evaluate_evidence(AgentContext& ctx,
                                        const ObservationState& state,
                                        const std::string& evidence,
                                        std::vector<std::string>& flags) {
    CompletionRequest req;
    req.stage = Stage::evaluation;
    req.user_text = prompts::render(prompts::kEvidenceEvaluation,
                                    {{"state_block", render_state_block(state)},
                                     {"new_evidence", evidence}});
    req.question_id = ctx.question_id;
    for (int attempt = 0; attempt < 2; ++attempt) {
        CompletionResponse resp = ctx.gateway.complete(req);
        if (auto action = parse_evidence_action(resp.text)) {
            if (attempt > 0) flags.push_back("evaluation_reprompted");
            return *action;
        }
    }
    flags.push_back("evaluation_unparsed");
    EvidenceAction degraded;
    degraded.kind = ActionKind::query_again;
    degraded.new_search_statement = "";  // caller keeps the current statement
    return degraded;
}

/// Run one sub-agent: rewrite once, then up to max_iterations rounds of
/// search -> aggregate -> select -> vote -> evaluate. Visited entities and
/// pooled propositions are excluded from later iterations.
inline SubAgentTrace run_subagent(AgentContext& ctx, const std::string& question,
                                  const Plan& plan,
                                  const std::vector<HistoryEntry>& history,
                                  const SubQuestion& subq) {
    SubAgentTrace trace;
    trace.index = subq.index;
    trace.sub_question = subq.text;

    std::optional<SearchStatement> stmt_opt =
        rewrite_query(ctx, question, plan, history, subq, trace.flags);
    if (!stmt_opt) return trace;  // answer "", non-terminal, flagged
    SearchStatement stmt = std::move(*stmt_opt);

    const RetrievalParams& rp = ctx.params.retrieval;
    ObservationState state;
    state.original_question = question;
    state.rational_plan = plan.rational_plan;
    state.sub_question = subq.text;
    state.history = history;
    state.max_iterations = ctx.params.max_iterations;

    std::set<std::string> visited_passages;  // dpr_bypass only

    for (int iter = 1; iter <= ctx.params.max_iterations; ++iter) {
        IterationTrace it;
        it.iteration = iter;
        it.statement = stmt.statement;
        it.keywords = stmt.keywords;
        state.statement = stmt.statement;
        state.iteration = iter;

        std::string evidence;
        std::vector<long> newly_selected;
        std::vector<long> newly_pooled;

        if (rp.mode == RetrievalMode::dpr_bypass) {
            std::vector<ScoredPassage> all =
                dpr_rank_passages(ctx.index, stmt.embedding,
                                  static_cast<int>(
                                      ctx.index.passage_embeddings.size()));
            std::vector<ScoredPassage> fresh;
            for (const auto& sp : all) {
                if (visited_passages.count(sp.passage_id)) continue;
                fresh.push_back(sp);
                if (fresh.size() == static_cast<size_t>(rp.d_passages)) break;
            }
            if (fresh.empty()) {
                it.flags.push_back("retrieval_exhausted");
                trace.iterations.push_back(std::move(it));
                trace.flags.push_back("retrieval_exhausted");
                return trace;
            }
            it.passages = fresh;
            evidence = render_passage_evidence(ctx.index, fresh);
        } else {
            std::vector<RankedProposition> ranked = search_propositions(
                ctx.index, stmt, rp.m, state.visited_prop_ids, rp.lambda);
            if (ranked.empty()) {
                it.flags.push_back("retrieval_exhausted");
                trace.iterations.push_back(std::move(it));
                trace.flags.push_back("retrieval_exhausted");
                return trace;
            }
            std::vector<ScoredEntity> cands =
                aggregate_entities(ctx.index, ranked, rp.k_entities);
            std::vector<CandidateTrace> fresh;
            for (const auto& c : cands) {
                if (state.visited_entity_ids.count(c.entity_id)) continue;
                const EntityNode& node = ctx.index.entity(c.entity_id);
                fresh.push_back({c.entity_id, node.canonical_name,
                                 node.type_labels.front(), c.score});
            }
            if (fresh.empty()) {
                it.flags.push_back("candidates_exhausted");
                trace.iterations.push_back(std::move(it));
                trace.flags.push_back("candidates_exhausted");
                return trace;
            }
            it.candidates = fresh;

            if (rp.mode == RetrievalMode::no_entity_selection) {
                for (const auto& c : fresh) newly_selected.push_back(c.entity_id);
            } else {
                newly_selected = select_entities(ctx, state, fresh, it.flags);
            }
            it.selected_entities = newly_selected;

            PassageRanking ranking =
                rank_passages(ctx.index, stmt, newly_selected, rp.d_passages,
                              rp.weighting, state.visited_prop_ids);
            if (ranking.passages.empty()) {
                it.flags.push_back("passage_pool_exhausted");
                trace.iterations.push_back(std::move(it));
                trace.flags.push_back("passage_pool_exhausted");
                return trace;
            }
            it.passages = ranking.passages;
            for (const auto& pooled : ranking.ranked_pool)
                newly_pooled.push_back(pooled.prop_id);
            it.pooled_prop_ids = newly_pooled;
            evidence = render_evidence(ctx.index, ranking.passages,
                                       ranking.ranked_pool);
        }

        EvidenceAction action = evaluate_evidence(ctx, state, evidence, it.flags);
        it.action = action;
        bool degraded = !it.flags.empty() &&
                        it.flags.back() == "evaluation_unparsed";
        trace.iterations.push_back(it);

        if (action.kind == ActionKind::done) {
            trace.answer = action.answer;
            trace.terminal = true;
            if (trace.answer.empty()) trace.flags.push_back("empty_done_answer");
            return trace;
        }

        // QUERY_AGAIN: fold findings into state, mark this iteration's
        // entities and pooled propositions as visited, keep best partial.
        if (!action.node_findings.empty())
            state.node_findings.push_back(action.node_findings);
        for (long eid : newly_selected) state.visited_entity_ids.insert(eid);
        for (long pid : newly_pooled) state.visited_prop_ids.insert(pid);
        for (const auto& sp : it.passages) visited_passages.insert(sp.passage_id);
        if (!action.answer.empty()) trace.answer = action.answer;

        if (iter == ctx.params.max_iterations) {
            trace.flags.push_back("iteration_limit");
            return trace;
        }
        if (!degraded && !action.new_search_statement.empty()) {
            stmt.statement = action.new_search_statement;
            stmt.keywords = action.keywords;
            stmt.embedding =
                ctx.gateway.embed_one(stmt.statement, EmbedPurpose::statement);
        }
    }
    return trace;
}

/// Synthesize the final answer from the completed research chain.
inline std::pair<std::string, std::string> synthesize(
    AgentContext& ctx, const std::string& question,
    const std::vector<HistoryEntry>& history, std::vector<std::string>& flags) {
    if (history.empty())
        throw UsageError("synthesis requires at least one research step");
    CompletionRequest req;
    req.stage = Stage::synthesis;
    req.user_text = prompts::render(prompts::kSynthesis,
                                    {{"research", render_research(history)},
                                     {"original_question", question}});
    req.question_id = ctx.question_id;
    CompletionResponse resp = ctx.gateway.complete(req);
    auto [answer, marker_found] = parse_synthesis_answer(resp.text);
    if (!marker_found) flags.push_back("missing_answer_marker");
    return {answer, resp.text};
}

/// Full pipeline for one question: plan, run sub-agents in dependency
/// order, synthesize. Planner failure yields a failed result, not a crash.
inline PipelineResult answer_question(const GraphIndex& index, LlmGateway& gateway,
                                      const AgentParams& params,
                                      const std::string& question_id,
                                      const std::string& question) {
    if (trim(question).empty()) throw UsageError("question text is empty");
    AgentContext ctx{index, gateway, params, question_id};
    PipelineResult result;
    result.question_id = question_id;
    result.question = question;
    try {
        result.plan = make_plan(ctx, question);
    } catch (const PlanFailure& e) {
        result.failure_reason = std::string("plan_parse_failure: ") + e.what();
        return result;
    }
    for (const SubQuestion& subq : result.plan.sub_questions) {
        SubAgentTrace trace =
            run_subagent(ctx, question, result.plan, result.history, subq);
        result.history.push_back({subq.text, trace.answer});
        result.sub_agents.push_back(std::move(trace));
    }
    auto [answer, rationale] =
        synthesize(ctx, question, result.history, result.flags);
    result.final_answer = answer;
    result.rationale = rationale;
    return result;
}

// ---------------------------------------------------------------------------
// Trace serialization (deterministic; no timestamps)

inline ojson action_to_json(const EvidenceAction& a) {
    ojson j;
    j["action"] = a.kind == ActionKind::done ? "DONE" : "QUERY_AGAIN";
    j["answer"] = a.answer;
    j["supporting_prop_ids"] = a.supporting_prop_ids;
    j["node_findings"] = a.node_findings;
    j["reasoning_frontier"] = a.reasoning_frontier;
    j["new_search_statement"] = a.new_search_statement;
    j["keywords"] = a.keywords;
    return j;
}

inline ojson trace_to_json(const PipelineResult& result, const TokenLedger& ledger,
                           const AgentParams& params) {
    ojson j;
    j["question_id"] = result.question_id;
    j["question"] = result.question;
    j["final_answer"] = result.final_answer;
    j["rationale"] = result.rationale;
    j["failure_reason"] = result.failure_reason;
    j["flags"] = result.flags;

    ojson cfg;
    cfg["lambda"] = params.retrieval.lambda;
    cfg["m"] = params.retrieval.m;
    cfg["k_entities"] = params.retrieval.k_entities;
    cfg["d_passages"] = params.retrieval.d_passages;
    cfg["weighting"] = weighting_name(params.retrieval.weighting);
    cfg["mode"] = retrieval_mode_name(params.retrieval.mode);
    cfg["max_iterations"] = params.max_iterations;
    cfg["max_sub_questions"] = params.max_sub_questions;
    j["config"] = std::move(cfg);

    ojson plan;
    plan["rational_plan"] = result.plan.rational_plan;
    plan["flags"] = result.plan.flags;
    ojson subqs = ojson::array();
    for (const auto& sq : result.plan.sub_questions) {
        ojson s;
        s["index"] = sq.index;
        s["text"] = sq.text;
        s["dependencies"] = sq.dependencies;
        subqs.push_back(std::move(s));
    }
    plan["sub_questions"] = std::move(subqs);
    j["plan"] = std::move(plan);

    ojson agents = ojson::array();
    for (const auto& sa : result.sub_agents) {
        ojson a;
        a["index"] = sa.index;
        a["sub_question"] = sa.sub_question;
        a["answer"] = sa.answer;
        a["terminal"] = sa.terminal;
        a["flags"] = sa.flags;
        ojson iters = ojson::array();
        for (const auto& it : sa.iterations) {
            ojson i;
            i["iteration"] = it.iteration;
            i["statement"] = it.statement;
            i["keywords"] = it.keywords;
            ojson cands = ojson::array();
            for (const auto& c : it.candidates) {
                ojson cj;
                cj["entity_id"] = c.entity_id;
                cj["name"] = c.name;
                cj["type"] = c.type_label;
                cj["score"] = c.score;
                cands.push_back(std::move(cj));
            }
            i["candidates"] = std::move(cands);
            i["selected_entities"] = it.selected_entities;
            ojson passages = ojson::array();
            for (const auto& sp : it.passages) {
                ojson pj;
                pj["passage_id"] = sp.passage_id;
                pj["score"] = sp.score;
                passages.push_back(std::move(pj));
            }
            i["passages"] = std::move(passages);
            i["pooled_prop_ids"] = it.pooled_prop_ids;
            if (it.action) i["action"] = action_to_json(*it.action);
            else i["action"] = nullptr;
            i["flags"] = it.flags;
            iters.push_back(std::move(i));
        }
        a["iterations"] = std::move(iters);
        agents.push_back(std::move(a));
    }
    j["sub_agents"] = std::move(agents);

    ojson hist = ojson::array();
    for (const auto& h : result.history) {
        ojson e;
        e["sub_question"] = h.sub_question;
        e["answer"] = h.answer;
        hist.push_back(std::move(e));
    }
    j["history"] = std::move(hist);

    ojson calls = ojson::array();
    long in_tokens = 0, out_tokens = 0;
    for (const auto& e : ledger.entries()) {
        if (e.question_id != result.question_id) continue;
        ojson c;
        c["call_id"] = e.call_id;
        c["stage"] = stage_name(e.stage);
        c["input_tokens"] = e.input_tokens;
        c["output_tokens"] = e.output_tokens;
        c["system_text"] = e.system_text;
        c["user_text"] = e.user_text;
        c["response_text"] = e.response_text;
        calls.push_back(std::move(c));
        in_tokens += e.input_tokens;
        out_tokens += e.output_tokens;
    }
    j["llm_calls"] = std::move(calls);
    ojson tok;
    tok["input"] = in_tokens;
    tok["output"] = out_tokens;
    tok["total"] = in_tokens + out_tokens;
    j["tokens"] = std::move(tok);
    return j;
}

}  // namespace grasp
