#pragma once

#include <map>
#include <string>
#include <string_view>

namespace grasp::prompts {

/// Replace each {key} slot with its value. Unknown slots are left intact so
/// callers notice missing bindings in rendered output.
inline std::string render(std::string_view tmpl,
                          const std::map<std::string, std::string>& values) {
    std::string out(tmpl);
    for (const auto& [key, value] : values) {
        const std::string slot = "{" + key + "}";
        size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), value);
            pos += value.size();
        }
    }
    return out;
}

inline constexpr std::string_view kPlanner = R"PROMPT(You are a planner for a multi-hop question-answering system backed by a knowledge graph.

**Task**
Given a user question:
1. Write a **rational plan** — a 1-3 sentence outline of the reasoning chain and key facts needed.
2. Produce an **ordered list of sub-questions**. Each will be answered by a research agent searching the knowledge graph.

**Rules**
- **No assumptions:** Never name or assume entities not explicitly stated in the question. Your sub-questions must *find* them.
- **No redundant steps:** Every sub-question must retrieve new information from the knowledge graph. Do not create a step whose answer can be inferred from the question text or from a previous step's answer without a lookup.
- **Prefer direct search:** If an entity can be found directly (e.g., "the university in state X"), search for it in one step rather than chaining through intermediate entities.
- **Dependencies:** Use #1, #2, #3, etc. to reference answers from prior sub-questions. Never repeat context or use vague pronouns.
- **Parallel branches:** If the final answer requires two independent facts, retrieve them in separate sub-questions before combining in a later step.
- **Compound constraints:** If the question asks for an entity satisfying multiple constraints (e.g., "who did X AND Y?"), resolve any unknown references first, then issue a single compound sub-question — do not enumerate and intersect sets.
- **Maximum 4 sub-questions.** If your plan requires more, look for steps that can be combined or eliminated.

**Examples**

**Question:** "Who succeeded the first President of Namibia?"
**Rational Plan:** I need to identify Namibia's first President and then find his/her successor.
**Sub-questions:**
1. Who was the first President of Namibia?
2. Who succeeded #1?

**Question:** "What is the population of the city where the architect of the Sydney Opera House was born?"
**Rational Plan:** I need to identify the architect of the Sydney Opera House, find their birth city, then retrieve that city's population.
**Sub-questions:**
1. Who was the architect of the Sydney Opera House?
2. In which city was #1 born?
3. What is the population of #2?

**Question:** "When did Napoleon occupy the city where the mother of the woman who brought Louis XVI style to the court died?"
**Rational Plan:** I need to find who brought Louis XVI style to court, find that person's mother, find the city where the mother died, then find when Napoleon occupied that city. The chain is linear with four hops.
**Sub-questions:**
1. Who brought Louis XVI style to the court?
2. Who was the mother of #1?
3. In what city did #2 die?
4. When did Napoleon occupy #3?

**Question:** "When did the people who captured Malakoff come to the region where Philipsburg is located?"
**Rational Plan:** This requires two parallel branches — finding the region where Philipsburg is located (via what it is capital of, then what terrain feature that is on) and who captured Malakoff — before combining them in a final question.
**Sub-questions:**
1. What is Philipsburg capital of?
2. #1 is located on what terrain feature?
3. Who captured Malakoff?
4. When did #3 come to #2?

**Question:** "Which People's Republic of China city is at a higher level of government, Dehui or Karamay?"
**Rational Plan:** I need to find the government level of each city independently and then compare them. Both lookups are parallel.
**Sub-questions:**
1. What level of government is the city of Dehui?
2. What level of government is the city of Karamay?

**Question:** "Where did Kent Patterson play his home games until he became a free agent?"
**Rational Plan:** I need to find which team Kent Patterson played for before becoming a free agent, then find where that team plays its home games.
**Sub-questions:**
1. Which team did Kent Patterson play for before becoming a free agent?
2. Where does #1 play its home games?

**Question:** "Which film has the director who is older, God's Gift to Women or Aldri Annet Enn Bråk?"
**Rational Plan:** I need to find the director of each film, then their birth dates, and compare. The two director lookups are independent but each requires a bridge through the film to the director's birth date.
**Sub-questions:**
1. Who directed God's Gift to Women?
2. When was #1 born?
3. Who directed Aldri Annet Enn Bråk?
4. When was #3 born?)PROMPT";

inline constexpr std::string_view kQueryRewrite = R"PROMPT(You are a dense retrieval query optimizer. Rewrite the sub-question into a short declarative search statement optimized for cosine similarity against factual propositions in a knowledge graph.

**Global Context**
Original Question: {original_question}
Rational Plan: {rational_plan}

**Current Step**
Context History: {context_history}
Raw Sub-question: {current_sub_question}

**Rules**
1. **Exact entity substitution:** When replacing #N, use the exact entity name from the Step N Answer. Do not paraphrase, generalize, or substitute a related entity. Strip citation tags (e.g., [ID: 123]) but preserve the entity name verbatim.
2. **No external knowledge:** Only use entity names that appear in the Raw Sub-question, Context History, or Original Question. Never inject names, spellings, or facts from your own knowledge.
3. **Self-contained statement:** Do not carry over relationships from prior steps (e.g., not "John's spouse" — just the spouse's resolved name). The statement must stand alone.
4. **Declarative form:** Write a short declarative statement or noun phrase, as in an encyclopedia. No question words, no question marks. Lead with the resolved entity name when possible.
5. **Topical terms:** Include key terms from the Rational Plan that describe the information being sought (e.g., "population", "founded", "spouse") so the statement shares vocabulary with target propositions.

**Example**

Context History:
Step 1 Answer: The director of Oppenheimer is Christopher Nolan [ID: 293].

Raw Sub-question: What was the budget for the first movie directed by #1?

Search Statement: The production budget of Christopher Nolan's first directed film.
Keywords: ["Christopher Nolan"])PROMPT";

inline constexpr std::string_view kEntitySelection = R"PROMPT(Select the most relevant entity nodes to explore from a knowledge graph.

Reasoning Context: {state_context}

Sub-question: {sub_question}
Search statement: {search_statement}

Candidate entities:
{candidates}

Choose one or more entity nodes whose propositions are most likely to contain information that answers the search statement. Select multiple nodes when they are all plausibly relevant (e.g., multiple entities mentioned in the search statement, or when the answer may require combining facts across nodes). Select only one when a single node clearly dominates.

Avoid selecting nodes listed under "Already visited node IDs" — their propositions have already been explored.

Output the node_ids (list of integers) of your selections and brief reasoning.)PROMPT";

inline constexpr std::string_view kEvidenceEvaluation = R"PROMPT(You are evaluating evidence gathered from a knowledge graph to determine how to proceed with answering a question.

**== CURRENT STATE ==**
{state_block}

**== NEW EVIDENCE ==**
{new_evidence}

**Your task**

Analyze the new evidence in context of your current state. The visited nodes section summarizes what was learned in prior iterations — use it alongside the new evidence above.

**Critical grounding rules:**

1. **Answer from the evidence, not from memory.** Your answer must be derived from the retrieved propositions and visited-node findings. Do not inject facts that are absent from the evidence.

2. **The best answer in the evidence IS the answer.** If the question asks about a category (e.g., "university," "country," "author") and the evidence contains exactly one entity that fits that category — even if it is not a perfect categorical match — that entity is the answer. For example: if the question asks for a "university" and the only educational institution in the evidence is a Gymnasium, the answer is the Gymnasium. Do not reject the evidence in favor of searching for a "better" answer from your prior knowledge.

3. **Use reasoning to connect evidence, not to override it.** You may infer across propositions (e.g., chaining "A founded B" and "B is located in C" to conclude "A founded something in C"). You may NOT substitute your own factual knowledge for missing evidence.

Can the sub-question be answered — directly or by inference — from what has been gathered? Choose exactly one of two actions:

**DONE** — the answer is present or can be inferred

Use this when the evidence directly states or strongly implies the answer. **If the answer can be reasonably concluded or inferred from the available evidence, even without an explicit statement, treat this as DONE.**

- action: "DONE"
- answer: State the answer with proposition ID citations, e.g. "Christopher Nolan directed Inception [ID: 42]."
  If multiple entities each validly answer the sub-question, use a numbered format: "CANDIDATES: 1) Entity Name [ID: 42] 2) Other Entity [ID: 57]". Do not add explanatory text after the candidate list.
- supporting_prop_ids: Proposition IDs involved in your reasoning.
- node_findings: A 1-2 sentence summary of what was learned from the newly visited nodes, relative to the subquestion.
- reasoning_frontier: "resolved"

**QUERY_AGAIN** — the answer is definitively not recoverable from current evidence

Use this **only** when there is a clear gap that cannot be bridged by reasoning over the current evidence. Before choosing this, ask: "Is the answer truly unrecoverable, or am I missing an inferential path?"

**If returning QUERY_AGAIN, provide a meaningfully different search statement — broaden to related entities, shared attributes, or co-occurrence rather than repeating the same angle.**

Note: source passages will be retrieved automatically after QUERY_AGAIN — you do not need to request them.

- action: "QUERY_AGAIN"
- answer: Best partial answer or intermediate conclusion so far. Describe what you can establish and what specific fact is missing. Use "" only if the evidence is entirely irrelevant.
- new_search_statement: A declarative statement (NOT a question) targeting the missing information.
- keywords: Proper nouns and named entities from the search statement for fulltext search. Group compound names (e.g. "Christopher Nolan"). Exclude verbs, question words, and generic nouns.
- node_findings: A 1-2 sentence summary of what was learned from the newly visited nodes.
- reasoning_frontier: What specific information you still need to find.

Output your chosen action, reasoning, and all relevant fields.)PROMPT";

inline constexpr std::string_view kSynthesis = R"PROMPT(You are a synthesis assistant. Your objective is to provide a definitive answer to the user's question based on the provided research steps.

**Guidelines**

1. **Research-First Reasoning:** Ground your answer in the provided research steps. You may use reasoning to bridge small inferential gaps across steps, but prefer cited evidence over unsupported claims.

2. **Citation-First Rationale:** Every sentence in your rationale must cite the specific Research Step it draws from (e.g., "According to Step #1...").

3. **The "Chain of Truth":** Trace the logic from the first step to the last. Do not skip steps. If Step 1 identifies a person, and Step 2 identifies their birth year, show that connection explicitly.

4. **Extract Concrete Values:** Prefer exact values (dates, names, numbers) over descriptive phrases. If the evidence contains "following the 1981 export restraints," answer "1981" rather than paraphrasing with a relative expression.

5. **Primary Name Only:** When a research step identifies an answer with a parenthetical alias or "also known as" qualifier, use the primary name — the name stated first, before any parenthetical — not the alias.

6. **Concise Answers:** Your final answer should be as specific and brief as possible — ideally no more than 6 words.

**Output Format**
You must follow this structure exactly. You must end with the phrase "So the answer is:"

Rationale:
- [Step #1]: <Evidence from step 1>
- [Step #2]: <How evidence from step 2 connects to step 1>
...
- [Conclusion]: <Logical summary of the findings>
- So the answer is: <Final Concise Answer>

**Input Format**

Research: {research}

Q: {original_question}
A:)PROMPT";

inline constexpr std::string_view kJointExtraction = R"PROMPT(You are an NLP assistant that jointly extracts propositions and typed entities from multiple passages in a single pass.

You are given a numbered list of passages. Process each passage **independently**, returning results in the same order.

For each passage:
1. **Decompose** Content into atomic, self-contained propositions. Replace all pronouns with canonical names using the Document Title. Split compound sentences; condense multi-attribute statements.
2. **Extract** unique named entities (people, organizations, locations, proper nouns, specific years) from the propositions. Use Title Case canonical names (e.g "United States" not "The US"). Assign specific types (e.g., "Sculptor" not "Person").

**Output Format**

Passage [N]:
Propositions:
[0] [proposition text]
[1] [proposition text]
...

Entities:
[Name]|[Type]|[proposition indices]
...

Repeat for each passage. Proposition indices are 0-based and reset per passage.

**Example**

**Input:**
Passage [0]:
Document Title: Easter Hare
Content: The earliest evidence for the Easter Hare (Osterhase) was recorded in south-west Germany in 1678 by the professor of medicine Georg Franck von Franckenau, but it remained unknown in other parts of Germany until the 18th century. Scholar Richard Sermon writes that "hares were frequently seen in gardens in spring."

**Output:**
Passage [0]:
Propositions:
[0] The earliest evidence for the Easter Hare was recorded in south-west Germany in 1678 by Georg Franck von Franckenau.
[1] Georg Franck von Franckenau was a professor of medicine.
[2] The Easter Hare remained unknown in other parts of Germany until the 18th century.
[3] Richard Sermon was a scholar.
[4] Richard Sermon writes that hares were frequently seen in gardens in spring.
[5] The Easter Hare is also known as Osterhase.

Entities:
Easter Hare|Folklore Figure|0 2 5
Germany|Country|0 2
1678|Year|0
Georg Franck von Franckenau|Professor of Medicine|0 1
Richard Sermon|Scholar|3 4
Osterhase|Folklore Figure|5)PROMPT";

inline constexpr std::string_view kJudgeStrict = R"PROMPT(After reading some text, John was given the following question about the text:
{question}

John's answer to the question was:
{prediction}

The ground truth answer was:
{ground_truths}

Does John's answer agree with the ground truth answer?
Please answer "Yes" or "No".)PROMPT";

inline constexpr std::string_view kJudgeLenient = R"PROMPT(After reading some text, John was given the following question about the text:
{question}

John's answer to the question was:
{prediction}

The ground truth answer was:
{ground_truths}

Does John's answer agree with the ground truth answer?
Please answer "Yes", "Yes, partially", or "No". If John's response has any overlap with the ground truth answer, answer "Yes, partially". If John's response contains the ground truth answer, answer "Yes". If John's response is more specific than the ground truth answer, answer "Yes".)PROMPT";

}  // namespace grasp::prompts
