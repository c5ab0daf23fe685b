#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "grasp/common.hpp"
#include "grasp/graph.hpp"

namespace grasp {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

/// A rewritten query: declarative statement for dense matching plus
/// keywords for sparse matching.
struct SearchStatement {
    std::string statement;
    std::vector<std::string> keywords;
    Vec embedding;
};

struct RankedProposition {
    long prop_id = 0;
    double score = 0.0;
    int rank = 0;  // 1-based
};

struct ScoredEntity {
    long entity_id = 0;
    double score = 0.0;
};

struct ScoredPassage {
    std::string passage_id;
    double score = 0.0;
};

enum class Weighting { rankvote, uniform };

inline std::string weighting_name(Weighting w) {
    return w == Weighting::rankvote ? "rankvote" : "uniform";
}

inline Weighting parse_weighting(const std::string& s) {
    if (s == "rankvote") return Weighting::rankvote;
    if (s == "uniform") return Weighting::uniform;
    throw UsageError("unknown weighting '" + s + "' (expected rankvote or uniform)");
}

/// Okapi BM25 of the keyword set against one proposition. Distinct query
/// terms are accumulated in first-appearance order; the IDF is clamped at
/// zero so very common terms cannot push the score negative.
inline double bm25_score(const GraphIndex& index,
                         const std::vector<std::string>& keywords, long prop_id) {
    const auto& counts = [&]() -> const std::map<std::string, int>& {
        if (prop_id < 0 || static_cast<size_t>(prop_id) >= index.bm25.term_counts.size())
            throw DataError("unknown prop_id " + std::to_string(prop_id));
        return index.bm25.term_counts[static_cast<size_t>(prop_id)];
    }();
    std::vector<std::string> terms;
    for (const auto& kw : keywords)
        for (auto& tok : lexical_tokens(kw))
            if (std::find(terms.begin(), terms.end(), tok) == terms.end())
                terms.push_back(std::move(tok));

    const double n_docs = static_cast<double>(index.bm25.lengths.size());
    const double avgdl = index.bm25.average_length();
    const double doc_len =
        static_cast<double>(index.bm25.lengths[static_cast<size_t>(prop_id)]);
    double score = 0.0;
    for (const auto& term : terms) {
        auto df_it = index.bm25.doc_freq.find(term);
        if (df_it == index.bm25.doc_freq.end()) continue;
        auto tf_it = counts.find(term);
        if (tf_it == counts.end()) continue;
        const double df = static_cast<double>(df_it->second);
        const double tf = static_cast<double>(tf_it->second);
        const double idf =
            std::max(0.0, std::log((n_docs - df + 0.5) / (df + 0.5)));
        score += idf * (tf * (kBm25K1 + 1.0)) /
                 (tf + kBm25K1 * (1.0 - kBm25B + kBm25B * doc_len / avgdl));
    }
    return score;
}

/// Hybrid relevance of a proposition: cosine to the statement plus a
/// log-damped BM25 term, sigma = cos + lambda * ln(1 + BM25).
inline double hybrid_score(const GraphIndex& index, const SearchStatement& stmt,
                           long prop_id, double lambda) {
    double cos = dot(stmt.embedding, index.proposition(prop_id).embedding);
    return cos + lambda * std::log(1.0 + bm25_score(index, stmt.keywords, prop_id));
}

/// Top-m propositions by hybrid score, excluding `excluded` before the
/// cutoff. Ties break toward the lower prop_id; ranks are 1-based.
inline std::vector<RankedProposition> search_propositions(
    const GraphIndex& index, const SearchStatement& stmt, int m,
    const std::set<long>& excluded, double lambda) {
    if (m < 1) throw UsageError("search_propositions requires m >= 1");
    std::vector<RankedProposition> scored;
    scored.reserve(index.propositions.size());
    for (const auto& p : index.propositions) {
        if (excluded.count(p.prop_id)) continue;
        scored.push_back({p.prop_id, hybrid_score(index, stmt, p.prop_id, lambda), 0});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.prop_id < b.prop_id;
    });
    if (scored.size() > static_cast<size_t>(m)) scored.resize(static_cast<size_t>(m));
    for (size_t i = 0; i < scored.size(); ++i)
        scored[i].rank = static_cast<int>(i) + 1;
    return scored;
}

/// Aggregate ranked propositions onto their entities:
/// score(e) = sum(sigma over matched props of e) / sqrt(1 + degree(e)).
/// Accumulation runs over the ranked list in rank order. Returns the top-k
/// entities, ties toward the lower entity_id.
inline std::vector<ScoredEntity> aggregate_entities(
    const GraphIndex& index, const std::vector<RankedProposition>& ranked, int k) {
    if (k < 1) throw UsageError("aggregate_entities requires k >= 1");
    std::map<long, double> sums;
    std::vector<long> order;  // first-touch order, for reproducible arithmetic
    for (const auto& rp : ranked) {
        for (long eid : index.entities_of_prop(rp.prop_id)) {
            auto [it, inserted] = sums.emplace(eid, 0.0);
            if (inserted) order.push_back(eid);
            it->second += rp.score;
        }
    }
    std::vector<ScoredEntity> scored;
    scored.reserve(order.size());
    for (long eid : order) {
        double denom = std::sqrt(1.0 + static_cast<double>(index.degree(eid)));
        scored.push_back({eid, sums[eid] / denom});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entity_id < b.entity_id;
    });
    if (scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
    return scored;
}

/// Rank a proposition pool by cosine only (ties toward lower prop_id).
inline std::vector<RankedProposition> rank_pool_by_cosine(
    const GraphIndex& index, const SearchStatement& stmt,
    const std::vector<long>& pool) {
    std::vector<RankedProposition> ranked;
    ranked.reserve(pool.size());
    for (long pid : pool)
        ranked.push_back({pid, dot(stmt.embedding, index.proposition(pid).embedding), 0});
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.prop_id < b.prop_id;
    });
    for (size_t i = 0; i < ranked.size(); ++i)
        ranked[i].rank = static_cast<int>(i) + 1;
    return ranked;
}

/// Passage voting over a ranked proposition pool. With rankvote weighting a
/// proposition at 1-based rank R contributes 1/(1+R) to its source passage;
/// uniform weighting contributes 1 per pooled proposition. Returns the
/// top-d passages (score desc, passage_id asc).
inline std::vector<ScoredPassage> vote_passages(
    const GraphIndex& index, const std::vector<RankedProposition>& ranked_pool,
    int d, Weighting weighting) {
    if (d < 1) throw UsageError("vote_passages requires d >= 1");
    std::map<std::string, double> votes;
    std::vector<std::string> order;
    for (const auto& rp : ranked_pool) {
        const std::string& pid = index.proposition(rp.prop_id).passage_id;
        double w = weighting == Weighting::rankvote
                       ? 1.0 / (1.0 + static_cast<double>(rp.rank))
                       : 1.0;
        auto [it, inserted] = votes.emplace(pid, 0.0);
        if (inserted) order.push_back(pid);
        it->second += w;
    }
    std::vector<ScoredPassage> scored;
    scored.reserve(order.size());
    for (const auto& pid : order) scored.push_back({pid, votes[pid]});
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage_id < b.passage_id;
    });
    if (scored.size() > static_cast<size_t>(d)) scored.resize(static_cast<size_t>(d));
    return scored;
}

struct PassageRanking {
    std::vector<ScoredPassage> passages;        // top-d
    std::vector<RankedProposition> ranked_pool; // cosine-ranked candidate pool
};

/// Pool the propositions of the selected entities (minus `excluded_props`),
/// re-rank them by cosine alone, and vote passages. An empty pool yields an
/// empty ranking (the caller treats that as retrieval exhaustion).
inline PassageRanking rank_passages(const GraphIndex& index,
                                    const SearchStatement& stmt,
                                    const std::vector<long>& selected_entities,
                                    int d, Weighting weighting,
                                    const std::set<long>& excluded_props) {
    std::set<long> pool_set;
    for (long eid : selected_entities)
        for (long pid : index.entity(eid).prop_ids)
            if (!excluded_props.count(pid)) pool_set.insert(pid);
    PassageRanking out;
    if (pool_set.empty()) return out;
    std::vector<long> pool(pool_set.begin(), pool_set.end());
    out.ranked_pool = rank_pool_by_cosine(index, stmt, pool);
    out.passages = vote_passages(index, out.ranked_pool, d, weighting);
    return out;
}

enum class RetrievalMode { full, dpr_bypass, no_entity_selection };

inline std::string retrieval_mode_name(RetrievalMode m) {
    switch (m) {
        case RetrievalMode::full: return "full";
        case RetrievalMode::dpr_bypass: return "dpr_bypass";
        case RetrievalMode::no_entity_selection: return "no_entity_selection";
    }
    return "unknown";
}

inline RetrievalMode parse_retrieval_mode(const std::string& s) {
    if (s == "full") return RetrievalMode::full;
    if (s == "dpr_bypass") return RetrievalMode::dpr_bypass;
    if (s == "no_entity_selection") return RetrievalMode::no_entity_selection;
    throw UsageError("unknown retrieval mode '" + s + "'");
}

struct RetrievalParams {
    double lambda = 0.2;
    int m = 50;           // proposition pool size
    int k_entities = 5;   // entity candidates per iteration
    int d_passages = 2;   // passages surfaced per iteration
    Weighting weighting = Weighting::rankvote;
    RetrievalMode mode = RetrievalMode::full;
};

/// Rank passages by cosine of the query against stored passage embeddings
/// (the graph layers are bypassed entirely).
inline std::vector<ScoredPassage> dpr_rank_passages(const GraphIndex& index,
                                                    const Vec& query, int k) {
    if (index.passage_embeddings.empty())
        throw DataError("index has no passage embeddings (rebuild with "
                        "embed_passages enabled)");
    std::vector<ScoredPassage> scored;
    scored.reserve(index.passage_embeddings.size());
    for (const auto& [pid, emb] : index.passage_embeddings)
        scored.push_back({pid, dot(query, emb)});
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage_id < b.passage_id;
    });
    if (scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
    return scored;
}

/// One-shot retrieval for the raw question text: no model calls, no
/// iteration, k passages out. Used by the non-agentic baselines.
inline std::vector<ScoredPassage> single_pass_retrieve(
    const GraphIndex& index, const std::string& question, int k,
    const RetrievalParams& params,
    const std::function<Vec(const std::string&)>& embed) {
    if (k < 1) throw UsageError("single_pass_retrieve requires k >= 1");
    Vec query = embed(question);
    if (params.mode == RetrievalMode::dpr_bypass)
        return dpr_rank_passages(index, query, k);

    SearchStatement stmt{question, {}, query};
    std::vector<RankedProposition> ranked =
        search_propositions(index, stmt, params.m, {}, params.lambda);
    if (index.entities.empty()) {
        // Sentence-unit index: the hybrid pool votes directly.
        return vote_passages(index, rank_pool_by_cosine(index, stmt, [&] {
            std::vector<long> pool;
            pool.reserve(ranked.size());
            for (const auto& rp : ranked) pool.push_back(rp.prop_id);
            return pool;
        }()), k, params.weighting);
    }
    std::vector<ScoredEntity> cands =
        aggregate_entities(index, ranked, params.k_entities);
    std::vector<long> selected;
    selected.reserve(cands.size());
    for (const auto& c : cands) selected.push_back(c.entity_id);
    return rank_passages(index, stmt, selected, k, params.weighting, {}).passages;
}

}  // namespace grasp
