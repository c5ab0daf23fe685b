#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "grasp/common.hpp"
#include "grasp/corpus.hpp"
#include "grasp/extraction.hpp"

namespace grasp {

struct PropositionNode {
    long prop_id = 0;        // global, equals its index in the store
    std::string text;
    Vec embedding;
    std::string passage_id;
};

struct EntityNode {
    long entity_id = 0;      // global, equals its index in the store
    std::string canonical_name;              // first-seen casing
    std::vector<std::string> type_labels;    // merged variants, first = anchor
    Vec type_embedding;                      // embedding of the anchor label
    std::set<long> prop_ids;                 // ascending
};

/// Okapi BM25 statistics over the proposition layer, maintained
/// incrementally as propositions are inserted.
struct Bm25Stats {
    std::map<std::string, long> doc_freq;                 // term -> #props
    std::vector<std::map<std::string, int>> term_counts;  // by prop_id
    std::vector<int> lengths;                             // by prop_id
    long total_length = 0;

    double average_length() const {
        return lengths.empty()
                   ? 0.0
                   : static_cast<double>(total_length) /
                         static_cast<double>(lengths.size());
    }

    void add_document(const std::vector<std::string>& tokens) {
        std::map<std::string, int> counts;
        for (const auto& t : tokens) ++counts[t];
        for (const auto& [term, _] : counts) ++doc_freq[term];
        lengths.push_back(static_cast<int>(tokens.size()));
        total_length += static_cast<long>(tokens.size());
        term_counts.push_back(std::move(counts));
    }
};

struct BuildManifest {
    int schema_version = 1;
    std::string unit = "proposition";   // or "sentence"
    std::string chat_model;
    std::string embedding_model;
    double lambda = 0.2;
    double tau = 0.7;
    std::string corpus_hash;
    size_t embedding_dimension = 0;
    bool has_passage_embeddings = false;
    size_t passage_count = 0;
    size_t proposition_count = 0;
    size_t entity_count = 0;
};

struct MutationSummary {
    int propositions_added = 0;
    int entities_created = 0;
    int entities_merged = 0;
};

/// Three-layer index: passages, propositions, and deduplicated typed
/// entities, with entity->proposition edges and BM25 statistics.
class GraphIndex {
public:
    std::vector<Passage> passages;
    std::vector<PropositionNode> propositions;
    std::vector<EntityNode> entities;
    Bm25Stats bm25;
    BuildManifest manifest;
    std::map<std::string, Vec> passage_embeddings;  // only in dpr setups

    void add_passage(const Passage& p) {
        if (p.passage_id.empty()) throw DataError("passage with empty id");
        if (passage_pos_.count(p.passage_id))
            throw DataError("duplicate passage_id '" + p.passage_id + "'");
        passage_pos_[p.passage_id] = passages.size();
        passages.push_back(p);
        passage_props_[p.passage_id];  // materialize the (empty) entry
        manifest.passage_count = passages.size();
    }

    bool has_passage(const std::string& id) const {
        return passage_pos_.count(id) > 0;
    }

    const Passage& passage(const std::string& id) const {
        auto it = passage_pos_.find(id);
        if (it == passage_pos_.end())
            throw DataError("unknown passage_id '" + id + "'");
        return passages[it->second];
    }

    const std::vector<long>& props_of_passage(const std::string& id) const {
        auto it = passage_props_.find(id);
        if (it == passage_props_.end())
            throw DataError("unknown passage_id '" + id + "'");
        return it->second;
    }

    const PropositionNode& proposition(long prop_id) const {
        if (prop_id < 0 || static_cast<size_t>(prop_id) >= propositions.size())
            throw DataError("unknown prop_id " + std::to_string(prop_id));
        return propositions[static_cast<size_t>(prop_id)];
    }

    const EntityNode& entity(long entity_id) const {
        if (entity_id < 0 || static_cast<size_t>(entity_id) >= entities.size())
            throw DataError("unknown entity_id " + std::to_string(entity_id));
        return entities[static_cast<size_t>(entity_id)];
    }

    /// Entities attached to a proposition, ascending by id.
    const std::vector<long>& entities_of_prop(long prop_id) const {
        if (prop_id < 0 || static_cast<size_t>(prop_id) >= prop_entities_.size())
            throw DataError("unknown prop_id " + std::to_string(prop_id));
        return prop_entities_[static_cast<size_t>(prop_id)];
    }

    long degree(long entity_id) const {
        return static_cast<long>(entity(entity_id).prop_ids.size());
    }

    /// Find the entity an incoming (name, type) pair belongs to. Among
    /// existing entities with the same case-insensitive name, the incoming
    /// node merges into the one whose anchor-type embedding is most cosine-
    /// similar, provided that similarity meets `tau`; otherwise a new node
    /// is created. Ties go to the lowest entity_id.
    long resolve_entity(const std::string& name, const std::string& type_label,
                        const Vec& type_embedding, double tau,
                        MutationSummary* summary = nullptr) {
        std::string canonical = trim(name);
        if (canonical.empty()) throw DataError("entity with empty name");
        std::string key = lower_ascii(canonical);
        long best = -1;
        double best_cos = 0.0;
        auto it = name_index_.find(key);
        if (it != name_index_.end()) {
            for (long id : it->second) {
                double c = dot(type_embedding, entities[size_t(id)].type_embedding);
                if (c >= tau && (best < 0 || c > best_cos)) {
                    best = id;
                    best_cos = c;
                }
            }
        }
        if (best >= 0) {
            auto& labels = entities[size_t(best)].type_labels;
            if (std::find(labels.begin(), labels.end(), type_label) == labels.end())
                labels.push_back(type_label);
            if (summary) ++summary->entities_merged;
            return best;
        }
        EntityNode node;
        node.entity_id = static_cast<long>(entities.size());
        node.canonical_name = canonical;
        node.type_labels.push_back(type_label);
        node.type_embedding = type_embedding;
        entities.push_back(std::move(node));
        name_index_[key].push_back(entities.back().entity_id);
        manifest.entity_count = entities.size();
        if (summary) ++summary->entities_created;
        return entities.back().entity_id;
    }

    /// Insert parsed extraction output. `prop_embeddings` aligns with the
    /// concatenated proposition order of `result.passages`; `type_embeddings`
    /// must cover every entity type label appearing in the result.
    MutationSummary insert_extraction(
        const ExtractionResult& result, const std::vector<Vec>& prop_embeddings,
        const std::map<std::string, Vec>& type_embeddings) {
        size_t total_props = 0;
        for (const auto& pe : result.passages) total_props += pe.propositions.size();
        if (prop_embeddings.size() != total_props)
            throw DataError("proposition embedding count mismatch: " +
                            std::to_string(prop_embeddings.size()) + " vs " +
                            std::to_string(total_props));

        MutationSummary summary;
        size_t emb_pos = 0;
        for (const auto& pe : result.passages) {
            if (!passage_pos_.count(pe.passage_id))
                throw DataError("extraction references unknown passage_id '" +
                                pe.passage_id + "'");
            if (!passage_props_[pe.passage_id].empty())
                throw DataError("passage '" + pe.passage_id +
                                "' already has propositions (duplicate insert)");

            std::vector<long> global_ids;
            for (const auto& prop : pe.propositions) {
                const Vec& emb = prop_embeddings[emb_pos++];
                check_dimension(emb);
                PropositionNode node;
                node.prop_id = static_cast<long>(propositions.size());
                node.text = prop.text;
                node.embedding = emb;
                node.passage_id = pe.passage_id;
                global_ids.push_back(node.prop_id);
                passage_props_[pe.passage_id].push_back(node.prop_id);
                bm25.add_document(lexical_tokens(node.text));
                prop_entities_.emplace_back();
                propositions.push_back(std::move(node));
                ++summary.propositions_added;
            }

            for (const auto& ent : pe.entities) {
                auto emb_it = type_embeddings.find(ent.entity_type);
                if (emb_it == type_embeddings.end())
                    throw DataError("missing type embedding for label '" +
                                    ent.entity_type + "'");
                check_dimension(emb_it->second);
                long eid = resolve_entity(ent.canonical_name, ent.entity_type,
                                          emb_it->second, manifest.tau, &summary);
                for (int local : ent.proposition_indices) {
                    long gid = global_ids[static_cast<size_t>(local)];
                    if (entities[size_t(eid)].prop_ids.insert(gid).second)
                        prop_entities_[size_t(gid)].push_back(eid);
                }
            }
        }
        for (auto& adj : prop_entities_) std::sort(adj.begin(), adj.end());
        manifest.proposition_count = propositions.size();
        manifest.entity_count = entities.size();
        return summary;
    }

    /// Register an already-built entity node (used when loading from disk).
    void adopt_entity(EntityNode node) {
        if (node.entity_id != static_cast<long>(entities.size()))
            throw DataError("entity ids must be contiguous from 0");
        name_index_[lower_ascii(node.canonical_name)].push_back(node.entity_id);
        for (long pid : node.prop_ids) {
            if (pid < 0 || static_cast<size_t>(pid) >= prop_entities_.size())
                throw DataError("entity " + std::to_string(node.entity_id) +
                                " references unknown prop_id " +
                                std::to_string(pid));
            prop_entities_[static_cast<size_t>(pid)].push_back(node.entity_id);
        }
        entities.push_back(std::move(node));
        manifest.entity_count = entities.size();
    }

    /// Register an already-built proposition node (used when loading).
    void adopt_proposition(PropositionNode node) {
        if (node.prop_id != static_cast<long>(propositions.size()))
            throw DataError("prop ids must be contiguous from 0");
        if (!passage_pos_.count(node.passage_id))
            throw DataError("proposition " + std::to_string(node.prop_id) +
                            " references unknown passage_id '" + node.passage_id +
                            "'");
        check_dimension(node.embedding);
        passage_props_[node.passage_id].push_back(node.prop_id);
        bm25.add_document(lexical_tokens(node.text));
        prop_entities_.emplace_back();
        propositions.push_back(std::move(node));
        manifest.proposition_count = propositions.size();
    }

    /// Structural self-checks; returns human-readable problems (empty when
    /// the index is consistent).
    std::vector<std::string> validate() const {
        std::vector<std::string> issues;
        for (size_t i = 0; i < propositions.size(); ++i) {
            const auto& p = propositions[i];
            if (p.prop_id != static_cast<long>(i))
                issues.push_back("prop_id mismatch at index " + std::to_string(i));
            if (!passage_pos_.count(p.passage_id))
                issues.push_back("prop " + std::to_string(i) +
                                 " references unknown passage '" + p.passage_id +
                                 "'");
            if (manifest.embedding_dimension &&
                p.embedding.size() != manifest.embedding_dimension)
                issues.push_back("prop " + std::to_string(i) +
                                 " embedding dimension mismatch");
            double n = norm(p.embedding);
            if (std::abs(n - 1.0) > 1e-5)
                issues.push_back("prop " + std::to_string(i) +
                                 " embedding is not unit-norm");
        }
        for (size_t i = 0; i < entities.size(); ++i) {
            const auto& e = entities[i];
            if (e.entity_id != static_cast<long>(i))
                issues.push_back("entity_id mismatch at index " + std::to_string(i));
            if (e.type_labels.empty())
                issues.push_back("entity " + std::to_string(i) + " has no type");
            for (long pid : e.prop_ids)
                if (pid < 0 || static_cast<size_t>(pid) >= propositions.size())
                    issues.push_back("entity " + std::to_string(i) +
                                     " references unknown prop " +
                                     std::to_string(pid));
        }
        if (bm25.lengths.size() != propositions.size() ||
            bm25.term_counts.size() != propositions.size())
            issues.push_back("bm25 statistics out of sync with propositions");
        return issues;
    }

private:
    void check_dimension(const Vec& v) {
        if (manifest.embedding_dimension == 0)
            manifest.embedding_dimension = v.size();
        else if (v.size() != manifest.embedding_dimension)
            throw DataError("embedding dimension " + std::to_string(v.size()) +
                            " does not match index dimension " +
                            std::to_string(manifest.embedding_dimension));
    }

    std::map<std::string, size_t> passage_pos_;
    std::map<std::string, std::vector<long>> passage_props_;
    std::map<std::string, std::vector<long>> name_index_;  // lowercase name
    std::vector<std::vector<long>> prop_entities_;
};

}  // namespace grasp
