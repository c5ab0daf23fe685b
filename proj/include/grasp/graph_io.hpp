#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grasp/common.hpp"
#include "grasp/graph.hpp"

namespace grasp {

namespace fs = std::filesystem;

inline ojson manifest_to_json(const BuildManifest& m) {
    ojson j;
    j["schema_version"] = m.schema_version;
    j["unit"] = m.unit;
    j["chat_model"] = m.chat_model;
    j["embedding_model"] = m.embedding_model;
    j["lambda"] = m.lambda;
    j["tau"] = m.tau;
    j["corpus_hash"] = m.corpus_hash;
    j["embedding_dimension"] = m.embedding_dimension;
    j["has_passage_embeddings"] = m.has_passage_embeddings;
    j["passage_count"] = m.passage_count;
    j["proposition_count"] = m.proposition_count;
    j["entity_count"] = m.entity_count;
    return j;
}

inline BuildManifest manifest_from_json(const json& j, const std::string& where) {
    BuildManifest m;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        m.unit = j.at("unit").get<std::string>();
        m.chat_model = j.at("chat_model").get<std::string>();
        m.embedding_model = j.at("embedding_model").get<std::string>();
        m.lambda = j.at("lambda").get<double>();
        m.tau = j.at("tau").get<double>();
        m.corpus_hash = j.at("corpus_hash").get<std::string>();
        m.embedding_dimension = j.at("embedding_dimension").get<size_t>();
        m.has_passage_embeddings = j.at("has_passage_embeddings").get<bool>();
        m.passage_count = j.at("passage_count").get<size_t>();
        m.proposition_count = j.at("proposition_count").get<size_t>();
        m.entity_count = j.at("entity_count").get<size_t>();
    } catch (const json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
    return m;
}

/// Write the index as a directory of deterministic files: manifest.json,
/// passages.jsonl, propositions.jsonl, entities.jsonl, bm25.json.
/// Embeddings are base64 little-endian float32. Re-serializing a loaded
/// index reproduces the files byte for byte.
inline void persist_index(const GraphIndex& index, const std::string& dir) {
    fs::create_directories(dir);
    auto open = [&dir](const char* name) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out)
            throw DataError("cannot write " + (fs::path(dir) / name).string());
        return out;
    };

    {
        auto out = open("manifest.json");
        out << manifest_to_json(index.manifest).dump(2) << "\n";
    }
    {
        auto out = open("passages.jsonl");
        for (const auto& p : index.passages) {
            ojson j;
            j["passage_id"] = p.passage_id;
            j["title"] = p.title;
            j["text"] = p.text;
            auto it = index.passage_embeddings.find(p.passage_id);
            if (it != index.passage_embeddings.end())
                j["embedding"] = encode_embedding(it->second);
            out << j.dump() << "\n";
        }
    }
    {
        auto out = open("propositions.jsonl");
        for (const auto& p : index.propositions) {
            ojson j;
            j["prop_id"] = p.prop_id;
            j["text"] = p.text;
            j["passage_id"] = p.passage_id;
            j["embedding"] = encode_embedding(p.embedding);
            out << j.dump() << "\n";
        }
    }
    {
        auto out = open("entities.jsonl");
        for (const auto& e : index.entities) {
            ojson j;
            j["entity_id"] = e.entity_id;
            j["canonical_name"] = e.canonical_name;
            j["type_labels"] = e.type_labels;
            j["type_embedding"] = encode_embedding(e.type_embedding);
            j["prop_ids"] = std::vector<long>(e.prop_ids.begin(), e.prop_ids.end());
            out << j.dump() << "\n";
        }
    }
    {
        // Store exact integer statistics; derived ratios are recomputed.
        ojson j;
        j["total_length"] = index.bm25.total_length;
        ojson df = ojson::object();
        for (const auto& [term, n] : index.bm25.doc_freq) df[term] = n;
        j["doc_freq"] = std::move(df);
        ojson props = ojson::array();
        for (size_t i = 0; i < index.bm25.lengths.size(); ++i) {
            ojson row;
            row["len"] = index.bm25.lengths[i];
            ojson tf = ojson::object();
            for (const auto& [term, c] : index.bm25.term_counts[i]) tf[term] = c;
            row["tf"] = std::move(tf);
            props.push_back(std::move(row));
        }
        j["props"] = std::move(props);
        auto out = open("bm25.json");
        out << j.dump(2) << "\n";
    }
}

namespace detail {

inline json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        fn(parse_jsonl_line(path.string(), line_no, line),
           path.string() + ":" + std::to_string(line_no));
    }
}

}  // namespace detail

/// Load a persisted index. Counts are cross-checked against the manifest so
/// truncated or tampered files are rejected.
inline GraphIndex load_index(const std::string& dir) {
    fs::path root(dir);
    if (!fs::exists(root / "manifest.json"))
        throw DataError("no index at " + dir + " (missing manifest.json)");
    GraphIndex index;
    index.manifest =
        manifest_from_json(detail::read_json_file(root / "manifest.json"),
                           (root / "manifest.json").string());
    if (index.manifest.schema_version != 1)
        throw DataError("unsupported index schema_version " +
                        std::to_string(index.manifest.schema_version));
    // The adopt_* loaders below keep the live counts in step with the data,
    // which would erase what the file declared; keep the declared values for
    // the cross-check at the end.
    const size_t declared_passages = index.manifest.passage_count;
    const size_t declared_propositions = index.manifest.proposition_count;
    const size_t declared_entities = index.manifest.entity_count;

    detail::for_each_jsonl(root / "passages.jsonl",
                           [&](const json& j, const std::string& where) {
        try {
            Passage p;
            p.passage_id = j.at("passage_id").get<std::string>();
            p.title = j.at("title").get<std::string>();
            p.text = j.at("text").get<std::string>();
            index.add_passage(p);
            if (j.contains("embedding"))
                index.passage_embeddings[p.passage_id] =
                    decode_embedding(j["embedding"].get<std::string>());
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    });

    // Rebuild BM25 incrementally while adopting propositions, then verify
    // the stored statistics match; a mismatch means the files are stale.
    detail::for_each_jsonl(root / "propositions.jsonl",
                           [&](const json& j, const std::string& where) {
        try {
            PropositionNode node;
            node.prop_id = j.at("prop_id").get<long>();
            node.text = j.at("text").get<std::string>();
            node.passage_id = j.at("passage_id").get<std::string>();
            node.embedding = decode_embedding(j.at("embedding").get<std::string>());
            if (index.manifest.embedding_dimension &&
                node.embedding.size() != index.manifest.embedding_dimension)
                throw DataError(where + ": embedding dimension " +
                                std::to_string(node.embedding.size()) +
                                " does not match manifest");
            index.adopt_proposition(std::move(node));
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    });

    detail::for_each_jsonl(root / "entities.jsonl",
                           [&](const json& j, const std::string& where) {
        try {
            EntityNode node;
            node.entity_id = j.at("entity_id").get<long>();
            node.canonical_name = j.at("canonical_name").get<std::string>();
            node.type_labels = j.at("type_labels").get<std::vector<std::string>>();
            node.type_embedding =
                decode_embedding(j.at("type_embedding").get<std::string>());
            auto ids = j.at("prop_ids").get<std::vector<long>>();
            node.prop_ids.insert(ids.begin(), ids.end());
            if (node.type_labels.empty())
                throw DataError(where + ": entity without type labels");
            index.adopt_entity(std::move(node));
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    });

    {
        json j = detail::read_json_file(root / "bm25.json");
        try {
            if (j.at("total_length").get<long>() != index.bm25.total_length)
                throw DataError("bm25.json does not match proposition contents "
                                "(total_length mismatch)");
            if (j.at("props").size() != index.propositions.size())
                throw DataError("bm25.json does not match proposition contents "
                                "(row count mismatch)");
        } catch (const json::exception& e) {
            throw DataError((root / "bm25.json").string() + ": " + e.what());
        }
    }

    if (index.passages.size() != declared_passages)
        throw DataError("manifest count mismatch: " +
                        std::to_string(index.passages.size()) + " passages vs " +
                        std::to_string(declared_passages) + " declared");
    if (index.propositions.size() != declared_propositions)
        throw DataError("manifest count mismatch: " +
                        std::to_string(index.propositions.size()) +
                        " propositions vs " + std::to_string(declared_propositions) +
                        " declared");
    if (index.entities.size() != declared_entities)
        throw DataError("manifest count mismatch: " +
                        std::to_string(index.entities.size()) + " entities vs " +
                        std::to_string(declared_entities) + " declared");
    if (index.manifest.has_passage_embeddings != !index.passage_embeddings.empty())
        throw DataError("manifest passage-embedding flag does not match data");

    std::vector<std::string> issues = index.validate();
    if (!issues.empty())
        throw DataError("loaded index failed validation: " + issues.front());
    return index;
}

/// Compatibility warnings (not errors) between a loaded index and the
/// current run configuration.
inline std::vector<std::string> manifest_warnings(const BuildManifest& m,
                                                  size_t configured_dimension,
                                                  const std::string& chat_model,
                                                  const std::string& embedding_model) {
    std::vector<std::string> warnings;
    if (configured_dimension && m.embedding_dimension &&
        configured_dimension != m.embedding_dimension)
        warnings.push_back("index embedding dimension " +
                           std::to_string(m.embedding_dimension) +
                           " differs from configured " +
                           std::to_string(configured_dimension));
    if (!chat_model.empty() && !m.chat_model.empty() && chat_model != m.chat_model)
        warnings.push_back("index was built with chat model '" + m.chat_model +
                           "', run uses '" + chat_model + "'");
    if (!embedding_model.empty() && !m.embedding_model.empty() &&
        embedding_model != m.embedding_model)
        warnings.push_back("index was built with embedding model '" +
                           m.embedding_model + "', run uses '" + embedding_model +
                           "'");
    return warnings;
}

}  // namespace grasp
