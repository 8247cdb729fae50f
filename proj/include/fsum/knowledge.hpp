#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsum/corpus.hpp"
#include "fsum/fact.hpp"
#include "fsum/ner.hpp"

namespace fsum {

struct Posting {
    std::int32_t doc = 0;  // ordinal into the KB the index was built from
    std::int32_t tf = 0;
};

struct InvertedIndex {
    std::unordered_map<std::string, std::vector<Posting>> postings;  // lists sorted by doc
    std::vector<std::int32_t> doc_lengths;
    double avg_doc_length = 0.0;
    std::int32_t doc_count = 0;
};

struct RetrieverConfig {
    int k = 5;            // top facts per entity
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
};

struct ScoredFact {
    FactRecord fact;
    double score = 0.0;
};

// Each KB record becomes one document: preferred name, synonyms, semantic
// type, and definition concatenated and run through the shared tokenizer.
InvertedIndex build_index(const std::vector<FactRecord>& kb);

// The document text a record contributes to the index; exposed so oracle
// tests can score documents without touching the index.
std::vector<std::string> fact_document_tokens(const FactRecord& fact);

// BM25 with idf = ln((N - df + 0.5) / (df + 0.5) + 1). Zero-score documents
// are excluded; ranking is by descending score with ties broken by
// ascending concept_id; at most cfg.k results.
std::vector<ScoredFact> query(const InvertedIndex& index, const std::vector<FactRecord>& kb,
                              const std::vector<std::string>& query_tokens,
                              const RetrieverConfig& cfg);
std::vector<ScoredFact> query(const InvertedIndex& index, const std::vector<FactRecord>& kb,
                              const EntityMention& mention, const RetrieverConfig& cfg);

// Per-mention query results concatenated in chain order, deduplicated by
// concept_id keeping the first occurrence.
std::vector<FactRecord> retrieve_for_chain(const InvertedIndex& index,
                                           const std::vector<FactRecord>& kb,
                                           const EntityChain& chain, const RetrieverConfig& cfg);

// [BOS, name tokens, definition tokens, <fact>, ..., EOS], truncated so the
// sequence holds at most max_tokens ids with EOS always last.
TokenIds linearize_facts(const std::vector<FactRecord>& facts, const Vocab& vocab, int max_tokens);

// Versioned binary snapshot; loading yields query results identical to
// rebuilding from the same KB.
void save_index(const InvertedIndex& index, const std::string& path);
InvertedIndex load_index(const std::string& path);

}  // namespace fsum
