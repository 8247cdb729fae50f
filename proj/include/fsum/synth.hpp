#pragma once

#include <cstdint>
#include <vector>

#include "fsum/corpus.hpp"
#include "fsum/fact.hpp"

namespace fsum {

// Deterministic toy knowledge base: multi-token condition names built from
// fixed word pools, with synonyms, semantic types, and short definitions.
std::vector<FactRecord> generate_synthetic_kb(int n_concepts, std::uint64_t seed);

// Findings are template sentences whose slots carry KB preferred names with
// probability entity_density (at least one per record); the impression
// restates a random non-empty subset of the findings' entities, so every
// impression entity appears verbatim in the findings.
std::vector<ClinicalRecord> generate_synthetic_corpus(int n_records,
                                                      const std::vector<FactRecord>& kb,
                                                      double entity_density, std::uint64_t seed);

// Slots per synthetic findings; exposed for density checks in tests.
constexpr int synthetic_findings_slots = 4;

}  // namespace fsum
