#pragma once

#include <string>
#include <vector>

namespace fsum {

// One knowledge-base entry. concept_id is unique within a KB file; source
// optionally tags provenance and plays no role in retrieval.
struct FactRecord {
    std::string concept_id;
    std::string preferred_name;
    std::vector<std::string> synonyms;
    std::string semantic_type;
    std::string definition;
    std::string source;
};

// JSONL loader; duplicate concept ids raise an error naming both lines.
std::vector<FactRecord> load_kb(const std::string& path);

void write_kb(const std::vector<FactRecord>& kb, const std::string& path);

}  // namespace fsum
