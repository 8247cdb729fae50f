#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fsum/corpus.hpp"
#include "fsum/fact.hpp"

namespace fsum {

// Surface-form lexicon for dictionary matching. Keys are normalized
// (tokenized, lowercased, space-joined) preferred names and synonyms.
struct Gazetteer {
    std::unordered_map<std::string, std::string> surface_to_concept;
    int max_phrase_len = 0;
    std::vector<std::string> warnings;  // cross-concept surface collisions
};

// When two concepts claim the same surface form, the lexicographically
// smaller concept id wins and a warning is recorded.
Gazetteer build_gazetteer(const std::vector<FactRecord>& kb);

struct EntityMention {
    std::vector<std::string> surface;  // source tokens in [start, end)
    std::string concept_id;
    int start = 0;
    int end = 0;

    std::string normalized() const;  // surface joined with single spaces
};

struct EntityChain {
    std::vector<EntityMention> mentions;

    bool empty() const { return mentions.empty(); }
    std::size_t size() const { return mentions.size(); }
};

// Left-to-right greedy longest-match scan over the tokenized text. Matches
// never overlap; after a match the scan resumes past its end.
EntityChain extract_entities(std::string_view text, const Gazetteer& gaz);

// [BOS, mention tokens..., <ent>, mention tokens..., EOS]; an empty chain
// linearizes to [BOS, EOS].
TokenIds linearize_entity_chain(const EntityChain& chain, const Vocab& vocab);

}  // namespace fsum
