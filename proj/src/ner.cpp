#include "fsum/ner.hpp"

#include <algorithm>
#include <stdexcept>

namespace fsum {

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) {
            out.push_back(' ');
        }
        out += tokens[i];
    }
    return out;
}

void insert_surface(Gazetteer& gaz, const std::string& raw_surface, const std::string& concept_id) {
    const std::vector<std::string> toks = tokenize(raw_surface);
    if (toks.empty()) {
        gaz.warnings.push_back("surface form '" + raw_surface + "' of " + concept_id +
                               " is empty after normalization; skipped");
        return;
    }
    const std::string key = join_tokens(toks, 0, toks.size());
    auto it = gaz.surface_to_concept.find(key);
    if (it != gaz.surface_to_concept.end() && it->second != concept_id) {
        const std::string& winner = std::min(it->second, concept_id);
        const std::string& loser = std::max(it->second, concept_id);
        gaz.warnings.push_back("surface form '" + key + "' claimed by " + it->second + " and " +
                               concept_id + "; keeping " + winner);
        it->second = winner;
        (void)loser;
    } else {
        gaz.surface_to_concept[key] = concept_id;
    }
    gaz.max_phrase_len = std::max(gaz.max_phrase_len, static_cast<int>(toks.size()));
}

}  // namespace

std::string EntityMention::normalized() const {
    return join_tokens(surface, 0, surface.size());
}

Gazetteer build_gazetteer(const std::vector<FactRecord>& kb) {
    if (kb.empty()) {
        throw std::invalid_argument("build_gazetteer: knowledge base is empty");
    }
    Gazetteer gaz;
    for (const auto& fact : kb) {
        insert_surface(gaz, fact.preferred_name, fact.concept_id);
        for (const auto& syn : fact.synonyms) {
            insert_surface(gaz, syn, fact.concept_id);
        }
    }
    return gaz;
}

EntityChain extract_entities(std::string_view text, const Gazetteer& gaz) {
    EntityChain chain;
    const std::vector<std::string> tokens = tokenize(text);
    const std::size_t n = tokens.size();
    std::size_t i = 0;
    while (i < n) {
        const std::size_t longest =
            std::min<std::size_t>(static_cast<std::size_t>(gaz.max_phrase_len), n - i);
        bool matched = false;
        for (std::size_t len = longest; len >= 1 && !matched; --len) {
            const std::string key = join_tokens(tokens, i, i + len);
            auto it = gaz.surface_to_concept.find(key);
            if (it != gaz.surface_to_concept.end()) {
                EntityMention mention;
                mention.surface.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
                mention.concept_id = it->second;
                mention.start = static_cast<int>(i);
                mention.end = static_cast<int>(i + len);
                chain.mentions.push_back(std::move(mention));
                i += len;
                matched = true;
            }
        }
        if (!matched) {
            ++i;
        }
    }
    return chain;
}

TokenIds linearize_entity_chain(const EntityChain& chain, const Vocab& vocab) {
    TokenIds ids;
    ids.push_back(Vocab::bos_id);
    for (std::size_t m = 0; m < chain.mentions.size(); ++m) {
        if (m > 0) {
            ids.push_back(Vocab::ent_id);
        }
        for (const auto& tok : chain.mentions[m].surface) {
            ids.push_back(vocab.id_of(tok));
        }
    }
    ids.push_back(Vocab::eos_id);
    return ids;
}

}  // namespace fsum
