#include "fsum/ner.hpp"

#include <random>

#include "doctest.h"
#include "fsum/util.hpp"

using namespace fsum;

namespace {

FactRecord fact(const std::string& id, const std::string& name,
                std::vector<std::string> synonyms = {}) {
    FactRecord f;
    f.concept_id = id;
    f.preferred_name = name;
    f.synonyms = std::move(synonyms);
    return f;
}

// Oracle for the scan: enumerate every matching span, then greedily take
// the longest match at the leftmost uncovered position.
std::vector<std::pair<int, int>> greedy_longest_oracle(const std::vector<std::string>& tokens,
                                                       const Gazetteer& gaz) {
    std::vector<std::pair<int, int>> spans;  // all (start, end) whose surface is a key
    for (int start = 0; start < static_cast<int>(tokens.size()); ++start) {
        for (int end = start + 1; end <= static_cast<int>(tokens.size()); ++end) {
            std::string key;
            for (int i = start; i < end; ++i) {
                if (i > start) key.push_back(' ');
                key += tokens[static_cast<std::size_t>(i)];
            }
            if (gaz.surface_to_concept.count(key)) {
                spans.emplace_back(start, end);
            }
        }
    }
    std::vector<std::pair<int, int>> chosen;
    int pos = 0;
    while (pos < static_cast<int>(tokens.size())) {
        int best_end = -1;
        for (const auto& [s, e] : spans) {
            if (s == pos) best_end = std::max(best_end, e);
        }
        if (best_end < 0) {
            ++pos;
        } else {
            chosen.emplace_back(pos, best_end);
            pos = best_end;
        }
    }
    return chosen;
}

}  // namespace

TEST_CASE("build_gazetteer maps names and synonyms") {
    const auto gaz = build_gazetteer({fact("C1", "Pleural Effusion", {"effusion"})});
    CHECK(gaz.surface_to_concept.size() == 2);
    CHECK(gaz.surface_to_concept.at("pleural effusion") == "C1");
    CHECK(gaz.surface_to_concept.at("effusion") == "C1");
    CHECK(gaz.max_phrase_len == 2);
    CHECK(gaz.warnings.empty());
}

TEST_CASE("build_gazetteer collision picks the smaller concept id and warns") {
    SUBCASE("larger id first") {
        const auto gaz = build_gazetteer({fact("C9", "edema"), fact("C2", "fluid overload", {"edema"})});
        CHECK(gaz.surface_to_concept.at("edema") == "C2");
        CHECK(gaz.warnings.size() == 1);
    }
    SUBCASE("smaller id first") {
        const auto gaz = build_gazetteer({fact("C2", "edema"), fact("C9", "swelling", {"edema"})});
        CHECK(gaz.surface_to_concept.at("edema") == "C2");
        CHECK(gaz.warnings.size() == 1);
    }
}

TEST_CASE("build_gazetteer rejects an empty KB") {
    CHECK_THROWS(build_gazetteer({}));
}

TEST_CASE("extract_entities: longest match suppresses embedded keys") {
    const auto gaz = build_gazetteer({fact("C1", "pleural effusion", {"effusion"}),
                                      fact("C2", "cardiomegaly")});
    const EntityChain chain = extract_entities("small pleural effusion and cardiomegaly", gaz);
    REQUIRE(chain.size() == 2);
    CHECK(chain.mentions[0].normalized() == "pleural effusion");
    CHECK(chain.mentions[0].concept_id == "C1");
    CHECK(chain.mentions[0].start == 1);
    CHECK(chain.mentions[0].end == 3);
    CHECK(chain.mentions[1].normalized() == "cardiomegaly");
    CHECK(chain.mentions[1].start == 4);
    CHECK(chain.mentions[1].end == 5);
}

TEST_CASE("extract_entities: no gazetteer terms yields an empty chain") {
    const auto gaz = build_gazetteer({fact("C1", "pleural effusion")});
    CHECK(extract_entities("the lungs are clear", gaz).empty());
}

TEST_CASE("extract_entities: adjacent repeats produce two mentions") {
    const auto gaz = build_gazetteer({fact("C1", "effusion")});
    const EntityChain chain = extract_entities("effusion effusion", gaz);
    REQUIRE(chain.size() == 2);
    CHECK(chain.mentions[0].start == 0);
    CHECK(chain.mentions[0].end == 1);
    CHECK(chain.mentions[1].start == 1);
    CHECK(chain.mentions[1].end == 2);
}

TEST_CASE("extract_entities matches the exhaustive greedy-longest oracle on random text") {
    const auto gaz = build_gazetteer({
        fact("C1", "pleural effusion", {"effusion"}),
        fact("C2", "severe pleural effusion"),
        fact("C3", "cardiomegaly"),
        fact("C4", "mild edema", {"edema"}),
        fact("C5", "edema of lung"),
    });
    const std::vector<std::string> pool = {"pleural", "effusion", "severe",       "mild", "edema",
                                           "of",      "lung",     "cardiomegaly", "and",  "the"};
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const int len = 1 + static_cast<int>(uniform_below(rng, 12));
        std::vector<std::string> tokens;
        std::string text;
        for (int i = 0; i < len; ++i) {
            tokens.push_back(pool[uniform_below(rng, pool.size())]);
            if (i > 0) text.push_back(' ');
            text += tokens.back();
        }
        const EntityChain chain = extract_entities(text, gaz);
        const auto oracle = greedy_longest_oracle(tokens, gaz);
        REQUIRE(chain.size() == oracle.size());
        int prev_end = 0;
        for (std::size_t m = 0; m < oracle.size(); ++m) {
            const EntityMention& mention = chain.mentions[m];
            CHECK(mention.start == oracle[m].first);
            CHECK(mention.end == oracle[m].second);
            // sorted, non-overlapping, sound, and not extendable
            CHECK(mention.start >= prev_end);
            prev_end = mention.end;
            CHECK(gaz.surface_to_concept.count(mention.normalized()) == 1);
            std::string extended = mention.normalized();
            if (mention.end < static_cast<int>(tokens.size())) {
                extended += " " + tokens[static_cast<std::size_t>(mention.end)];
                CHECK(gaz.surface_to_concept.count(extended) == 0);
            }
        }
    }
}

TEST_CASE("linearize_entity_chain frames mentions with separators") {
    ClinicalRecord rec;
    rec.record_id = "r";
    rec.findings = "pleural effusion cardiomegaly edema";
    rec.impression = "stable";
    const Vocab vocab = build_vocab({rec}, 1);
    const auto gaz = build_gazetteer({fact("C1", "pleural effusion"), fact("C2", "cardiomegaly"),
                                      fact("C3", "edema")});

    SUBCASE("two mentions use one separator") {
        const EntityChain chain = extract_entities("pleural effusion and cardiomegaly", gaz);
        const TokenIds ids = linearize_entity_chain(chain, vocab);
        CHECK(ids == TokenIds{Vocab::bos_id, vocab.id_of("pleural"), vocab.id_of("effusion"),
                              Vocab::ent_id, vocab.id_of("cardiomegaly"), Vocab::eos_id});
    }
    SUBCASE("empty chain is just BOS EOS") {
        CHECK(linearize_entity_chain(EntityChain{}, vocab) ==
              TokenIds{Vocab::bos_id, Vocab::eos_id});
    }
    SUBCASE("single mention has no separator") {
        const EntityChain chain = extract_entities("edema", gaz);
        CHECK(linearize_entity_chain(chain, vocab) ==
              TokenIds{Vocab::bos_id, vocab.id_of("edema"), Vocab::eos_id});
    }
}

TEST_CASE("linearization round trip recovers mention surfaces") {
    ClinicalRecord rec;
    rec.record_id = "r";
    rec.findings = "pleural effusion cardiomegaly mild edema";
    rec.impression = "stable";
    const Vocab vocab = build_vocab({rec}, 1);
    const auto gaz = build_gazetteer({fact("C1", "pleural effusion"), fact("C2", "cardiomegaly"),
                                      fact("C4", "mild edema")});
    const EntityChain chain =
        extract_entities("pleural effusion with cardiomegaly and mild edema", gaz);
    REQUIRE(chain.size() == 3);
    const TokenIds ids = linearize_entity_chain(chain, vocab);

    // split on <ent>, drop BOS/EOS, map back to tokens
    std::vector<std::vector<std::string>> groups(1);
    for (std::int32_t id : ids) {
        if (id == Vocab::bos_id || id == Vocab::eos_id) continue;
        if (id == Vocab::ent_id) {
            groups.emplace_back();
            continue;
        }
        groups.back().push_back(vocab.token_of(id));
    }
    REQUIRE(groups.size() == chain.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        CHECK(groups[i] == chain.mentions[i].surface);
    }
}
