#include "fsum/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fsum/synth.hpp"
#include "fsum/util.hpp"
#include "test_util.hpp"

using namespace fsum;
using fsum::testutil::TempDir;
using fsum::testutil::write_file;

namespace {

FactRecord fact(const std::string& id, const std::string& name, const std::string& definition = "",
                std::vector<std::string> synonyms = {}) {
    FactRecord f;
    f.concept_id = id;
    f.preferred_name = name;
    f.definition = definition;
    f.synonyms = std::move(synonyms);
    return f;
}

// Independent scorer: walks every document's token list directly with the
// same BM25 formula and tie rule, no inverted index involved.
std::vector<ScoredFact> brute_force_query(const std::vector<FactRecord>& kb,
                                          const std::vector<std::string>& query_tokens,
                                          const RetrieverConfig& cfg) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(kb.size());
    for (const auto& f : kb) docs.push_back(fact_document_tokens(f));

    double total_len = 0.0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avg_len = total_len / static_cast<double>(docs.size());
    const double n_docs = static_cast<double>(docs.size());

    std::vector<double> scores(kb.size(), 0.0);
    for (const auto& qt : query_tokens) {
        double df = 0.0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), qt) != d.end()) df += 1.0;
        }
        if (df == 0.0) continue;
        const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), qt));
            if (tf == 0.0) continue;
            const double dl = static_cast<double>(docs[i].size());
            const double norm = cfg.bm25_k1 * (1.0 - cfg.bm25_b + cfg.bm25_b * dl / avg_len);
            scores[i] += idf * tf * (cfg.bm25_k1 + 1.0) / (tf + norm);
        }
    }

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < kb.size(); ++i) {
        if (scores[i] > 0.0) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return kb[a].concept_id < kb[b].concept_id;
    });
    std::vector<ScoredFact> out;
    for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(cfg.k); ++i) {
        out.push_back(ScoredFact{kb[order[i]], scores[order[i]]});
    }
    return out;
}

}  // namespace

TEST_CASE("load_kb happy path and error cases") {
    TempDir dir;
    SUBCASE("three well-formed lines") {
        const std::string path = dir.file("kb.jsonl");
        write_file(path,
                   R"({"concept_id":"C1","preferred_name":"edema","synonyms":["swelling"],"semantic_type":"finding","definition":"fluid buildup"})" "\n"
                   R"({"concept_id":"C2","preferred_name":"effusion","synonyms":[],"semantic_type":"finding","definition":"fluid in a cavity","source":"UMLS"})" "\n"
                   R"({"concept_id":"C3","preferred_name":"stenosis","synonyms":[],"semantic_type":"disorder","definition":"narrowing"})" "\n");
        const auto kb = load_kb(path);
        REQUIRE(kb.size() == 3);
        CHECK(kb[0].concept_id == "C1");
        CHECK(kb[0].synonyms == std::vector<std::string>{"swelling"});
        CHECK(kb[1].source == "UMLS");
    }
    SUBCASE("duplicate concept_id names both lines") {
        const std::string path = dir.file("dup.jsonl");
        write_file(path,
                   R"({"concept_id":"C1","preferred_name":"a"})" "\n"
                   R"({"concept_id":"C1","preferred_name":"b"})" "\n");
        CHECK_THROWS_WITH_AS(load_kb(path), doctest::Contains("lines 1 and 2"), std::runtime_error);
    }
    SUBCASE("missing preferred_name is a schema error") {
        const std::string path = dir.file("schema.jsonl");
        write_file(path, R"({"concept_id":"C1"})" "\n");
        CHECK_THROWS_WITH_AS(load_kb(path), doctest::Contains("preferred_name"), std::runtime_error);
    }
}

TEST_CASE("kb write/load round trip") {
    TempDir dir;
    const auto kb = generate_synthetic_kb(25, 3);
    const std::string path = dir.file("kb.jsonl");
    write_kb(kb, path);
    const auto loaded = load_kb(path);
    REQUIRE(loaded.size() == kb.size());
    for (std::size_t i = 0; i < kb.size(); ++i) {
        CHECK(loaded[i].concept_id == kb[i].concept_id);
        CHECK(loaded[i].preferred_name == kb[i].preferred_name);
        CHECK(loaded[i].synonyms == kb[i].synonyms);
        CHECK(loaded[i].semantic_type == kb[i].semantic_type);
        CHECK(loaded[i].definition == kb[i].definition);
        CHECK(loaded[i].source == kb[i].source);
    }
}

TEST_CASE("build_index computes postings and length statistics exactly") {
    SUBCASE("hand-counted single document") {
        // document tokens: "a a b" -> a:2, b:1
        const auto index = build_index({fact("C1", "a a b")});
        CHECK(index.doc_count == 1);
        CHECK(index.doc_lengths == std::vector<std::int32_t>{3});
        REQUIRE(index.postings.count("a") == 1);
        REQUIRE(index.postings.count("b") == 1);
        CHECK(index.postings.at("a").size() == 1);
        CHECK(index.postings.at("a")[0].doc == 0);
        CHECK(index.postings.at("a")[0].tf == 2);
        CHECK(index.postings.at("b")[0].tf == 1);
        CHECK(index.avg_doc_length == 3.0);
    }
    SUBCASE("average length is the arithmetic mean") {
        const auto index = build_index({fact("C1", "a b c"), fact("C2", "d e")});
        CHECK(index.doc_count == 2);
        CHECK(index.avg_doc_length == doctest::Approx(2.5).epsilon(1e-15));
    }
    SUBCASE("empty kb is an error") {
        CHECK_THROWS(build_index({}));
    }
}

TEST_CASE("query ranks the matching document first") {
    const std::vector<FactRecord> kb = {
        fact("C1", "sinus rhythm", "normal electrical pattern"),
        fact("C2", "atrial fibrillation", "irregular rhythm with fibrillation of the atria"),
        fact("C3", "heart block", "conduction delay"),
    };
    const auto index = build_index(kb);
    RetrieverConfig cfg;
    const auto results = query(index, kb, {"atrial", "fibrillation"}, cfg);
    REQUIRE(!results.empty());
    CHECK(results[0].fact.concept_id == "C2");

    const auto oracle = brute_force_query(kb, {"atrial", "fibrillation"}, cfg);
    REQUIRE(results.size() == oracle.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(results[i].fact.concept_id == oracle[i].fact.concept_id);
        CHECK(results[i].score == oracle[i].score);
    }
}

TEST_CASE("query: no hits yields an empty list") {
    const std::vector<FactRecord> kb = {fact("C1", "edema"), fact("C2", "effusion")};
    const auto index = build_index(kb);
    CHECK(query(index, kb, {"zzz"}, RetrieverConfig{}).empty());
}

TEST_CASE("query: symmetric documents tie-break by ascending concept_id") {
    // Same token statistics in both documents, so identical scores.
    const std::vector<FactRecord> kb = {fact("C3", "edema alpha"), fact("C1", "edema beta")};
    const auto index = build_index(kb);
    const auto results = query(index, kb, {"edema"}, RetrieverConfig{});
    REQUIRE(results.size() == 2);
    CHECK(results[0].score == results[1].score);
    CHECK(results[0].fact.concept_id == "C1");
    CHECK(results[1].fact.concept_id == "C3");
}

TEST_CASE("query equals the brute-force oracle on random KBs and queries") {
    std::mt19937_64 rng(123);
    const auto kb = generate_synthetic_kb(300, 5);
    const auto index = build_index(kb);
    RetrieverConfig cfg;

    // Build a query vocabulary from KB tokens.
    std::vector<std::string> pool;
    for (const auto& f : kb) {
        for (const auto& t : fact_document_tokens(f)) pool.push_back(t);
    }

    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::string> q;
        const int qlen = 1 + static_cast<int>(uniform_below(rng, 3));
        for (int i = 0; i < qlen; ++i) {
            q.push_back(pool[uniform_below(rng, pool.size())]);
        }
        const auto got = query(index, kb, q, cfg);
        const auto oracle = brute_force_query(kb, q, cfg);
        REQUIRE(got.size() == oracle.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].fact.concept_id == oracle[i].fact.concept_id);
            CHECK(got[i].score == oracle[i].score);
            CHECK(got[i].score > 0.0);
        }
    }
}

TEST_CASE("query: k=3 results are a prefix of k=5 results") {
    const auto kb = generate_synthetic_kb(100, 8);
    const auto index = build_index(kb);
    RetrieverConfig k5;
    k5.k = 5;
    RetrieverConfig k3;
    k3.k = 3;
    const std::vector<std::string> q = {"effusion", "chronic"};
    const auto r5 = query(index, kb, q, k5);
    const auto r3 = query(index, kb, q, k3);
    REQUIRE(r3.size() <= r5.size());
    for (std::size_t i = 0; i < r3.size(); ++i) {
        CHECK(r3[i].fact.concept_id == r5[i].fact.concept_id);
        CHECK(r3[i].score == r5[i].score);
    }
}

TEST_CASE("query ranking is invariant under KB permutation") {
    auto kb = generate_synthetic_kb(60, 11);
    const auto index = build_index(kb);
    const std::vector<std::string> q = {"mild", "effusion"};
    const auto before = query(index, kb, q, RetrieverConfig{});

    std::mt19937_64 rng(5);
    auto shuffled = kb;
    seeded_shuffle(shuffled, rng);
    const auto index2 = build_index(shuffled);
    const auto after = query(index2, shuffled, q, RetrieverConfig{});

    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].fact.concept_id == after[i].fact.concept_id);
        CHECK(before[i].score == doctest::Approx(after[i].score).epsilon(1e-12));
    }
}

TEST_CASE("retrieve_for_chain concatenates per-mention results and dedups") {
    const std::vector<FactRecord> kb = {
        fact("C1", "pleural effusion", "fluid around the lung"),
        fact("C2", "cardiomegaly", "enlarged heart"),
        fact("C3", "edema", "fluid buildup"),
    };
    const auto index = build_index(kb);
    const auto gaz = build_gazetteer(kb);
    RetrieverConfig cfg;

    SUBCASE("two mentions with distinct top hits keep mention order") {
        const EntityChain chain = extract_entities("cardiomegaly and pleural effusion", gaz);
        REQUIRE(chain.size() == 2);
        const auto facts = retrieve_for_chain(index, kb, chain, cfg);
        REQUIRE(!facts.empty());
        CHECK(facts[0].concept_id == "C2");  // first mention's top hit comes first
    }
    SUBCASE("duplicate hits collapse to the first occurrence") {
        const EntityChain chain = extract_entities("edema edema", gaz);
        REQUIRE(chain.size() == 2);
        const auto facts = retrieve_for_chain(index, kb, chain, cfg);
        std::vector<std::string> ids;
        for (const auto& f : facts) ids.push_back(f.concept_id);
        std::sort(ids.begin(), ids.end());
        CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    }
    SUBCASE("empty chain retrieves nothing") {
        CHECK(retrieve_for_chain(index, kb, EntityChain{}, cfg).empty());
    }
}

TEST_CASE("linearize_facts emits name+definition runs with separators") {
    Vocab vocab;
    for (const auto& tok : {"edema", "fluid", "buildup", "effusion", "cavity"}) {
        vocab.add_token(tok);
    }
    SUBCASE("single fact") {
        const TokenIds ids = linearize_facts({fact("C1", "edema", "fluid buildup")}, vocab, 64);
        CHECK(ids == TokenIds{Vocab::bos_id, vocab.id_of("edema"), vocab.id_of("fluid"),
                              vocab.id_of("buildup"), Vocab::eos_id});
    }
    SUBCASE("empty fact list") {
        CHECK(linearize_facts({}, vocab, 64) == TokenIds{Vocab::bos_id, Vocab::eos_id});
    }
    SUBCASE("two facts are separated by <fact>") {
        const TokenIds ids = linearize_facts(
            {fact("C1", "edema", "fluid"), fact("C2", "effusion", "cavity")}, vocab, 64);
        CHECK(ids == TokenIds{Vocab::bos_id, vocab.id_of("edema"), vocab.id_of("fluid"),
                              Vocab::fact_id, vocab.id_of("effusion"), vocab.id_of("cavity"),
                              Vocab::eos_id});
    }
    SUBCASE("overflow truncates to max_tokens-1 ids plus EOS") {
        const TokenIds ids = linearize_facts(
            {fact("C1", "edema", "fluid buildup"), fact("C2", "effusion", "cavity")}, vocab, 6);
        REQUIRE(ids.size() == 6);
        CHECK(ids[0] == Vocab::bos_id);
        CHECK(ids[5] == Vocab::eos_id);
        CHECK(ids == TokenIds{Vocab::bos_id, vocab.id_of("edema"), vocab.id_of("fluid"),
                              vocab.id_of("buildup"), Vocab::fact_id, Vocab::eos_id});
    }
    SUBCASE("max_tokens below 2 is an error") {
        CHECK_THROWS(linearize_facts({}, vocab, 1));
    }
}

TEST_CASE("index snapshot round trip yields identical query results") {
    TempDir dir;
    const auto kb = generate_synthetic_kb(120, 17);
    const auto index = build_index(kb);
    const std::string path = dir.file("kb.idx");
    save_index(index, path);
    const auto loaded = load_index(path);

    CHECK(loaded.doc_count == index.doc_count);
    CHECK(loaded.doc_lengths == index.doc_lengths);
    CHECK(loaded.avg_doc_length == index.avg_doc_length);

    std::mt19937_64 rng(29);
    std::vector<std::string> pool;
    for (const auto& f : kb) {
        for (const auto& t : fact_document_tokens(f)) pool.push_back(t);
    }
    RetrieverConfig cfg;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::string> q{pool[uniform_below(rng, pool.size())],
                                   pool[uniform_below(rng, pool.size())]};
        const auto a = query(index, kb, q, cfg);
        const auto b = query(loaded, kb, q, cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].fact.concept_id == b[i].fact.concept_id);
            CHECK(a[i].score == b[i].score);
        }
    }
}

TEST_CASE("index snapshot rejects corruption and version drift") {
    TempDir dir;
    const auto kb = generate_synthetic_kb(10, 1);
    const auto index = build_index(kb);
    const std::string path = dir.file("kb.idx");
    save_index(index, path);

    SUBCASE("truncated file") {
        const std::string full = fsum::testutil::read_file(path);
        fsum::testutil::write_file(path, full.substr(0, full.size() / 2));
        CHECK_THROWS(load_index(path));
    }
    SUBCASE("bad magic") {
        std::string full = fsum::testutil::read_file(path);
        full[0] = 'X';
        fsum::testutil::write_file(path, full);
        CHECK_THROWS_WITH_AS(load_index(path), doctest::Contains("magic"), std::runtime_error);
    }
    SUBCASE("wrong version") {
        std::string full = fsum::testutil::read_file(path);
        full[8] = 9;  // version byte follows the 8-byte magic
        fsum::testutil::write_file(path, full);
        CHECK_THROWS_WITH_AS(load_index(path), doctest::Contains("version"), std::runtime_error);
    }
}
