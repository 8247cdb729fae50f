#include "fsum/corpus.hpp"

#include <algorithm>
#include <set>

#include "doctest.h"
#include "fsum/ner.hpp"
#include "fsum/synth.hpp"
#include "test_util.hpp"

using namespace fsum;
using fsum::testutil::TempDir;
using fsum::testutil::write_file;

TEST_CASE("load_records applies the blank-findings/impression filter") {
    TempDir dir;
    const std::string path = dir.file("records.jsonl");
    std::string content;
    content += R"({"record_id":"r1","findings":"mild cardiomegaly","impression":""})" "\n";
    content += R"({"record_id":"r2","findings":"clear lungs","impression":"no acute disease"})" "\n";
    for (int i = 3; i <= 8; ++i) {
        content += R"({"record_id":"r)" + std::to_string(i) +
                   R"(","findings":"finding text","impression":"impression text"})" "\n";
    }
    content += R"({"record_id":"r9","findings":"   ","impression":"x"})" "\n";
    content += R"({"record_id":"r10","findings":"y","impression":"  \t "})" "\n";

    write_file(path, content);
    const CorpusLoadResult result = load_records(path);
    CHECK(result.records.size() == 7);
    CHECK(result.filtered_count == 3);
    CHECK(result.records[0].record_id == "r2");
    CHECK(result.records[0].findings == "clear lungs");
    CHECK(result.records[0].impression == "no acute disease");
}

TEST_CASE("load_records error paths") {
    TempDir dir;
    SUBCASE("unreadable file") {
        CHECK_THROWS(load_records(dir.file("missing.jsonl")));
    }
    SUBCASE("malformed JSON names the line") {
        const std::string path = dir.file("bad.jsonl");
        write_file(path, R"({"findings":"a","impression":"b"})" "\nnot json\n");
        CHECK_THROWS_WITH_AS(load_records(path), doctest::Contains("line 2"), std::runtime_error);
    }
    SUBCASE("missing required field") {
        const std::string path = dir.file("schema.jsonl");
        write_file(path, R"({"findings":"only findings"})" "\n");
        CHECK_THROWS_WITH_AS(load_records(path), doctest::Contains("impression"), std::runtime_error);
    }
    SUBCASE("duplicate record id") {
        const std::string path = dir.file("dup.jsonl");
        write_file(path,
                   R"({"record_id":"x","findings":"a","impression":"b"})" "\n"
                   R"({"record_id":"x","findings":"c","impression":"d"})" "\n");
        CHECK_THROWS_WITH_AS(load_records(path), doctest::Contains("duplicate"), std::runtime_error);
    }
}

TEST_CASE("load/write round trip returns the same records") {
    TempDir dir;
    const std::string a = dir.file("a.jsonl");
    const std::string b = dir.file("b.jsonl");
    write_file(a,
               R"({"record_id":"r1","findings":"mild edema","impression":"edema","procedure_type":"ct"})" "\n"
               R"({"record_id":"r2","findings":"clear","impression":"normal","indication":"pain"})" "\n");
    const CorpusLoadResult first = load_records(a);
    write_records(first.records, b);
    const CorpusLoadResult second = load_records(b);
    REQUIRE(second.records.size() == first.records.size());
    for (std::size_t i = 0; i < first.records.size(); ++i) {
        CHECK(first.records[i].record_id == second.records[i].record_id);
        CHECK(first.records[i].findings == second.records[i].findings);
        CHECK(first.records[i].impression == second.records[i].impression);
        CHECK(first.records[i].procedure_type == second.records[i].procedure_type);
        CHECK(first.records[i].indication == second.records[i].indication);
    }
}

TEST_CASE("tokenize lowercases and splits on non-alphanumeric runs") {
    CHECK(tokenize("Mild Cardiomegaly, no effusion.") ==
          std::vector<std::string>{"mild", "cardiomegaly", "no", "effusion"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("EF 45-50%") == std::vector<std::string>{"ef", "45", "50"});
    CHECK(tokenize("a  --  b") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
    ClinicalRecord rec;
    rec.record_id = "r";
    rec.findings = "a a b";
    rec.impression = "b c";

    SUBCASE("min_freq 2 keeps a and b, tie broken lexically") {
        const Vocab v = build_vocab({rec}, 2);
        CHECK(v.size() == Vocab::reserved_count + 2);
        CHECK(v.id_of("a") == 6);
        CHECK(v.id_of("b") == 7);
        CHECK(v.id_of("c") == Vocab::unk_id);
    }
    SUBCASE("min_freq 1 keeps all three") {
        const Vocab v = build_vocab({rec}, 1);
        CHECK(v.size() == Vocab::reserved_count + 3);
        CHECK(v.id_of("a") == 6);
        CHECK(v.id_of("b") == 7);
        CHECK(v.id_of("c") == 8);
    }
    SUBCASE("empty record list is an error") {
        CHECK_THROWS(build_vocab({}, 1));
    }
}

TEST_CASE("vocab reserved tokens and encode") {
    ClinicalRecord rec;
    rec.record_id = "r";
    rec.findings = "a a b";
    rec.impression = "b c";
    const Vocab v = build_vocab({rec}, 2);

    CHECK(v.token_of(0) == "<pad>");
    CHECK(v.token_of(1) == "<bos>");
    CHECK(v.token_of(2) == "<eos>");
    CHECK(v.token_of(3) == "<unk>");
    CHECK(v.token_of(4) == "<ent>");
    CHECK(v.token_of(5) == "<fact>");

    CHECK(v.encode("a b", false) == TokenIds{6, 7});
    CHECK(v.encode("a z", false) == TokenIds{6, Vocab::unk_id});
    CHECK(v.encode("a", true) == TokenIds{Vocab::bos_id, 6, Vocab::eos_id});
}

TEST_CASE("encode/decode round trip for in-vocab text") {
    ClinicalRecord rec;
    rec.record_id = "r";
    rec.findings = "severe aortic stenosis with mild regurgitation";
    rec.impression = "aortic stenosis";
    const Vocab v = build_vocab({rec}, 1);
    const std::string text = "mild aortic stenosis with regurgitation";
    CHECK(v.decode(v.encode(text, true)) == tokenize(text));
    CHECK(v.decode(v.encode(text, false)) == tokenize(text));
}

TEST_CASE("vocab save/load round trip") {
    TempDir dir;
    ClinicalRecord rec;
    rec.record_id = "r";
    rec.findings = "severe aortic stenosis";
    rec.impression = "stenosis persists";
    const Vocab v = build_vocab({rec}, 1);
    const std::string path = dir.file("vocab.txt");
    v.save(path);
    const Vocab loaded = Vocab::load(path);
    CHECK(loaded.size() == v.size());
    CHECK(loaded.content_hash() == v.content_hash());
    for (std::int32_t id = 0; id < v.size(); ++id) {
        CHECK(loaded.token_of(id) == v.token_of(id));
    }
}

namespace {

std::vector<ClinicalRecord> numbered_records(int n) {
    std::vector<ClinicalRecord> records;
    records.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ClinicalRecord rec;
        rec.record_id = "r" + std::to_string(i);
        rec.findings = "f";
        rec.impression = "i";
        records.push_back(std::move(rec));
    }
    return records;
}

std::set<std::string> id_set(const std::vector<ClinicalRecord>& records) {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.record_id);
    return ids;
}

}  // namespace

TEST_CASE("split_corpus reproduces the requested sizes exactly") {
    const auto records = numbered_records(6182);
    const CorpusSplit split = split_corpus(records, 4000, 1091, 1091, 13);
    CHECK(split.train.size() == 4000);
    CHECK(split.validation.size() == 1091);
    CHECK(split.test.size() == 1091);

    std::set<std::string> all = id_set(split.train);
    for (const auto& r : split.validation) CHECK(all.insert(r.record_id).second);
    for (const auto& r : split.test) CHECK(all.insert(r.record_id).second);
    CHECK(all.size() == records.size());
}

TEST_CASE("split_corpus degenerate and error cases") {
    const auto records = numbered_records(10);
    SUBCASE("(n, 0, 0) permutes everything into train") {
        const CorpusSplit split = split_corpus(records, 10, 0, 0, 99);
        CHECK(split.train.size() == 10);
        CHECK(split.validation.empty());
        CHECK(split.test.empty());
        CHECK(id_set(split.train) == id_set(records));
    }
    SUBCASE("counts exceeding the corpus are an error") {
        CHECK_THROWS(split_corpus(records, 8, 2, 1, 0));
    }
}

TEST_CASE("split_corpus determinism and seed sensitivity") {
    const auto records = numbered_records(50);
    const CorpusSplit a = split_corpus(records, 30, 10, 10, 1);
    const CorpusSplit b = split_corpus(records, 30, 10, 10, 1);
    const CorpusSplit c = split_corpus(records, 30, 10, 10, 2);

    auto ids_in_order = [](const std::vector<ClinicalRecord>& rs) {
        std::vector<std::string> ids;
        for (const auto& r : rs) ids.push_back(r.record_id);
        return ids;
    };
    CHECK(ids_in_order(a.train) == ids_in_order(b.train));
    CHECK(ids_in_order(a.validation) == ids_in_order(b.validation));
    CHECK(ids_in_order(a.test) == ids_in_order(b.test));
    CHECK(ids_in_order(a.train) != ids_in_order(c.train));
    CHECK(c.train.size() == 30);
}

TEST_CASE("synthetic KB is deterministic with unique multi-token names") {
    const auto kb1 = generate_synthetic_kb(200, 9);
    const auto kb2 = generate_synthetic_kb(200, 9);
    REQUIRE(kb1.size() == 200);
    std::set<std::string> ids, names;
    for (std::size_t i = 0; i < kb1.size(); ++i) {
        CHECK(kb1[i].concept_id == kb2[i].concept_id);
        CHECK(kb1[i].preferred_name == kb2[i].preferred_name);
        CHECK(kb1[i].definition == kb2[i].definition);
        CHECK(ids.insert(kb1[i].concept_id).second);
        CHECK(names.insert(kb1[i].preferred_name).second);
        CHECK(tokenize(kb1[i].preferred_name).size() >= 2);
    }
    CHECK_THROWS(generate_synthetic_kb(0, 1));
}

TEST_CASE("synthetic corpus: determinism and single-concept forcing") {
    std::vector<FactRecord> kb;
    FactRecord fact;
    fact.concept_id = "C1";
    fact.preferred_name = "cardiomegaly";
    kb.push_back(fact);

    const auto one = generate_synthetic_corpus(1, kb, 1.0, 3);
    REQUIRE(one.size() == 1);
    CHECK(one[0].findings.find("cardiomegaly") != std::string::npos);
    CHECK(one[0].impression.find("cardiomegaly") != std::string::npos);

    const auto big = generate_synthetic_kb(40, 2);
    const auto a = generate_synthetic_corpus(100, big, 0.8, 7);
    const auto b = generate_synthetic_corpus(100, big, 0.8, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].findings == b[i].findings);
        CHECK(a[i].impression == b[i].impression);
        CHECK(a[i].record_id == b[i].record_id);
    }
    CHECK_THROWS(generate_synthetic_corpus(5, {}, 0.5, 1));
    CHECK_THROWS(generate_synthetic_corpus(5, kb, 0.0, 1));
}

TEST_CASE("synthetic corpus: impression entities are a sub-multiset of findings entities") {
    const auto kb = generate_synthetic_kb(60, 4);
    const Gazetteer gaz = build_gazetteer(kb);
    const auto records = generate_synthetic_corpus(80, kb, 0.6, 21);
    for (const auto& rec : records) {
        std::multiset<std::string> in_findings, in_impression;
        for (const auto& m : extract_entities(rec.findings, gaz).mentions) {
            in_findings.insert(m.normalized());
        }
        for (const auto& m : extract_entities(rec.impression, gaz).mentions) {
            in_impression.insert(m.normalized());
        }
        CHECK(!in_findings.empty());
        CHECK(!in_impression.empty());
        for (const auto& surface : in_impression) {
            CHECK(in_impression.count(surface) <= in_findings.count(surface));
        }
    }
}

TEST_CASE("synthetic corpus: mean entity count tracks the requested density") {
    const auto kb = generate_synthetic_kb(60, 4);
    const Gazetteer gaz = build_gazetteer(kb);
    const auto records = generate_synthetic_corpus(50, kb, 0.5, 33);
    double total = 0.0;
    for (const auto& rec : records) {
        total += static_cast<double>(extract_entities(rec.findings, gaz).mentions.size());
    }
    const double mean = total / static_cast<double>(records.size());
    const double expected = 0.5 * synthetic_findings_slots;
    CHECK(mean >= expected - 1.0);
    CHECK(mean <= expected + 1.0);
}
