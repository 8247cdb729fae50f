#include "fsum/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace fsum {

namespace {

using nlohmann::json;

constexpr char kIndexMagic[8] = {'F', 'S', 'U', 'M', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const char* what) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error(std::string("index snapshot: truncated while reading ") + what);
    }
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const char* what) {
    std::uint32_t len = 0;
    read_pod(in, len, what);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) {
        throw std::runtime_error(std::string("index snapshot: truncated while reading ") + what);
    }
    return s;
}

double mean_length(const std::vector<std::int32_t>& lengths) {
    if (lengths.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::int32_t len : lengths) {
        sum += static_cast<double>(len);
    }
    return sum / static_cast<double>(lengths.size());
}

}  // namespace

std::vector<FactRecord> load_kb(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("kb file: cannot open " + path);
    }
    std::vector<FactRecord> kb;
    std::unordered_map<std::string, int> id_lines;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("kb file: malformed JSON at line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
        FactRecord fact;
        auto require_string = [&](const char* key) -> std::string {
            auto it = obj.find(key);
            if (it == obj.end() || !it->is_string()) {
                throw std::runtime_error("kb file: missing or non-string field '" +
                                         std::string(key) + "' at line " + std::to_string(line_no));
            }
            return it->get<std::string>();
        };
        fact.concept_id = require_string("concept_id");
        fact.preferred_name = require_string("preferred_name");
        if (fact.preferred_name.empty()) {
            throw std::runtime_error("kb file: empty preferred_name at line " +
                                     std::to_string(line_no));
        }
        if (auto it = obj.find("synonyms"); it != obj.end()) {
            if (!it->is_array()) {
                throw std::runtime_error("kb file: 'synonyms' is not an array at line " +
                                         std::to_string(line_no));
            }
            for (const auto& syn : *it) {
                if (!syn.is_string()) {
                    throw std::runtime_error("kb file: non-string synonym at line " +
                                             std::to_string(line_no));
                }
                fact.synonyms.push_back(syn.get<std::string>());
            }
        }
        if (auto it = obj.find("semantic_type"); it != obj.end() && it->is_string()) {
            fact.semantic_type = it->get<std::string>();
        }
        if (auto it = obj.find("definition"); it != obj.end() && it->is_string()) {
            fact.definition = it->get<std::string>();
        }
        if (auto it = obj.find("source"); it != obj.end() && it->is_string()) {
            fact.source = it->get<std::string>();
        }

        auto [prev, inserted] = id_lines.emplace(fact.concept_id, line_no);
        if (!inserted) {
            throw std::runtime_error("kb file: duplicate concept_id '" + fact.concept_id +
                                     "' at lines " + std::to_string(prev->second) + " and " +
                                     std::to_string(line_no));
        }
        kb.push_back(std::move(fact));
    }
    return kb;
}

void write_kb(const std::vector<FactRecord>& kb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("kb file: cannot write " + path);
    }
    for (const auto& fact : kb) {
        json obj;
        obj["concept_id"] = fact.concept_id;
        obj["preferred_name"] = fact.preferred_name;
        obj["synonyms"] = fact.synonyms;
        obj["semantic_type"] = fact.semantic_type;
        obj["definition"] = fact.definition;
        if (!fact.source.empty()) {
            obj["source"] = fact.source;
        }
        out << obj.dump() << "\n";
    }
    if (!out) {
        throw std::runtime_error("kb file: write failed for " + path);
    }
}

std::vector<std::string> fact_document_tokens(const FactRecord& fact) {
    std::string text = fact.preferred_name;
    for (const auto& syn : fact.synonyms) {
        text += " ";
        text += syn;
    }
    text += " ";
    text += fact.semantic_type;
    text += " ";
    text += fact.definition;
    return tokenize(text);
}

InvertedIndex build_index(const std::vector<FactRecord>& kb) {
    if (kb.empty()) {
        throw std::invalid_argument("build_index: knowledge base is empty");
    }
    InvertedIndex index;
    index.doc_count = static_cast<std::int32_t>(kb.size());
    index.doc_lengths.reserve(kb.size());
    for (std::size_t d = 0; d < kb.size(); ++d) {
        const std::vector<std::string> tokens = fact_document_tokens(kb[d]);
        index.doc_lengths.push_back(static_cast<std::int32_t>(tokens.size()));
        std::map<std::string, std::int32_t> tf;  // ordered so postings stay deterministic
        for (const auto& tok : tokens) {
            ++tf[tok];
        }
        for (const auto& [tok, count] : tf) {
            index.postings[tok].push_back(
                Posting{static_cast<std::int32_t>(d), count});
        }
    }
    index.avg_doc_length = mean_length(index.doc_lengths);
    return index;
}

std::vector<ScoredFact> query(const InvertedIndex& index, const std::vector<FactRecord>& kb,
                              const std::vector<std::string>& query_tokens,
                              const RetrieverConfig& cfg) {
    if (cfg.k < 1) {
        throw std::invalid_argument("query: k must be >= 1");
    }
    if (index.doc_count != static_cast<std::int32_t>(kb.size())) {
        throw std::invalid_argument("query: index was built from a KB of different size");
    }

    const double n_docs = static_cast<double>(index.doc_count);
    std::unordered_map<std::int32_t, double> scores;
    for (const auto& tok : query_tokens) {
        auto it = index.postings.find(tok);
        if (it == index.postings.end()) {
            continue;
        }
        const auto& plist = it->second;
        const double df = static_cast<double>(plist.size());
        const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        for (const Posting& p : plist) {
            const double tf = static_cast<double>(p.tf);
            const double dl = static_cast<double>(index.doc_lengths[static_cast<std::size_t>(p.doc)]);
            const double norm = cfg.bm25_k1 * (1.0 - cfg.bm25_b + cfg.bm25_b * dl / index.avg_doc_length);
            scores[p.doc] += idf * tf * (cfg.bm25_k1 + 1.0) / (tf + norm);
        }
    }

    std::vector<std::pair<std::int32_t, double>> hits;
    hits.reserve(scores.size());
    for (const auto& [doc, score] : scores) {
        if (score > 0.0) {
            hits.emplace_back(doc, score);
        }
    }
    std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return kb[static_cast<std::size_t>(a.first)].concept_id <
               kb[static_cast<std::size_t>(b.first)].concept_id;
    });

    std::vector<ScoredFact> results;
    const std::size_t limit = std::min<std::size_t>(hits.size(), static_cast<std::size_t>(cfg.k));
    results.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) {
        results.push_back(ScoredFact{kb[static_cast<std::size_t>(hits[i].first)], hits[i].second});
    }
    return results;
}

std::vector<ScoredFact> query(const InvertedIndex& index, const std::vector<FactRecord>& kb,
                              const EntityMention& mention, const RetrieverConfig& cfg) {
    return query(index, kb, mention.surface, cfg);
}

std::vector<FactRecord> retrieve_for_chain(const InvertedIndex& index,
                                           const std::vector<FactRecord>& kb,
                                           const EntityChain& chain, const RetrieverConfig& cfg) {
    std::vector<FactRecord> facts;
    std::unordered_set<std::string> seen;
    for (const auto& mention : chain.mentions) {
        for (auto& scored : query(index, kb, mention, cfg)) {
            if (seen.insert(scored.fact.concept_id).second) {
                facts.push_back(std::move(scored.fact));
            }
        }
    }
    return facts;
}

TokenIds linearize_facts(const std::vector<FactRecord>& facts, const Vocab& vocab, int max_tokens) {
    if (max_tokens < 2) {
        throw std::invalid_argument("linearize_facts: max_tokens must be >= 2");
    }
    TokenIds ids;
    ids.push_back(Vocab::bos_id);
    const std::size_t content_budget = static_cast<std::size_t>(max_tokens - 1);
    for (std::size_t f = 0; f < facts.size() && ids.size() < content_budget; ++f) {
        if (f > 0) {
            ids.push_back(Vocab::fact_id);
        }
        for (const auto& tok : tokenize(facts[f].preferred_name)) {
            ids.push_back(vocab.id_of(tok));
        }
        for (const auto& tok : tokenize(facts[f].definition)) {
            ids.push_back(vocab.id_of(tok));
        }
    }
    if (ids.size() > content_budget) {
        ids.resize(content_budget);
    }
    ids.push_back(Vocab::eos_id);
    return ids;
}

void save_index(const InvertedIndex& index, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw std::runtime_error("index snapshot: cannot write " + tmp);
        }
        out.write(kIndexMagic, sizeof(kIndexMagic));
        write_pod(out, kIndexVersion);
        write_pod(out, index.doc_count);
        for (std::int32_t len : index.doc_lengths) {
            write_pod(out, len);
        }
        // Terms sorted for a canonical byte layout.
        std::vector<const std::string*> terms;
        terms.reserve(index.postings.size());
        for (const auto& kv : index.postings) {
            terms.push_back(&kv.first);
        }
        std::sort(terms.begin(), terms.end(),
                  [](const std::string* a, const std::string* b) { return *a < *b; });
        write_pod(out, static_cast<std::uint64_t>(terms.size()));
        for (const std::string* term : terms) {
            write_string(out, *term);
            const auto& plist = index.postings.at(*term);
            write_pod(out, static_cast<std::uint32_t>(plist.size()));
            for (const Posting& p : plist) {
                write_pod(out, p.doc);
                write_pod(out, p.tf);
            }
        }
        if (!out) {
            throw std::runtime_error("index snapshot: write failed for " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

InvertedIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("index snapshot: cannot open " + path);
    }
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("index snapshot: bad magic in " + path);
    }
    std::uint32_t version = 0;
    read_pod(in, version, "version");
    if (version != kIndexVersion) {
        throw std::runtime_error("index snapshot: format version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kIndexVersion) + ")");
    }
    InvertedIndex index;
    read_pod(in, index.doc_count, "doc count");
    if (index.doc_count < 0) {
        throw std::runtime_error("index snapshot: negative doc count");
    }
    index.doc_lengths.resize(static_cast<std::size_t>(index.doc_count));
    for (auto& len : index.doc_lengths) {
        read_pod(in, len, "doc length");
    }
    std::uint64_t term_count = 0;
    read_pod(in, term_count, "term count");
    for (std::uint64_t t = 0; t < term_count; ++t) {
        std::string term = read_string(in, "term");
        std::uint32_t plen = 0;
        read_pod(in, plen, "postings length");
        std::vector<Posting> plist(plen);
        for (auto& p : plist) {
            read_pod(in, p.doc, "posting doc");
            read_pod(in, p.tf, "posting tf");
            if (p.doc < 0 || p.doc >= index.doc_count) {
                throw std::runtime_error("index snapshot: posting doc out of range");
            }
        }
        index.postings.emplace(std::move(term), std::move(plist));
    }
    index.avg_doc_length = mean_length(index.doc_lengths);
    return index;
}

}  // namespace fsum
