#include "fsum/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "fsum/util.hpp"
#include "json.hpp"

namespace fsum {

namespace {

using nlohmann::json;

std::string get_string_field(const json& obj, const char* key, int line_no, bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) {
            throw std::runtime_error("record file: missing required field '" + std::string(key) +
                                     "' at line " + std::to_string(line_no));
        }
        return "";
    }
    if (!it->is_string()) {
        throw std::runtime_error("record file: field '" + std::string(key) +
                                 "' is not a string at line " + std::to_string(line_no));
    }
    return it->get<std::string>();
}

}  // namespace

CorpusLoadResult load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("record file: cannot open " + path);
    }

    CorpusLoadResult result;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_copy(line).empty()) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("record file: malformed JSON at line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object()) {
            throw std::runtime_error("record file: line " + std::to_string(line_no) +
                                     " is not a JSON object");
        }

        ClinicalRecord rec;
        rec.record_id = get_string_field(obj, "record_id", line_no, false);
        rec.procedure_type = get_string_field(obj, "procedure_type", line_no, false);
        rec.techniques = get_string_field(obj, "techniques", line_no, false);
        rec.indication = get_string_field(obj, "indication", line_no, false);
        rec.findings = get_string_field(obj, "findings", line_no, true);
        rec.impression = get_string_field(obj, "impression", line_no, true);

        if (trim_copy(rec.findings).empty() || trim_copy(rec.impression).empty()) {
            ++result.filtered_count;
            continue;
        }

        if (rec.record_id.empty()) {
            rec.record_id = "rec-" + std::to_string(line_no);
        }
        if (!seen_ids.insert(rec.record_id).second) {
            throw std::runtime_error("record file: duplicate record_id '" + rec.record_id +
                                     "' at line " + std::to_string(line_no));
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

void write_records(const std::vector<ClinicalRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("record file: cannot write " + path);
    }
    for (const auto& rec : records) {
        json obj;
        obj["record_id"] = rec.record_id;
        obj["procedure_type"] = rec.procedure_type;
        obj["techniques"] = rec.techniques;
        obj["indication"] = rec.indication;
        obj["findings"] = rec.findings;
        obj["impression"] = rec.impression;
        out << obj.dump() << "\n";
    }
    if (!out) {
        throw std::runtime_error("record file: write failed for " + path);
    }
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (c >= 'A' && c <= 'Z') {
            current.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            current.push_back(static_cast<char>(c));
        } else {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

Vocab::Vocab() {
    id_to_token_ = {"<pad>", "<bos>", "<eos>", "<unk>", "<ent>", "<fact>"};
    for (std::int32_t i = 0; i < reserved_count; ++i) {
        token_to_id_[id_to_token_[i]] = i;
    }
}

std::int32_t Vocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? unk_id : it->second;
}

const std::string& Vocab::token_of(std::int32_t id) const {
    if (id < 0 || id >= size()) {
        throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::int32_t Vocab::add_token(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) {
        return it->second;
    }
    const std::int32_t id = size();
    id_to_token_.push_back(token);
    token_to_id_[token] = id;
    return id;
}

TokenIds Vocab::encode(std::string_view text, bool add_bos_eos) const {
    TokenIds ids;
    if (add_bos_eos) {
        ids.push_back(bos_id);
    }
    for (const auto& tok : tokenize(text)) {
        ids.push_back(id_of(tok));
    }
    if (add_bos_eos) {
        ids.push_back(eos_id);
    }
    return ids;
}

std::vector<std::string> Vocab::decode(const TokenIds& ids) const {
    std::vector<std::string> tokens;
    for (std::int32_t id : ids) {
        if (is_reserved(id)) {
            continue;
        }
        tokens.push_back(token_of(id));
    }
    return tokens;
}

std::uint64_t Vocab::content_hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& tok : id_to_token_) {
        h = fnv1a64(tok, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("vocab file: cannot write " + path);
    }
    for (const auto& tok : id_to_token_) {
        out << tok << "\n";
    }
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("vocab file: cannot open " + path);
    }
    Vocab vocab;
    std::string line;
    std::int32_t id = 0;
    while (std::getline(in, line)) {
        if (id < reserved_count) {
            if (line != vocab.id_to_token_[static_cast<std::size_t>(id)]) {
                throw std::runtime_error("vocab file: line " + std::to_string(id) +
                                         " must be reserved token '" +
                                         vocab.id_to_token_[static_cast<std::size_t>(id)] + "'");
            }
        } else {
            if (line.empty()) {
                throw std::runtime_error("vocab file: empty token at line " + std::to_string(id));
            }
            if (vocab.token_to_id_.count(line)) {
                throw std::runtime_error("vocab file: duplicate token '" + line + "'");
            }
            vocab.add_token(line);
        }
        ++id;
    }
    if (id < reserved_count) {
        throw std::runtime_error("vocab file: missing reserved tokens in " + path);
    }
    return vocab;
}

Vocab build_vocab(const std::vector<ClinicalRecord>& records, int min_freq) {
    if (records.empty()) {
        throw std::invalid_argument("build_vocab: record list is empty");
    }
    if (min_freq < 1) {
        throw std::invalid_argument("build_vocab: min_freq must be >= 1");
    }

    std::unordered_map<std::string, std::int64_t> freq;
    for (const auto& rec : records) {
        for (const auto& tok : tokenize(rec.findings)) {
            ++freq[tok];
        }
        for (const auto& tok : tokenize(rec.impression)) {
            ++freq[tok];
        }
    }

    std::vector<std::pair<std::string, std::int64_t>> entries;
    entries.reserve(freq.size());
    for (auto& kv : freq) {
        if (kv.second >= min_freq) {
            entries.emplace_back(kv.first, kv.second);
        }
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab vocab;
    for (const auto& [token, count] : entries) {
        (void)count;
        vocab.add_token(token);
    }
    return vocab;
}

CorpusSplit split_corpus(const std::vector<ClinicalRecord>& records, int train_n, int val_n,
                         int test_n, std::uint64_t seed) {
    if (train_n < 0 || val_n < 0 || test_n < 0) {
        throw std::invalid_argument("split_corpus: negative split size");
    }
    const std::int64_t want =
        static_cast<std::int64_t>(train_n) + val_n + test_n;
    if (want > static_cast<std::int64_t>(records.size())) {
        throw std::invalid_argument("split_corpus: requested " + std::to_string(want) +
                                    " records but corpus has " + std::to_string(records.size()));
    }

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::mt19937_64 rng(seed);
    seeded_shuffle(order, rng);

    CorpusSplit split;
    split.train.reserve(static_cast<std::size_t>(train_n));
    split.validation.reserve(static_cast<std::size_t>(val_n));
    split.test.reserve(static_cast<std::size_t>(test_n));
    std::size_t pos = 0;
    for (int i = 0; i < train_n; ++i) split.train.push_back(records[order[pos++]]);
    for (int i = 0; i < val_n; ++i) split.validation.push_back(records[order[pos++]]);
    for (int i = 0; i < test_n; ++i) split.test.push_back(records[order[pos++]]);
    return split;
}

}  // namespace fsum
