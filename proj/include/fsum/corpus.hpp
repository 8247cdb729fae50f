#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fsum {

using TokenIds = std::vector<std::int32_t>;

// One findings->impression note. Findings and impression are guaranteed
// non-empty (after trimming) for every record produced by load_records;
// the other fields are metadata and may be empty.
struct ClinicalRecord {
    std::string record_id;
    std::string procedure_type;
    std::string techniques;
    std::string indication;
    std::string findings;
    std::string impression;
};

struct CorpusLoadResult {
    std::vector<ClinicalRecord> records;
    int filtered_count = 0;  // lines dropped because findings or impression was blank
};

// Reads a JSONL record file, dropping records with a blank findings or
// impression. File order is preserved. Throws on I/O failures, malformed
// JSON (naming the line), missing/ill-typed required fields, and duplicate
// record ids. Records without a record_id get one derived from their line
// number.
CorpusLoadResult load_records(const std::string& path);

void write_records(const std::vector<ClinicalRecord>& records, const std::string& path);

// Lowercases and splits into maximal runs of ASCII letters and digits;
// everything else separates tokens. "EF 45-50%" -> {"ef","45","50"}.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
public:
    static constexpr std::int32_t pad_id = 0;
    static constexpr std::int32_t bos_id = 1;
    static constexpr std::int32_t eos_id = 2;
    static constexpr std::int32_t unk_id = 3;
    static constexpr std::int32_t ent_id = 4;
    static constexpr std::int32_t fact_id = 5;
    static constexpr std::int32_t reserved_count = 6;

    Vocab();

    std::int32_t size() const { return static_cast<std::int32_t>(id_to_token_.size()); }
    std::int32_t id_of(const std::string& token) const;  // unk_id when absent
    const std::string& token_of(std::int32_t id) const;
    bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }
    static bool is_reserved(std::int32_t id) { return id >= 0 && id < reserved_count; }

    // Appends a non-reserved token; returns its id (existing id if present).
    std::int32_t add_token(const std::string& token);

    TokenIds encode(std::string_view text, bool add_bos_eos) const;
    // Maps ids back to token strings, skipping all reserved ids.
    std::vector<std::string> decode(const TokenIds& ids) const;

    // FNV-1a over the token list; checkpoints store this to detect
    // vocabulary mismatches at evaluation time.
    std::uint64_t content_hash() const;

    // One token per line, line number == id.
    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::int32_t> token_to_id_;
};

// Vocabulary over findings+impression tokens of the given records (train
// split only, by convention). Tokens with frequency >= min_freq enter the
// vocab, ordered by descending frequency then lexicographically.
Vocab build_vocab(const std::vector<ClinicalRecord>& records, int min_freq);

struct CorpusSplit {
    std::vector<ClinicalRecord> train;
    std::vector<ClinicalRecord> validation;
    std::vector<ClinicalRecord> test;
};

// Seeded shuffle of record indices, then the first train_n go to train,
// the next val_n to validation, the next test_n to test.
CorpusSplit split_corpus(const std::vector<ClinicalRecord>& records, int train_n, int val_n,
                         int test_n, std::uint64_t seed);

}  // namespace fsum
