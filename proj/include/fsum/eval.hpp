#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fsum/corpus.hpp"
#include "fsum/ner.hpp"
#include "fsum/trainer.hpp"

namespace fsum {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct FactualAccuracy {
    double precision_target = 0.0;
    double recall_target = 0.0;
    double f1_target = 0.0;
};

// Clipped n-gram overlap (multiset intersection). An empty n-gram set on
// either side makes that side's ratio 0; both empty scores (1, 1, 1).
RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Longest-common-subsequence variant with the same empty-side conventions.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

// Entity-set overlap between the two texts: distinct normalized surface
// forms from gazetteer extraction, precision over the candidate set and
// recall over the reference set; both sets empty scores (1, 1, 1).
FactualAccuracy entity_factual_accuracy(std::string_view cand_text, std::string_view ref_text,
                                        const Gazetteer& gaz);

struct EvalRow {
    std::string record_id;
    RougeScore r1, r2, rl;
    FactualAccuracy fa;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    EvalRow mean;  // record_id "MEAN"; arithmetic mean of every column
};

EvalRow mean_row(const std::vector<EvalRow>& rows);

// Findings encoded for the encoder: plain token ids truncated to max_len,
// with <unk> substituted when the text tokenizes to nothing. Shared by
// triple preparation and evaluation so both feed the model identically.
TokenIds encode_source_text(std::string_view text, const Vocab& vocab, int max_len);

// Greedy-decodes every test record's findings and scores the result against
// its impression. Fails fast when the vocabulary hash does not match the
// checkpoint.
EvalReport evaluate_corpus(const Checkpoint& ckpt, const std::vector<ClinicalRecord>& test_records,
                           const Gazetteer& gaz, const Vocab& vocab);

void write_report_csv(const EvalReport& report, const std::string& path);
void write_report_json(const EvalReport& report, const std::string& path);

}  // namespace fsum
