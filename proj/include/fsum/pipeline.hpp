#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fsum/config.hpp"
#include "fsum/corpus.hpp"
#include "fsum/eval.hpp"
#include "fsum/knowledge.hpp"
#include "fsum/model.hpp"
#include "fsum/ner.hpp"
#include "fsum/trainer.hpp"
#include "fsum/tuner.hpp"

namespace fsum {

// Applies the configuration mask: gen_only zeroes the knowledge and entity
// weights, dual_moo zeroes the knowledge weight.
LambdaTriple masked_lambdas(const std::string& configuration, const LambdaTriple& base);
LambdaGrid grid_for_configuration(const std::string& configuration);

ModelConfig model_config_from(const RunConfig& cfg, const Vocab& vocab);

// Framed sequences longer than max_tokens are cut to max_tokens-1 ids and
// re-terminated with EOS.
TokenIds truncate_framed(TokenIds ids, int max_tokens);

// All six sequences for one record: findings->impression, findings entity
// chain->impression entity chain, findings facts->impression facts.
TrainingTriple build_training_triple(const ClinicalRecord& rec, const Vocab& vocab,
                                     const Gazetteer& gaz, const InvertedIndex& index,
                                     const std::vector<FactRecord>& kb,
                                     const RetrieverConfig& retriever, int max_src, int max_tgt);

// JSONL of token-id arrays, one record per line.
void write_triples(const std::vector<TrainingTriple>& triples, const std::string& path);
std::vector<TrainingTriple> read_triples(const std::string& path);

struct ConfigurationResult {
    std::string name;
    LambdaTriple lambdas;  // tuned, with the configuration mask applied
    TuneResult tune;
    TrainResult train_result;
    EvalReport report;
};

// Tunes the free loss weights with short training runs, retrains at the
// best point with the full epoch budget, and evaluates on the test split.
ConfigurationResult run_configuration(const std::string& config_name, const RunConfig& cfg,
                                      const std::vector<TrainingTriple>& train_triples,
                                      const std::vector<TrainingTriple>& val_triples,
                                      const std::vector<ClinicalRecord>& test_records,
                                      const Vocab& vocab, const Gazetteer& gaz);

// CLI entry points; each returns a process exit status and reports errors
// on err prefixed with the failing stage.
int cmd_build_kb(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_prepare(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_tune(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path, std::ostream& out,
                 std::ostream& err);
int cmd_summarize(const RunConfig& cfg, const std::string& checkpoint_path,
                  const std::string& findings_text, std::ostream& out, std::ostream& err);
int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace fsum
