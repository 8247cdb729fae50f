#pragma once

#include <cstdint>
#include <string>

#include "fsum/knowledge.hpp"
#include "fsum/trainer.hpp"

namespace fsum {

// Everything a pipeline run needs, loaded from one INI-style file
// ([section] headers, key = value lines, '#' comments). Any scalar can be
// overridden on the command line with --set section.key=value.
struct RunConfig {
    // [paths]
    std::string records_path;
    std::string kb_path;
    std::string out_dir = "out";

    // [corpus]
    int train_n = 0;
    int val_n = 0;
    int test_n = 0;
    std::uint64_t corpus_seed = 13;
    int max_src_tokens = 256;
    int max_tgt_tokens = 64;
    int min_freq = 1;

    // [retriever]
    RetrieverConfig retriever;

    // [model]
    int embed_dim = 32;
    int hidden_dim = 64;
    int num_heads = 4;
    std::uint64_t model_seed = 7;

    // [train]
    TrainConfig train;

    // [run]
    std::string configuration = "triple_moo";  // gen_only | dual_moo | triple_moo
    LambdaTriple lambdas{0.7, 0.1, 0.4};
    int tune_budget = 10;
    int tune_epochs = 2;

    // [synth]
    int synth_records = 200;
    int synth_concepts = 60;
    double synth_density = 0.8;
    std::uint64_t synth_seed = 5;

    void validate() const;  // checks the configuration name and numeric sanity
};

RunConfig load_run_config(const std::string& path);

// Applies one "section.key=value" assignment; throws on unknown keys or
// unparsable values.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Convenience master seed: sets the corpus, model, train, and synth seeds.
void apply_master_seed(RunConfig& cfg, std::uint64_t seed);

}  // namespace fsum
