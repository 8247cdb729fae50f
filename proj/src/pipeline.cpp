#include "fsum/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <stdexcept>

#include "fsum/synth.hpp"
#include "json.hpp"

namespace fsum {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

TokenIds ids_from_json(const json& arr, const char* field) {
    if (!arr.is_array()) {
        throw std::runtime_error(std::string("triple file: field '") + field + "' is not an array");
    }
    TokenIds ids;
    ids.reserve(arr.size());
    for (const auto& v : arr) {
        ids.push_back(v.get<std::int32_t>());
    }
    return ids;
}

json lambdas_to_json(const LambdaTriple& l, double loss) {
    return json{{"lambda_gen", l.lambda_gen},
                {"lambda_k", l.lambda_k},
                {"lambda_e", l.lambda_e},
                {"loss", loss}};
}

// Runs body and maps any exception to a stage-prefixed diagnostic.
int guarded(const char* command, const char* stage_name, std::ostream& err,
            const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const std::exception& e) {
        err << command << ": " << stage_name << ": " << e.what() << "\n";
        return 1;
    }
}

struct PreparedInputs {
    Vocab vocab;
    std::vector<TrainingTriple> train;
    std::vector<TrainingTriple> validation;
};

PreparedInputs load_prepared_inputs(const RunConfig& cfg) {
    PreparedInputs in;
    in.vocab = Vocab::load(out_path(cfg, "vocab.txt"));
    in.train = read_triples(out_path(cfg, "train.triples.jsonl"));
    in.validation = read_triples(out_path(cfg, "validation.triples.jsonl"));
    if (in.train.empty() || in.validation.empty()) {
        throw std::runtime_error("prepared triples are empty; run `prepare` first");
    }
    return in;
}

}  // namespace

LambdaTriple masked_lambdas(const std::string& configuration, const LambdaTriple& base) {
    if (configuration == "gen_only") {
        return LambdaTriple{base.lambda_gen, 0.0, 0.0};
    }
    if (configuration == "dual_moo") {
        return LambdaTriple{base.lambda_gen, 0.0, base.lambda_e};
    }
    if (configuration == "triple_moo") {
        return base;
    }
    throw std::invalid_argument("unknown configuration '" + configuration + "'");
}

LambdaGrid grid_for_configuration(const std::string& configuration) {
    if (configuration == "gen_only") return LambdaGrid::gen_only();
    if (configuration == "dual_moo") return LambdaGrid::dual_moo();
    if (configuration == "triple_moo") return LambdaGrid::triple_moo();
    throw std::invalid_argument("unknown configuration '" + configuration + "'");
}

ModelConfig model_config_from(const RunConfig& cfg, const Vocab& vocab) {
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.embed_dim = cfg.embed_dim;
    mc.hidden_dim = cfg.hidden_dim;
    mc.num_heads = cfg.num_heads;
    mc.max_src_len = cfg.max_src_tokens;
    mc.max_tgt_len = cfg.max_tgt_tokens;
    mc.seed = cfg.model_seed;
    return mc;
}

TokenIds truncate_framed(TokenIds ids, int max_tokens) {
    if (max_tokens < 2) {
        throw std::invalid_argument("truncate_framed: max_tokens must be >= 2");
    }
    if (static_cast<int>(ids.size()) > max_tokens) {
        ids.resize(static_cast<std::size_t>(max_tokens) - 1);
        ids.push_back(Vocab::eos_id);
    }
    return ids;
}

TrainingTriple build_training_triple(const ClinicalRecord& rec, const Vocab& vocab,
                                     const Gazetteer& gaz, const InvertedIndex& index,
                                     const std::vector<FactRecord>& kb,
                                     const RetrieverConfig& retriever, int max_src, int max_tgt) {
    TrainingTriple t;
    t.record_id = rec.record_id;

    t.gen.src = encode_source_text(rec.findings, vocab, max_src);
    t.gen.tgt = truncate_framed(vocab.encode(rec.impression, true), max_tgt);

    const EntityChain findings_chain = extract_entities(rec.findings, gaz);
    const EntityChain impression_chain = extract_entities(rec.impression, gaz);
    t.ent.src = truncate_framed(linearize_entity_chain(findings_chain, vocab), max_src);
    t.ent.tgt = truncate_framed(linearize_entity_chain(impression_chain, vocab), max_tgt);

    t.know.src =
        linearize_facts(retrieve_for_chain(index, kb, findings_chain, retriever), vocab, max_src);
    t.know.tgt =
        linearize_facts(retrieve_for_chain(index, kb, impression_chain, retriever), vocab, max_tgt);
    return t;
}

void write_triples(const std::vector<TrainingTriple>& triples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("triple file: cannot write " + path);
    }
    for (const TrainingTriple& t : triples) {
        json line{{"record_id", t.record_id}, {"gen_src", t.gen.src},   {"gen_tgt", t.gen.tgt},
                  {"ent_src", t.ent.src},     {"ent_tgt", t.ent.tgt},   {"know_src", t.know.src},
                  {"know_tgt", t.know.tgt}};
        out << line.dump() << "\n";
    }
}

std::vector<TrainingTriple> read_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("triple file: cannot open " + path);
    }
    std::vector<TrainingTriple> triples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("triple file: malformed JSON at line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
        TrainingTriple t;
        t.record_id = obj.at("record_id").get<std::string>();
        t.gen.src = ids_from_json(obj.at("gen_src"), "gen_src");
        t.gen.tgt = ids_from_json(obj.at("gen_tgt"), "gen_tgt");
        t.ent.src = ids_from_json(obj.at("ent_src"), "ent_src");
        t.ent.tgt = ids_from_json(obj.at("ent_tgt"), "ent_tgt");
        t.know.src = ids_from_json(obj.at("know_src"), "know_src");
        t.know.tgt = ids_from_json(obj.at("know_tgt"), "know_tgt");
        triples.push_back(std::move(t));
    }
    return triples;
}

ConfigurationResult run_configuration(const std::string& config_name, const RunConfig& cfg,
                                      const std::vector<TrainingTriple>& train_triples,
                                      const std::vector<TrainingTriple>& val_triples,
                                      const std::vector<ClinicalRecord>& test_records,
                                      const Vocab& vocab, const Gazetteer& gaz) {
    ConfigurationResult result;
    result.name = config_name;

    const ModelConfig model_cfg = model_config_from(cfg, vocab);
    const LambdaGrid grid = grid_for_configuration(config_name);

    TrainConfig tune_cfg = cfg.train;
    tune_cfg.epochs = std::max(1, cfg.tune_epochs);
    const auto objective = [&](const LambdaTriple& lambdas) {
        return train(model_cfg, tune_cfg, lambdas, train_triples, val_triples)
            .checkpoint.best_validation_loss;
    };
    result.tune = tune_lambdas(objective, grid, cfg.tune_budget, cfg.train.seed);
    result.lambdas = result.tune.best;

    result.train_result = train(model_cfg, cfg.train, result.lambdas, train_triples, val_triples,
                                vocab.content_hash());
    result.report = evaluate_corpus(result.train_result.checkpoint, test_records, gaz, vocab);
    return result;
}

int cmd_build_kb(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded("build-kb", "index", err, [&] {
        const std::vector<FactRecord> kb = load_kb(cfg.kb_path);
        const InvertedIndex index = build_index(kb);
        fs::create_directories(cfg.out_dir);
        save_index(index, out_path(cfg, "kb.idx"));
        std::int64_t tokens = 0;
        for (std::int32_t len : index.doc_lengths) tokens += len;
        out << "docs=" << index.doc_count << " tokens=" << tokens << "\n";
    });
}

int cmd_prepare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    CorpusLoadResult corpus;
    if (int rc = guarded("prepare", "load-records", err,
                         [&] { corpus = load_records(cfg.records_path); }))
        return rc;

    CorpusSplit split;
    if (int rc = guarded("prepare", "split", err, [&] {
            split = split_corpus(corpus.records, cfg.train_n, cfg.val_n, cfg.test_n, cfg.corpus_seed);
        }))
        return rc;

    Vocab vocab;
    if (int rc = guarded("prepare", "vocab", err,
                         [&] { vocab = build_vocab(split.train, cfg.min_freq); }))
        return rc;

    std::vector<FactRecord> kb;
    Gazetteer gaz;
    InvertedIndex index;
    if (int rc = guarded("prepare", "knowledge-base", err, [&] {
            kb = load_kb(cfg.kb_path);
            gaz = build_gazetteer(kb);
            index = build_index(kb);
        }))
        return rc;

    return guarded("prepare", "triples", err, [&] {
        fs::create_directories(cfg.out_dir);
        for (const std::string& warning : gaz.warnings) {
            err << "prepare: gazetteer: " << warning << "\n";
        }
        auto emit = [&](const std::vector<ClinicalRecord>& records, const std::string& name) {
            std::vector<TrainingTriple> triples;
            triples.reserve(records.size());
            for (const ClinicalRecord& rec : records) {
                triples.push_back(build_training_triple(rec, vocab, gaz, index, kb, cfg.retriever,
                                                        cfg.max_src_tokens, cfg.max_tgt_tokens));
            }
            write_triples(triples, out_path(cfg, name + ".triples.jsonl"));
            return triples.size();
        };
        const std::size_t n_train = emit(split.train, "train");
        const std::size_t n_val = emit(split.validation, "validation");
        const std::size_t n_test = emit(split.test, "test");
        vocab.save(out_path(cfg, "vocab.txt"));
        out << "train=" << n_train << " validation=" << n_val << " test=" << n_test
            << " filtered=" << corpus.filtered_count << " vocab=" << vocab.size() << "\n";
    });
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded("train", "train", err, [&] {
        cfg.validate();
        const PreparedInputs in = load_prepared_inputs(cfg);
        const ModelConfig model_cfg = model_config_from(cfg, in.vocab);
        const LambdaTriple lambdas = masked_lambdas(cfg.configuration, cfg.lambdas);
        const TrainResult result = train(model_cfg, cfg.train, lambdas, in.train, in.validation,
                                         in.vocab.content_hash(), out_path(cfg, "model.ckpt"));
        write_history_jsonl(result.history, out_path(cfg, "history.jsonl"));
        out << "configuration=" << cfg.configuration << " epochs=" << result.history.size()
            << " best_epoch=" << result.checkpoint.epoch_of_best
            << " best_validation_loss=" << result.checkpoint.best_validation_loss << "\n";
    });
}

int cmd_tune(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded("tune", "tune", err, [&] {
        cfg.validate();
        const PreparedInputs in = load_prepared_inputs(cfg);
        const ModelConfig model_cfg = model_config_from(cfg, in.vocab);

        TrainConfig tune_cfg = cfg.train;
        tune_cfg.epochs = std::max(1, cfg.tune_epochs);
        const auto objective = [&](const LambdaTriple& lambdas) {
            return train(model_cfg, tune_cfg, lambdas, in.train, in.validation)
                .checkpoint.best_validation_loss;
        };
        const TuneResult result = tune_lambdas(objective, grid_for_configuration(cfg.configuration),
                                               cfg.tune_budget, cfg.train.seed);

        json doc;
        doc["configuration"] = cfg.configuration;
        doc["evaluation_count"] = result.evaluation_count;
        doc["best"] = lambdas_to_json(result.best, result.best_loss);
        doc["evaluations"] = json::array();
        for (const TuneEvaluation& e : result.evaluations) {
            doc["evaluations"].push_back(lambdas_to_json(e.lambdas, e.loss));
        }
        fs::create_directories(cfg.out_dir);
        std::ofstream f(out_path(cfg, "tune_result.json"), std::ios::binary);
        if (!f) {
            throw std::runtime_error("cannot write " + out_path(cfg, "tune_result.json"));
        }
        f << doc.dump(2) << "\n";
        out << "evaluations=" << result.evaluation_count << " best_lambda_gen="
            << result.best.lambda_gen << " best_lambda_k=" << result.best.lambda_k
            << " best_lambda_e=" << result.best.lambda_e << " best_loss=" << result.best_loss
            << "\n";
    });
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path, std::ostream& out,
                 std::ostream& err) {
    return guarded("evaluate", "evaluate", err, [&] {
        const Checkpoint ckpt = load_checkpoint(
            checkpoint_path.empty() ? out_path(cfg, "model.ckpt") : checkpoint_path);
        const Vocab vocab = Vocab::load(out_path(cfg, "vocab.txt"));
        const CorpusLoadResult corpus = load_records(cfg.records_path);
        const CorpusSplit split =
            split_corpus(corpus.records, cfg.train_n, cfg.val_n, cfg.test_n, cfg.corpus_seed);
        const std::vector<FactRecord> kb = load_kb(cfg.kb_path);
        const Gazetteer gaz = build_gazetteer(kb);

        const EvalReport report = evaluate_corpus(ckpt, split.test, gaz, vocab);
        fs::create_directories(cfg.out_dir);
        write_report_csv(report, out_path(cfg, "eval.csv"));
        write_report_json(report, out_path(cfg, "eval.json"));
        out << "rows=" << report.rows.size() << " r1_f=" << report.mean.r1.f1
            << " r2_f=" << report.mean.r2.f1 << " rl_f=" << report.mean.rl.f1
            << " precision_target=" << report.mean.fa.precision_target
            << " recall_target=" << report.mean.fa.recall_target
            << " f1_target=" << report.mean.fa.f1_target << "\n";
    });
}

int cmd_summarize(const RunConfig& cfg, const std::string& checkpoint_path,
                  const std::string& findings_text, std::ostream& out, std::ostream& err) {
    return guarded("summarize", "summarize", err, [&] {
        const Checkpoint ckpt = load_checkpoint(
            checkpoint_path.empty() ? out_path(cfg, "model.ckpt") : checkpoint_path);
        const Vocab vocab = Vocab::load(out_path(cfg, "vocab.txt"));
        if (vocab.content_hash() != ckpt.vocab_hash) {
            throw std::runtime_error("vocabulary hash does not match the checkpoint");
        }
        const TokenIds src = encode_source_text(findings_text, vocab, ckpt.model_cfg.max_src_len);
        const TokenIds decoded = greedy_decode(ckpt.params, src, ckpt.model_cfg.max_tgt_len - 1);
        const std::vector<std::string> tokens = vocab.decode(decoded);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) out << ' ';
            out << tokens[i];
        }
        out << "\n";
    });
}

int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded("synth", "synth", err, [&] {
        if (cfg.records_path.empty() || cfg.kb_path.empty()) {
            throw std::runtime_error("paths.records and paths.kb must be set");
        }
        const std::vector<FactRecord> kb = generate_synthetic_kb(cfg.synth_concepts, cfg.synth_seed);
        const std::vector<ClinicalRecord> records =
            generate_synthetic_corpus(cfg.synth_records, kb, cfg.synth_density, cfg.synth_seed);
        for (const std::string& path : {cfg.records_path, cfg.kb_path}) {
            const fs::path parent = fs::path(path).parent_path();
            if (!parent.empty()) {
                fs::create_directories(parent);
            }
        }
        write_kb(kb, cfg.kb_path);
        write_records(records, cfg.records_path);
        out << "records=" << records.size() << " concepts=" << kb.size() << "\n";
    });
}

}  // namespace fsum
