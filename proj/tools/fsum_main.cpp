#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsum/config.hpp"
#include "fsum/pipeline.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::int64_t seed = -1;
};

fsum::RunConfig resolve_config(const GlobalArgs& args) {
    fsum::RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = fsum::load_run_config(args.config_path);
    }
    for (const std::string& assignment : args.overrides) {
        fsum::apply_override(cfg, assignment);
    }
    if (args.seed >= 0) {
        fsum::apply_master_seed(cfg, static_cast<std::uint64_t>(args.seed));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"findings-to-impression summarization toolkit"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "run configuration file (INI)");
    app.add_option("--set", args.overrides, "override a config value, section.key=value")
        ->take_all();
    app.add_option("--seed", args.seed, "master seed overriding corpus/model/train/synth seeds");

    auto* build_kb = app.add_subcommand("build-kb", "build and persist the KB inverted index");
    std::string kb_override;
    build_kb->add_option("--kb", kb_override, "KB JSONL path (defaults to paths.kb)");

    app.add_subcommand("prepare", "split the corpus and materialize training triples");
    app.add_subcommand("train", "train the configured run and write checkpoint + history");
    app.add_subcommand("tune", "search the loss-weight grid with short training runs");

    auto* evaluate = app.add_subcommand("evaluate", "score the test split with a checkpoint");
    std::string ckpt_path;
    evaluate->add_option("--checkpoint", ckpt_path, "checkpoint file (defaults to out_dir/model.ckpt)");

    auto* summarize = app.add_subcommand("summarize", "decode an impression for a findings text");
    std::string summarize_ckpt;
    std::string findings_text;
    summarize->add_option("--checkpoint", summarize_ckpt,
                          "checkpoint file (defaults to out_dir/model.ckpt)");
    summarize->add_option("findings", findings_text, "findings text to summarize")->required();

    app.add_subcommand("synth", "write a synthetic corpus and knowledge base");

    CLI11_PARSE(app, argc, argv);

    fsum::RunConfig cfg;
    try {
        cfg = resolve_config(args);
        if (!kb_override.empty()) {
            cfg.kb_path = kb_override;
        }
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 1;
    }

    if (app.got_subcommand("build-kb")) return fsum::cmd_build_kb(cfg, std::cout, std::cerr);
    if (app.got_subcommand("prepare")) return fsum::cmd_prepare(cfg, std::cout, std::cerr);
    if (app.got_subcommand("train")) return fsum::cmd_train(cfg, std::cout, std::cerr);
    if (app.got_subcommand("tune")) return fsum::cmd_tune(cfg, std::cout, std::cerr);
    if (app.got_subcommand("evaluate")) return fsum::cmd_evaluate(cfg, ckpt_path, std::cout, std::cerr);
    if (app.got_subcommand("summarize")) {
        return fsum::cmd_summarize(cfg, summarize_ckpt, findings_text, std::cout, std::cerr);
    }
    if (app.got_subcommand("synth")) return fsum::cmd_synth(cfg, std::cout, std::cerr);

    std::cerr << "no subcommand selected\n";
    return 1;
}
