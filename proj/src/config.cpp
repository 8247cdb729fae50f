#include "fsum/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

#include "fsum/util.hpp"

namespace fsum {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t pos = 0;
            out = static_cast<T>(std::stod(value, &pos));
            if (pos != value.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key '" + key + "' has non-numeric value '" + value + "'");
        }
    } else {
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw std::invalid_argument("config: key '" + key + "' has non-integer value '" + value + "'");
        }
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"paths.records", [](RunConfig& c, const std::string&, const std::string& v) { c.records_path = v; }},
        {"paths.kb", [](RunConfig& c, const std::string&, const std::string& v) { c.kb_path = v; }},
        {"paths.out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},

        {"corpus.train_n", [](RunConfig& c, const std::string& k, const std::string& v) { c.train_n = parse_number<int>(k, v); }},
        {"corpus.val_n", [](RunConfig& c, const std::string& k, const std::string& v) { c.val_n = parse_number<int>(k, v); }},
        {"corpus.test_n", [](RunConfig& c, const std::string& k, const std::string& v) { c.test_n = parse_number<int>(k, v); }},
        {"corpus.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.corpus_seed = parse_number<std::uint64_t>(k, v); }},
        {"corpus.max_src_tokens", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_src_tokens = parse_number<int>(k, v); }},
        {"corpus.max_tgt_tokens", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_tgt_tokens = parse_number<int>(k, v); }},
        {"corpus.min_freq", [](RunConfig& c, const std::string& k, const std::string& v) { c.min_freq = parse_number<int>(k, v); }},

        {"retriever.k", [](RunConfig& c, const std::string& k, const std::string& v) { c.retriever.k = parse_number<int>(k, v); }},
        {"retriever.bm25_k1", [](RunConfig& c, const std::string& k, const std::string& v) { c.retriever.bm25_k1 = parse_number<double>(k, v); }},
        {"retriever.bm25_b", [](RunConfig& c, const std::string& k, const std::string& v) { c.retriever.bm25_b = parse_number<double>(k, v); }},

        {"model.embed_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.embed_dim = parse_number<int>(k, v); }},
        {"model.hidden_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.hidden_dim = parse_number<int>(k, v); }},
        {"model.num_heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.num_heads = parse_number<int>(k, v); }},
        {"model.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.model_seed = parse_number<std::uint64_t>(k, v); }},

        {"train.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = parse_number<int>(k, v); }},
        {"train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = parse_number<int>(k, v); }},
        {"train.learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = parse_number<double>(k, v); }},
        {"train.adam_beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_beta1 = parse_number<double>(k, v); }},
        {"train.adam_beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_beta2 = parse_number<double>(k, v); }},
        {"train.adam_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_eps = parse_number<double>(k, v); }},
        {"train.grad_clip_norm", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.grad_clip_norm = parse_number<double>(k, v); }},
        {"train.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(k, v); }},
        {"train.target_train_loss", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.target_train_loss = parse_number<double>(k, v); }},

        {"run.configuration", [](RunConfig& c, const std::string&, const std::string& v) { c.configuration = v; }},
        {"run.lambda_gen", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambdas.lambda_gen = parse_number<double>(k, v); }},
        {"run.lambda_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambdas.lambda_k = parse_number<double>(k, v); }},
        {"run.lambda_e", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambdas.lambda_e = parse_number<double>(k, v); }},
        {"run.tune_budget", [](RunConfig& c, const std::string& k, const std::string& v) { c.tune_budget = parse_number<int>(k, v); }},
        {"run.tune_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.tune_epochs = parse_number<int>(k, v); }},

        {"synth.n_records", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_records = parse_number<int>(k, v); }},
        {"synth.n_concepts", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_concepts = parse_number<int>(k, v); }},
        {"synth.entity_density", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_density = parse_number<double>(k, v); }},
        {"synth.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth_seed = parse_number<std::uint64_t>(k, v); }},
    };
    return table;
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    it->second(cfg, key, value);
}

}  // namespace

void RunConfig::validate() const {
    if (configuration != "gen_only" && configuration != "dual_moo" && configuration != "triple_moo") {
        throw std::invalid_argument("config: run.configuration must be gen_only, dual_moo, or triple_moo");
    }
    if (train_n < 0 || val_n < 0 || test_n < 0) {
        throw std::invalid_argument("config: split sizes must be non-negative");
    }
    if (max_src_tokens < 1 || max_tgt_tokens < 2) {
        throw std::invalid_argument("config: token caps too small");
    }
    if (retriever.k < 1) {
        throw std::invalid_argument("config: retriever.k must be >= 1");
    }
    lambdas.validate();
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("config: cannot open " + path);
    }
    RunConfig cfg;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim_copy(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') {
            continue;
        }
        if (s.front() == '[' && s.back() == ']') {
            section = trim_copy(s.substr(1, s.size() - 2));
            if (section.empty()) {
                throw std::runtime_error("config: empty section name at line " + std::to_string(line_no));
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: expected key = value at line " + std::to_string(line_no));
        }
        const std::string key = trim_copy(s.substr(0, eq));
        const std::string value = trim_copy(s.substr(eq + 1));
        if (section.empty()) {
            throw std::runtime_error("config: key '" + key + "' outside any [section] at line " +
                                     std::to_string(line_no));
        }
        assign(cfg, section + "." + key, value);
    }
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw std::invalid_argument("--set expects section.key=value, got '" + assignment + "'");
    }
    assign(cfg, trim_copy(assignment.substr(0, eq)), trim_copy(assignment.substr(eq + 1)));
}

void apply_master_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.corpus_seed = seed;
    cfg.model_seed = seed;
    cfg.train.seed = seed;
    cfg.synth_seed = seed;
}

}  // namespace fsum
