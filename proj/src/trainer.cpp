#include "fsum/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "fsum/util.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint and index files are little-endian; add byte swapping for this target");

namespace fsum {

namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[8] = {'F', 'S', 'U', 'M', 'C', 'K', 'P', 'T'};

std::vector<Matrix*> tensor_list(ModelParams& p) {
    std::vector<Matrix*> out;
    for_each_tensor(p, [&](const std::string&, Matrix& t) { out.push_back(&t); });
    return out;
}

std::vector<const Matrix*> tensor_list(const ModelParams& p) {
    std::vector<const Matrix*> out;
    for_each_tensor(p, [&](const std::string&, const Matrix& t) { out.push_back(&t); });
    return out;
}

void round_to_single_precision(ModelParams& p) {
    for_each_tensor(p, [](const std::string&, Matrix& t) {
        for (double& v : t.data) {
            v = static_cast<double>(static_cast<float>(v));
        }
    });
}

LossBreakdown mean_breakdown(const LossBreakdown& sum, int count) {
    const double inv = 1.0 / static_cast<double>(count);
    return LossBreakdown{sum.l_gen * inv, sum.l_k * inv, sum.l_e * inv, sum.l_total * inv};
}

json breakdown_to_json(const LossBreakdown& bd) {
    return json{{"l_gen", bd.l_gen}, {"l_k", bd.l_k}, {"l_e", bd.l_e}, {"l_total", bd.l_total}};
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train config: learning_rate must be >= 0");
    if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("train config: grad_clip_norm must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw std::invalid_argument("train config: adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw std::invalid_argument("train config: adam_eps must be > 0");
}

AdamState make_adam_state(const ModelParams& params) {
    return AdamState{zeros_like(params), zeros_like(params), 0};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg, std::int64_t step) {
    if (step < 1) {
        throw std::invalid_argument("adam_step: step is 1-based");
    }
    auto ps = tensor_list(params);
    auto gs = tensor_list(grads);
    auto ms = tensor_list(state.m);
    auto vs = tensor_list(state.v);
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t t = 0; t < ps.size(); ++t) {
        if (!ps[t]->same_shape(*gs[t]) || !ps[t]->same_shape(*ms[t]) || !ps[t]->same_shape(*vs[t])) {
            throw std::invalid_argument("adam_step: tensor shape mismatch");
        }
        double* p = ps[t]->data.data();
        const double* g = gs[t]->data.data();
        double* m = ms[t]->data.data();
        double* v = vs[t]->data.data();
        const std::size_t n = ps[t]->data.size();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
    state.step = step;
}

double clip_gradients(ModelParams& grads, double max_norm) {
    if (!(max_norm > 0.0)) {
        throw std::invalid_argument("clip_gradients: max_norm must be > 0");
    }
    double sq = 0.0;
    for_each_tensor(grads, [&](const std::string&, const Matrix& t) {
        for (double v : t.data) sq += v * v;
    });
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for_each_tensor(grads, [&](const std::string&, Matrix& t) {
            for (double& v : t.data) v *= scale;
        });
    }
    return norm;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json header;
    header["model_config"] = {{"vocab_size", ckpt.model_cfg.vocab_size},
                              {"embed_dim", ckpt.model_cfg.embed_dim},
                              {"hidden_dim", ckpt.model_cfg.hidden_dim},
                              {"num_heads", ckpt.model_cfg.num_heads},
                              {"max_src_len", ckpt.model_cfg.max_src_len},
                              {"max_tgt_len", ckpt.model_cfg.max_tgt_len},
                              {"seed", ckpt.model_cfg.seed}};
    header["lambdas"] = {{"lambda_gen", ckpt.lambdas.lambda_gen},
                         {"lambda_k", ckpt.lambdas.lambda_k},
                         {"lambda_e", ckpt.lambdas.lambda_e}};
    header["vocab_hash"] = ckpt.vocab_hash;
    header["best_validation_loss"] = ckpt.best_validation_loss;
    header["epoch_of_best"] = ckpt.epoch_of_best;

    json directory = json::array();
    std::uint64_t offset = 0;
    for_each_tensor(ckpt.params, [&](const std::string& name, const Matrix& t) {
        directory.push_back(json{{"name", name}, {"rows", t.rows}, {"cols", t.cols}, {"offset", offset}});
        offset += t.size() * sizeof(float);
    });
    header["tensors"] = directory;

    const std::string header_bytes = header.dump();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw std::runtime_error("checkpoint: cannot write " + tmp);
        }
        out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
        const std::uint32_t version = ckpt.format_version;
        out.write(reinterpret_cast<const char*>(&version), sizeof(version));
        const std::uint64_t header_len = header_bytes.size();
        out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
        out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
        std::vector<float> buf;
        for_each_tensor(ckpt.params, [&](const std::string&, const Matrix& t) {
            buf.resize(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) {
                buf[i] = static_cast<float>(t.data[i]);
            }
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(float)));
        });
        if (!out) {
            throw std::runtime_error("checkpoint: write failed for " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open " + path);
    }
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in) {
        throw std::runtime_error("checkpoint: truncated header in " + path);
    }
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: format version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in) {
        throw std::runtime_error("checkpoint: truncated header in " + path);
    }
    std::string header_bytes(header_len, '\0');
    in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        throw std::runtime_error("checkpoint: truncated header in " + path);
    }
    json header;
    try {
        header = json::parse(header_bytes);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("checkpoint: corrupt header in " + path + ": " + e.what());
    }

    Checkpoint ckpt;
    ckpt.format_version = version;
    const json& mc = header.at("model_config");
    ckpt.model_cfg.vocab_size = mc.at("vocab_size").get<std::int32_t>();
    ckpt.model_cfg.embed_dim = mc.at("embed_dim").get<int>();
    ckpt.model_cfg.hidden_dim = mc.at("hidden_dim").get<int>();
    ckpt.model_cfg.num_heads = mc.at("num_heads").get<int>();
    ckpt.model_cfg.max_src_len = mc.at("max_src_len").get<int>();
    ckpt.model_cfg.max_tgt_len = mc.at("max_tgt_len").get<int>();
    ckpt.model_cfg.seed = mc.at("seed").get<std::uint64_t>();
    const json& lj = header.at("lambdas");
    ckpt.lambdas.lambda_gen = lj.at("lambda_gen").get<double>();
    ckpt.lambdas.lambda_k = lj.at("lambda_k").get<double>();
    ckpt.lambdas.lambda_e = lj.at("lambda_e").get<double>();
    ckpt.vocab_hash = header.at("vocab_hash").get<std::uint64_t>();
    ckpt.best_validation_loss = header.at("best_validation_loss").get<double>();
    ckpt.epoch_of_best = header.at("epoch_of_best").get<int>();

    ckpt.params = zero_params(ckpt.model_cfg);
    const json& directory = header.at("tensors");
    std::size_t entry = 0;
    std::vector<float> buf;
    for_each_tensor(ckpt.params, [&](const std::string& name, Matrix& t) {
        if (entry >= directory.size()) {
            throw std::runtime_error("checkpoint: tensor directory too short in " + path);
        }
        const json& d = directory[entry++];
        if (d.at("name").get<std::string>() != name) {
            throw std::runtime_error("checkpoint: unexpected tensor '" +
                                     d.at("name").get<std::string>() + "' (wanted '" + name + "')");
        }
        if (d.at("rows").get<int>() != t.rows || d.at("cols").get<int>() != t.cols) {
            throw std::runtime_error("checkpoint: tensor '" + name +
                                     "' shape does not match the embedded model config");
        }
        buf.resize(t.size());
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) {
            throw std::runtime_error("checkpoint: truncated tensor payload for '" + name + "'");
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.data[i] = static_cast<double>(buf[i]);
        }
    });
    if (entry != directory.size()) {
        throw std::runtime_error("checkpoint: tensor directory has extra entries in " + path);
    }
    return ckpt;
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const LambdaTriple& lambdas, const std::vector<TrainingTriple>& train_triples,
                  const std::vector<TrainingTriple>& val_triples, std::uint64_t vocab_hash,
                  const std::string& checkpoint_path) {
    model_cfg.validate();
    train_cfg.validate();
    lambdas.validate();
    if (train_triples.empty()) {
        throw std::invalid_argument("train: training split is empty");
    }
    if (val_triples.empty()) {
        throw std::invalid_argument("train: validation split is empty");
    }

    ModelParams params = init_params(model_cfg);
    AdamState state = make_adam_state(params);
    ModelParams grads = zeros_like(params);

    TrainResult result;
    result.checkpoint.model_cfg = model_cfg;
    result.checkpoint.vocab_hash = vocab_hash;
    result.checkpoint.lambdas = lambdas;

    std::mt19937_64 shuffle_rng(train_cfg.seed);
    std::vector<std::size_t> order(train_triples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int n = static_cast<int>(train_triples.size());
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        seeded_shuffle(order, shuffle_rng);

        LossBreakdown train_sum;
        for (int start = 0, batch_index = 0; start < n; start += train_cfg.batch_size, ++batch_index) {
            const int count = std::min(train_cfg.batch_size, n - start);
            for_each_tensor(grads, [](const std::string&, Matrix& t) { t.fill(0.0); });
            LossBreakdown batch_sum;
            for (int b = 0; b < count; ++b) {
                const TrainingTriple& triple = train_triples[order[static_cast<std::size_t>(start + b)]];
                const LossBreakdown bd = backward(params, triple, lambdas, grads);
                batch_sum.l_gen += bd.l_gen;
                batch_sum.l_k += bd.l_k;
                batch_sum.l_e += bd.l_e;
                batch_sum.l_total += bd.l_total;
            }
            if (!std::isfinite(batch_sum.l_total)) {
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_index));
            }
            const double inv = 1.0 / static_cast<double>(count);
            for_each_tensor(grads, [&](const std::string&, Matrix& t) {
                for (double& v : t.data) v *= inv;
            });
            clip_gradients(grads, train_cfg.grad_clip_norm);
            adam_step(params, grads, state, train_cfg, state.step + 1);

            train_sum.l_gen += batch_sum.l_gen;
            train_sum.l_k += batch_sum.l_k;
            train_sum.l_e += batch_sum.l_e;
            train_sum.l_total += batch_sum.l_total;
        }
        const LossBreakdown train_mean = mean_breakdown(train_sum, n);

        LossBreakdown val_sum;
        for (const TrainingTriple& triple : val_triples) {
            const LossBreakdown bd = total_loss(params, triple, lambdas);
            val_sum.l_gen += bd.l_gen;
            val_sum.l_k += bd.l_k;
            val_sum.l_e += bd.l_e;
            val_sum.l_total += bd.l_total;
        }
        const LossBreakdown val_mean = mean_breakdown(val_sum, static_cast<int>(val_triples.size()));
        if (!std::isfinite(val_mean.l_total)) {
            throw std::runtime_error("train: non-finite validation loss at epoch " +
                                     std::to_string(epoch));
        }

        result.history.push_back(EpochStats{epoch, train_mean, val_mean});

        if (val_mean.l_total < result.checkpoint.best_validation_loss) {
            result.checkpoint.best_validation_loss = val_mean.l_total;
            result.checkpoint.epoch_of_best = epoch;
            result.checkpoint.params = params;
            round_to_single_precision(result.checkpoint.params);
            if (!checkpoint_path.empty()) {
                save_checkpoint(result.checkpoint, checkpoint_path);
            }
        }

        if (train_cfg.target_train_loss > 0.0 && train_mean.l_total < train_cfg.target_train_loss) {
            break;
        }
    }
    return result;
}

void write_history_jsonl(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("history: cannot write " + path);
    }
    for (const EpochStats& e : history) {
        json line{{"epoch", e.epoch},
                  {"train", breakdown_to_json(e.train)},
                  {"validation", breakdown_to_json(e.validation)}};
        out << line.dump() << "\n";
    }
}

}  // namespace fsum
