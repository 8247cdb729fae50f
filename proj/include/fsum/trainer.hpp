#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fsum/model.hpp"

namespace fsum {

struct TrainConfig {
    int epochs = 1;
    int batch_size = 8;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip_norm = 1.0;
    std::uint64_t seed = 0;
    // When positive, training stops once the epoch-mean training loss drops
    // below this value (the best-checkpoint rule still applies).
    double target_train_loss = 0.0;

    void validate() const;
};

struct AdamState {
    ModelParams m;
    ModelParams v;
    std::int64_t step = 0;  // completed update count
};

AdamState make_adam_state(const ModelParams& params);

// Standard Adam update with bias correction; step is 1-based.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& cfg, std::int64_t step);

// Scales all gradients so the global L2 norm is at most max_norm; returns
// the pre-clip norm.
double clip_gradients(ModelParams& grads, double max_norm);

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Snapshot of the least-validation-loss epoch. Parameter tensors are held
// at single precision (the on-disk precision), so a reloaded checkpoint
// reproduces forward outputs bit for bit.
struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    ModelConfig model_cfg;
    std::uint64_t vocab_hash = 0;
    LambdaTriple lambdas;
    ModelParams params;
    double best_validation_loss = std::numeric_limits<double>::infinity();
    int epoch_of_best = 0;
};

// Binary format: magic, version, JSON metadata header with a tensor
// directory, then raw little-endian float32 payloads. Writes are atomic
// (temp file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct EpochStats {
    int epoch = 0;  // 1-based
    LossBreakdown train;
    LossBreakdown validation;
};

struct TrainResult {
    Checkpoint checkpoint;  // best epoch, not last
    std::vector<EpochStats> history;
};

// Mini-batch training: seeded shuffle per epoch, mean-of-batch gradients,
// global-norm clipping, Adam updates, per-epoch validation, and retention
// of the checkpoint with the least validation loss. When checkpoint_path is
// non-empty the best checkpoint is (re)written every time validation
// improves. Fully deterministic for fixed seeds and inputs.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const LambdaTriple& lambdas, const std::vector<TrainingTriple>& train_triples,
                  const std::vector<TrainingTriple>& val_triples, std::uint64_t vocab_hash = 0,
                  const std::string& checkpoint_path = "");

void write_history_jsonl(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace fsum
