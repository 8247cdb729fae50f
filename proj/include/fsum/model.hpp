#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsum/corpus.hpp"
#include "fsum/tensor.hpp"

namespace fsum {

struct ModelConfig {
    std::int32_t vocab_size = 0;
    int embed_dim = 32;
    int hidden_dim = 64;
    int num_heads = 4;
    int max_src_len = 256;
    int max_tgt_len = 64;
    std::uint64_t seed = 0;

    void validate() const;  // throws on inconsistent shapes
    int head_dim() const { return embed_dim / num_heads; }
};

struct LayerNormParams {
    Matrix gain;  // 1 x d
    Matrix bias;  // 1 x d
};

struct AttentionParams {
    Matrix wq, wk, wv, wo;  // d x d
};

struct FeedForwardParams {
    Matrix w1;  // d x hidden
    Matrix b1;  // 1 x hidden
    Matrix w2;  // hidden x d
    Matrix b2;  // 1 x d
};

struct EncoderParams {
    LayerNormParams ln_attn, ln_ff, ln_out;
    AttentionParams attn;
    FeedForwardParams ff;
};

struct DecoderParams {
    LayerNormParams ln_self, ln_cross, ln_ff, ln_out;
    AttentionParams self_attn, cross_attn;
    FeedForwardParams ff;
};

// One parameter set serves summary, entity, and fact decoding alike; there
// are no task-specific tensors. The embedding matrix is shared between
// encoder input, decoder input, and the output projection.
struct ModelParams {
    ModelConfig cfg;
    Matrix embedding;  // vocab x d
    EncoderParams encoder;
    DecoderParams decoder;
};

namespace detail {
template <typename Params, typename Fn>
void for_each_tensor_impl(Params& p, Fn&& fn) {
    fn("embedding", p.embedding);

    fn("enc.ln_attn.gain", p.encoder.ln_attn.gain);
    fn("enc.ln_attn.bias", p.encoder.ln_attn.bias);
    fn("enc.attn.wq", p.encoder.attn.wq);
    fn("enc.attn.wk", p.encoder.attn.wk);
    fn("enc.attn.wv", p.encoder.attn.wv);
    fn("enc.attn.wo", p.encoder.attn.wo);
    fn("enc.ln_ff.gain", p.encoder.ln_ff.gain);
    fn("enc.ln_ff.bias", p.encoder.ln_ff.bias);
    fn("enc.ff.w1", p.encoder.ff.w1);
    fn("enc.ff.b1", p.encoder.ff.b1);
    fn("enc.ff.w2", p.encoder.ff.w2);
    fn("enc.ff.b2", p.encoder.ff.b2);
    fn("enc.ln_out.gain", p.encoder.ln_out.gain);
    fn("enc.ln_out.bias", p.encoder.ln_out.bias);

    fn("dec.ln_self.gain", p.decoder.ln_self.gain);
    fn("dec.ln_self.bias", p.decoder.ln_self.bias);
    fn("dec.self_attn.wq", p.decoder.self_attn.wq);
    fn("dec.self_attn.wk", p.decoder.self_attn.wk);
    fn("dec.self_attn.wv", p.decoder.self_attn.wv);
    fn("dec.self_attn.wo", p.decoder.self_attn.wo);
    fn("dec.ln_cross.gain", p.decoder.ln_cross.gain);
    fn("dec.ln_cross.bias", p.decoder.ln_cross.bias);
    fn("dec.cross_attn.wq", p.decoder.cross_attn.wq);
    fn("dec.cross_attn.wk", p.decoder.cross_attn.wk);
    fn("dec.cross_attn.wv", p.decoder.cross_attn.wv);
    fn("dec.cross_attn.wo", p.decoder.cross_attn.wo);
    fn("dec.ln_ff.gain", p.decoder.ln_ff.gain);
    fn("dec.ln_ff.bias", p.decoder.ln_ff.bias);
    fn("dec.ff.w1", p.decoder.ff.w1);
    fn("dec.ff.b1", p.decoder.ff.b1);
    fn("dec.ff.w2", p.decoder.ff.w2);
    fn("dec.ff.b2", p.decoder.ff.b2);
    fn("dec.ln_out.gain", p.decoder.ln_out.gain);
    fn("dec.ln_out.bias", p.decoder.ln_out.bias);
}
}  // namespace detail

// Visits every named parameter tensor in a fixed order shared by the
// optimizer, serialization, and gradient checks.
template <typename Fn>
void for_each_tensor(ModelParams& p, Fn&& fn) {
    detail::for_each_tensor_impl(p, fn);
}
template <typename Fn>
void for_each_tensor(const ModelParams& p, Fn&& fn) {
    detail::for_each_tensor_impl(p, fn);
}

// Weight matrices uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], layer-norm
// gains 1, all biases 0; deterministic per cfg.seed.
ModelParams init_params(const ModelConfig& cfg);

// All-zero parameter set with shapes derived from the config.
ModelParams zero_params(const ModelConfig& cfg);

// Same shapes, all zeros; gradient and moment buffers.
ModelParams zeros_like(const ModelParams& p);

std::size_t parameter_count(const ModelParams& p);

struct LambdaTriple {
    double lambda_gen = 1.0;
    double lambda_k = 0.0;
    double lambda_e = 0.0;

    void validate() const;  // each weight must lie in [0, 1]
};

struct TaskPair {
    TokenIds src;
    TokenIds tgt;
};

struct TrainingTriple {
    std::string record_id;
    TaskPair gen;   // findings -> impression
    TaskPair ent;   // findings entity chain -> impression entity chain
    TaskPair know;  // findings facts -> impression facts
};

struct LossBreakdown {
    double l_gen = 0.0;
    double l_k = 0.0;
    double l_e = 0.0;
    double l_total = 0.0;
};

// Teacher-forced decoder logits: row j conditions on src and tgt[0..j] and
// scores the prediction of tgt[j+1]; shape (|tgt|-1) x vocab.
Matrix forward_teacher_forced(const ModelParams& params, const TokenIds& src, const TokenIds& tgt);

// Mean negative log-likelihood of the gold next token over non-pad target
// positions.
double sequence_loss(const Matrix& logits, const TokenIds& tgt);

// Runs all three tasks with the same parameters and combines the losses as
// l_total = lambda_gen*l_gen + lambda_k*l_k + lambda_e*l_e (fixed order).
LossBreakdown total_loss(const ModelParams& params, const TrainingTriple& triple,
                         const LambdaTriple& lambdas);

// Exact analytic gradients of l_total; grads must be shaped like params and
// is accumulated into (callers zero it first). Tasks with zero weight are
// skipped entirely and report a component loss of 0.
LossBreakdown backward(const ModelParams& params, const TrainingTriple& triple,
                       const LambdaTriple& lambdas, ModelParams& grads);

// Greedy argmax decoding from BOS (ties take the smallest id); stops at EOS
// or after max_len generated tokens.
TokenIds greedy_decode(const ModelParams& params, const TokenIds& src, int max_len);

}  // namespace fsum
