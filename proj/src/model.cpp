#include "fsum/model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "fsum/util.hpp"

namespace fsum {

namespace {

constexpr double kLayerNormEps = 1e-5;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double uniform_signed(std::mt19937_64& rng, double scale) {
    return (2.0 * uniform01(rng) - 1.0) * scale;
}

// ---------------------------------------------------------------------------
// layer pieces
// ---------------------------------------------------------------------------

struct LayerNormCache {
    Matrix normalized;          // x-hat
    std::vector<double> rstd;   // per-row 1/sqrt(var + eps)
};

Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& ln, LayerNormCache& cache) {
    const int n = x.rows;
    const int d = x.cols;
    cache.normalized = Matrix(n, d);
    cache.rstd.assign(static_cast<std::size_t>(n), 0.0);
    Matrix y(n, d);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xi[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= d;
        const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.rstd[static_cast<std::size_t>(i)] = rstd;
        double* xh = cache.normalized.row(i);
        double* yi = y.row(i);
        for (int j = 0; j < d; ++j) {
            xh[j] = (xi[j] - mean) * rstd;
            yi[j] = ln.gain.at(0, j) * xh[j] + ln.bias.at(0, j);
        }
    }
    return y;
}

void layer_norm_backward(const Matrix& dy, const LayerNormParams& ln, const LayerNormCache& cache,
                         Matrix& dx_acc, LayerNormParams& d_ln) {
    const int n = dy.rows;
    const int d = dy.cols;
    std::vector<double> dxh(static_cast<std::size_t>(d));
    for (int i = 0; i < n; ++i) {
        const double* dyi = dy.row(i);
        const double* xh = cache.normalized.row(i);
        const double rstd = cache.rstd[static_cast<std::size_t>(i)];
        double m1 = 0.0;
        double m2 = 0.0;
        for (int j = 0; j < d; ++j) {
            dxh[static_cast<std::size_t>(j)] = dyi[j] * ln.gain.at(0, j);
            m1 += dxh[static_cast<std::size_t>(j)];
            m2 += dxh[static_cast<std::size_t>(j)] * xh[j];
            d_ln.gain.at(0, j) += dyi[j] * xh[j];
            d_ln.bias.at(0, j) += dyi[j];
        }
        m1 /= d;
        m2 /= d;
        double* dxi = dx_acc.row(i);
        for (int j = 0; j < d; ++j) {
            dxi[j] += rstd * (dxh[static_cast<std::size_t>(j)] - m1 - xh[j] * m2);
        }
    }
}

struct AttentionCache {
    Matrix q_in, kv_in;             // layer-norm outputs feeding the projections
    Matrix q, k, v;                 // projected
    std::vector<Matrix> head_probs; // per head, n_q x n_k, masked entries zero
    Matrix heads_out;               // concatenated head outputs, pre-Wo
};

// key_mask[j] != 0 means position j may be attended to; with causal set,
// query i additionally sees only keys j <= i.
Matrix attention_forward(const Matrix& q_in, const Matrix& kv_in, const AttentionParams& ap,
                         int num_heads, const std::vector<char>& key_mask, bool causal,
                         AttentionCache& cache) {
    const int nq = q_in.rows;
    const int nk = kv_in.rows;
    const int d = q_in.cols;
    const int dh = d / num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    cache.q_in = q_in;
    cache.kv_in = kv_in;
    cache.q = matmul(q_in, ap.wq);
    cache.k = matmul(kv_in, ap.wk);
    cache.v = matmul(kv_in, ap.wv);
    cache.head_probs.assign(static_cast<std::size_t>(num_heads), Matrix(nq, nk));
    cache.heads_out = Matrix(nq, d);

    std::vector<double> scores(static_cast<std::size_t>(nk));
    for (int h = 0; h < num_heads; ++h) {
        const int off = h * dh;
        Matrix& probs = cache.head_probs[static_cast<std::size_t>(h)];
        for (int i = 0; i < nq; ++i) {
            const int j_end = causal ? std::min(nk, i + 1) : nk;
            double maxv = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < j_end; ++j) {
                if (!key_mask[static_cast<std::size_t>(j)]) continue;
                double dot = 0.0;
                const double* qi = cache.q.row(i) + off;
                const double* kj = cache.k.row(j) + off;
                for (int c = 0; c < dh; ++c) dot += qi[c] * kj[c];
                scores[static_cast<std::size_t>(j)] = dot * scale;
                if (scores[static_cast<std::size_t>(j)] > maxv) maxv = scores[static_cast<std::size_t>(j)];
            }
            if (maxv == -std::numeric_limits<double>::infinity()) {
                continue;  // no attendable key; output row stays zero
            }
            double sum = 0.0;
            double* pi = probs.row(i);
            for (int j = 0; j < j_end; ++j) {
                if (!key_mask[static_cast<std::size_t>(j)]) continue;
                const double e = std::exp(scores[static_cast<std::size_t>(j)] - maxv);
                pi[j] = e;
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (int j = 0; j < j_end; ++j) {
                pi[j] *= inv;
            }
            double* out_row = cache.heads_out.row(i) + off;
            for (int j = 0; j < j_end; ++j) {
                const double p = pi[j];
                if (p == 0.0) continue;
                const double* vj = cache.v.row(j) + off;
                for (int c = 0; c < dh; ++c) out_row[c] += p * vj[c];
            }
        }
    }
    return matmul(cache.heads_out, ap.wo);
}

void attention_backward(const Matrix& d_out, const AttentionParams& ap, int num_heads, bool causal,
                        const AttentionCache& cache, AttentionParams& d_ap, Matrix& d_q_in_acc,
                        Matrix& d_kv_in_acc) {
    const int nq = cache.q.rows;
    const int nk = cache.k.rows;
    const int d = cache.q.cols;
    const int dh = d / num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix d_heads(nq, d);
    matmul_t2_acc(d_out, ap.wo, d_heads);
    matmul_t1_acc(cache.heads_out, d_out, d_ap.wo);

    Matrix dq(nq, d);
    Matrix dk(nk, d);
    Matrix dv(nk, d);
    std::vector<double> dp(static_cast<std::size_t>(nk));
    std::vector<double> ds(static_cast<std::size_t>(nk));
    for (int h = 0; h < num_heads; ++h) {
        const int off = h * dh;
        const Matrix& probs = cache.head_probs[static_cast<std::size_t>(h)];
        for (int i = 0; i < nq; ++i) {
            const int j_end = causal ? std::min(nk, i + 1) : nk;
            const double* pi = probs.row(i);
            const double* dh_row = d_heads.row(i) + off;

            double srow = 0.0;
            for (int j = 0; j < j_end; ++j) {
                if (pi[j] == 0.0) {
                    dp[static_cast<std::size_t>(j)] = 0.0;
                    continue;
                }
                double dot = 0.0;
                const double* vj = cache.v.row(j) + off;
                for (int c = 0; c < dh; ++c) dot += dh_row[c] * vj[c];
                dp[static_cast<std::size_t>(j)] = dot;
                srow += dot * pi[j];

                double* dvj = dv.row(j) + off;
                for (int c = 0; c < dh; ++c) dvj[c] += pi[j] * dh_row[c];
            }
            for (int j = 0; j < j_end; ++j) {
                ds[static_cast<std::size_t>(j)] = pi[j] * (dp[static_cast<std::size_t>(j)] - srow);
            }
            double* dqi = dq.row(i) + off;
            const double* qi = cache.q.row(i) + off;
            for (int j = 0; j < j_end; ++j) {
                const double dsj = ds[static_cast<std::size_t>(j)];
                if (dsj == 0.0) continue;
                const double* kj = cache.k.row(j) + off;
                double* dkj = dk.row(j) + off;
                for (int c = 0; c < dh; ++c) {
                    dqi[c] += dsj * kj[c] * scale;
                    dkj[c] += dsj * qi[c] * scale;
                }
            }
        }
    }

    matmul_t2_acc(dq, ap.wq, d_q_in_acc);
    matmul_t1_acc(cache.q_in, dq, d_ap.wq);
    matmul_t2_acc(dk, ap.wk, d_kv_in_acc);
    matmul_t1_acc(cache.kv_in, dk, d_ap.wk);
    matmul_t2_acc(dv, ap.wv, d_kv_in_acc);
    matmul_t1_acc(cache.kv_in, dv, d_ap.wv);
}

struct FeedForwardCache {
    Matrix input;
    Matrix h_pre;   // before relu
    Matrix h_relu;
};

Matrix ffn_forward(const Matrix& x, const FeedForwardParams& fp, FeedForwardCache& cache) {
    cache.input = x;
    cache.h_pre = matmul(x, fp.w1);
    for (int i = 0; i < cache.h_pre.rows; ++i) {
        double* row = cache.h_pre.row(i);
        for (int j = 0; j < cache.h_pre.cols; ++j) row[j] += fp.b1.at(0, j);
    }
    cache.h_relu = cache.h_pre;
    for (double& v : cache.h_relu.data) {
        if (v < 0.0) v = 0.0;
    }
    Matrix out = matmul(cache.h_relu, fp.w2);
    for (int i = 0; i < out.rows; ++i) {
        double* row = out.row(i);
        for (int j = 0; j < out.cols; ++j) row[j] += fp.b2.at(0, j);
    }
    return out;
}

void ffn_backward(const Matrix& d_out, const FeedForwardParams& fp, const FeedForwardCache& cache,
                  FeedForwardParams& d_fp, Matrix& dx_acc) {
    for (int i = 0; i < d_out.rows; ++i) {
        const double* row = d_out.row(i);
        for (int j = 0; j < d_out.cols; ++j) d_fp.b2.at(0, j) += row[j];
    }
    matmul_t1_acc(cache.h_relu, d_out, d_fp.w2);
    Matrix dh(cache.h_relu.rows, cache.h_relu.cols);
    matmul_t2_acc(d_out, fp.w2, dh);
    for (std::size_t i = 0; i < dh.data.size(); ++i) {
        if (cache.h_pre.data[i] <= 0.0) dh.data[i] = 0.0;
    }
    for (int i = 0; i < dh.rows; ++i) {
        const double* row = dh.row(i);
        for (int j = 0; j < dh.cols; ++j) d_fp.b1.at(0, j) += row[j];
    }
    matmul_t1_acc(cache.input, dh, d_fp.w1);
    matmul_t2_acc(dh, fp.w1, dx_acc);
}

// ---------------------------------------------------------------------------
// embeddings
// ---------------------------------------------------------------------------

// Token embedding scaled by sqrt(d) plus fixed sinusoidal position encoding.
Matrix embed_with_positions(const ModelParams& p, const TokenIds& tokens) {
    const int d = p.cfg.embed_dim;
    const double emb_scale = std::sqrt(static_cast<double>(d));
    Matrix x(static_cast<int>(tokens.size()), d);
    for (int i = 0; i < x.rows; ++i) {
        const double* erow = p.embedding.row(tokens[static_cast<std::size_t>(i)]);
        double* xrow = x.row(i);
        for (int j = 0; j < d; ++j) {
            xrow[j] = emb_scale * erow[j];
        }
        for (int j = 0; j < d; j += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(j) / d);
            const double angle = static_cast<double>(i) * freq;
            xrow[j] += std::sin(angle);
            if (j + 1 < d) {
                xrow[j + 1] += std::cos(angle);
            }
        }
    }
    return x;
}

std::vector<char> non_pad_mask(const TokenIds& tokens) {
    std::vector<char> mask(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        mask[i] = tokens[i] != Vocab::pad_id ? 1 : 0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// encoder / decoder stacks
// ---------------------------------------------------------------------------

struct EncoderCache {
    Matrix x0, x1, x2;
    LayerNormCache ln_attn, ln_ff, ln_out;
    AttentionCache attn;
    FeedForwardCache ff;
    std::vector<char> key_mask;
    Matrix out;
};

void encoder_forward(const ModelParams& p, const TokenIds& src, EncoderCache& cache) {
    const EncoderParams& enc = p.encoder;
    cache.x0 = embed_with_positions(p, src);
    cache.key_mask = non_pad_mask(src);

    Matrix a_in = layer_norm_forward(cache.x0, enc.ln_attn, cache.ln_attn);
    Matrix attn_out =
        attention_forward(a_in, a_in, enc.attn, p.cfg.num_heads, cache.key_mask, false, cache.attn);
    cache.x1 = cache.x0;
    add_inplace(cache.x1, attn_out);

    Matrix f_in = layer_norm_forward(cache.x1, enc.ln_ff, cache.ln_ff);
    Matrix ff_out = ffn_forward(f_in, enc.ff, cache.ff);
    cache.x2 = cache.x1;
    add_inplace(cache.x2, ff_out);

    cache.out = layer_norm_forward(cache.x2, enc.ln_out, cache.ln_out);
}

// Accumulates parameter gradients and returns the gradient wrt the input
// embedding rows (cache.x0).
Matrix encoder_backward(const ModelParams& p, const EncoderCache& cache, const Matrix& d_enc_out,
                        ModelParams& grads) {
    const EncoderParams& enc = p.encoder;
    EncoderParams& d_enc = grads.encoder;

    Matrix dx2(cache.x2.rows, cache.x2.cols);
    layer_norm_backward(d_enc_out, enc.ln_out, cache.ln_out, dx2, d_enc.ln_out);

    Matrix d_f_in(dx2.rows, dx2.cols);
    ffn_backward(dx2, enc.ff, cache.ff, d_enc.ff, d_f_in);
    Matrix dx1 = dx2;  // residual path
    layer_norm_backward(d_f_in, enc.ln_ff, cache.ln_ff, dx1, d_enc.ln_ff);

    Matrix d_a_in(dx1.rows, dx1.cols);
    attention_backward(dx1, enc.attn, p.cfg.num_heads, false, cache.attn, d_enc.attn, d_a_in, d_a_in);
    Matrix dx0 = dx1;  // residual path
    layer_norm_backward(d_a_in, enc.ln_attn, cache.ln_attn, dx0, d_enc.ln_attn);
    return dx0;
}

struct DecoderCache {
    Matrix y0, y1, y2, y3;
    LayerNormCache ln_self, ln_cross, ln_ff, ln_out;
    AttentionCache self_attn, cross_attn;
    FeedForwardCache ff;
    std::vector<char> self_mask;
    Matrix out;
};

void decoder_forward(const ModelParams& p, const Matrix& enc_out,
                     const std::vector<char>& src_mask, const TokenIds& tgt_in,
                     DecoderCache& cache) {
    const DecoderParams& dec = p.decoder;
    cache.y0 = embed_with_positions(p, tgt_in);
    cache.self_mask = non_pad_mask(tgt_in);

    Matrix s_in = layer_norm_forward(cache.y0, dec.ln_self, cache.ln_self);
    Matrix self_out = attention_forward(s_in, s_in, dec.self_attn, p.cfg.num_heads,
                                        cache.self_mask, true, cache.self_attn);
    cache.y1 = cache.y0;
    add_inplace(cache.y1, self_out);

    Matrix c_in = layer_norm_forward(cache.y1, dec.ln_cross, cache.ln_cross);
    Matrix cross_out = attention_forward(c_in, enc_out, dec.cross_attn, p.cfg.num_heads, src_mask,
                                         false, cache.cross_attn);
    cache.y2 = cache.y1;
    add_inplace(cache.y2, cross_out);

    Matrix f_in = layer_norm_forward(cache.y2, dec.ln_ff, cache.ln_ff);
    Matrix ff_out = ffn_forward(f_in, dec.ff, cache.ff);
    cache.y3 = cache.y2;
    add_inplace(cache.y3, ff_out);

    cache.out = layer_norm_forward(cache.y3, dec.ln_out, cache.ln_out);
}

// Returns the gradient wrt cache.y0; d_enc_out_acc collects the encoder
// output gradient flowing back through cross-attention.
Matrix decoder_backward(const ModelParams& p, const DecoderCache& cache, const Matrix& d_dec_out,
                        ModelParams& grads, Matrix& d_enc_out_acc) {
    const DecoderParams& dec = p.decoder;
    DecoderParams& d_dec = grads.decoder;

    Matrix dy3(cache.y3.rows, cache.y3.cols);
    layer_norm_backward(d_dec_out, dec.ln_out, cache.ln_out, dy3, d_dec.ln_out);

    Matrix d_f_in(dy3.rows, dy3.cols);
    ffn_backward(dy3, dec.ff, cache.ff, d_dec.ff, d_f_in);
    Matrix dy2 = dy3;
    layer_norm_backward(d_f_in, dec.ln_ff, cache.ln_ff, dy2, d_dec.ln_ff);

    Matrix d_c_in(dy2.rows, dy2.cols);
    attention_backward(dy2, dec.cross_attn, p.cfg.num_heads, false, cache.cross_attn,
                       d_dec.cross_attn, d_c_in, d_enc_out_acc);
    Matrix dy1 = dy2;
    layer_norm_backward(d_c_in, dec.ln_cross, cache.ln_cross, dy1, d_dec.ln_cross);

    Matrix d_s_in(dy1.rows, dy1.cols);
    attention_backward(dy1, dec.self_attn, p.cfg.num_heads, true, cache.self_attn, d_dec.self_attn,
                       d_s_in, d_s_in);
    Matrix dy0 = dy1;
    layer_norm_backward(d_s_in, dec.ln_self, cache.ln_self, dy0, d_dec.ln_self);
    return dy0;
}

struct ForwardCache {
    TokenIds src;
    TokenIds tgt_in;
    EncoderCache enc;
    DecoderCache dec;
};

void validate_sequence(const TokenIds& seq, std::int32_t vocab_size, int max_len, const char* what) {
    if (static_cast<int>(seq.size()) > max_len) {
        throw std::invalid_argument(std::string(what) + " length " + std::to_string(seq.size()) +
                                    " exceeds maximum " + std::to_string(max_len));
    }
    for (std::int32_t id : seq) {
        if (id < 0 || id >= vocab_size) {
            throw std::invalid_argument(std::string(what) + " token id " + std::to_string(id) +
                                        " outside vocabulary of size " + std::to_string(vocab_size));
        }
    }
}

void validate_src(const TokenIds& src, const ModelConfig& cfg) {
    if (src.empty()) {
        throw std::invalid_argument("source sequence is empty");
    }
    validate_sequence(src, cfg.vocab_size, cfg.max_src_len, "source");
    bool any = false;
    for (std::int32_t id : src) any = any || id != Vocab::pad_id;
    if (!any) {
        throw std::invalid_argument("source sequence is all padding");
    }
}

Matrix forward_full(const ModelParams& p, const TokenIds& src, const TokenIds& tgt,
                    ForwardCache& cache) {
    p.cfg.validate();
    validate_src(src, p.cfg);
    if (tgt.size() < 2) {
        throw std::invalid_argument("target sequence must hold at least BOS and EOS");
    }
    validate_sequence(tgt, p.cfg.vocab_size, p.cfg.max_tgt_len, "target");

    cache.src = src;
    cache.tgt_in.assign(tgt.begin(), tgt.end() - 1);
    encoder_forward(p, src, cache.enc);
    decoder_forward(p, cache.enc.out, cache.enc.key_mask, cache.tgt_in, cache.dec);
    return matmul_t2(cache.dec.out, p.embedding);
}

double sequence_loss_impl(const Matrix& logits, const TokenIds& tgt, Matrix* dlogits) {
    if (logits.rows != static_cast<int>(tgt.size()) - 1) {
        throw std::invalid_argument("sequence_loss: logits rows " + std::to_string(logits.rows) +
                                    " do not match target length " + std::to_string(tgt.size()) +
                                    " - 1");
    }
    const int vocab = logits.cols;
    int n = 0;
    for (int j = 0; j < logits.rows; ++j) {
        if (tgt[static_cast<std::size_t>(j) + 1] != Vocab::pad_id) ++n;
    }
    if (n == 0) {
        throw std::invalid_argument("sequence_loss: every target position is padding");
    }
    if (dlogits) {
        *dlogits = Matrix(logits.rows, vocab);
    }
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int j = 0; j < logits.rows; ++j) {
        const std::int32_t gold = tgt[static_cast<std::size_t>(j) + 1];
        if (gold == Vocab::pad_id) continue;
        const double* row = logits.row(j);
        double maxv = row[0];
        for (int v = 1; v < vocab; ++v) maxv = std::max(maxv, row[v]);
        double sum = 0.0;
        for (int v = 0; v < vocab; ++v) sum += std::exp(row[v] - maxv);
        const double log_z = maxv + std::log(sum);
        loss += log_z - row[gold];
        if (dlogits) {
            double* drow = dlogits->row(j);
            const double inv_sum = 1.0 / sum;
            for (int v = 0; v < vocab; ++v) {
                drow[v] = std::exp(row[v] - maxv) * inv_sum * inv_n;
            }
            drow[gold] -= inv_n;
        }
    }
    return loss * inv_n;
}

// Forward + loss + full backward for one (src, tgt) pair; gradients are
// added into grads unscaled.
double pair_backward(const ModelParams& p, const TokenIds& src, const TokenIds& tgt,
                     ModelParams& grads) {
    ForwardCache cache;
    const Matrix logits = forward_full(p, src, tgt, cache);
    Matrix dlogits;
    const double loss = sequence_loss_impl(logits, tgt, &dlogits);

    // logits = dec_out * E^T
    Matrix d_dec_out = matmul(dlogits, p.embedding);
    matmul_t1_acc(dlogits, cache.dec.out, grads.embedding);

    Matrix d_enc_out(cache.enc.out.rows, cache.enc.out.cols);
    const Matrix dy0 = decoder_backward(p, cache.dec, d_dec_out, grads, d_enc_out);
    const Matrix dx0 = encoder_backward(p, cache.enc, d_enc_out, grads);

    const double emb_scale = std::sqrt(static_cast<double>(p.cfg.embed_dim));
    for (int i = 0; i < dy0.rows; ++i) {
        double* erow = grads.embedding.row(cache.tgt_in[static_cast<std::size_t>(i)]);
        const double* drow = dy0.row(i);
        for (int j = 0; j < dy0.cols; ++j) erow[j] += emb_scale * drow[j];
    }
    for (int i = 0; i < dx0.rows; ++i) {
        double* erow = grads.embedding.row(src[static_cast<std::size_t>(i)]);
        const double* drow = dx0.row(i);
        for (int j = 0; j < dx0.cols; ++j) erow[j] += emb_scale * drow[j];
    }
    return loss;
}

double pair_loss(const ModelParams& p, const TaskPair& pair) {
    ForwardCache cache;
    const Matrix logits = forward_full(p, pair.src, pair.tgt, cache);
    return sequence_loss_impl(logits, pair.tgt, nullptr);
}

ModelParams make_params(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.embed_dim;
    const int h = cfg.hidden_dim;
    ModelParams p;
    p.cfg = cfg;
    p.embedding = Matrix(cfg.vocab_size, d);
    auto make_ln = [d] { return LayerNormParams{Matrix(1, d), Matrix(1, d)}; };
    auto make_attn = [d] { return AttentionParams{Matrix(d, d), Matrix(d, d), Matrix(d, d), Matrix(d, d)}; };
    auto make_ff = [d, h] { return FeedForwardParams{Matrix(d, h), Matrix(1, h), Matrix(h, d), Matrix(1, d)}; };
    p.encoder = EncoderParams{make_ln(), make_ln(), make_ln(), make_attn(), make_ff()};
    p.decoder = DecoderParams{make_ln(), make_ln(), make_ln(), make_ln(),
                              make_attn(), make_attn(), make_ff()};
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// public surface
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (vocab_size < Vocab::reserved_count) {
        throw std::invalid_argument("model config: vocab_size must cover the reserved tokens");
    }
    if (embed_dim < 1 || hidden_dim < 1 || num_heads < 1) {
        throw std::invalid_argument("model config: dimensions must be >= 1");
    }
    if (embed_dim % num_heads != 0) {
        throw std::invalid_argument("model config: embed_dim " + std::to_string(embed_dim) +
                                    " not divisible by num_heads " + std::to_string(num_heads));
    }
    if (max_src_len < 1 || max_tgt_len < 2) {
        throw std::invalid_argument("model config: sequence length limits too small");
    }
}

void LambdaTriple::validate() const {
    for (double v : {lambda_gen, lambda_k, lambda_e}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("lambda weights must lie in [0, 1]");
        }
    }
}

ModelParams init_params(const ModelConfig& cfg) {
    ModelParams p = make_params(cfg);
    std::mt19937_64 rng(cfg.seed);
    for_each_tensor(p, [&](const std::string& name, Matrix& t) {
        if (ends_with(name, ".gain")) {
            t.fill(1.0);
        } else if (ends_with(name, ".bias") || ends_with(name, ".b1") || ends_with(name, ".b2")) {
            t.fill(0.0);
        } else {
            const int fan_in = (name == "embedding") ? t.cols : t.rows;
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (double& v : t.data) {
                v = uniform_signed(rng, scale);
            }
        }
    });
    return p;
}

ModelParams zero_params(const ModelConfig& cfg) {
    return make_params(cfg);
}

ModelParams zeros_like(const ModelParams& p) {
    return make_params(p.cfg);
}

std::size_t parameter_count(const ModelParams& p) {
    std::size_t n = 0;
    for_each_tensor(p, [&](const std::string&, const Matrix& t) { n += t.size(); });
    return n;
}

Matrix forward_teacher_forced(const ModelParams& params, const TokenIds& src, const TokenIds& tgt) {
    ForwardCache cache;
    return forward_full(params, src, tgt, cache);
}

double sequence_loss(const Matrix& logits, const TokenIds& tgt) {
    return sequence_loss_impl(logits, tgt, nullptr);
}

LossBreakdown total_loss(const ModelParams& params, const TrainingTriple& triple,
                         const LambdaTriple& lambdas) {
    lambdas.validate();
    LossBreakdown bd;
    bd.l_gen = pair_loss(params, triple.gen);
    bd.l_k = pair_loss(params, triple.know);
    bd.l_e = pair_loss(params, triple.ent);
    bd.l_total = lambdas.lambda_gen * bd.l_gen + lambdas.lambda_k * bd.l_k +
                 lambdas.lambda_e * bd.l_e;
    return bd;
}

LossBreakdown backward(const ModelParams& params, const TrainingTriple& triple,
                       const LambdaTriple& lambdas, ModelParams& grads) {
    lambdas.validate();
    LossBreakdown bd;

    // Per-task gradients are computed unweighted and scaled at accumulation
    // time, which keeps the result exactly linear in each lambda.
    ModelParams task_grads = zeros_like(params);
    auto run_task = [&](const TaskPair& pair, double weight) -> double {
        if (weight == 0.0) {
            return 0.0;
        }
        for_each_tensor(task_grads, [](const std::string&, Matrix& t) { t.fill(0.0); });
        const double loss = pair_backward(params, pair.src, pair.tgt, task_grads);
        std::vector<Matrix*> dst;
        std::vector<const Matrix*> srcs;
        for_each_tensor(grads, [&](const std::string&, Matrix& t) { dst.push_back(&t); });
        for_each_tensor(task_grads,
                        [&](const std::string&, const Matrix& t) { srcs.push_back(&t); });
        for (std::size_t t = 0; t < dst.size(); ++t) {
            double* out = dst[t]->data.data();
            const double* in = srcs[t]->data.data();
            for (std::size_t i = 0; i < dst[t]->data.size(); ++i) {
                out[i] += weight * in[i];
            }
        }
        return loss;
    };

    bd.l_gen = run_task(triple.gen, lambdas.lambda_gen);
    bd.l_k = run_task(triple.know, lambdas.lambda_k);
    bd.l_e = run_task(triple.ent, lambdas.lambda_e);
    bd.l_total = lambdas.lambda_gen * bd.l_gen + lambdas.lambda_k * bd.l_k +
                 lambdas.lambda_e * bd.l_e;
    return bd;
}

TokenIds greedy_decode(const ModelParams& params, const TokenIds& src, int max_len) {
    if (max_len < 1) {
        throw std::invalid_argument("greedy_decode: max_len must be >= 1");
    }
    params.cfg.validate();
    validate_src(src, params.cfg);

    EncoderCache enc_cache;
    encoder_forward(params, src, enc_cache);

    TokenIds out{Vocab::bos_id};
    const int budget = std::min(max_len, params.cfg.max_tgt_len - 1);
    for (int step = 0; step < budget; ++step) {
        DecoderCache dec_cache;
        decoder_forward(params, enc_cache.out, enc_cache.key_mask, out, dec_cache);
        const double* last = dec_cache.out.row(dec_cache.out.rows - 1);
        std::int32_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::int32_t v = 0; v < params.cfg.vocab_size; ++v) {
            const double* erow = params.embedding.row(v);
            double score = 0.0;
            for (int j = 0; j < params.cfg.embed_dim; ++j) score += last[j] * erow[j];
            if (score > best_score) {
                best_score = score;
                best = v;
            }
        }
        out.push_back(best);
        if (best == Vocab::eos_id) {
            break;
        }
    }
    return out;
}

}  // namespace fsum
