#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gstk/adam.hpp"
#include "gstk/ops.hpp"
#include "gstk/rng.hpp"
#include "gstk/tensor.hpp"
#include "gstk/tokenizer.hpp"

namespace gs {

enum class Task { classification, regression };

inline const char* task_name(Task t) {
    return t == Task::classification ? "classification" : "regression";
}

inline Task task_from_name(const std::string& s) {
    if (s == "classification") return Task::classification;
    if (s == "regression") return Task::regression;
    throw ConfigError("unknown task '" + s + "'");
}

struct ModelConfig {
    int k = 6;
    int embed_width = 32;  // D_w
    int n_layers = 3;
    int n_heads = 4;
    int mlp_ratio = 4;
    int proj_width = 4;  // D_p, projector output per token
    int head_hidden = 256;
    Task task = Task::regression;
    int n_classes = 0;   // classification only
    int seq_tokens = 0;  // fixed per trained model

    enum class Act { gelu, relu };
    Act activation = Act::gelu;

    int output_width() const { return task == Task::classification ? n_classes : 1; }

    void validate() const {
        if (k < 1 || k > kMaxKmer) throw ConfigError("k out of range: " + std::to_string(k));
        if (embed_width < 2 || embed_width % 2 != 0) {
            throw ConfigError("embed_width must be even and >= 2, got " +
                              std::to_string(embed_width));
        }
        if (n_heads < 1 || embed_width % n_heads != 0) {
            throw ConfigError("embed_width " + std::to_string(embed_width) +
                              " not divisible by n_heads " + std::to_string(n_heads));
        }
        if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
        if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
        if (proj_width < 1 || proj_width > embed_width) {
            throw ConfigError("proj_width must be in [1, embed_width], got " +
                              std::to_string(proj_width));
        }
        if (head_hidden < 1) throw ConfigError("head_hidden must be >= 1");
        if (task == Task::classification && n_classes < 2) {
            throw ConfigError("classification needs n_classes >= 2, got " +
                              std::to_string(n_classes));
        }
        if (seq_tokens < 1) throw ConfigError("seq_tokens must be >= 1");
    }
};

struct PhenotypePrediction {
    double value = 0.0;                  // regression output
    std::vector<double> probabilities;   // classification, sums to 1
    int predicted_class = -1;
};

// Sinusoidal positional encoding, PE[pos,2i] = sin(pos/10000^(2i/width)) and
// PE[pos,2i+1] = cos of the same angle. Constant, never trained.
template <class S>
TensorT<S> positional_encoding(int length, int width) {
    if (length < 1) throw ConfigError("positional encoding needs length >= 1");
    if (width < 2 || width % 2 != 0) {
        throw ConfigError("positional encoding width must be even, got " +
                          std::to_string(width));
    }
    auto pe = TensorT<S>::zeros({static_cast<std::size_t>(length),
                                 static_cast<std::size_t>(width)});
    for (int pos = 0; pos < length; ++pos) {
        for (int i = 0; i < width / 2; ++i) {
            const double angle =
                pos / std::pow(10000.0, (2.0 * i) / static_cast<double>(width));
            pe.at(static_cast<std::size_t>(pos), static_cast<std::size_t>(2 * i)) =
                static_cast<S>(std::sin(angle));
            pe.at(static_cast<std::size_t>(pos), static_cast<std::size_t>(2 * i + 1)) =
                static_cast<S>(std::cos(angle));
        }
    }
    return pe;
}

template <class S>
struct EncoderBlockT {
    TensorT<S> ln1_gain, ln1_bias;
    TensorT<S> wq, bq, wk, bk, wv, bv, wo, bo;
    TensorT<S> ln2_gain, ln2_bias;
    TensorT<S> w1, b1, w2, b2;
};

// Token embedding + positional encoding, a pre-norm encoder stack, a linear
// per-token projector, and a flatten+MLP head.
template <class S>
class ModelT {
public:
    explicit ModelT(ModelConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        const auto d = static_cast<std::size_t>(cfg_.embed_width);
        const auto vocab = static_cast<std::size_t>(vocab_size(cfg_.k));
        const auto hidden = static_cast<std::size_t>(cfg_.mlp_ratio * cfg_.embed_width);
        const auto n = static_cast<std::size_t>(cfg_.seq_tokens);
        const auto dp = static_cast<std::size_t>(cfg_.proj_width);
        const auto hh = static_cast<std::size_t>(cfg_.head_hidden);
        const auto out_w = static_cast<std::size_t>(cfg_.output_width());

        embedding_ = TensorT<S>::zeros({vocab, d}).set_requires_grad();
        pos_ = positional_encoding<S>(cfg_.seq_tokens, cfg_.embed_width);
        blocks_.resize(static_cast<std::size_t>(cfg_.n_layers));
        for (auto& blk : blocks_) {
            blk.ln1_gain = TensorT<S>::full({d}, S(1)).set_requires_grad();
            blk.ln1_bias = TensorT<S>::zeros({d}).set_requires_grad();
            blk.wq = TensorT<S>::zeros({d, d}).set_requires_grad();
            blk.bq = TensorT<S>::zeros({d}).set_requires_grad();
            blk.wk = TensorT<S>::zeros({d, d}).set_requires_grad();
            blk.bk = TensorT<S>::zeros({d}).set_requires_grad();
            blk.wv = TensorT<S>::zeros({d, d}).set_requires_grad();
            blk.bv = TensorT<S>::zeros({d}).set_requires_grad();
            blk.wo = TensorT<S>::zeros({d, d}).set_requires_grad();
            blk.bo = TensorT<S>::zeros({d}).set_requires_grad();
            blk.ln2_gain = TensorT<S>::full({d}, S(1)).set_requires_grad();
            blk.ln2_bias = TensorT<S>::zeros({d}).set_requires_grad();
            blk.w1 = TensorT<S>::zeros({d, hidden}).set_requires_grad();
            blk.b1 = TensorT<S>::zeros({hidden}).set_requires_grad();
            blk.w2 = TensorT<S>::zeros({hidden, d}).set_requires_grad();
            blk.b2 = TensorT<S>::zeros({d}).set_requires_grad();
        }
        proj_w_ = TensorT<S>::zeros({d, dp}).set_requires_grad();
        proj_b_ = TensorT<S>::zeros({dp}).set_requires_grad();
        head_w1_ = TensorT<S>::zeros({n * dp, hh}).set_requires_grad();
        head_b1_ = TensorT<S>::zeros({hh}).set_requires_grad();
        head_w2_ = TensorT<S>::zeros({hh, out_w}).set_requires_grad();
        head_b2_ = TensorT<S>::zeros({out_w}).set_requires_grad();
    }

    // Weight matrices ~ normal(0, 0.02); biases stay zero, LN gains one.
    void init_params(Rng& rng) {
        auto fill = [&rng](TensorT<S>& w) {
            for (S& v : w.values()) v = static_cast<S>(rng.normal(0.0, 0.02));
        };
        fill(embedding_);
        for (auto& b : blocks_) {
            fill(b.wq);
            fill(b.wk);
            fill(b.wv);
            fill(b.wo);
            fill(b.w1);
            fill(b.w2);
        }
        fill(proj_w_);
        fill(head_w1_);
        fill(head_w2_);
    }

    const ModelConfig& config() const { return cfg_; }

    std::vector<std::pair<std::string, TensorT<S>>> named_parameters() {
        std::vector<std::pair<std::string, TensorT<S>>> out;
        out.emplace_back("embedding", embedding_);
        for (std::size_t l = 0; l < blocks_.size(); ++l) {
            auto& b = blocks_[l];
            const std::string pre = "block" + std::to_string(l) + ".";
            out.emplace_back(pre + "ln1_gain", b.ln1_gain);
            out.emplace_back(pre + "ln1_bias", b.ln1_bias);
            out.emplace_back(pre + "wq", b.wq);
            out.emplace_back(pre + "bq", b.bq);
            out.emplace_back(pre + "wk", b.wk);
            out.emplace_back(pre + "bk", b.bk);
            out.emplace_back(pre + "wv", b.wv);
            out.emplace_back(pre + "bv", b.bv);
            out.emplace_back(pre + "wo", b.wo);
            out.emplace_back(pre + "bo", b.bo);
            out.emplace_back(pre + "ln2_gain", b.ln2_gain);
            out.emplace_back(pre + "ln2_bias", b.ln2_bias);
            out.emplace_back(pre + "w1", b.w1);
            out.emplace_back(pre + "b1", b.b1);
            out.emplace_back(pre + "w2", b.w2);
            out.emplace_back(pre + "b2", b.b2);
        }
        out.emplace_back("proj_w", proj_w_);
        out.emplace_back("proj_b", proj_b_);
        out.emplace_back("head_w1", head_w1_);
        out.emplace_back("head_b1", head_b1_);
        out.emplace_back("head_w2", head_w2_);
        out.emplace_back("head_b2", head_b2_);
        return out;
    }

    std::vector<TensorT<S>> parameters() {
        std::vector<TensorT<S>> out;
        for (auto& [name, p] : named_parameters()) out.push_back(p);
        return out;
    }

    TensorT<S>& embedding_table() { return embedding_; }
    std::vector<EncoderBlockT<S>>& blocks() { return blocks_; }

    // E_0: embedded token ids plus the positional encoding.
    TensorT<S> embed(std::span<const TokenId> ids) const {
        if (ids.size() != static_cast<std::size_t>(cfg_.seq_tokens)) {
            throw ShapeError("expected " + std::to_string(cfg_.seq_tokens) +
                             " tokens, got " + std::to_string(ids.size()));
        }
        return add(embedding(embedding_, ids), pos_);
    }

    TensorT<S> mha(const TensorT<S>& x, const EncoderBlockT<S>& blk) const {
        const int heads = cfg_.n_heads;
        const std::size_t head_dim = static_cast<std::size_t>(cfg_.embed_width / heads);
        const S inv_sqrt_d = S(1) / std::sqrt(static_cast<S>(head_dim));

        auto q = add_rowvec(matmul(x, blk.wq), blk.bq);
        auto k = add_rowvec(matmul(x, blk.wk), blk.bk);
        auto v = add_rowvec(matmul(x, blk.wv), blk.bv);

        std::vector<TensorT<S>> head_out;
        head_out.reserve(static_cast<std::size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            const std::size_t c0 = static_cast<std::size_t>(h) * head_dim;
            auto qh = slice_cols(q, c0, head_dim);
            auto kh = slice_cols(k, c0, head_dim);
            auto vh = slice_cols(v, c0, head_dim);
            auto attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_d));
            head_out.push_back(matmul(attn, vh));
        }
        return add_rowvec(matmul(concat_cols(head_out), blk.wo), blk.bo);
    }

    TensorT<S> encoder_block(const TensorT<S>& x, int layer) const {
        const auto& blk = blocks_[static_cast<std::size_t>(layer)];
        auto attn_in = layer_norm(x, blk.ln1_gain, blk.ln1_bias);
        auto e1 = add(mha(attn_in, blk), x);
        auto mlp_in = layer_norm(e1, blk.ln2_gain, blk.ln2_bias);
        auto hidden = activate(add_rowvec(matmul(mlp_in, blk.w1), blk.b1));
        auto mlp_out = add_rowvec(matmul(hidden, blk.w2), blk.b2);
        return add(mlp_out, e1);
    }

    // Per-token linear projection, row-major flatten, two-layer MLP head.
    TensorT<S> project_and_predict(const TensorT<S>& e_last) const {
        if (e_last.rows() != static_cast<std::size_t>(cfg_.seq_tokens) ||
            e_last.cols() != static_cast<std::size_t>(cfg_.embed_width)) {
            throw ShapeError("projector expects " + std::to_string(cfg_.seq_tokens) + "x" +
                             std::to_string(cfg_.embed_width) + ", got " +
                             shape_str(e_last.shape()));
        }
        auto projected = add_rowvec(matmul(e_last, proj_w_), proj_b_);
        auto flat = flatten_row(projected);
        auto hidden = activate(add_rowvec(matmul(flat, head_w1_), head_b1_));
        return add_rowvec(matmul(hidden, head_w2_), head_b2_);
    }

    // Raw head output: 1 x C logits for classification, 1 x 1 for regression
    // (in standardized target units; predict() undoes the scaling).
    TensorT<S> forward(std::span<const TokenId> ids) const {
        auto e = embed(ids);
        for (int l = 0; l < cfg_.n_layers; ++l) e = encoder_block(e, l);
        return project_and_predict(e);
    }

    PhenotypePrediction predict(std::span<const TokenId> ids) const {
        auto out = forward(ids);
        PhenotypePrediction pred;
        if (cfg_.task == Task::regression) {
            pred.value = static_cast<double>(out.at(0)) * target_scale + target_mean;
        } else {
            auto probs = softmax_rows(out);
            pred.probabilities.resize(probs.numel());
            int best = 0;
            for (std::size_t c = 0; c < probs.numel(); ++c) {
                pred.probabilities[c] = static_cast<double>(probs.at(c));
                if (probs.at(c) > probs.at(static_cast<std::size_t>(best))) {
                    best = static_cast<int>(c);
                }
            }
            pred.predicted_class = best;
        }
        return pred;
    }

    // Regression targets are standardized for training; the raw-unit mapping
    // is prediction = raw * target_scale + target_mean.
    double target_mean = 0.0;
    double target_scale = 1.0;

private:
    TensorT<S> activate(const TensorT<S>& x) const {
        return cfg_.activation == ModelConfig::Act::gelu ? gelu(x) : relu(x);
    }

    ModelConfig cfg_;
    TensorT<S> embedding_;
    TensorT<S> pos_;
    std::vector<EncoderBlockT<S>> blocks_;
    TensorT<S> proj_w_, proj_b_;
    TensorT<S> head_w1_, head_b1_, head_w2_, head_b2_;
};

using Model = ModelT<float>;

}  // namespace gs
