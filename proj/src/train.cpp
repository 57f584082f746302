#include "gstk/train.hpp"

#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>

#include "gstk/adam.hpp"
#include "gstk/metrics.hpp"
#include "gstk/ops.hpp"
#include "gstk/rng.hpp"

namespace gs {

namespace {

constexpr std::uint64_t kFoldStream = 0xF01D5;
constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x5481FF;

std::vector<TokenIds> tokenize_all(const Dataset& data, const TokenizerConfig& tcfg) {
    std::vector<TokenIds> out;
    out.reserve(data.size());
    for (const Sample& s : data.samples) out.push_back(kmer_tokenize(s.seq, tcfg));
    return out;
}

int resolve_seq_tokens(const Dataset& data, const ModelConfig& mcfg, int k) {
    const int from_data = static_cast<int>(data.seq_length) / k;
    if (mcfg.seq_tokens != 0 && mcfg.seq_tokens != from_data) {
        throw ConfigError("model expects " + std::to_string(mcfg.seq_tokens) +
                          " tokens but sequences of length " +
                          std::to_string(data.seq_length) + " give " +
                          std::to_string(from_data) + " at k=" + std::to_string(k));
    }
    return from_data;
}

double classification_metric(const Model& model, const Dataset& data,
                             std::span<const std::size_t> idx,
                             const std::vector<TokenIds>& tokens) {
    std::vector<int> pred, truth;
    pred.reserve(idx.size());
    truth.reserve(idx.size());
    NoGradGuard ng;
    for (std::size_t i : idx) {
        pred.push_back(model.predict(tokens[i].ids).predicted_class);
        truth.push_back(data.samples[i].label);
    }
    return accuracy(pred, truth);
}

double regression_metric(const Model& model, const Dataset& data,
                         std::span<const std::size_t> idx,
                         const std::vector<TokenIds>& tokens) {
    std::vector<double> pred, truth;
    pred.reserve(idx.size());
    truth.reserve(idx.size());
    NoGradGuard ng;
    for (std::size_t i : idx) {
        pred.push_back(model.predict(tokens[i].ids).value);
        truth.push_back(data.samples[i].value);
    }
    try {
        return pcc(pred, truth);
    } catch (const DegenerateInput&) {
        return 0.0;  // constant predictions carry no signal
    }
}

double metric_on(const Model& model, const Dataset& data, std::span<const std::size_t> idx,
                 const std::vector<TokenIds>& tokens) {
    return data.task == Task::classification
               ? classification_metric(model, data, idx, tokens)
               : regression_metric(model, data, idx, tokens);
}

}  // namespace

void TrainConfig::validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 0 || patience >= max_epochs) {
        throw ConfigError("patience must satisfy 0 <= patience < max_epochs, got " +
                          std::to_string(patience) + " / " + std::to_string(max_epochs));
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
        throw ConfigError("val_fraction must be in [0, 1)");
    }
}

std::vector<FoldSplit> five_fold_split(std::size_t n_samples, std::uint64_t seed,
                                       double val_fraction) {
    constexpr std::size_t kFolds = 5;
    if (n_samples < kFolds) {
        throw ConfigError("five-fold split needs at least 5 samples, got " +
                          std::to_string(n_samples));
    }
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
        throw ConfigError("val_fraction must be in [0, 1)");
    }

    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, kFoldStream));
    rng.shuffle(order);

    // First (n mod 5) folds take the extra sample.
    const std::size_t q = n_samples / kFolds;
    const std::size_t r = n_samples % kFolds;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end)
    std::size_t at = 0;
    for (std::size_t f = 0; f < kFolds; ++f) {
        const std::size_t len = q + (f < r ? 1 : 0);
        ranges.emplace_back(at, at + len);
        at += len;
    }

    std::vector<FoldSplit> folds(kFolds);
    for (std::size_t f = 0; f < kFolds; ++f) {
        FoldSplit& split = folds[f];
        split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(ranges[f].first),
                          order.begin() + static_cast<std::ptrdiff_t>(ranges[f].second));
        std::vector<std::size_t> rest;
        rest.reserve(n_samples - split.test.size());
        for (std::size_t g = 0; g < kFolds; ++g) {
            if (g == f) continue;
            rest.insert(rest.end(),
                        order.begin() + static_cast<std::ptrdiff_t>(ranges[g].first),
                        order.begin() + static_cast<std::ptrdiff_t>(ranges[g].second));
        }
        const auto n_val =
            static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(rest.size())));
        split.train.assign(rest.begin(), rest.end() - static_cast<std::ptrdiff_t>(n_val));
        split.val.assign(rest.end() - static_cast<std::ptrdiff_t>(n_val), rest.end());
    }
    return folds;
}

TrainResult train(const Dataset& data, std::span<const std::size_t> train_idx,
                  std::span<const std::size_t> val_idx, ModelConfig mcfg,
                  TokenizerConfig tcfg, const TrainConfig& cfg) {
    cfg.validate();
    tcfg.validate();
    if (train_idx.empty()) throw ConfigError("empty training set");
    if (data.task == Task::classification && data.n_classes() < 2) {
        throw ConfigError("classification dataset has fewer than 2 classes");
    }

    mcfg.task = data.task;
    if (data.task == Task::classification) mcfg.n_classes = data.n_classes();
    mcfg.k = tcfg.k;
    mcfg.seq_tokens = resolve_seq_tokens(data, mcfg, tcfg.k);
    mcfg.validate();

    const std::vector<TokenIds> tokens = tokenize_all(data, tcfg);

    Model model(mcfg);
    Rng init_rng(mix_seed(cfg.seed, kInitStream));
    model.init_params(init_rng);

    // Regression targets are standardized over the training split; the model
    // keeps the inverse mapping so predictions come back in raw units.
    std::vector<float> std_targets(data.size(), 0.0f);
    if (data.task == Task::regression) {
        double m = 0.0;
        for (std::size_t i : train_idx) m += data.samples[i].value;
        m /= static_cast<double>(train_idx.size());
        double var = 0.0;
        for (std::size_t i : train_idx) {
            const double d = data.samples[i].value - m;
            var += d * d;
        }
        var /= static_cast<double>(train_idx.size());
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        model.target_mean = m;
        model.target_scale = sd;
        for (std::size_t i = 0; i < data.size(); ++i) {
            std_targets[i] = static_cast<float>((data.samples[i].value - m) / sd);
        }
    }

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    adam_cfg.weight_decay = cfg.weight_decay;
    Adam opt(model.parameters(), adam_cfg);

    auto named = model.named_parameters();
    auto snapshot = [&]() {
        std::vector<Buffer<float>> w;
        w.reserve(named.size());
        for (auto& [name, p] : named) w.push_back(p.values());
        return w;
    };
    auto restore = [&](const std::vector<Buffer<float>>& w) {
        for (std::size_t i = 0; i < named.size(); ++i) named[i].second.values() = w[i];
    };

    TrainResult result;
    double best_val = -std::numeric_limits<double>::infinity();
    std::vector<Buffer<float>> best_weights;
    int bad_streak = 0;

    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    const bool use_masking = tcfg.mask_prob > 0.0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), kShuffleStream));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch =
                std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - done);
            opt.zero_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t i = order[done + b];
                const std::vector<TokenId>* ids = &tokens[i].ids;
                MaskedTokenIds masked;
                if (use_masking) {
                    Rng mrng = mask_rng(tcfg, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(epoch));
                    masked = random_mask(tokens[i], tcfg, mrng);
                    ids = &masked.ids;
                }
                auto out = model.forward(*ids);
                Tensor loss;
                if (data.task == Task::classification) {
                    const int label[1] = {data.samples[i].label};
                    loss = cross_entropy_with_logits(out, label);
                } else {
                    const float target[1] = {std_targets[i]};
                    loss = mse(out, std::span<const float>(target, 1));
                }
                loss_sum += static_cast<double>(loss.item());
                backward(scale(loss, 1.0f / static_cast<float>(batch)));
            }
            opt.step();
            done += batch;
        }

        const double train_loss = loss_sum / static_cast<double>(order.size());
        double val_metric = 0.0;
        if (!val_idx.empty()) val_metric = metric_on(model, data, val_idx, tokens);
        result.history.push_back({epoch, train_loss, val_metric});

        if (!std::isfinite(train_loss)) {
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        }

        if (val_idx.empty()) continue;
        if (val_metric > best_val) {
            best_val = val_metric;
            best_weights = snapshot();
            result.best_epoch = epoch;
            bad_streak = 0;
        } else {
            ++bad_streak;
            if (bad_streak > cfg.patience) break;
        }
    }

    if (!best_weights.empty()) {
        restore(best_weights);
        result.best_val_metric = best_val;
    } else {
        result.best_epoch = static_cast<int>(result.history.size()) - 1;
        result.best_val_metric =
            result.history.empty() ? 0.0 : result.history.back().val_metric;
    }
    result.checkpoint = make_checkpoint(model, tcfg, data.label_names, result.best_epoch,
                                        result.best_val_metric);
    return result;
}

std::vector<PhenotypePrediction> predict_dataset(const Model& model, const Dataset& data,
                                                 std::span<const std::size_t> idx,
                                                 const TokenizerConfig& tcfg) {
    std::vector<PhenotypePrediction> out;
    out.reserve(idx.size());
    NoGradGuard ng;
    for (std::size_t i : idx) {
        const TokenIds ids = kmer_tokenize(data.samples[i].seq, tcfg);
        out.push_back(model.predict(ids.ids));
    }
    return out;
}

double evaluate_model(const Model& model, const Dataset& data,
                      std::span<const std::size_t> idx, const TokenizerConfig& tcfg) {
    const auto preds = predict_dataset(model, data, idx, tcfg);
    if (data.task == Task::classification) {
        std::vector<int> p, t;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            p.push_back(preds[j].predicted_class);
            t.push_back(data.samples[idx[j]].label);
        }
        return accuracy(p, t);
    }
    std::vector<double> p, t;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        p.push_back(preds[j].value);
        t.push_back(data.samples[idx[j]].value);
    }
    try {
        return pcc(p, t);
    } catch (const DegenerateInput&) {
        return 0.0;
    }
}

double evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& data) {
    if (ckpt.model.task != data.task) {
        throw ConfigError(std::string("checkpoint task '") + task_name(ckpt.model.task) +
                          "' does not match dataset task '" + task_name(data.task) + "'");
    }
    Model model = restore_model(ckpt);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    return evaluate_model(model, data, idx, ckpt.tokenizer);
}

CvResult cross_validate(const Dataset& data, ModelConfig mcfg, TokenizerConfig tcfg,
                        TrainConfig cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto folds = five_fold_split(data.size(), cfg.seed, cfg.val_fraction);

    CvResult result;
    result.report.metric_name = data.task == Task::classification ? "ACC" : "PCC";
    for (std::size_t f = 0; f < folds.size(); ++f) {
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = mix_seed(cfg.seed, f);
        result.report.fold_seeds.push_back(fold_cfg.seed);

        TrainResult tr = train(data, folds[f].train, folds[f].val, mcfg, tcfg, fold_cfg);
        Model model = restore_model(tr.checkpoint);
        result.report.fold_values.push_back(
            evaluate_model(model, data, folds[f].test, tcfg));
        result.folds.push_back(std::move(tr));
    }
    result.report.mean_value = mean(result.report.fold_values);
    result.report.std_value = sample_std(result.report.fold_values);
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace gs
