#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gstk/checkpoint.hpp"
#include "gstk/dataset.hpp"
#include "gstk/model.hpp"
#include "gstk/tokenizer.hpp"

namespace gs {

struct TrainConfig {
    int max_epochs = 80;
    int patience = 10;  // epochs without validation improvement
    int batch_size = 16;
    double lr = 1e-4;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;  // carve-out taken from each fold's training split

    void validate() const;
};

struct FoldSplit {
    std::vector<std::size_t> train, val, test;
};

// Seeded shuffle split into 5 folds with sizes differing by at most 1; each
// fold serves once as test and a val_fraction slice of the remaining
// training indices is held out for early stopping. ConfigError when n < 5.
std::vector<FoldSplit> five_fold_split(std::size_t n_samples, std::uint64_t seed,
                                       double val_fraction = 0.1);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_metric = 0.0;
};

// Mini-batch Adam on the task loss with fresh masking every epoch; stops when
// the validation metric has not improved for more than `patience` epochs or
// at max_epochs, and returns the best-validation weights. An empty validation
// set disables early stopping (the final weights win).
TrainResult train(const Dataset& data, std::span<const std::size_t> train_idx,
                  std::span<const std::size_t> val_idx, ModelConfig mcfg,
                  TokenizerConfig tcfg, const TrainConfig& cfg);

// Forward passes without masking.
std::vector<PhenotypePrediction> predict_dataset(const Model& model, const Dataset& data,
                                                 std::span<const std::size_t> idx,
                                                 const TokenizerConfig& tcfg);

// ACC (argmax) for classification, PCC for regression. Degenerate (constant)
// regression predictions score 0.
double evaluate_model(const Model& model, const Dataset& data,
                      std::span<const std::size_t> idx, const TokenizerConfig& tcfg);

double evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& data);

struct FoldReport {
    std::string metric_name;  // "ACC" or "PCC"
    std::vector<double> fold_values;
    double mean_value = 0.0;
    double std_value = 0.0;  // sample standard deviation
    std::vector<std::uint64_t> fold_seeds;
    double wall_seconds = 0.0;
};

struct CvResult {
    FoldReport report;
    std::vector<TrainResult> folds;
};

CvResult cross_validate(const Dataset& data, ModelConfig mcfg, TokenizerConfig tcfg,
                        TrainConfig cfg);

}  // namespace gs
