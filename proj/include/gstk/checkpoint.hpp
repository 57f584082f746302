#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gstk/model.hpp"
#include "gstk/tokenizer.hpp"

namespace gs {

constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<float> data;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    ModelConfig model;
    TokenizerConfig tokenizer;
    std::vector<std::string> label_names;  // classification
    double target_mean = 0.0;              // regression de-standardization
    double target_scale = 1.0;
    int best_epoch = -1;
    double best_val_metric = 0.0;
    std::vector<NamedTensor> tensors;
};

Checkpoint make_checkpoint(Model& model, const TokenizerConfig& tok,
                           const std::vector<std::string>& label_names,
                           int best_epoch, double best_val_metric);

Model restore_model(const Checkpoint& ckpt);

// Binary layout: magic `GSCK`, u32 LE version, u32-length-prefixed UTF-8
// config blob of key=value lines, then one record per tensor: u32-length-
// prefixed name, u32 rank, u64 dims, row-major IEEE-754 LE f32 data.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gs
