#pragma once

#include <string>
#include <vector>

#include "gstk/dataset.hpp"
#include "gstk/train.hpp"

namespace gs {

// Ablation grids over the tokenizer knobs. `mask` sweeps the masking
// proportion over {0, 0.15, 0.30, 0.45, 0.60}; `kmer` sweeps k over 1..8;
// `component` crosses {character-level, k-mer} x {no masking, masking}.
enum class GridKind { kmer, mask, component };

GridKind grid_kind_from_name(const std::string& name);

struct GridRow {
    std::string cell;
    std::string metric_name;
    double mean_value = 0.0;
    double std_value = 0.0;
    std::vector<double> fold_values;
};

std::vector<GridRow> run_grid(GridKind kind, const Dataset& data, ModelConfig mcfg,
                              TokenizerConfig base_tok, TrainConfig cfg);

}  // namespace gs
