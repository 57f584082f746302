#pragma once

#include <string>
#include <vector>

#include "gstk/model.hpp"
#include "gstk/snp_codec.hpp"

namespace gs {

struct Sample {
    std::string id;
    PreprocessedSequence seq;
    double value = 0.0;  // regression target, or dense class id for classification
    int label = -1;      // classification only
};

struct Dataset {
    Task task = Task::regression;
    std::vector<Sample> samples;
    std::size_t seq_length = 0;             // shared N_l
    std::vector<std::string> label_names;   // classification: dense id -> name

    std::size_t size() const { return samples.size(); }
    int n_classes() const { return static_cast<int>(label_names.size()); }
};

// Joins a sequence file with a phenotype CSV (`sample_id,trait,value` header)
// on sample id for one trait. Classification values are remapped to dense ids
// in sorted order; regression values must parse as decimal numbers.
Dataset load_dataset(const std::string& seq_path, const std::string& pheno_path,
                     const std::string& trait, Task task);

}  // namespace gs
