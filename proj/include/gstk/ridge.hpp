#pragma once

#include <cstdint>

#include "gstk/dataset.hpp"
#include "gstk/train.hpp"

namespace gs {

// Closed-form ridge on per-locus one-hot letter features, solved in the dual
// (Gram) form so the feature matrix is never materialized: the dot product of
// two one-hot rows is the number of loci where the letters agree. Regression
// centers the targets; classification is one-vs-rest on +-1 targets with an
// argmax decision. Evaluated under the same five_fold_split as the model.
FoldReport ridge_cross_validate(const Dataset& data, double l2, std::uint64_t seed,
                                double val_fraction = 0.1);

}  // namespace gs
