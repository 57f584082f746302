#pragma once

#include <span>
#include <vector>

namespace gs {

// Pearson correlation coefficient. ShapeError on a length mismatch;
// DegenerateInput when either vector is constant (or shorter than 2), which
// makes the denominator vanish.
double pcc(std::span<const double> y_pred, std::span<const double> y_label);

// Fraction of positions where the predicted class equals the label.
double accuracy(std::span<const int> predicted, std::span<const int> labels);

double mean(std::span<const double> xs);

// Sample (n-1) standard deviation; 0 for a single value.
double sample_std(std::span<const double> xs);

}  // namespace gs
