#include "gstk/metrics.hpp"

#include <cmath>
#include <string>

#include "gstk/errors.hpp"

namespace gs {

double pcc(std::span<const double> y_pred, std::span<const double> y_label) {
    if (y_pred.size() != y_label.size()) {
        throw ShapeError("pcc: " + std::to_string(y_pred.size()) + " predictions vs " +
                         std::to_string(y_label.size()) + " labels");
    }
    const std::size_t n = y_pred.size();
    if (n < 2) throw DegenerateInput("pcc needs at least 2 points");

    double mp = 0.0, ml = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += y_pred[i];
        ml += y_label[i];
    }
    mp /= static_cast<double>(n);
    ml /= static_cast<double>(n);

    double num = 0.0, sp = 0.0, sl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = y_pred[i] - mp;
        const double dl = y_label[i] - ml;
        num += dp * dl;
        sp += dp * dp;
        sl += dl * dl;
    }
    if (sp == 0.0 || sl == 0.0) {
        throw DegenerateInput("pcc is undefined for a constant vector");
    }
    return num / std::sqrt(sp * sl);
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) {
        throw ShapeError("accuracy: " + std::to_string(predicted.size()) +
                         " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    if (predicted.empty()) throw DegenerateInput("accuracy of an empty batch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double mean(std::span<const double> xs) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace gs
