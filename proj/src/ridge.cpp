#include "gstk/ridge.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <chrono>
#include <vector>

#include "gstk/errors.hpp"
#include "gstk/metrics.hpp"

namespace gs {

namespace {

// Gram entry between two letter strings: matching loci plus a constant
// feature shared by every sample.
double gram(const std::vector<PLetter>& a, const std::vector<PLetter>& b) {
    const std::size_t n = a.size();
    std::size_t matches = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == b[i]) ++matches;
    }
    return static_cast<double>(matches) + 1.0;
}

}  // namespace

FoldReport ridge_cross_validate(const Dataset& data, double l2, std::uint64_t seed,
                                double val_fraction) {
    if (!(l2 > 0.0)) throw ConfigError("ridge requires l2 > 0");
    const auto t0 = std::chrono::steady_clock::now();
    const auto folds = five_fold_split(data.size(), seed, val_fraction);

    FoldReport report;
    report.metric_name = data.task == Task::classification ? "ACC" : "PCC";

    for (const FoldSplit& fold : folds) {
        // Early stopping plays no role here, so the carve-out rejoins training.
        std::vector<std::size_t> tr(fold.train);
        tr.insert(tr.end(), fold.val.begin(), fold.val.end());
        const std::vector<std::size_t>& te = fold.test;
        const auto n_tr = static_cast<Eigen::Index>(tr.size());
        const auto n_te = static_cast<Eigen::Index>(te.size());

        Eigen::MatrixXd K(n_tr, n_tr);
        for (Eigen::Index i = 0; i < n_tr; ++i) {
            for (Eigen::Index j = i; j < n_tr; ++j) {
                const double v = gram(data.samples[tr[static_cast<std::size_t>(i)]].seq.letters,
                                      data.samples[tr[static_cast<std::size_t>(j)]].seq.letters);
                K(i, j) = v;
                K(j, i) = v;
            }
        }
        K.diagonal().array() += l2;
        const Eigen::LLT<Eigen::MatrixXd> llt(K);
        if (llt.info() != Eigen::Success) {
            throw NumericError("ridge Gram factorization failed");
        }

        Eigen::MatrixXd K_test(n_te, n_tr);
        for (Eigen::Index i = 0; i < n_te; ++i) {
            for (Eigen::Index j = 0; j < n_tr; ++j) {
                K_test(i, j) = gram(data.samples[te[static_cast<std::size_t>(i)]].seq.letters,
                                    data.samples[tr[static_cast<std::size_t>(j)]].seq.letters);
            }
        }

        if (data.task == Task::regression) {
            Eigen::VectorXd y(n_tr);
            for (Eigen::Index i = 0; i < n_tr; ++i) {
                y(i) = data.samples[tr[static_cast<std::size_t>(i)]].value;
            }
            const double y_mean = y.mean();
            const Eigen::VectorXd alpha = llt.solve((y.array() - y_mean).matrix());
            const Eigen::VectorXd pred = (K_test * alpha).array() + y_mean;

            std::vector<double> p(pred.data(), pred.data() + n_te);
            std::vector<double> t;
            t.reserve(te.size());
            for (std::size_t i : te) t.push_back(data.samples[i].value);
            double metric = 0.0;
            try {
                metric = pcc(p, t);
            } catch (const DegenerateInput&) {
                metric = 0.0;  // fully shrunk predictions
            }
            report.fold_values.push_back(metric);
        } else {
            const int classes = data.n_classes();
            Eigen::MatrixXd targets(n_tr, classes);
            for (Eigen::Index i = 0; i < n_tr; ++i) {
                const int label = data.samples[tr[static_cast<std::size_t>(i)]].label;
                for (int c = 0; c < classes; ++c) targets(i, c) = label == c ? 1.0 : -1.0;
            }
            const Eigen::MatrixXd alpha = llt.solve(targets);
            const Eigen::MatrixXd scores = K_test * alpha;

            std::vector<int> pred, truth;
            pred.reserve(te.size());
            truth.reserve(te.size());
            for (Eigen::Index i = 0; i < n_te; ++i) {
                Eigen::Index best = 0;
                scores.row(i).maxCoeff(&best);
                pred.push_back(static_cast<int>(best));
                truth.push_back(data.samples[te[static_cast<std::size_t>(i)]].label);
            }
            report.fold_values.push_back(accuracy(pred, truth));
        }
    }

    report.mean_value = mean(report.fold_values);
    report.std_value = sample_std(report.fold_values);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace gs
