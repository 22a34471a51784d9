#pragma once

// Confusion matrices, accuracy / macro-F1, and the CC / ED curve statistics.

#include <functional>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fradiag/data.hpp"

namespace fradiag {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classes);

    int classes() const { return static_cast<int>(counts_.rows()); }
    void add(int truth, int predicted);
    long long operator()(int truth, int predicted) const { return counts_(truth, predicted); }
    const Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>& counts() const { return counts_; }
    long long total() const { return counts_.sum(); }
    long long trace() const { return counts_.trace(); }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o);
    bool operator==(const ConfusionMatrix& o) const { return counts_ == o.counts_; }

    static ConfusionMatrix from_counts(const Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>& counts);

private:
    Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts_;
};

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth, int classes);

double accuracy(const ConfusionMatrix& cm);
/// One-vs-rest F1 per class; a class with no predictions or no true samples scores 0.
Eigen::VectorXd per_class_f1(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

/// Pearson correlation coefficient.
double cc(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);
/// Euclidean distance.
double ed(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

FRASweep mean_curve(std::span<const FRASweep> sweeps);
FRASweep mean_curve(const LabeledDataset& ds, const std::function<bool(const FaultLabel&)>& keep);

struct CurvePoint {
    FaultLabel label;
    double cc = 0.0;
    double ed = 0.0;
};

struct CurveStats {
    FRASweep reference;
    std::vector<CurvePoint> points;
    /// Mean curve of the mapped samples for each degree (0 = Normal).
    std::map<int, FRASweep> degree_means;
};

/// One (CC, ED) point per sample accepted by `keep`, against `reference`.
CurveStats cc_ed_map(const LabeledDataset& ds, const FRASweep& reference,
                     const std::function<bool(const FaultLabel&)>& keep);
/// As above with the mean Normal curve of `ds` as the reference.
CurveStats cc_ed_map(const LabeledDataset& ds, const std::function<bool(const FaultLabel&)>& keep);

}  // namespace fradiag
