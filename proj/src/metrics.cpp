#include "fradiag/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fradiag {

ConfusionMatrix::ConfusionMatrix(int classes) {
    if (classes < 1) throw DomainError("confusion matrix needs at least one class");
    counts_ = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>::Zero(classes, classes);
}

void ConfusionMatrix::add(int truth, int predicted) {
    if (truth < 0 || truth >= classes() || predicted < 0 || predicted >= classes())
        throw DomainError("class index out of range for a " + std::to_string(classes()) + "-class confusion matrix");
    counts_(truth, predicted) += 1;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    if (o.classes() != classes()) throw DomainError("confusion matrices differ in class count");
    counts_ += o.counts_;
    return *this;
}

ConfusionMatrix ConfusionMatrix::from_counts(const Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>& counts) {
    if (counts.rows() != counts.cols() || counts.rows() < 1) throw DomainError("confusion counts must be square");
    if ((counts.array() < 0).any()) throw DomainError("confusion counts must be non-negative");
    ConfusionMatrix cm;
    cm.counts_ = counts;
    return cm;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth, int classes) {
    if (predicted.size() != truth.size()) throw DomainError("prediction and truth lists differ in length");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    if (cm.classes() == 0 || cm.total() == 0) throw DomainError("accuracy of an empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

Eigen::VectorXd per_class_f1(const ConfusionMatrix& cm) {
    if (cm.classes() == 0 || cm.total() == 0) throw DomainError("F1 of an empty confusion matrix");
    const auto& c = cm.counts();
    Eigen::VectorXd f1(cm.classes());
    for (int k = 0; k < cm.classes(); ++k) {
        const double tp = static_cast<double>(c(k, k));
        const double fp = static_cast<double>(c.col(k).sum()) - tp;
        const double fn = static_cast<double>(c.row(k).sum()) - tp;
        if (tp + fp == 0.0 || tp + fn == 0.0) {
            f1[k] = 0.0;
            continue;
        }
        const double precision = tp / (tp + fp);
        const double recall = tp / (tp + fn);
        f1[k] = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return f1;
}

double macro_f1(const ConfusionMatrix& cm) { return per_class_f1(cm).mean(); }

double cc(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.size() != y.size()) throw DomainError("cc: length mismatch");
    if (x.size() < 2) throw DomainError("cc needs at least two points");
    const Eigen::ArrayXd dx = x.array() - x.mean();
    const Eigen::ArrayXd dy = y.array() - y.mean();
    const double sxx = dx.square().sum();
    const double syy = dy.square().sum();
    if (sxx == 0.0 || syy == 0.0) throw DomainError("cc of a constant curve is undefined");
    const double r = (dx * dy).sum() / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

double ed(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.size() != y.size()) throw DomainError("ed: length mismatch");
    return (x - y).norm();
}

FRASweep mean_curve(std::span<const FRASweep> sweeps) {
    if (sweeps.empty()) throw DomainError("mean of an empty curve list");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(sweeps.front().values.size());
    for (const auto& s : sweeps) {
        if (s.grid_id != sweeps.front().grid_id || s.values.size() != acc.size())
            throw DomainError("mean_curve: sweeps are on different grids");
        acc += s.values.cast<double>();
    }
    acc /= static_cast<double>(sweeps.size());
    return FRASweep{acc.cast<float>(), sweeps.front().grid_id};
}

FRASweep mean_curve(const LabeledDataset& ds, const std::function<bool(const FaultLabel&)>& keep) {
    std::vector<FRASweep> picked;
    for (const auto& s : ds.samples)
        if (keep(s.label)) picked.push_back(s.sweep);
    return mean_curve(picked);
}

CurveStats cc_ed_map(const LabeledDataset& ds, const FRASweep& reference,
                     const std::function<bool(const FaultLabel&)>& keep) {
    if (reference.grid_id != ds.grid.id() || static_cast<std::size_t>(reference.values.size()) != ds.grid.size())
        throw DomainError("reference curve is not on the dataset grid");
    CurveStats stats;
    stats.reference = reference;
    const Eigen::VectorXd ref = reference.values.cast<double>();
    std::map<int, std::vector<FRASweep>> by_degree;
    for (const auto& s : ds.samples) {
        if (!keep(s.label)) continue;
        const Eigen::VectorXd v = s.sweep.values.cast<double>();
        stats.points.push_back({s.label, cc(v, ref), ed(v, ref)});
        by_degree[s.label.degree].push_back(s.sweep);
    }
    for (const auto& [degree, sweeps] : by_degree) stats.degree_means.emplace(degree, mean_curve(sweeps));
    return stats;
}

CurveStats cc_ed_map(const LabeledDataset& ds, const std::function<bool(const FaultLabel&)>& keep) {
    return cc_ed_map(ds, mean_curve(ds, [](const FaultLabel& l) { return l.type == FaultType::Normal; }), keep);
}

}  // namespace fradiag
