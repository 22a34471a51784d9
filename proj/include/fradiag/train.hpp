#pragma once

// Mini-batch Adam training, evaluation, and stratified k-fold cross-validation.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fradiag/data.hpp"
#include "fradiag/metrics.hpp"
#include "fradiag/mlp.hpp"

namespace fradiag {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 32;
    int max_epochs = 200;
    /// Stop after this many epochs without a train-loss improvement larger than min_improvement.
    int patience = 20;
    double min_improvement = 1e-5;
    std::uint64_t init_seed = 1;
    std::uint64_t shuffle_seed = 2;
    std::uint64_t dropout_seed = 3;

    /// Copy with all three seeds derived from (seed, stream).
    TrainConfig reseeded(std::uint64_t seed, std::uint64_t stream = 0) const;
};

void validate(const TrainConfig& cfg);

struct TrainResult {
    ModelParams<float> params;
    std::vector<double> loss_history;
    std::vector<std::string> warnings;
};

/// Sweeps of `ds` as the columns of a (points x samples) matrix.
Eigen::MatrixXf design_matrix(const LabeledDataset& ds);

TrainResult train(const ModelSpec& spec, const LabeledDataset& ds, const LabelScheme& scheme, const TrainConfig& cfg);

/// Eval-mode softmax outputs, one column per sample.
Eigen::MatrixXf predict_all(const ModelParams<float>& params, const ModelSpec& spec, const Eigen::Ref<const Eigen::MatrixXf>& X);
std::vector<int> predict_classes(const ModelParams<float>& params, const ModelSpec& spec, const LabeledDataset& ds);
ConfusionMatrix evaluate(const ModelParams<float>& params, const ModelSpec& spec, const LabeledDataset& ds,
                         const LabelScheme& scheme);

struct FoldResult {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    ConfusionMatrix confusion;
    std::size_t train_size = 0;
    std::vector<int> held_out;  ///< dataset indices evaluated in this fold
    double seconds = 0.0;
    int epochs = 0;
};

struct CVReport {
    std::string architecture;
    LabelScheme scheme;
    int k = 0;
    std::size_t samples = 0;
    std::vector<FoldResult> folds;
    std::vector<std::string> warnings;
    double mean_accuracy = 0.0;
    double mean_macro_f1 = 0.0;
    /// Sample standard deviation across folds and its standard error (std / sqrt(k)).
    double std_accuracy = 0.0;
    double sem_accuracy = 0.0;
    double std_macro_f1 = 0.0;
    double sem_macro_f1 = 0.0;
    double seconds = 0.0;

    ConfusionMatrix pooled_confusion() const;
};

using SpecBuilder = std::function<ModelSpec(int out_width)>;

CVReport cross_validate(const SpecBuilder& builder, const LabeledDataset& ds, const LabelScheme& scheme, int k,
                        const TrainConfig& cfg, std::uint64_t fold_seed, int jobs = 1);

/// `report.txt` (key-value, one metric per line) plus `fold_<i>_confusion.csv` per fold into
/// `dir`. Timings go to `timing.txt` so the other files stay reproducible.
void write_report(const CVReport& report, const std::string& dir);
CVReport read_report(const std::string& dir);
std::string format_report(const CVReport& report);
CVReport parse_report(const std::string& text);

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

}  // namespace fradiag
