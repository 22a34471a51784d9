#pragma once

// Weighted fusion of two classifiers and the two-stage EE -> CIW diagnosis pipeline.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fradiag/data.hpp"
#include "fradiag/mlp.hpp"

namespace fradiag {

/// Maps one sweep to class probabilities under a fixed label scheme.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual const LabelScheme& scheme() const = 0;
    /// Connection the classifier was trained for.
    virtual Connection connection() const = 0;
    virtual Eigen::VectorXd predict(const FRASweep& sweep) const = 0;
};

class MlpClassifier final : public Classifier {
public:
    explicit MlpClassifier(ModelFile model) : model_(std::move(model)) {}
    const LabelScheme& scheme() const override { return model_.scheme; }
    Connection connection() const override { return model_.connection; }
    Eigen::VectorXd predict(const FRASweep& sweep) const override;
    const ModelFile& model() const { return model_; }

private:
    ModelFile model_;
};

/// lambda * p1 + (1 - lambda) * p2
Eigen::VectorXd fuse(const Eigen::Ref<const Eigen::VectorXd>& p1, const Eigen::Ref<const Eigen::VectorXd>& p2, double lambda);

class FusedClassifier final : public Classifier {
public:
    /// Both members must share the label scheme and connection.
    FusedClassifier(std::shared_ptr<const Classifier> first, std::shared_ptr<const Classifier> second, double lambda);
    const LabelScheme& scheme() const override { return first_->scheme(); }
    Connection connection() const override { return first_->connection(); }
    Eigen::VectorXd predict(const FRASweep& sweep) const override;
    double lambda() const { return lambda_; }

private:
    std::shared_ptr<const Classifier> first_, second_;
    double lambda_;
};

inline constexpr int kLambdaSteps = 20;

struct LambdaChoice {
    double lambda = 0.5;
    double accuracy = 0.0;
    /// Validation accuracy at lambda = i / kLambdaSteps.
    std::array<double, kLambdaSteps + 1> grid_accuracy{};
};

/// Accuracy-maximising lambda on {0, 0.05, ..., 1}; ties go to the lambda nearest 0.5, then the smaller.
LambdaChoice tune_lambda(const Classifier& m1, const Classifier& m2, const LabeledDataset& validation);

struct Diagnosis {
    bool healthy = true;
    FaultType type = FaultType::Normal;
    int degree = 0;
    bool conflict = false;
    std::vector<std::string> stage1_classes;
    Eigen::VectorXd stage1_probs;
    std::vector<std::string> stage2_classes;
    std::optional<Eigen::VectorXd> stage2_probs;

    std::string verdict() const;
};

/// Stage 1 (EE, Normal as class 0) gates stage 2 (CIW, joint scheme); stage 2 runs only when
/// stage 1 reports a fault. Sweeps must carry `grid_id`.
Diagnosis diagnose(const Classifier& stage1, const Classifier& stage2, const FRASweep& ee, const FRASweep& ciw,
                   std::uint64_t grid_id);
/// Stage 2 alone, for units already known to be faulty.
Diagnosis diagnose_stage2_only(const Classifier& stage2, const FRASweep& ciw, std::uint64_t grid_id);

std::string format_diagnosis(const Diagnosis& d);
Diagnosis parse_diagnosis(const std::string& text);

struct StageRef {
    std::string model;
    /// Optional second model fused with `model` at weight `lambda`.
    std::string partner;
    double lambda = 1.0;

    bool operator==(const StageRef&) const = default;
};

struct PipelineManifest {
    StageRef stage1;
    StageRef stage2;
    std::uint64_t grid_id = 0;

    bool operator==(const PipelineManifest&) const = default;
};

std::string format_manifest(const PipelineManifest& m);
PipelineManifest parse_manifest(const std::string& text);

struct Pipeline {
    std::shared_ptr<const Classifier> stage1;
    std::shared_ptr<const Classifier> stage2;
    std::uint64_t grid_id = 0;
};

/// Loads the models a manifest names; relative paths resolve against `base_dir`.
Pipeline load_pipeline(const PipelineManifest& m, const std::string& base_dir = ".");

}  // namespace fradiag
