#pragma once

// The six FRA-Dia MLP architectures and an extreme-learning-machine baseline.

#include <array>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

#include "fradiag/data.hpp"
#include "fradiag/mlp.hpp"

namespace fradiag {

enum class Architecture : std::uint8_t { Dialight, Diagnoser, DiaL, DiaLD, DiaXL, DiaXLD };

inline constexpr std::array<Architecture, 6> kArchitectures = {Architecture::Dialight, Architecture::Diagnoser,
                                                                Architecture::DiaL,     Architecture::DiaLD,
                                                                Architecture::DiaXL,    Architecture::DiaXLD};

/// "FRA-Dialight", "FRA-DiaL-D", ...
std::string_view to_string(Architecture a);
/// Case-insensitive; the "FRA-" prefix is optional.
Architecture parse_architecture(std::string_view s);

/// Hidden widths are multiplied by `scale` and rounded up.
ModelSpec build(Architecture a, int out_width, double scale = 1.0);

std::int64_t param_count(const ModelSpec& spec);

struct ELMModel {
    Eigen::MatrixXd hidden_weights;  ///< hidden x input
    Eigen::VectorXd hidden_bias;
    Eigen::MatrixXd readout;  ///< classes x hidden
    double ridge = 1e-3;
    double input_scale = 0.01;
    LabelScheme scheme;

    int hidden() const { return static_cast<int>(hidden_weights.rows()); }
};

inline constexpr int kElmHidden = 1000;
inline constexpr double kElmRidge = 1e-3;

ELMModel elm_fit(const LabeledDataset& ds, const LabelScheme& scheme, int hidden = kElmHidden, double ridge = kElmRidge,
                 std::uint64_t seed = 0);
/// Raw readout scores, one per class (not normalised).
Eigen::VectorXd elm_predict(const ELMModel& m, const Eigen::Ref<const Eigen::VectorXf>& x);

}  // namespace fradiag
