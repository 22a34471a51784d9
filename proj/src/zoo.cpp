#include "fradiag/zoo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>

namespace fradiag {

namespace {

struct Shape {
    std::vector<int> hidden;
    std::vector<int> dropout_after;
};

Shape shape_of(Architecture a) {
    switch (a) {
        case Architecture::Dialight: return {{900, 220}, {}};
        case Architecture::Diagnoser: return {std::vector<int>(4, 2100), {}};
        case Architecture::DiaL: return {std::vector<int>(6, 3800), {}};
        case Architecture::DiaLD: return {std::vector<int>(6, 3800), {4}};
        case Architecture::DiaXL: return {std::vector<int>(9, 1900), {}};
        case Architecture::DiaXLD: return {std::vector<int>(9, 1900), {2, 4}};
    }
    throw DomainError("unknown architecture");
}

std::string fold_case(std::string_view s) {
    std::string out;
    for (char c : s)
        if (c != '-' && c != '_') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

}  // namespace

std::string_view to_string(Architecture a) {
    switch (a) {
        case Architecture::Dialight: return "FRA-Dialight";
        case Architecture::Diagnoser: return "FRA-Diagnoser";
        case Architecture::DiaL: return "FRA-DiaL";
        case Architecture::DiaLD: return "FRA-DiaL-D";
        case Architecture::DiaXL: return "FRA-DiaXL";
        case Architecture::DiaXLD: return "FRA-DiaXL-D";
    }
    return "?";
}

Architecture parse_architecture(std::string_view s) {
    std::string key = fold_case(s);
    if (key.rfind("fra", 0) == 0) key.erase(0, 3);
    for (Architecture a : kArchitectures) {
        std::string name = fold_case(to_string(a)).substr(3);
        if (key == name) return a;
    }
    throw DomainError("unknown architecture '" + std::string(s) + "'");
}

ModelSpec build(Architecture a, int out_width, double scale) {
    if (out_width < 2) throw DomainError("output width must be at least 2");
    if (!(scale > 0.0 && scale <= 1.0)) throw DomainError("scale must be in (0, 1]");
    const Shape shape = shape_of(a);
    ModelSpec spec;
    spec.name = std::string(to_string(a));
    spec.widths.push_back(static_cast<int>(kGridPoints));
    for (int w : shape.hidden) spec.widths.push_back(static_cast<int>(std::ceil(w * scale - 1e-9)));
    spec.widths.push_back(out_width);
    spec.dropout_after = shape.dropout_after;
    validate(spec);
    return spec;
}

std::int64_t param_count(const ModelSpec& spec) {
    std::int64_t n = 0;
    for (int i = 0; i < spec.depth(); ++i)
        n += static_cast<std::int64_t>(spec.widths[i]) * spec.widths[i + 1] + spec.widths[i + 1];
    return n;
}

namespace {

Eigen::MatrixXd hidden_features(const ELMModel& m, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    Eigen::MatrixXd H = m.hidden_weights * (X * m.input_scale);
    H.colwise() += m.hidden_bias;
    return H.cwiseMax(0.0);
}

}  // namespace

ELMModel elm_fit(const LabeledDataset& ds, const LabelScheme& scheme, int hidden, double ridge, std::uint64_t seed) {
    if (hidden < 1) throw DomainError("ELM hidden width must be at least 1");
    if (!(ridge > 0.0)) throw DomainError("ELM ridge must be positive");
    if (ds.samples.empty()) throw DomainError("ELM fit on an empty dataset");

    const auto inputs = static_cast<Eigen::Index>(ds.samples.front().sweep.values.size());
    ELMModel m;
    m.ridge = ridge;
    m.scheme = scheme;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(inputs)));
    m.hidden_weights.resize(hidden, inputs);
    for (Eigen::Index c = 0; c < inputs; ++c)
        for (Eigen::Index r = 0; r < hidden; ++r) m.hidden_weights(r, c) = dist(rng);
    std::normal_distribution<double> bias(0.0, 1.0);
    m.hidden_bias.resize(hidden);
    for (Eigen::Index r = 0; r < hidden; ++r) m.hidden_bias[r] = bias(rng);

    const auto labels = encode_all(scheme, ds);
    Eigen::MatrixXd X(inputs, static_cast<Eigen::Index>(ds.size()));
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(scheme.class_count(), X.cols());
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
        X.col(i) = ds.samples[static_cast<std::size_t>(i)].sweep.values.cast<double>();
        T(labels[static_cast<std::size_t>(i)], i) = 1.0;
    }
    const Eigen::MatrixXd H = hidden_features(m, X);
    Eigen::MatrixXd gram = H * H.transpose();
    gram.diagonal().array() += ridge;
    m.readout = gram.ldlt().solve(H * T.transpose()).transpose();
    if (!m.readout.allFinite()) throw NumericalError("ELM readout solve produced non-finite weights");
    return m;
}

Eigen::VectorXd elm_predict(const ELMModel& m, const Eigen::Ref<const Eigen::VectorXf>& x) {
    if (x.size() != m.hidden_weights.cols()) throw DomainError("ELM input length mismatch");
    const Eigen::MatrixXd X = x.cast<double>();
    return m.readout * hidden_features(m, X);
}

}  // namespace fradiag
