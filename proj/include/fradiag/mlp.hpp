#pragma once

// Dense rectifier MLP with softmax output, trained by mini-batch backpropagation and Adam.
//
// Samples are columns: a batch is a (width x batch) matrix. Everything is templated on the
// scalar type; float is the production path, double exists for gradient verification.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fradiag/data.hpp"
#include "fradiag/error.hpp"

namespace fradiag {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ModelSpec {
    std::string name;
    /// Layer widths: input, hidden..., output.
    std::vector<int> widths;
    /// 1-based learnable layers whose (rectified) output is dropped out during training.
    std::vector<int> dropout_after;
    double dropout_rate = 0.5;
    /// Raw dB inputs are multiplied by this before the first layer.
    double input_scale = 0.01;

    int depth() const { return static_cast<int>(widths.size()) - 1; }
    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    bool drops_after(int layer) const;

    bool operator==(const ModelSpec&) const = default;
};

void validate(const ModelSpec& spec);

template <typename Scalar>
struct ModelParams {
    std::vector<MatrixX<Scalar>> W;  ///< W[i] is (widths[i+1] x widths[i])
    std::vector<VectorX<Scalar>> b;

    std::size_t layers() const { return W.size(); }

    template <typename Other>
    ModelParams<Other> cast() const {
        ModelParams<Other> out;
        for (const auto& w : W) out.W.push_back(w.template cast<Other>());
        for (const auto& v : b) out.b.push_back(v.template cast<Other>());
        return out;
    }

    static ModelParams zeros_like(const ModelSpec& spec) {
        ModelParams p;
        for (int i = 0; i < spec.depth(); ++i) {
            p.W.push_back(MatrixX<Scalar>::Zero(spec.widths[i + 1], spec.widths[i]));
            p.b.push_back(VectorX<Scalar>::Zero(spec.widths[i + 1]));
        }
        return p;
    }

    bool operator==(const ModelParams& o) const {
        if (layers() != o.layers()) return false;
        for (std::size_t i = 0; i < layers(); ++i)
            if (W[i].rows() != o.W[i].rows() || W[i].cols() != o.W[i].cols() || W[i] != o.W[i] || b[i] != o.b[i])
                return false;
        return true;
    }
};

/// Throws DomainError unless params have the shapes spec prescribes and are finite.
template <typename Scalar>
void check_shapes(const ModelParams<Scalar>& params, const ModelSpec& spec) {
    if (params.layers() != static_cast<std::size_t>(spec.depth()) || params.b.size() != params.W.size())
        throw DomainError("parameter layer count does not match model spec");
    for (int i = 0; i < spec.depth(); ++i) {
        const auto& W = params.W[static_cast<std::size_t>(i)];
        if (W.rows() != spec.widths[i + 1] || W.cols() != spec.widths[i] ||
            params.b[static_cast<std::size_t>(i)].size() != spec.widths[i + 1])
            throw DomainError("layer " + std::to_string(i + 1) + " shape does not match model spec");
    }
}

/// He-normal weights (variance 2 / fan_in), zero biases. Draws are made in double so float and
/// double parameter sets from the same seed agree to rounding.
template <typename Scalar>
ModelParams<Scalar> init(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    std::mt19937_64 rng(seed);
    ModelParams<Scalar> p = ModelParams<Scalar>::zeros_like(spec);
    for (int i = 0; i < spec.depth(); ++i) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / spec.widths[i]));
        auto& W = p.W[static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < W.cols(); ++c)
            for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = static_cast<Scalar>(dist(rng));
    }
    return p;
}

/// Column-wise shift-stabilised softmax.
template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    if (logits.size() == 0) throw DomainError("softmax of an empty vector");
    MatrixX<Scalar> out = logits;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        auto col = out.col(c);
        col.array() = (col.array() - col.maxCoeff()).exp();
        col /= col.sum();
    }
    if constexpr (Derived::ColsAtCompileTime == 1)
        return VectorX<Scalar>(out.col(0));
    else
        return out;
}

inline constexpr double kProbabilityClamp = 1e-12;

/// Mean categorical cross-entropy; probs and one-hot targets are (classes x batch).
template <typename DerivedP, typename DerivedY>
typename DerivedP::Scalar cross_entropy(const Eigen::MatrixBase<DerivedP>& probs, const Eigen::MatrixBase<DerivedY>& targets) {
    using Scalar = typename DerivedP::Scalar;
    if (probs.cols() == 0) throw DomainError("cross_entropy of an empty batch");
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw DomainError("cross_entropy: prediction and target shapes differ");
    const Scalar floor = static_cast<Scalar>(kProbabilityClamp);
    const Scalar total = -(targets.array().template cast<Scalar>() * probs.array().max(floor).log()).sum();
    return total / static_cast<Scalar>(probs.cols());
}

template <typename Scalar>
struct ForwardCache {
    /// activations[0] is the scaled input; activations[i] the output of hidden layer i.
    std::vector<MatrixX<Scalar>> activations;
    /// Dropout scale factors (0 or 1/(1-rate)) per hidden layer; empty matrix = no dropout.
    std::vector<MatrixX<Scalar>> masks;
    MatrixX<Scalar> probs;
};

/// Forward pass over a batch of raw dB columns. With a null `dropout_rng` the pass is in eval
/// mode (no dropout, no rescaling); otherwise inverted dropout draws masks from it.
template <typename Scalar>
ForwardCache<Scalar> forward(const ModelParams<Scalar>& params, const ModelSpec& spec,
                             const Eigen::Ref<const MatrixX<Scalar>>& inputs, std::mt19937_64* dropout_rng = nullptr) {
    check_shapes(params, spec);
    if (inputs.rows() != spec.input_width())
        throw DomainError("input length " + std::to_string(inputs.rows()) + " != " + std::to_string(spec.input_width()));
    if (!inputs.allFinite()) throw DomainError("non-finite input");

    const int depth = spec.depth();
    ForwardCache<Scalar> cache;
    cache.activations.reserve(static_cast<std::size_t>(depth));
    cache.masks.resize(static_cast<std::size_t>(depth));
    cache.activations.push_back(inputs * static_cast<Scalar>(spec.input_scale));

    const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - spec.dropout_rate));
    std::bernoulli_distribution drop(spec.dropout_rate);
    for (int i = 0; i < depth; ++i) {
        const auto& W = params.W[static_cast<std::size_t>(i)];
        const auto& b = params.b[static_cast<std::size_t>(i)];
        MatrixX<Scalar> z = W * cache.activations.back();
        z.colwise() += b;
        if (i == depth - 1) {
            cache.probs = softmax(z);
            break;
        }
        z = z.cwiseMax(Scalar(0));
        if (dropout_rng != nullptr && spec.drops_after(i + 1)) {
            MatrixX<Scalar> mask(z.rows(), z.cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
                for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = drop(*dropout_rng) ? Scalar(0) : keep_scale;
            z.array() *= mask.array();
            cache.masks[static_cast<std::size_t>(i + 1)] = std::move(mask);
        }
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

/// Eval-mode class probabilities for a single sweep.
template <typename Scalar>
VectorX<Scalar> predict(const ModelParams<Scalar>& params, const ModelSpec& spec, const Eigen::Ref<const VectorX<Scalar>>& x) {
    return forward<Scalar>(params, spec, x).probs.col(0);
}

/// Exact gradient of the mean cross-entropy w.r.t. every weight and bias, reusing the cache's
/// dropout masks.
template <typename Scalar>
ModelParams<Scalar> backward(const ModelParams<Scalar>& params, const ModelSpec& spec, const ForwardCache<Scalar>& cache,
                             const Eigen::Ref<const MatrixX<Scalar>>& targets) {
    check_shapes(params, spec);
    const int depth = spec.depth();
    if (cache.activations.size() != static_cast<std::size_t>(depth) || cache.probs.rows() != spec.output_width())
        throw DomainError("forward cache does not match model spec");
    if (targets.rows() != cache.probs.rows() || targets.cols() != cache.probs.cols())
        throw DomainError("target shape does not match forward cache");

    ModelParams<Scalar> grads;
    grads.W.resize(static_cast<std::size_t>(depth));
    grads.b.resize(static_cast<std::size_t>(depth));
    MatrixX<Scalar> delta = (cache.probs - targets) / static_cast<Scalar>(targets.cols());
    for (int i = depth - 1; i >= 0; --i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto& a_in = cache.activations[idx];
        grads.W[idx].noalias() = delta * a_in.transpose();
        grads.b[idx] = delta.rowwise().sum();
        if (i == 0) break;
        MatrixX<Scalar> upstream = params.W[idx].transpose() * delta;
        upstream.array() *= (a_in.array() > Scalar(0)).template cast<Scalar>();
        if (cache.masks[idx].size() > 0) upstream.array() *= cache.masks[idx].array();
        delta = std::move(upstream);
    }
    return grads;
}

template <typename Scalar>
struct AdamState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t t = 0;
    ModelParams<Scalar> m;
    ModelParams<Scalar> v;

    static AdamState fresh(const ModelSpec& spec, double learning_rate = 1e-4) {
        AdamState s;
        s.learning_rate = learning_rate;
        s.m = ModelParams<Scalar>::zeros_like(spec);
        s.v = ModelParams<Scalar>::zeros_like(spec);
        return s;
    }
};

/// One bias-corrected Adam update of every tensor.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, AdamState<Scalar>& state) {
    if (grads.layers() != params.layers() || state.m.layers() != params.layers() || state.v.layers() != params.layers())
        throw DomainError("adam_step: parameter, gradient and state layer counts differ");
    for (std::size_t i = 0; i < params.layers(); ++i) {
        if (!grads.W[i].allFinite()) throw NumericalError("non-finite gradient in W" + std::to_string(i + 1));
        if (!grads.b[i].allFinite()) throw NumericalError("non-finite gradient in b" + std::to_string(i + 1));
        if (grads.W[i].rows() != params.W[i].rows() || grads.W[i].cols() != params.W[i].cols() ||
            grads.b[i].size() != params.b[i].size())
            throw DomainError("adam_step: gradient shape mismatch in layer " + std::to_string(i + 1));
    }
    state.t += 1;
    const auto t = static_cast<double>(state.t);
    const Scalar b1 = static_cast<Scalar>(state.beta1);
    const Scalar b2 = static_cast<Scalar>(state.beta2);
    const Scalar c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(state.beta1, t)));
    const Scalar c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(state.beta2, t)));
    const Scalar lr = static_cast<Scalar>(state.learning_rate);
    const Scalar eps = static_cast<Scalar>(state.epsilon);

    auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
        m = b1 * m + (Scalar(1) - b1) * g;
        v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
        theta.array() -= lr * (m.array() * c1) / ((v.array() * c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < params.layers(); ++i) {
        update(params.W[i], grads.W[i], state.m.W[i], state.v.W[i]);
        update(params.b[i], grads.b[i], state.m.b[i], state.v.b[i]);
    }
}

/// Index of the largest entry; ties resolve to the lower index.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<int>(best);
}

/// A trained model and the metadata its file carries.
struct ModelFile {
    ModelSpec spec;
    LabelScheme scheme;
    Connection connection = Connection::EE;
    WindingId winding = WindingId::Disc10;
    ModelParams<float> params;
};

std::vector<char> serialize_model(const ModelFile& model);
/// Byte length of everything before the weight tensors.
std::size_t model_header_size(const ModelFile& model);
ModelFile deserialize_model(std::span<const char> bytes);
void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);
/// As load_model, but a class list differing from `expected` is a FormatError.
ModelFile load_model(const std::string& path, const LabelScheme& expected);

extern template ModelParams<float> init<float>(const ModelSpec&, std::uint64_t);
extern template ModelParams<double> init<double>(const ModelSpec&, std::uint64_t);
extern template ForwardCache<float> forward<float>(const ModelParams<float>&, const ModelSpec&,
                                                   const Eigen::Ref<const MatrixX<float>>&, std::mt19937_64*);
extern template ForwardCache<double> forward<double>(const ModelParams<double>&, const ModelSpec&,
                                                     const Eigen::Ref<const MatrixX<double>>&, std::mt19937_64*);
extern template ModelParams<float> backward<float>(const ModelParams<float>&, const ModelSpec&, const ForwardCache<float>&,
                                                   const Eigen::Ref<const MatrixX<float>>&);
extern template ModelParams<double> backward<double>(const ModelParams<double>&, const ModelSpec&,
                                                     const ForwardCache<double>&, const Eigen::Ref<const MatrixX<double>>&);
extern template void adam_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamState<float>&);
extern template void adam_step<double>(ModelParams<double>&, const ModelParams<double>&, AdamState<double>&);

}  // namespace fradiag
