#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fradiag/detail/binio.hpp"
#include "fradiag/mlp.hpp"
#include "fradiag/zoo.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace fradiag;

namespace {

ModelSpec small_spec(std::vector<int> widths, double input_scale = 1.0) {
    ModelSpec s;
    s.name = "test";
    s.widths = std::move(widths);
    s.input_scale = input_scale;
    return s;
}

/// Straight-line forward pass with explicit loops.
Eigen::VectorXd loop_forward(const ModelParams<double>& p, const ModelSpec& spec, const Eigen::VectorXd& x) {
    std::vector<double> a(x.data(), x.data() + x.size());
    for (double& v : a) v *= spec.input_scale;
    for (std::size_t l = 0; l < p.layers(); ++l) {
        std::vector<double> z(static_cast<std::size_t>(p.W[l].rows()));
        for (Eigen::Index r = 0; r < p.W[l].rows(); ++r) {
            double s = p.b[l][r];
            for (Eigen::Index c = 0; c < p.W[l].cols(); ++c) s += p.W[l](r, c) * a[static_cast<std::size_t>(c)];
            z[static_cast<std::size_t>(r)] = (l + 1 < p.layers()) ? std::max(0.0, s) : s;
        }
        a = z;
    }
    double total = 0;
    for (double v : a) total += std::exp(v);
    Eigen::VectorXd out(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) out[static_cast<Eigen::Index>(i)] = std::exp(a[i]) / total;
    return out;
}

}  // namespace

TEST_CASE("softmax", "[mlp]") {
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(4);
    CHECK(softmax(zeros).isApprox(Eigen::VectorXd::Constant(4, 0.25)));
    Eigen::VectorXd v(3);
    v << std::log(1.0), std::log(2.0), std::log(3.0);
    const Eigen::VectorXd p = softmax(v);
    CHECK(std::abs(p[0] - 1.0 / 6) < 1e-9);
    CHECK(std::abs(p[1] - 2.0 / 6) < 1e-9);
    CHECK(std::abs(p[2] - 3.0 / 6) < 1e-9);
    const Eigen::VectorXd shifted = softmax((v.array() + 1000.0).matrix());
    CHECK((shifted - p).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(shifted.sum() - 1.0) < 1e-12);
    CHECK(argmax(p) == argmax(v));
    CHECK_THROWS_AS(softmax(Eigen::VectorXd()), DomainError);
}

TEST_CASE("cross entropy", "[mlp]") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Identity(3, 3);
    CHECK(cross_entropy(y, y) == 0.0);
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(5, 1, 0.2);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(5, 1);
    t(2, 0) = 1;
    CHECK(cross_entropy(uniform, t) == Catch::Approx(std::log(5.0)).epsilon(1e-12));
    Eigen::MatrixXd p(3, 2), yy = Eigen::MatrixXd::Zero(3, 2);
    p << 0.7, 0.1, 0.2, 0.8, 0.1, 0.1;
    yy(0, 0) = 1;
    yy(1, 1) = 1;
    // Oracle: -(ln 0.7 + ln 0.8) / 2.
    CHECK(cross_entropy(p, yy) == Catch::Approx(-(std::log(0.7) + std::log(0.8)) / 2).epsilon(1e-12));
    CHECK(cross_entropy(p, yy) == Catch::Approx(0.28990).margin(1e-5));
    Eigen::MatrixXd zero_p = Eigen::MatrixXd::Zero(2, 1), hit = Eigen::MatrixXd::Zero(2, 1);
    hit(0, 0) = 1;
    CHECK(std::isfinite(cross_entropy(zero_p, hit)));
    CHECK_THROWS_AS(cross_entropy(Eigen::MatrixXd(3, 0), Eigen::MatrixXd(3, 0)), DomainError);
}

TEST_CASE("forward pass", "[mlp]") {
    SECTION("zero parameters give a uniform prediction") {
        const auto spec = small_spec({6, 4, 5});
        const auto p = ModelParams<double>::zeros_like(spec);
        const Eigen::VectorXd x = Eigen::VectorXd::Random(6);
        CHECK(predict<double>(p, spec, x).isApprox(Eigen::VectorXd::Constant(5, 0.2)));
    }
    SECTION("matches an independent loop implementation") {
        auto spec = small_spec({4, 2, 3}, 0.5);
        const auto p = init<double>(spec, 99);
        std::mt19937_64 rng(4);
        std::normal_distribution<double> n(0, 1);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::VectorXd x(4);
            for (auto& v : x) v = 3 * n(rng);
            CHECK((predict<double>(p, spec, x) - loop_forward(p, spec, x)).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
    SECTION("eval mode ignores the dropout rate") {
        auto spec = small_spec({5, 6, 6, 3});
        spec.dropout_after = {1};
        const auto p = init<double>(spec, 3);
        const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
        const Eigen::VectorXd base = predict<double>(p, spec, x);
        for (double rate : {0.0, 0.3, 0.9}) {
            spec.dropout_rate = rate;
            CHECK(predict<double>(p, spec, x) == base);
        }
    }
    SECTION("shape and value errors") {
        const auto spec = small_spec({3, 2});
        const auto p = init<double>(spec, 1);
        CHECK_THROWS_AS(predict<double>(p, spec, Eigen::VectorXd::Zero(4)), DomainError);
        Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
        bad[1] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(predict<double>(p, spec, bad), DomainError);
        CHECK_THROWS_AS(predict<double>(p, small_spec({3, 3}), Eigen::VectorXd::Zero(3)), DomainError);
    }
}

TEST_CASE("inverted dropout preserves the expected activation", "[mlp]") {
    auto spec = small_spec({4, 6, 3});
    spec.dropout_after = {1};
    const auto p = init<double>(spec, 8);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 1) * 3.0;
    const Eigen::VectorXd eval = forward<double>(p, spec, x).activations[1].col(0);
    std::mt19937_64 rng(12);
    constexpr int draws = 20000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(6), sq = Eigen::VectorXd::Zero(6);
    for (int i = 0; i < draws; ++i) {
        const Eigen::VectorXd a = forward<double>(p, spec, x, &rng).activations[1].col(0);
        sum += a;
        sq += a.cwiseProduct(a);
    }
    const Eigen::VectorXd mean = sum / draws;
    for (Eigen::Index u = 0; u < 6; ++u) {
        const double var = sq[u] / draws - mean[u] * mean[u];
        const double se = std::sqrt(std::max(var, 0.0) / draws);
        CHECK(std::abs(mean[u] - eval[u]) <= 3 * se + 1e-12);
    }
}

TEST_CASE("backward pass", "[mlp]") {
    SECTION("single softmax layer has gradient (p - y) x^T") {
        const auto spec = small_spec({3, 4});
        const auto p = init<double>(spec, 2);
        Eigen::MatrixXd x(3, 1);
        x << 0.5, -1.0, 2.0;
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 1);
        y(1, 0) = 1;
        const auto cache = forward<double>(p, spec, x);
        const auto g = backward<double>(p, spec, cache, y);
        const Eigen::VectorXd probs = loop_forward(p, spec, x.col(0));
        const Eigen::MatrixXd dW = (probs - y.col(0)) * x.transpose();
        CHECK((g.W[0] - dW).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((g.b[0] - (probs - y.col(0))).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("duplicating a sample leaves the mean gradient unchanged") {
        const auto spec = small_spec({5, 4, 3});
        const auto p = init<double>(spec, 6);
        const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 1);
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 1);
        y(2, 0) = 1;
        Eigen::MatrixXd x2(5, 2), y2(3, 2);
        x2 << x, x;
        y2 << y, y;
        const auto g1 = backward<double>(p, spec, forward<double>(p, spec, x), y);
        const auto g2 = backward<double>(p, spec, forward<double>(p, spec, x2), y2);
        for (std::size_t l = 0; l < 2; ++l) {
            CHECK((g1.W[l] - g2.W[l]).cwiseAbs().maxCoeff() < 1e-14);
            CHECK((g1.b[l] - g2.b[l]).cwiseAbs().maxCoeff() < 1e-14);
        }
    }
    SECTION("finite differences on a 6-5-4-3 network") {
        auto spec = small_spec({6, 5, 4, 3});
        spec.dropout_after = {2};
        const auto res = gradcheck::check(spec, 21, 3);
        INFO("max relative error " << res.max_relative_error);
        CHECK(res.max_relative_error < 1e-4);
        CHECK(res.parameters == 6 * 5 + 5 + 5 * 4 + 4 + 4 * 3 + 3);
    }
    SECTION("random small specs") {
        std::mt19937_64 rng(77);
        for (int trial = 0; trial < 20; ++trial) {
            const auto spec = gradcheck::random_spec(rng);
            const auto res = gradcheck::check(spec, rng(), 4);
            INFO("trial " << trial);
            CHECK(res.max_relative_error < 1e-4);
        }
    }
    SECTION("mismatched cache is rejected") {
        const auto spec = small_spec({3, 2, 2});
        const auto p = init<double>(spec, 1);
        auto cache = forward<double>(p, spec, Eigen::MatrixXd::Ones(3, 1));
        cache.activations.pop_back();
        CHECK_THROWS_AS(backward<double>(p, spec, cache, Eigen::MatrixXd::Identity(2, 1)), DomainError);
    }
}

TEST_CASE("Adam", "[mlp]") {
    const auto spec = small_spec({2, 1});
    SECTION("zero gradient leaves parameters unchanged") {
        auto p = init<double>(spec, 4);
        const auto before = p;
        auto state = AdamState<double>::fresh(spec);
        adam_step(p, ModelParams<double>::zeros_like(spec), state);
        CHECK(p == before);
        CHECK(state.t == 1);
    }
    SECTION("first step moves each parameter by about lr") {
        auto p = init<double>(spec, 4);
        const auto before = p;
        auto g = ModelParams<double>::zeros_like(spec);
        g.W[0] << 0.3, -2.0;
        g.b[0] << 1e-3;
        auto state = AdamState<double>::fresh(spec);
        adam_step(p, g, state);
        // Oracle: bias correction makes m_hat = g and v_hat = g^2 at t = 1.
        for (int c = 0; c < 2; ++c) {
            const double gi = g.W[0](0, c);
            const double expected = 1e-4 * std::abs(gi) / (std::abs(gi) + 1e-8);
            CHECK(std::abs(std::abs(p.W[0](0, c) - before.W[0](0, c)) - expected) < 1e-15);
            CHECK(std::abs(p.W[0](0, c) - before.W[0](0, c)) == Catch::Approx(1e-4).epsilon(1e-4));
        }
    }
    SECTION("two steps with g = 1 and lr = 0.1") {
        auto p = ModelParams<double>::zeros_like(spec);
        p.b[0] << 0.7;
        auto g = ModelParams<double>::zeros_like(spec);
        g.b[0] << 1.0;
        auto state = AdamState<double>::fresh(spec, 0.1);
        adam_step(p, g, state);
        adam_step(p, g, state);
        // Oracle by hand: t=1 m=0.1 v=0.001 -> m_hat=1, v_hat=1;
        // t=2 m=0.19 v=0.001999 -> m_hat=0.19/0.19=1, v_hat=0.001999/0.001999=1.
        const double step = 0.1 * 1.0 / (1.0 + 1e-8);
        CHECK(std::abs(p.b[0][0] - (0.7 - 2 * step)) < 1e-12);
    }
    SECTION("non-finite gradients are named") {
        auto p = init<double>(small_spec({2, 3, 2}), 1);
        auto g = ModelParams<double>::zeros_like(small_spec({2, 3, 2}));
        g.W[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
        auto state = AdamState<double>::fresh(small_spec({2, 3, 2}));
        try {
            adam_step(p, g, state);
            FAIL("NaN gradient accepted");
        } catch (const NumericalError& e) {
            CHECK(std::string(e.what()).find("W2") != std::string::npos);
        }
    }
}

TEST_CASE("Adam drives a separable toy problem", "[mlp]") {
    const auto spec = small_spec({4, 8, 2});
    auto p = init<double>(spec, 5);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 0.3);
    Eigen::MatrixXd x(4, 40), y = Eigen::MatrixXd::Zero(2, 40);
    for (int i = 0; i < 40; ++i) {
        const int c = i % 2;
        for (int r = 0; r < 4; ++r) x(r, i) = (c ? 1.0 : -1.0) * (r % 2 ? 1.0 : -0.5) + n(rng);
        y(c, i) = 1;
    }
    // A larger step than the training default so 200 full-batch steps reach the end state.
    auto state = AdamState<double>::fresh(spec, 1e-2);
    std::vector<double> losses;
    for (int step = 0; step < 200; ++step) {
        const auto cache = forward<double>(p, spec, x);
        losses.push_back(cross_entropy(cache.probs, y));
        adam_step(p, backward<double>(p, spec, cache, y), state);
    }
    losses.push_back(cross_entropy(forward<double>(p, spec, x).probs, y));
    int decreasing = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) decreasing += losses[i] < losses[i - 1];
    CHECK(decreasing >= 0.95 * 200);
    CHECK(losses.back() < 0.1);
}

TEST_CASE("initialisation", "[mlp]") {
    const auto spec = small_spec({7, 5, 3});
    const auto a = init<float>(spec, 10);
    CHECK(a.W[0].rows() == 5);
    CHECK(a.W[0].cols() == 7);
    CHECK(a.W[1].rows() == 3);
    CHECK(a.b[1].isZero());
    CHECK(a == init<float>(spec, 10));
    CHECK_FALSE(a == init<float>(spec, 11));
    CHECK((init<double>(spec, 10).cast<float>() == a));

    // Oracle: sample variance of 4e6 draws of N(0, 2/2000).
    const auto big = init<float>(small_spec({2000, 2000}), 3);
    const double mean = big.W[0].cast<double>().mean();
    const double var = (big.W[0].cast<double>().array() - mean).square().mean();
    CHECK(std::abs(var / (2.0 / 2000) - 1.0) < 0.05);
}

TEST_CASE("model files", "[mlp]") {
    const auto scheme = LabelScheme::type_scheme(fault_types_of(Group::Group1));
    const auto spec = build(Architecture::Dialight, scheme.class_count(), 1.0);
    const ModelFile m{spec, scheme, Connection::EE, WindingId::Disc10, init<float>(spec, 1)};
    const auto bytes = serialize_model(m);
    // Oracle: 4 bytes per parameter plus the header.
    CHECK(bytes.size() == 4 * static_cast<std::size_t>(param_count(spec)) + model_header_size(m));
    const auto path = test_util::temp_path("dialight.fram");
    save_model(m, path);
    const ModelFile back = load_model(path);
    CHECK(back.params == m.params);
    CHECK(back.spec == m.spec);
    CHECK(back.scheme == m.scheme);
    CHECK(back.connection == Connection::EE);
    CHECK(serialize_model(back) == bytes);

    CHECK_THROWS_AS(load_model(path, LabelScheme::joint_scheme(fault_types_of(Group::Group1))), FormatError);
    CHECK_NOTHROW(load_model(path, scheme));
    auto bad = bytes;
    bad[1] = 'Z';
    CHECK_THROWS_AS(deserialize_model(bad), FormatError);
    const std::vector<char> cut(bytes.begin(), bytes.end() - 1);
    CHECK_THROWS_AS(deserialize_model(cut), FormatError);
    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(deserialize_model(version), FormatError);
}
