#include "fradiag/nodal.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "fradiag/error.hpp"

namespace fradiag {

NodalCircuit::NodalCircuit(int node_count) : nodes_(node_count) {
    if (node_count < 1) throw DomainError("circuit needs at least one non-ground node");
}

void NodalCircuit::check_node(int n) const {
    if (n < 0 || n > nodes_) throw DomainError("node " + std::to_string(n) + " out of range");
}

void NodalCircuit::add_resistor(int a, int b, double ohms) {
    check_node(a);
    check_node(b);
    if (!(ohms > 0.0)) throw DomainError("resistance must be positive");
    resistors_.push_back({a, b, ohms});
}

void NodalCircuit::add_capacitor(int a, int b, double farads) {
    check_node(a);
    check_node(b);
    if (!(farads > 0.0)) throw DomainError("capacitance must be positive");
    capacitors_.push_back({a, b, farads});
}

int NodalCircuit::add_inductor(int a, int b, double series_ohms, double henries) {
    check_node(a);
    check_node(b);
    if (!(series_ohms > 0.0 && henries >= 0.0))
        throw DomainError("inductor branch needs positive series resistance and non-negative inductance");
    inductors_.push_back({a, b, series_ohms, henries});
    const auto n = static_cast<Eigen::Index>(inductors_.size());
    mutual_.conservativeResize(n, n);
    mutual_.row(n - 1).setZero();
    mutual_.col(n - 1).setZero();
    return static_cast<int>(n - 1);
}

void NodalCircuit::set_mutual(int i, int j, double henries) {
    if (i == j || i < 0 || j < 0 || i >= inductor_count() || j >= inductor_count())
        throw DomainError("set_mutual: bad branch pair");
    mutual_(i, j) = henries;
    mutual_(j, i) = henries;
}

namespace {

void stamp(Eigen::MatrixXd& Y, int a, int b, double y) {
    if (a > 0) Y(a - 1, a - 1) += y;
    if (b > 0) Y(b - 1, b - 1) += y;
    if (a > 0 && b > 0) {
        Y(a - 1, b - 1) -= y;
        Y(b - 1, a - 1) -= y;
    }
}

}  // namespace

Eigen::VectorXcd NodalCircuit::transfer(int source_node, double source_ohms, int measure_node, double measure_ohms,
                                        const Eigen::VectorXd& frequencies_hz) const {
    check_node(source_node);
    check_node(measure_node);
    if (source_node == 0 || measure_node == 0) throw DomainError("ports must not be the ground node");
    if (!(source_ohms > 0.0 && measure_ohms > 0.0)) throw DomainError("port impedances must be positive");
    if (!(frequencies_hz.array() > 0.0).all()) throw DomainError("frequency must be positive");

    const Eigen::Index nv = nodes_;
    const Eigen::Index nb = static_cast<Eigen::Index>(inductors_.size());

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nv, nv);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nv, nv);
    for (const auto& r : resistors_) stamp(G, r.a, r.b, 1.0 / r.value);
    for (const auto& c : capacitors_) stamp(C, c.a, c.b, c.value);
    stamp(G, source_node, 0, 1.0 / source_ohms);
    stamp(G, measure_node, 0, 1.0 / measure_ohms);

    Eigen::MatrixXd B(nv, nb);
    Eigen::VectorXd lambda(nb);
    if (nb > 0) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nv, nb);
        Eigen::VectorXd r_isqrt(nb);
        Eigen::MatrixXd L = mutual_;
        for (Eigen::Index k = 0; k < nb; ++k) {
            const Inductor& ind = inductors_[static_cast<std::size_t>(k)];
            if (ind.a > 0) A(ind.a - 1, k) += 1.0;
            if (ind.b > 0) A(ind.b - 1, k) -= 1.0;
            r_isqrt[k] = 1.0 / std::sqrt(ind.ohms);
            L(k, k) = ind.henries;
        }
        const Eigen::MatrixXd scaled = r_isqrt.asDiagonal() * L * r_isqrt.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
        if (eig.info() != Eigen::Success) throw NumericalError("inductance eigen-decomposition failed");
        lambda = eig.eigenvalues();
        B = A * r_isqrt.asDiagonal() * eig.eigenvectors();
    }

    Eigen::VectorXcd out(frequencies_hz.size());
    Eigen::MatrixXcd Y(nv, nv);
    Eigen::VectorXd d_re(nb), d_im(nb);
    Eigen::MatrixXd BD(nv, nb);
    Eigen::MatrixXd Y_re(nv, nv), Y_im(nv, nv);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nv);
    rhs[source_node - 1] = Complex(1.0 / source_ohms, 0.0);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(nv);

    for (Eigen::Index i = 0; i < frequencies_hz.size(); ++i) {
        const double f = frequencies_hz[i];
        const double w = 2.0 * std::numbers::pi * f;
        Y_re = G;
        Y_im = w * C;
        if (nb > 0) {
            // 1 / (1 + j w lambda) = (1 - j w lambda) / (1 + (w lambda)^2)
            const Eigen::ArrayXd wl = w * lambda.array();
            const Eigen::ArrayXd denom = 1.0 + wl.square();
            d_re = (1.0 / denom).matrix();
            d_im = (-wl / denom).matrix();
            BD.noalias() = B * d_re.asDiagonal();
            Y_re.noalias() += BD * B.transpose();
            BD.noalias() = B * d_im.asDiagonal();
            Y_im.noalias() += BD * B.transpose();
        }
        Y.real() = Y_re;
        Y.imag() = Y_im;
        lu.compute(Y);
        const Eigen::VectorXcd x = lu.solve(rhs);
        const Complex h = x[measure_node - 1];
        if (!x.allFinite() || !std::isfinite(h.real()) || !std::isfinite(h.imag()))
            throw NumericalError("singular nodal system at f = " + std::to_string(f) + " Hz");
        out[i] = h;
    }
    return out;
}

Complex NodalCircuit::transfer(int source_node, double source_ohms, int measure_node, double measure_ohms,
                               double frequency_hz) const {
    Eigen::VectorXd f(1);
    f[0] = frequency_hz;
    return transfer(source_node, source_ohms, measure_node, measure_ohms, f)[0];
}

void NodalCircuit::write_netlist(std::ostream& out) const {
    for (const auto& r : resistors_) out << r.a << ' ' << r.b << " R " << r.value << '\n';
    for (const auto& c : capacitors_) out << c.a << ' ' << c.b << " C " << c.value << '\n';
    for (std::size_t k = 0; k < inductors_.size(); ++k) {
        const auto& L = inductors_[k];
        out << L.a << ' ' << L.b << " L " << L.henries << '\n';
        out << L.a << ' ' << L.b << " Rs " << L.ohms << '\n';
    }
    for (Eigen::Index i = 0; i < mutual_.rows(); ++i)
        for (Eigen::Index j = i + 1; j < mutual_.cols(); ++j)
            if (mutual_(i, j) != 0.0) out << 'L' << i << " L" << j << " M " << mutual_(i, j) << '\n';
}

}  // namespace fradiag
