#pragma once

// Small-signal AC nodal analysis for linear R/C networks with mutually coupled R-L branches.
//
// Node 0 is ground. The inductive branches have impedance matrix Z(w) = R + jwL with R diagonal
// and positive. Writing R^{-1/2} L R^{-1/2} = Q diag(lambda) Q^T once, the branch admittance at
// any frequency is
//
//   Z(w)^{-1} = R^{-1/2} Q diag(1 / (1 + jw lambda)) Q^T R^{-1/2}
//
// so the nodal admittance Y(w) = G + jwC + B diag(1 / (1 + jw lambda)) B^T with B = A R^{-1/2} Q
// (A the node-branch incidence). Each frequency then costs one dense complex LU of node size.

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fradiag {

using Complex = std::complex<double>;

class NodalCircuit {
public:
    explicit NodalCircuit(int node_count);

    int node_count() const { return nodes_; }
    int inductor_count() const { return static_cast<int>(inductors_.size()); }

    void add_resistor(int a, int b, double ohms);
    void add_capacitor(int a, int b, double farads);
    /// Series R-L branch from a to b (series_ohms > 0); returns the branch index used by set_mutual.
    int add_inductor(int a, int b, double series_ohms, double henries);
    void set_mutual(int branch_i, int branch_j, double henries);

    /// A 1 V source behind `source_ohms` drives `source_node`; `measure_node` is loaded by
    /// `measure_ohms` to ground. Returns V(measure_node) / V_source. Throws NumericalError on a
    /// singular system.
    Complex transfer(int source_node, double source_ohms, int measure_node, double measure_ohms,
                     double frequency_hz) const;

    /// transfer() over many frequencies, sharing the modal decomposition.
    Eigen::VectorXcd transfer(int source_node, double source_ohms, int measure_node, double measure_ohms,
                              const Eigen::VectorXd& frequencies_hz) const;

    /// One branch per line: `node_a node_b kind value`. Mutual couplings are written as
    /// `L<i> L<j> M value` using inductor branch labels.
    void write_netlist(std::ostream& out) const;

private:
    struct TwoTerminal {
        int a, b;
        double value;
    };
    struct Inductor {
        int a, b;
        double ohms, henries;
    };

    void check_node(int n) const;

    int nodes_;
    std::vector<TwoTerminal> resistors_;
    std::vector<TwoTerminal> capacitors_;
    std::vector<Inductor> inductors_;
    Eigen::MatrixXd mutual_;
};

}  // namespace fradiag
