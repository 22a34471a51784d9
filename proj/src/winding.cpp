#include "fradiag/winding.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "fradiag/detail/parallel.hpp"
#include "fradiag/detail/seed.hpp"

namespace fradiag {

namespace {

// Nominal per-disc values for the 10-disc reference geometry.
constexpr double kHvL = 1.0e-3;
constexpr double kLvL = 0.25e-3;
constexpr double kDiscR = 0.5;
constexpr double kDiscCs = 1.0e-9;
constexpr double kDiscCg = 0.5e-9;
constexpr double kDiscCiw = 1.0e-9;
constexpr double kAdjacentCoupling = 0.3;
constexpr double kCouplingDecay = 0.5;
constexpr double kFacingCoupling = 0.4;

// Fault map coefficients.
constexpr double kAdMutualPerMm = 0.006;
constexpr double kAdGroundPerMm = 0.004;
constexpr double kDsvBaseGapMm = 10.0;
constexpr double kFbArcFraction = 30.0 / 360.0;
constexpr double kFbBulge = 0.125;
constexpr double kFbSensitivity = 0.85;
constexpr double kFbInductance = 0.98;

double mean_diameter(double outer, double inner) { return 0.5 * (outer + inner); }

int binomial3(int n) { return n < 3 ? 0 : n * (n - 1) * (n - 2) / 6; }

void require_degree(int degree) {
    if (degree < 1 || degree > 4) throw DomainError("fault degree must be in 1..4");
}

}  // namespace

WindingSpec WindingSpec::disc10() { return {}; }

WindingSpec WindingSpec::disc12() {
    WindingSpec s;
    s.id = WindingId::Disc12;
    s.disc_count = 12;
    s.hv_outer_mm = 467;
    s.hv_inner_mm = 390;
    s.lv_outer_mm = 341;
    s.lv_inner_mm = 260;
    return s;
}

WindingSpec WindingSpec::of(WindingId id) { return id == WindingId::Disc10 ? disc10() : disc12(); }

double ad_displacement_mm(WindingId w, int degree) {
    require_degree(degree);
    static constexpr double disc10[] = {10, 15, 20, 25};
    static constexpr double disc12[] = {10, 20, 30, 40};
    return (w == WindingId::Disc10 ? disc10 : disc12)[degree - 1];
}

double dsv_spacing_mm(WindingId w, int degree) {
    require_degree(degree);
    static constexpr double disc10[] = {5, 10, 15, 20};
    static constexpr double disc12[] = {10, 20, 30, 40};
    return (w == WindingId::Disc10 ? disc10 : disc12)[degree - 1];
}

int host_count(FaultType t, int degree, int disc_count) {
    require_degree(degree);
    switch (t) {
        case FaultType::AD: return 1;
        case FaultType::DSV: return binomial3(disc_count - 1);
        case FaultType::FB:
        case FaultType::SC: return std::max(0, disc_count - degree + 1);
        case FaultType::Normal: break;
    }
    throw DomainError("host_count: Normal has no fault position");
}

std::array<int, 3> dsv_gaps(int position, int disc_count) {
    const int gaps = disc_count - 1;
    if (position < 0 || position >= binomial3(gaps)) throw DomainError("DSV position out of range");
    int p = 0;
    for (int a = 1; a <= gaps; ++a)
        for (int b = a + 1; b <= gaps; ++b)
            for (int c = b + 1; c <= gaps; ++c)
                if (p++ == position) return {a, b, c};
    throw DomainError("DSV position out of range");
}

Eigen::MatrixXd LadderNetwork::inductance_matrix() const {
    const Eigen::Index n = hv.L.size();
    Eigen::MatrixXd m = mutual;
    m.diagonal().head(n) = hv.L;
    m.diagonal().tail(n) = lv.L;
    return m;
}

bool LadderNetwork::operator==(const LadderNetwork& o) const {
    auto same = [](const WindingParams& a, const WindingParams& b) {
        return a.R == b.R && a.L == b.L && a.Cs == b.Cs && a.Cg == b.Cg;
    };
    return winding == o.winding && same(hv, o.hv) && same(lv, o.lv) && ciw == o.ciw && mutual == o.mutual &&
           shorted == o.shorted;
}

void validate(const LadderNetwork& net) {
    const Eigen::Index n = net.hv.L.size();
    if (n < 1) throw DomainError("ladder network has no discs");
    auto sized = [n](const Eigen::VectorXd& v) { return v.size() == n; };
    for (const WindingParams* w : {&net.hv, &net.lv})
        if (!sized(w->R) || !sized(w->L) || !sized(w->Cs) || !sized(w->Cg))
            throw DomainError("ladder network parameter vectors have inconsistent lengths");
    if (!sized(net.ciw) || net.mutual.rows() != 2 * n || net.mutual.cols() != 2 * n ||
        net.shorted.size() != static_cast<std::size_t>(n))
        throw DomainError("ladder network shapes are inconsistent");
    for (const WindingParams* w : {&net.hv, &net.lv})
        if ((w->R.array() <= 0).any() || (w->L.array() <= 0).any() || (w->Cs.array() <= 0).any() ||
            (w->Cg.array() <= 0).any())
            throw DomainError("ladder network R, L, C must be positive");
    if ((net.ciw.array() <= 0).any()) throw DomainError("inter-winding capacitance must be positive");
    if (!net.mutual.isApprox(net.mutual.transpose(), 0.0) || (net.mutual.diagonal().array() != 0).any())
        throw DomainError("mutual inductance matrix must be symmetric with zero diagonal");
    const Eigen::MatrixXd L = net.inductance_matrix();
    for (Eigen::Index i = 0; i < 2 * n; ++i)
        for (Eigen::Index j = 0; j < 2 * n; ++j)
            if (i != j && std::abs(L(i, j)) > std::sqrt(L(i, i) * L(j, j)))
                throw DomainError("mutual coupling exceeds sqrt(L_j L_k)");
}

int hv_node(int k) { return k + 1; }
int lv_node(int k, int disc_count) { return disc_count + 2 + k; }

PortNodes ports_for(Connection c, int disc_count) {
    if (c == Connection::EE) return {hv_node(0), hv_node(disc_count)};
    return {hv_node(0), lv_node(0, disc_count)};
}

LadderNetwork base_parameters(const WindingSpec& spec, std::uint64_t jitter_seed, double jitter_sigma) {
    if (!(jitter_sigma >= 0.0 && jitter_sigma <= 0.05)) throw DomainError("jitter_sigma must be in [0, 0.05]");
    if (spec.disc_count != 10 && spec.disc_count != 12) throw DomainError("disc_count must be 10 or 12");

    const WindingSpec ref = WindingSpec::disc10();
    const double hv_ratio = mean_diameter(spec.hv_outer_mm, spec.hv_inner_mm) / mean_diameter(ref.hv_outer_mm, ref.hv_inner_mm);
    const double lv_ratio = mean_diameter(spec.lv_outer_mm, spec.lv_inner_mm) / mean_diameter(ref.lv_outer_mm, ref.lv_inner_mm);

    const int n = spec.disc_count;
    LadderNetwork net;
    net.winding = spec.id;
    auto nominal = [n](double L, double ratio) {
        WindingParams w;
        w.R = Eigen::VectorXd::Constant(n, kDiscR);
        w.L = Eigen::VectorXd::Constant(n, L * ratio * ratio);
        w.Cs = Eigen::VectorXd::Constant(n, kDiscCs * ratio);
        w.Cg = Eigen::VectorXd::Constant(n, kDiscCg * ratio);
        return w;
    };
    net.hv = nominal(kHvL, hv_ratio);
    net.lv = nominal(kLvL, lv_ratio);
    net.ciw = Eigen::VectorXd::Constant(n, kDiscCiw * hv_ratio);
    net.shorted.assign(static_cast<std::size_t>(n), false);

    if (jitter_sigma > 0.0) {
        std::mt19937_64 rng(jitter_seed);
        std::normal_distribution<double> eps(0.0, jitter_sigma);
        auto jitter = [&](double& v) { v *= 1.0 + eps(rng); };
        for (int k = 0; k < n; ++k) {
            jitter(net.hv.R[k]);
            jitter(net.hv.L[k]);
            jitter(net.hv.Cs[k]);
            jitter(net.hv.Cg[k]);
            jitter(net.ciw[k]);
        }
        for (int k = 0; k < n; ++k) {
            jitter(net.lv.R[k]);
            jitter(net.lv.L[k]);
            jitter(net.lv.Cs[k]);
            jitter(net.lv.Cg[k]);
        }
    }

    Eigen::VectorXd self(2 * n);
    self << net.hv.L, net.lv.L;
    net.mutual = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < 2 * n; ++i) {
        for (int j = 0; j < 2 * n; ++j) {
            if (i == j) continue;
            const bool same_winding = (i < n) == (j < n);
            double k = 0.0;
            if (same_winding)
                k = kAdjacentCoupling * std::pow(kCouplingDecay, std::abs(i - j) - 1);
            else if (std::abs(i - j) == n)
                k = kFacingCoupling;
            net.mutual(i, j) = k * std::sqrt(self[i] * self[j]);
        }
    }
    return net;
}

LadderNetwork apply_fault(const LadderNetwork& net, const FaultSpec& fault) {
    require_degree(fault.degree);
    const int n = net.disc_count();
    const int hosts = host_count(fault.type, fault.degree, n);
    if (fault.type == FaultType::SC && fault.degree > n - 1) throw DomainError("SC degree exceeds disc_count - 1");
    if (fault.position < 0 || fault.position >= hosts)
        throw DomainError("fault position " + std::to_string(fault.position) + " out of range for " +
                          std::string(to_string(fault.type)));

    LadderNetwork out = net;
    switch (fault.type) {
        case FaultType::AD: {
            const double delta = ad_displacement_mm(net.winding, fault.degree);
            const double m = 1.0 - kAdMutualPerMm * delta;
            out.mutual.topRightCorner(n, n) *= m;
            out.mutual.bottomLeftCorner(n, n) *= m;
            out.hv.Cg[0] *= 1.0 - kAdGroundPerMm * delta;
            break;
        }
        case FaultType::DSV: {
            const double s = dsv_spacing_mm(net.winding, fault.degree);
            for (int g : dsv_gaps(fault.position, n)) out.hv.Cs[g - 1] *= kDsvBaseGapMm / (kDsvBaseGapMm + s);
            break;
        }
        case FaultType::FB: {
            const double ciw_factor = (1.0 - kFbArcFraction * kFbBulge / (1.0 - kFbBulge)) * kFbSensitivity;
            for (int k = fault.position; k < fault.position + fault.degree; ++k) {
                out.ciw[k] *= ciw_factor;
                out.hv.L[k] *= kFbInductance;
            }
            break;
        }
        case FaultType::SC: {
            for (int k = fault.position; k < fault.position + fault.degree; ++k) {
                out.shorted[static_cast<std::size_t>(k)] = true;
                out.mutual.row(k) *= kShortedCoupling;
                out.mutual.col(k) *= kShortedCoupling;
            }
            break;
        }
        case FaultType::Normal: throw DomainError("apply_fault: Normal is not a fault");
    }
    return out;
}

NodalCircuit build_circuit(const LadderNetwork& net) {
    const int n = net.disc_count();
    NodalCircuit c(2 * (n + 1));
    for (int k = 0; k < n; ++k) {
        const bool sc = net.shorted[static_cast<std::size_t>(k)];
        // A shorted section keeps a residual self inductance scaled like its couplings, so the
        // inductance matrix stays a congruence of a positive semidefinite one.
        const double r = sc ? kShortedOhms : net.hv.R[k];
        const double l = sc ? net.hv.L[k] * kShortedCoupling * kShortedCoupling : net.hv.L[k];
        c.add_inductor(hv_node(k), hv_node(k + 1), r, l);
    }
    for (int k = 0; k < n; ++k) c.add_inductor(lv_node(k, n), lv_node(k + 1, n), net.lv.R[k], net.lv.L[k]);
    for (int i = 0; i < 2 * n; ++i)
        for (int j = i + 1; j < 2 * n; ++j)
            if (net.mutual(i, j) != 0.0) c.set_mutual(i, j, net.mutual(i, j));

    for (int k = 0; k < n; ++k) {
        c.add_capacitor(hv_node(k), hv_node(k + 1), net.hv.Cs[k]);
        c.add_capacitor(lv_node(k, n), lv_node(k + 1, n), net.lv.Cs[k]);
        for (int end : {k, k + 1}) {
            c.add_capacitor(hv_node(end), 0, 0.5 * net.hv.Cg[k]);
            c.add_capacitor(lv_node(end, n), 0, 0.5 * net.lv.Cg[k]);
            c.add_capacitor(hv_node(end), lv_node(end, n), 0.5 * net.ciw[k]);
        }
    }
    return c;
}

void write_netlist(const LadderNetwork& net, std::ostream& out) { build_circuit(net).write_netlist(out); }

Complex solve_between(const LadderNetwork& net, PortNodes ports, const MeasurementSetup& setup, double frequency_hz) {
    if (!(frequency_hz > 0.0)) throw DomainError("frequency must be positive");
    return build_circuit(net).transfer(ports.source, setup.source_ohms, ports.measure, setup.measure_ohms,
                                       frequency_hz);
}

Complex solve_at(const LadderNetwork& net, const MeasurementSetup& setup, double frequency_hz) {
    return solve_between(net, ports_for(setup.connection, net.disc_count()), setup, frequency_hz);
}

Eigen::VectorXd response_db(const LadderNetwork& net, const MeasurementSetup& setup, const FrequencyGrid& grid) {
    const PortNodes ports = ports_for(setup.connection, net.disc_count());
    const Eigen::VectorXcd h =
        build_circuit(net).transfer(ports.source, setup.source_ohms, ports.measure, setup.measure_ohms, grid.points());
    return (20.0 * h.array().abs().log10()).max(setup.floor_db).matrix();
}

FRASweep sweep(const LadderNetwork& net, const MeasurementSetup& setup, const FrequencyGrid& grid,
               std::uint64_t noise_seed, double noise_db) {
    if (!(noise_db >= 0.0)) throw DomainError("noise_db must be non-negative");
    Eigen::VectorXd db = response_db(net, setup, grid);
    if (noise_db > 0.0) {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> eta(0.0, noise_db);
        for (Eigen::Index i = 0; i < db.size(); ++i) db[i] = std::max(setup.floor_db, db[i] + eta(rng));
    }
    return FRASweep{db.cast<float>(), grid.id()};
}

std::array<int, 5> group_counts(Group g) {
    if (g == Group::Group3) return {45, 200, 855, 1080, 675};
    return {25, 200, 600, 600, 0};
}

std::array<int, 4> degree_split(int n) {
    std::array<int, 4> out{};
    for (int d = 0; d < 4; ++d) out[static_cast<std::size_t>(d)] = n / 4 + (d < n % 4 ? 1 : 0);
    return out;
}

std::uint32_t sample_seed(std::uint64_t run_seed, std::size_t index) {
    return static_cast<std::uint32_t>(detail::splitmix64(detail::splitmix64(run_seed) ^ static_cast<std::uint64_t>(index)) >> 32);
}

std::vector<FaultLabel> group_labels(Group g) {
    const auto counts = group_counts(g);
    const int n = WindingSpec::of(winding_of(g)).disc_count;
    std::vector<FaultLabel> labels(static_cast<std::size_t>(counts[0]), FaultLabel{});
    const FaultType order[] = {FaultType::AD, FaultType::DSV, FaultType::FB, FaultType::SC};
    for (int t = 0; t < 4; ++t) {
        const auto split = degree_split(counts[static_cast<std::size_t>(t + 1)]);
        for (int d = 1; d <= 4; ++d) {
            const int hosts = host_count(order[t], d, n);
            for (int j = 0; j < split[static_cast<std::size_t>(d - 1)]; ++j)
                labels.push_back({order[t], d, j % hosts});
        }
    }
    return labels;
}

std::vector<std::size_t> strided_indices(std::size_t count, std::size_t stride) {
    if (stride < 1) throw DomainError("stride must be at least 1");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count; i += stride) out.push_back(i);
    return out;
}

LabeledDataset generate_group(Group g, std::uint64_t seed, const GenerationConfig& cfg) {
    const WindingSpec spec = WindingSpec::of(winding_of(g));
    const MeasurementSetup setup{connection_of(g)};
    const std::vector<FaultLabel> labels = group_labels(g);

    std::vector<std::size_t> picked = cfg.indices;
    if (picked.empty()) picked = strided_indices(labels.size(), 1);
    for (std::size_t k = 0; k < picked.size(); ++k)
        if (picked[k] >= labels.size() || (k > 0 && picked[k] <= picked[k - 1]))
            throw DomainError("sample indices must be ascending and below " + std::to_string(labels.size()));

    LabeledDataset ds{setup.connection, spec.id, cfg.grid, {}};
    ds.samples.resize(picked.size());
    detail::parallel_for(picked.size(), cfg.jobs, [&](std::size_t k) {
        const std::size_t i = picked[k];
        const FaultLabel& label = labels[i];
        const std::uint32_t s = sample_seed(seed, i);
        LadderNetwork net = base_parameters(spec, detail::splitmix64(s), cfg.jitter_sigma);
        if (label.type != FaultType::Normal) net = apply_fault(net, {label.type, label.degree, label.position});
        ds.samples[k] = Sample{sweep(net, setup, cfg.grid, detail::splitmix64(~static_cast<std::uint64_t>(s)), cfg.noise_db),
                               label, s};
    });
    return ds;
}

}  // namespace fradiag
