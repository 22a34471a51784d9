#pragma once

// Lumped-parameter ladder model of a two-winding disc transformer, fault injection, and
// synthetic FRA sweeps.
//
// Each HV disc k (1-based) is a series R-L branch between HV nodes k-1 and k, bridged by its
// series capacitance Cs_k. Half of the disc's ground capacitance Cg_k sits on each end node and
// half of its inter-winding capacitance Ciw_k joins each end node to the facing LV node. The
// LV winding mirrors this layout without Ciw. All inductive branches are mutually coupled.

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "fradiag/data.hpp"
#include "fradiag/nodal.hpp"

namespace fradiag {

/// Geometry of the laboratory windings, in millimetres.
struct WindingSpec {
    WindingId id = WindingId::Disc10;
    int disc_count = 10;
    double hv_outer_mm = 934, hv_inner_mm = 780;
    double lv_outer_mm = 682, lv_inner_mm = 520;
    double height_mm = 205;

    static WindingSpec disc10();
    static WindingSpec disc12();
    static WindingSpec of(WindingId id);
};

struct FaultSpec {
    FaultType type = FaultType::AD;
    int degree = 1;
    int position = 0;
};

/// AD axial displacement for a degree.
double ad_displacement_mm(WindingId w, int degree);
/// DSV spacer thickness for a degree.
double dsv_spacing_mm(WindingId w, int degree);
/// Number of distinct fault positions available for (type, degree) on an n-disc winding.
int host_count(FaultType t, int degree, int disc_count);
/// 1-based gap indices (gap g lies between disc g and g+1) for a DSV position.
std::array<int, 3> dsv_gaps(int position, int disc_count);

struct WindingParams {
    Eigen::VectorXd R, L, Cs, Cg;
};

struct LadderNetwork {
    WindingId winding = WindingId::Disc10;
    WindingParams hv;
    Eigen::VectorXd ciw;           ///< per HV disc, F
    WindingParams lv;
    Eigen::MatrixXd mutual;        ///< 2N x 2N, HV discs then LV discs, zero diagonal, H
    std::vector<bool> shorted;     ///< per HV disc

    int disc_count() const { return static_cast<int>(hv.L.size()); }
    /// Self inductances on the diagonal plus mutual terms.
    Eigen::MatrixXd inductance_matrix() const;

    bool operator==(const LadderNetwork& o) const;
};

/// Throws DomainError if a positivity, symmetry, or coupling-bound invariant fails.
void validate(const LadderNetwork& net);

struct MeasurementSetup {
    Connection connection = Connection::EE;
    double source_ohms = 50.0;
    double measure_ohms = 50.0;
    double floor_db = kDbFloor;
};

/// Circuit node ids (ground = 0) used by the nodal solver.
struct PortNodes {
    int source;
    int measure;
};
PortNodes ports_for(Connection c, int disc_count);
int hv_node(int k);
int lv_node(int k, int disc_count);

inline constexpr double kShortedOhms = 1e-3;
inline constexpr double kShortedCoupling = 0.05;

LadderNetwork base_parameters(const WindingSpec& spec, std::uint64_t jitter_seed, double jitter_sigma);
LadderNetwork apply_fault(const LadderNetwork& net, const FaultSpec& fault);

NodalCircuit build_circuit(const LadderNetwork& net);
void write_netlist(const LadderNetwork& net, std::ostream& out);

Complex solve_at(const LadderNetwork& net, const MeasurementSetup& setup, double frequency_hz);
Complex solve_between(const LadderNetwork& net, PortNodes ports, const MeasurementSetup& setup, double frequency_hz);

/// Noise-free 20*log10|H| at every grid point, double precision, floored.
Eigen::VectorXd response_db(const LadderNetwork& net, const MeasurementSetup& setup, const FrequencyGrid& grid);

FRASweep sweep(const LadderNetwork& net, const MeasurementSetup& setup, const FrequencyGrid& grid,
               std::uint64_t noise_seed, double noise_db);

struct GenerationConfig {
    double jitter_sigma = 0.005;
    double noise_db = 0.1;
    int jobs = 1;
    FrequencyGrid grid{};
    /// Generation-order indices to synthesise (ascending); empty means the whole group.
    std::vector<std::size_t> indices;
};

/// 0, stride, 2*stride, ... below count.
std::vector<std::size_t> strided_indices(std::size_t count, std::size_t stride);

/// (Normal, AD, DSV, FB, SC) sample counts for a group.
std::array<int, 5> group_counts(Group g);
/// Even split of n over degrees 1..4, remainder to the lower degrees.
std::array<int, 4> degree_split(int n);
/// Seed of sample `index` of a generation run; independent of group so Group1/Group2 pair up.
std::uint32_t sample_seed(std::uint64_t run_seed, std::size_t index);

/// Labels in generation order (Normal, then AD/DSV/FB/SC by degree), positions cycling over hosts.
std::vector<FaultLabel> group_labels(Group g);

LabeledDataset generate_group(Group g, std::uint64_t seed, const GenerationConfig& cfg = {});

}  // namespace fradiag
