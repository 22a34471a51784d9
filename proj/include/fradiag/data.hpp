#pragma once

// Sweeps, fault labels, labelled datasets, label schemes and fold assignment.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fradiag/error.hpp"

namespace fradiag {

inline constexpr std::size_t kGridPoints = 2000;
inline constexpr double kDbFloor = -160.0;

enum class FaultType : std::uint8_t { Normal = 0, AD = 1, DSV = 2, FB = 3, SC = 4 };
enum class Connection : std::uint8_t { EE = 0, CIW = 1 };
enum class WindingId : std::uint8_t { Disc10 = 0, Disc12 = 1 };
enum class Group : std::uint8_t { Group1 = 1, Group2 = 2, Group3 = 3 };

std::string_view to_string(FaultType t);
std::string_view to_string(Connection c);
std::string_view to_string(WindingId w);
FaultType parse_fault_type(std::string_view s);
Connection parse_connection(std::string_view s);

Connection connection_of(Group g);
WindingId winding_of(Group g);
/// Throws DomainError for (CIW, disc12), which is not one of the three groups.
Group group_of(Connection c, WindingId w);
/// Fault types (excluding Normal) recorded for a group, in canonical order.
std::vector<FaultType> fault_types_of(Group g);

/// Log-spaced frequency axis with exactly kGridPoints points.
class FrequencyGrid {
public:
    /// 1 kHz .. 1 MHz.
    FrequencyGrid();
    FrequencyGrid(double f_min, double f_max);

    double f_min() const { return f_min_; }
    double f_max() const { return f_max_; }
    std::size_t size() const { return static_cast<std::size_t>(points_.size()); }
    const Eigen::VectorXd& points() const { return points_; }
    double operator[](std::size_t i) const { return points_[static_cast<Eigen::Index>(i)]; }

    /// FNV-1a over (f_min, f_max, count); identifies the grid in sweeps and manifests.
    std::uint64_t id() const;

    bool operator==(const FrequencyGrid& o) const {
        return f_min_ == o.f_min_ && f_max_ == o.f_max_ && size() == o.size();
    }

private:
    double f_min_;
    double f_max_;
    Eigen::VectorXd points_;
};

/// One magnitude curve in dB, stored at 32-bit precision.
struct FRASweep {
    Eigen::VectorXf values;
    std::uint64_t grid_id = 0;
};

/// Throws DomainError if the sweep is not a valid curve on `grid`.
void validate(const FRASweep& s, const FrequencyGrid& grid);

struct FaultLabel {
    FaultType type = FaultType::Normal;
    int degree = 0;
    int position = 0;

    bool operator==(const FaultLabel&) const = default;
};

void validate(const FaultLabel& l);

struct Sample {
    FRASweep sweep;
    FaultLabel label;
    std::uint32_t seed = 0;
};

struct LabeledDataset {
    Connection connection = Connection::EE;
    WindingId winding = WindingId::Disc10;
    FrequencyGrid grid;
    std::vector<Sample> samples;

    Group group() const { return group_of(connection, winding); }
    std::size_t size() const { return samples.size(); }
};

void validate(const LabeledDataset& ds);
/// Fault types present in the dataset (excluding Normal), canonical order.
std::vector<FaultType> fault_types_in(const LabeledDataset& ds);

/// A class of a label scheme. degree == 0 means Normal, or "any degree" in a type scheme.
struct ClassKey {
    FaultType type = FaultType::Normal;
    int degree = 0;

    bool operator==(const ClassKey&) const = default;
};

class LabelScheme {
public:
    enum class Kind : std::uint8_t { Type = 0, Degree = 1, Joint = 2 };

    static LabelScheme type_scheme(std::vector<FaultType> fault_types);
    static LabelScheme degree_scheme(FaultType t);
    static LabelScheme joint_scheme(std::vector<FaultType> fault_types);

    Kind kind() const { return kind_; }
    /// The fault type a degree scheme is specialised to; Normal otherwise.
    FaultType degree_type() const { return degree_type_; }
    int class_count() const { return static_cast<int>(classes_.size()); }
    const std::vector<ClassKey>& classes() const { return classes_; }
    std::vector<std::string> class_names() const;

    int encode(const FaultLabel& label) const;
    ClassKey decode(int class_index) const;

    bool operator==(const LabelScheme& o) const { return kind_ == o.kind_ && classes_ == o.classes_; }

private:
    Kind kind_ = Kind::Type;
    FaultType degree_type_ = FaultType::Normal;
    std::vector<ClassKey> classes_;
};

std::string class_name(const ClassKey& k);
/// Inverse of class_name; used when reading class lists back from model files.
ClassKey parse_class_name(std::string_view s);
/// Rebuilds a scheme from its kind and class list (e.g. from a model header).
LabelScheme scheme_from_classes(LabelScheme::Kind kind, const std::vector<ClassKey>& classes);

std::string_view to_string(LabelScheme::Kind k);

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> one_hot(int class_index, int class_count) {
    if (class_count < 1 || class_index < 0 || class_index >= class_count)
        throw DomainError("one_hot: class index " + std::to_string(class_index) + " outside [0, " +
                          std::to_string(class_count) + ")");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(class_count);
    v[class_index] = Scalar(1);
    return v;
}

std::vector<int> encode_all(const LabelScheme& scheme, const LabeledDataset& ds);

struct FoldAssignment {
    int k = 0;
    std::vector<int> fold_of;
    std::vector<std::string> warnings;

    std::vector<std::size_t> members(int fold) const;
    std::vector<std::size_t> complement(int fold) const;
};

/// Per-class seeded shuffle followed by a round-robin deal that continues across classes,
/// so per-class and total fold sizes each differ by at most one.
FoldAssignment stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

/// Normal samples plus every sample of `t`, in original order.
LabeledDataset slice_degree_task(const LabeledDataset& ds, FaultType t);

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices);

std::vector<char> serialize_dataset(const LabeledDataset& ds);
LabeledDataset deserialize_dataset(std::span<const char> bytes);
void write_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset read_dataset(const std::string& path);
void write_dataset_csv(const LabeledDataset& ds, std::ostream& out);

}  // namespace fradiag
