#include "fradiag/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <ostream>
#include <random>

#include "fradiag/detail/binio.hpp"

namespace fradiag {

namespace {

constexpr char kDatasetMagic[4] = {'F', 'R', 'D', 'S'};
constexpr std::uint16_t kDatasetVersion = 1;

constexpr std::array<FaultType, 4> kFaultOrder = {FaultType::AD, FaultType::DSV, FaultType::FB, FaultType::SC};

std::vector<FaultType> canonical(std::vector<FaultType> types) {
    std::vector<FaultType> out;
    for (FaultType t : kFaultOrder)
        if (std::find(types.begin(), types.end(), t) != types.end()) out.push_back(t);
    for (FaultType t : types)
        if (t == FaultType::Normal) throw DomainError("label scheme: Normal is implicit, not a fault type");
    if (out.empty()) throw DomainError("label scheme needs at least one fault type");
    return out;
}

}  // namespace

std::string_view to_string(FaultType t) {
    switch (t) {
        case FaultType::Normal: return "Normal";
        case FaultType::AD: return "AD";
        case FaultType::DSV: return "DSV";
        case FaultType::FB: return "FB";
        case FaultType::SC: return "SC";
    }
    return "?";
}

std::string_view to_string(Connection c) { return c == Connection::EE ? "EE" : "CIW"; }
std::string_view to_string(WindingId w) { return w == WindingId::Disc10 ? "disc10" : "disc12"; }

std::string_view to_string(LabelScheme::Kind k) {
    switch (k) {
        case LabelScheme::Kind::Type: return "type";
        case LabelScheme::Kind::Degree: return "degree";
        case LabelScheme::Kind::Joint: return "joint";
    }
    return "?";
}

FaultType parse_fault_type(std::string_view s) {
    std::string u(s);
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
    if (u == "NORMAL") return FaultType::Normal;
    if (u == "AD") return FaultType::AD;
    if (u == "DSV") return FaultType::DSV;
    if (u == "FB") return FaultType::FB;
    if (u == "SC") return FaultType::SC;
    throw DomainError("unknown fault type '" + std::string(s) + "'");
}

Connection parse_connection(std::string_view s) {
    std::string u(s);
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
    if (u == "EE") return Connection::EE;
    if (u == "CIW") return Connection::CIW;
    throw DomainError("unknown connection '" + std::string(s) + "'");
}

Connection connection_of(Group g) { return g == Group::Group2 ? Connection::CIW : Connection::EE; }
WindingId winding_of(Group g) { return g == Group::Group3 ? WindingId::Disc12 : WindingId::Disc10; }

Group group_of(Connection c, WindingId w) {
    if (w == WindingId::Disc10) return c == Connection::EE ? Group::Group1 : Group::Group2;
    if (c == Connection::EE) return Group::Group3;
    throw DomainError("(CIW, disc12) is not a recorded dataset group");
}

std::vector<FaultType> fault_types_of(Group g) {
    if (g == Group::Group3) return {FaultType::AD, FaultType::DSV, FaultType::FB, FaultType::SC};
    return {FaultType::AD, FaultType::DSV, FaultType::FB};
}

// ---------------------------------------------------------------------------
// FrequencyGrid

FrequencyGrid::FrequencyGrid() : FrequencyGrid(1e3, 1e6) {}

FrequencyGrid::FrequencyGrid(double f_min, double f_max) : f_min_(f_min), f_max_(f_max) {
    if (!(std::isfinite(f_min) && std::isfinite(f_max) && f_min > 0.0 && f_max > f_min))
        throw DomainError("frequency grid needs 0 < f_min < f_max");
    const auto n = static_cast<Eigen::Index>(kGridPoints);
    const double log_step = std::log(f_max / f_min) / static_cast<double>(n - 1);
    points_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) points_[i] = f_min * std::exp(log_step * static_cast<double>(i));
    points_[n - 1] = f_max;
}

std::uint64_t FrequencyGrid::id() const {
    detail::ByteWriter w;
    w.f64(f_min_);
    w.f64(f_max_);
    w.u32(static_cast<std::uint32_t>(size()));
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : w.data()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Validation

void validate(const FRASweep& s, const FrequencyGrid& grid) {
    if (static_cast<std::size_t>(s.values.size()) != grid.size())
        throw DomainError("sweep length " + std::to_string(s.values.size()) + " does not match grid");
    if (s.grid_id != grid.id()) throw DomainError("sweep recorded on a different frequency grid");
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
        const float v = s.values[i];
        if (!std::isfinite(v)) throw DomainError("sweep value " + std::to_string(i) + " is not finite");
        if (v < static_cast<float>(kDbFloor)) throw DomainError("sweep value below the dB floor");
    }
}

void validate(const FaultLabel& l) {
    if (l.type == FaultType::Normal) {
        if (l.degree != 0 || l.position != 0) throw DomainError("Normal label must have degree 0 and position 0");
    } else if (l.degree < 1 || l.degree > 4) {
        throw DomainError("fault degree must be in 1..4");
    }
    if (l.position < 0) throw DomainError("position must be non-negative");
}

void validate(const LabeledDataset& ds) {
    (void)ds.group();
    for (const Sample& s : ds.samples) {
        validate(s.label);
        validate(s.sweep, ds.grid);
    }
}

std::vector<FaultType> fault_types_in(const LabeledDataset& ds) {
    std::vector<FaultType> out;
    for (FaultType t : kFaultOrder)
        if (std::any_of(ds.samples.begin(), ds.samples.end(), [t](const Sample& s) { return s.label.type == t; }))
            out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------
// Label schemes

LabelScheme LabelScheme::type_scheme(std::vector<FaultType> fault_types) {
    LabelScheme s;
    s.kind_ = Kind::Type;
    s.classes_.push_back({FaultType::Normal, 0});
    for (FaultType t : canonical(std::move(fault_types))) s.classes_.push_back({t, 0});
    return s;
}

LabelScheme LabelScheme::degree_scheme(FaultType t) {
    if (t == FaultType::Normal) throw DomainError("degree scheme needs a fault type");
    LabelScheme s;
    s.kind_ = Kind::Degree;
    s.degree_type_ = t;
    s.classes_.push_back({FaultType::Normal, 0});
    for (int d = 1; d <= 4; ++d) s.classes_.push_back({t, d});
    return s;
}

LabelScheme LabelScheme::joint_scheme(std::vector<FaultType> fault_types) {
    LabelScheme s;
    s.kind_ = Kind::Joint;
    s.classes_.push_back({FaultType::Normal, 0});
    for (FaultType t : canonical(std::move(fault_types)))
        for (int d = 1; d <= 4; ++d) s.classes_.push_back({t, d});
    return s;
}

std::string class_name(const ClassKey& k) {
    std::string n(to_string(k.type));
    if (k.degree > 0) n += "-" + std::to_string(k.degree);
    return n;
}

ClassKey parse_class_name(std::string_view s) {
    const auto dash = s.find('-');
    if (dash == std::string_view::npos) return {parse_fault_type(s), 0};
    const std::string deg(s.substr(dash + 1));
    if (deg.size() != 1 || deg[0] < '1' || deg[0] > '4') throw DomainError("bad class name '" + std::string(s) + "'");
    return {parse_fault_type(s.substr(0, dash)), deg[0] - '0'};
}

LabelScheme scheme_from_classes(LabelScheme::Kind kind, const std::vector<ClassKey>& classes) {
    std::vector<FaultType> types;
    for (const ClassKey& c : classes)
        if (c.type != FaultType::Normal && std::find(types.begin(), types.end(), c.type) == types.end())
            types.push_back(c.type);
    LabelScheme s;
    switch (kind) {
        case LabelScheme::Kind::Type: s = LabelScheme::type_scheme(types); break;
        case LabelScheme::Kind::Joint: s = LabelScheme::joint_scheme(types); break;
        case LabelScheme::Kind::Degree:
            if (types.size() != 1) throw DomainError("degree scheme class list must name one fault type");
            s = LabelScheme::degree_scheme(types.front());
            break;
    }
    if (s.classes() != classes) throw DomainError("class list is not in canonical scheme order");
    return s;
}

std::vector<std::string> LabelScheme::class_names() const {
    std::vector<std::string> out;
    out.reserve(classes_.size());
    for (const ClassKey& k : classes_) out.push_back(class_name(k));
    return out;
}

int LabelScheme::encode(const FaultLabel& label) const {
    validate(label);
    if (label.type == FaultType::Normal) return 0;
    const ClassKey key{label.type, kind_ == Kind::Type ? 0 : label.degree};
    const auto it = std::find(classes_.begin(), classes_.end(), key);
    if (it == classes_.end())
        throw DomainError("label " + class_name({label.type, label.degree}) + " not covered by " +
                          std::string(to_string(kind_)) + " scheme");
    return static_cast<int>(it - classes_.begin());
}

ClassKey LabelScheme::decode(int class_index) const {
    if (class_index < 0 || class_index >= class_count())
        throw DomainError("class index " + std::to_string(class_index) + " out of range");
    return classes_[static_cast<std::size_t>(class_index)];
}

std::vector<int> encode_all(const LabelScheme& scheme, const LabeledDataset& ds) {
    std::vector<int> out;
    out.reserve(ds.samples.size());
    for (const Sample& s : ds.samples) out.push_back(scheme.encode(s.label));
    return out;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::size_t> FoldAssignment::members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::complement(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(i);
    return out;
}

FoldAssignment stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw DomainError("stratified_folds: k must be >= 2");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) throw DomainError("stratified_folds: negative class index");
        by_class[labels[i]].push_back(i);
    }

    FoldAssignment fa;
    fa.k = k;
    fa.fold_of.assign(labels.size(), -1);
    std::mt19937_64 rng(seed);
    std::size_t deal = 0;
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < static_cast<std::size_t>(k))
            fa.warnings.push_back("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                                  " samples for " + std::to_string(k) + " folds");
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i : idx) fa.fold_of[i] = static_cast<int>(deal++ % static_cast<std::size_t>(k));
    }
    return fa;
}

// ---------------------------------------------------------------------------
// Slicing

LabeledDataset slice_degree_task(const LabeledDataset& ds, FaultType t) {
    if (t == FaultType::Normal) throw DomainError("slice_degree_task: fault type must not be Normal");
    LabeledDataset out{ds.connection, ds.winding, ds.grid, {}};
    bool found = false;
    for (const Sample& s : ds.samples) {
        if (s.label.type == t) found = true;
        if (s.label.type == t || s.label.type == FaultType::Normal) out.samples.push_back(s);
    }
    if (!found) throw DomainError("slice_degree_task: no " + std::string(to_string(t)) + " samples in dataset");
    return out;
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices) {
    LabeledDataset out{ds.connection, ds.winding, ds.grid, {}};
    out.samples.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= ds.samples.size()) throw DomainError("subset: index out of range");
        out.samples.push_back(ds.samples[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// File I/O

std::vector<char> serialize_dataset(const LabeledDataset& ds) {
    (void)ds.group();
    detail::ByteWriter w;
    w.bytes(std::string_view(kDatasetMagic, 4));
    w.u16(kDatasetVersion);
    w.u8(static_cast<std::uint8_t>(ds.connection));
    w.u8(static_cast<std::uint8_t>(ds.winding));
    w.f64(ds.grid.f_min());
    w.f64(ds.grid.f_max());
    w.u32(static_cast<std::uint32_t>(ds.grid.size()));
    w.u32(static_cast<std::uint32_t>(ds.samples.size()));
    for (const Sample& s : ds.samples) {
        if (static_cast<std::size_t>(s.sweep.values.size()) != ds.grid.size())
            throw DomainError("write_dataset: sweep length does not match grid");
        w.u8(static_cast<std::uint8_t>(s.label.type));
        w.u8(static_cast<std::uint8_t>(s.label.degree));
        w.u16(static_cast<std::uint16_t>(s.label.position));
        w.u32(s.seed);
        for (Eigen::Index i = 0; i < s.sweep.values.size(); ++i) w.f32(s.sweep.values[i]);
    }
    return w.take();
}

LabeledDataset deserialize_dataset(std::span<const char> bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < 4 || r.bytes(4) != std::string_view(kDatasetMagic, 4)) throw FormatError("bad dataset magic", 0);
    const std::size_t version_at = r.offset();
    if (r.u16() != kDatasetVersion) throw FormatError("unsupported dataset version", version_at);

    LabeledDataset ds;
    const std::size_t tag_at = r.offset();
    const std::uint8_t conn = r.u8();
    const std::uint8_t wind = r.u8();
    if (conn > 1 || wind > 1) throw FormatError("bad connection/winding tag", tag_at);
    ds.connection = static_cast<Connection>(conn);
    ds.winding = static_cast<WindingId>(wind);
    try {
        (void)ds.group();
    } catch (const DomainError& e) {
        throw FormatError(e.what(), tag_at);
    }

    const std::size_t grid_at = r.offset();
    const double f_min = r.f64();
    const double f_max = r.f64();
    const std::uint32_t count = r.u32();
    if (count != kGridPoints) throw FormatError("grid mismatch: " + std::to_string(count) + " points", grid_at);
    try {
        ds.grid = FrequencyGrid(f_min, f_max);
    } catch (const DomainError& e) {
        throw FormatError(std::string("grid mismatch: ") + e.what(), grid_at);
    }
    const std::uint64_t grid_id = ds.grid.id();

    const std::uint32_t n = r.u32();
    const std::size_t per_sample = 8 + 4 * static_cast<std::size_t>(count);
    if (r.remaining() < static_cast<std::size_t>(n) * per_sample)
        throw FormatError("truncated payload: " + std::to_string(n) + " samples declared", r.offset());
    ds.samples.resize(n);
    for (Sample& s : ds.samples) {
        const std::size_t at = r.offset();
        const std::uint8_t type = r.u8();
        if (type > 4) throw FormatError("bad fault type", at);
        s.label.type = static_cast<FaultType>(type);
        s.label.degree = r.u8();
        s.label.position = r.u16();
        s.seed = r.u32();
        try {
            validate(s.label);
        } catch (const DomainError& e) {
            throw FormatError(e.what(), at);
        }
        s.sweep.grid_id = grid_id;
        s.sweep.values.resize(count);
        for (std::uint32_t i = 0; i < count; ++i) s.sweep.values[i] = r.f32();
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after dataset", r.offset());
    return ds;
}

void write_dataset(const LabeledDataset& ds, const std::string& path) {
    const auto bytes = serialize_dataset(ds);
    detail::write_file(path, bytes);
}

LabeledDataset read_dataset(const std::string& path) { return deserialize_dataset(detail::read_file(path)); }

void write_dataset_csv(const LabeledDataset& ds, std::ostream& out) {
    out << "type,degree,position,seed";
    out << std::setprecision(6);
    for (std::size_t i = 0; i < ds.grid.size(); ++i) out << ",f=" << ds.grid[i];
    out << '\n';
    for (const Sample& s : ds.samples) {
        out << to_string(s.label.type) << ',' << s.label.degree << ',' << s.label.position << ',' << s.seed;
        for (Eigen::Index i = 0; i < s.sweep.values.size(); ++i) out << ',' << s.sweep.values[i];
        out << '\n';
    }
}

namespace detail {

std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace detail

}  // namespace fradiag
