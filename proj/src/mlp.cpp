#include "fradiag/mlp.hpp"

#include <algorithm>

#include "fradiag/detail/binio.hpp"

namespace fradiag {

namespace {

constexpr char kMagic[4] = {'F', 'R', 'A', 'M'};
constexpr std::uint16_t kVersion = 1;

void write_header(detail::ByteWriter& w, const ModelFile& m) {
    w.bytes(std::string_view(kMagic, 4));
    w.u16(kVersion);
    w.str(m.spec.name);
    w.u8(static_cast<std::uint8_t>(m.connection));
    w.u8(static_cast<std::uint8_t>(m.winding));
    w.u8(static_cast<std::uint8_t>(m.scheme.kind()));
    const auto names = m.scheme.class_names();
    w.u16(static_cast<std::uint16_t>(names.size()));
    for (const auto& n : names) w.str(n);
    w.u32(static_cast<std::uint32_t>(m.spec.widths.size()));
    for (int width : m.spec.widths) w.u32(static_cast<std::uint32_t>(width));
    w.f64(m.spec.dropout_rate);
    w.u16(static_cast<std::uint16_t>(m.spec.dropout_after.size()));
    for (int l : m.spec.dropout_after) w.u16(static_cast<std::uint16_t>(l));
    w.f64(m.spec.input_scale);
}

}  // namespace

bool ModelSpec::drops_after(int layer) const {
    return std::find(dropout_after.begin(), dropout_after.end(), layer) != dropout_after.end();
}

void validate(const ModelSpec& spec) {
    if (spec.widths.size() < 2) throw DomainError("model needs at least one learnable layer");
    for (int w : spec.widths)
        if (w < 1) throw DomainError("layer widths must be positive");
    if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) throw DomainError("dropout rate must be in [0, 1)");
    for (int l : spec.dropout_after)
        if (l < 1 || l >= spec.depth()) throw DomainError("dropout may only follow a hidden layer");
    if (!(std::isfinite(spec.input_scale) && spec.input_scale > 0.0)) throw DomainError("input scale must be positive");
}

std::size_t model_header_size(const ModelFile& model) {
    detail::ByteWriter w;
    write_header(w, model);
    return w.data().size();
}

std::vector<char> serialize_model(const ModelFile& model) {
    validate(model.spec);
    check_shapes(model.params, model.spec);
    if (model.scheme.class_count() != model.spec.output_width())
        throw DomainError("output width does not match the label scheme");
    detail::ByteWriter w;
    write_header(w, model);
    for (std::size_t i = 0; i < model.params.layers(); ++i) {
        const auto& W = model.params.W[i];
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) w.f32(W(r, c));
        for (Eigen::Index r = 0; r < model.params.b[i].size(); ++r) w.f32(model.params.b[i][r]);
    }
    return w.take();
}

ModelFile deserialize_model(std::span<const char> bytes) {
    detail::ByteReader r(bytes);
    if (r.bytes(4) != std::string_view(kMagic, 4)) throw FormatError("not a model file (bad magic)", 0);
    if (const auto v = r.u16(); v != kVersion)
        throw FormatError("unsupported model version " + std::to_string(v), r.offset() - 2);

    ModelFile m;
    m.spec.name = r.str();
    const auto conn = r.u8();
    const auto wind = r.u8();
    const auto kind = r.u8();
    if (conn > 1 || wind > 1 || kind > 2) throw FormatError("bad model metadata tag", r.offset() - 1);
    m.connection = static_cast<Connection>(conn);
    m.winding = static_cast<WindingId>(wind);

    std::vector<ClassKey> classes(r.u16());
    for (auto& c : classes) {
        const auto at = r.offset();
        try {
            c = parse_class_name(r.str());
        } catch (const DomainError& e) {
            throw FormatError(e.what(), at);
        }
    }
    const auto width_count = r.u32();
    if (width_count > 4096) throw FormatError("implausible layer count", r.offset() - 4);
    m.spec.widths.resize(width_count);
    for (auto& w : m.spec.widths) w = static_cast<int>(r.u32());
    m.spec.dropout_rate = r.f64();
    m.spec.dropout_after.resize(r.u16());
    for (auto& l : m.spec.dropout_after) l = r.u16();
    m.spec.input_scale = r.f64();
    const auto header_end = r.offset();
    try {
        validate(m.spec);
        m.scheme = scheme_from_classes(static_cast<LabelScheme::Kind>(kind), classes);
    } catch (const DomainError& e) {
        throw FormatError(e.what(), header_end);
    }
    if (m.scheme.class_count() != m.spec.output_width())
        throw FormatError("output width does not match class list", header_end);

    std::size_t expected = 0;
    for (int i = 0; i < m.spec.depth(); ++i)
        expected += static_cast<std::size_t>(m.spec.widths[i + 1]) * (static_cast<std::size_t>(m.spec.widths[i]) + 1);
    if (r.remaining() < 4 * expected) throw FormatError("truncated weight tensors", r.offset());

    m.params = ModelParams<float>::zeros_like(m.spec);
    for (std::size_t i = 0; i < m.params.layers(); ++i) {
        auto& W = m.params.W[i];
        for (Eigen::Index row = 0; row < W.rows(); ++row)
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(row, c) = r.f32();
        for (Eigen::Index row = 0; row < m.params.b[i].size(); ++row) m.params.b[i][row] = r.f32();
        if (!W.allFinite() || !m.params.b[i].allFinite())
            throw FormatError("non-finite weight in layer " + std::to_string(i + 1), r.offset());
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after weight tensors", r.offset());
    return m;
}

void save_model(const ModelFile& model, const std::string& path) { detail::write_file(path, serialize_model(model)); }

ModelFile load_model(const std::string& path) { return deserialize_model(detail::read_file(path)); }

ModelFile load_model(const std::string& path, const LabelScheme& expected) {
    ModelFile m = load_model(path);
    if (!(m.scheme == expected)) {
        std::string got, want;
        for (const auto& n : m.scheme.class_names()) got += (got.empty() ? "" : ",") + n;
        for (const auto& n : expected.class_names()) want += (want.empty() ? "" : ",") + n;
        throw FormatError("model classes [" + got + "] do not match expected [" + want + "]", 0);
    }
    return m;
}

template ModelParams<float> init<float>(const ModelSpec&, std::uint64_t);
template ModelParams<double> init<double>(const ModelSpec&, std::uint64_t);
template ForwardCache<float> forward<float>(const ModelParams<float>&, const ModelSpec&,
                                            const Eigen::Ref<const MatrixX<float>>&, std::mt19937_64*);
template ForwardCache<double> forward<double>(const ModelParams<double>&, const ModelSpec&,
                                              const Eigen::Ref<const MatrixX<double>>&, std::mt19937_64*);
template ModelParams<float> backward<float>(const ModelParams<float>&, const ModelSpec&, const ForwardCache<float>&,
                                            const Eigen::Ref<const MatrixX<float>>&);
template ModelParams<double> backward<double>(const ModelParams<double>&, const ModelSpec&, const ForwardCache<double>&,
                                              const Eigen::Ref<const MatrixX<double>>&);
template void adam_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamState<float>&);
template void adam_step<double>(ModelParams<double>&, const ModelParams<double>&, AdamState<double>&);

}  // namespace fradiag
