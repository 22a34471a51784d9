#include "fradiag/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <limits>
#include <random>
#include <sstream>

#include "fradiag/detail/binio.hpp"
#include "fradiag/detail/parallel.hpp"
#include "fradiag/detail/seed.hpp"

namespace fradiag {

namespace {

constexpr Eigen::Index kEvalBatch = 256;

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TrainConfig TrainConfig::reseeded(std::uint64_t seed, std::uint64_t stream) const {
    TrainConfig c = *this;
    const std::uint64_t base = detail::derive_seed(seed, stream);
    c.init_seed = detail::derive_seed(base, 1);
    c.shuffle_seed = detail::derive_seed(base, 2);
    c.dropout_seed = detail::derive_seed(base, 3);
    return c;
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1 ||
        !(cfg.min_improvement >= 0.0))
        throw DomainError("training configuration values must be positive");
}

Eigen::MatrixXf design_matrix(const LabeledDataset& ds) {
    if (ds.samples.empty()) return Eigen::MatrixXf(static_cast<Eigen::Index>(ds.grid.size()), 0);
    Eigen::MatrixXf X(ds.samples.front().sweep.values.size(), static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.samples[i].sweep.values.size() != X.rows()) throw DomainError("sweeps differ in length");
        X.col(static_cast<Eigen::Index>(i)) = ds.samples[i].sweep.values;
    }
    return X;
}

TrainResult train(const ModelSpec& spec, const LabeledDataset& ds, const LabelScheme& scheme, const TrainConfig& cfg) {
    validate(spec);
    validate(cfg);
    if (ds.samples.empty()) throw DomainError("cannot train on an empty dataset");
    if (static_cast<std::size_t>(cfg.batch_size) > ds.size())
        throw DomainError("batch size " + std::to_string(cfg.batch_size) + " exceeds dataset size " +
                          std::to_string(ds.size()));
    if (spec.output_width() != scheme.class_count()) throw DomainError("model output width does not match the label scheme");

    const Eigen::MatrixXf X = design_matrix(ds);
    if (X.rows() != spec.input_width()) throw DomainError("sweep length does not match the model input width");
    const std::vector<int> labels = encode_all(scheme, ds);

    TrainResult result;
    std::vector<int> seen(static_cast<std::size_t>(scheme.class_count()), 0);
    for (int l : labels) seen[static_cast<std::size_t>(l)] = 1;
    for (int c = 0; c < scheme.class_count(); ++c)
        if (!seen[static_cast<std::size_t>(c)])
            result.warnings.push_back("class " + class_name(scheme.decode(c)) + " absent from training data");

    result.params = init<float>(spec, cfg.init_seed);
    auto adam = AdamState<float>::fresh(spec, cfg.learning_rate);
    std::mt19937_64 shuffle_rng(cfg.shuffle_seed);
    std::mt19937_64 dropout_rng(cfg.dropout_seed);
    std::mt19937_64* dropout = spec.dropout_after.empty() ? nullptr : &dropout_rng;

    const auto n = static_cast<Eigen::Index>(ds.size());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::MatrixXf Xb, Yb;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double total = 0.0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - start);
            Xb.resize(X.rows(), bs);
            Yb.setZero(spec.output_width(), bs);
            for (Eigen::Index j = 0; j < bs; ++j) {
                const Eigen::Index idx = order[static_cast<std::size_t>(start + j)];
                Xb.col(j) = X.col(idx);
                Yb(labels[static_cast<std::size_t>(idx)], j) = 1.0f;
            }
            const auto cache = forward<float>(result.params, spec, Xb, dropout);
            total += static_cast<double>(cross_entropy(cache.probs, Yb)) * static_cast<double>(bs);
            const auto grads = backward<float>(result.params, spec, cache, Yb);
            adam_step(result.params, grads, adam);
        }
        const double loss = total / static_cast<double>(n);
        if (!std::isfinite(loss)) throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
        result.loss_history.push_back(loss);
        if (loss < best - cfg.min_improvement) {
            best = loss;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return result;
}

Eigen::MatrixXf predict_all(const ModelParams<float>& params, const ModelSpec& spec, const Eigen::Ref<const Eigen::MatrixXf>& X) {
    Eigen::MatrixXf out(spec.output_width(), X.cols());
    for (Eigen::Index start = 0; start < X.cols(); start += kEvalBatch) {
        const Eigen::Index bs = std::min(kEvalBatch, X.cols() - start);
        out.middleCols(start, bs) = forward<float>(params, spec, X.middleCols(start, bs)).probs;
    }
    return out;
}

std::vector<int> predict_classes(const ModelParams<float>& params, const ModelSpec& spec, const LabeledDataset& ds) {
    const Eigen::MatrixXf probs = predict_all(params, spec, design_matrix(ds));
    std::vector<int> out(static_cast<std::size_t>(probs.cols()));
    for (Eigen::Index i = 0; i < probs.cols(); ++i) out[static_cast<std::size_t>(i)] = argmax(probs.col(i));
    return out;
}

ConfusionMatrix evaluate(const ModelParams<float>& params, const ModelSpec& spec, const LabeledDataset& ds,
                         const LabelScheme& scheme) {
    if (ds.samples.empty()) throw DomainError("cannot evaluate on an empty dataset");
    return confusion(predict_classes(params, spec, ds), encode_all(scheme, ds), scheme.class_count());
}

ConfusionMatrix CVReport::pooled_confusion() const {
    ConfusionMatrix total(scheme.class_count());
    for (const auto& f : folds) total += f.confusion;
    return total;
}

namespace {

void summarise(CVReport& r) {
    const auto k = static_cast<double>(r.folds.size());
    double sa = 0, sf = 0;
    for (const auto& f : r.folds) {
        sa += f.accuracy;
        sf += f.macro_f1;
    }
    r.mean_accuracy = sa / k;
    r.mean_macro_f1 = sf / k;
    double va = 0, vf = 0;
    for (const auto& f : r.folds) {
        va += (f.accuracy - r.mean_accuracy) * (f.accuracy - r.mean_accuracy);
        vf += (f.macro_f1 - r.mean_macro_f1) * (f.macro_f1 - r.mean_macro_f1);
    }
    r.std_accuracy = k > 1 ? std::sqrt(va / (k - 1)) : 0.0;
    r.std_macro_f1 = k > 1 ? std::sqrt(vf / (k - 1)) : 0.0;
    r.sem_accuracy = r.std_accuracy / std::sqrt(k);
    r.sem_macro_f1 = r.std_macro_f1 / std::sqrt(k);
}

}  // namespace

CVReport cross_validate(const SpecBuilder& builder, const LabeledDataset& ds, const LabelScheme& scheme, int k,
                        const TrainConfig& cfg, std::uint64_t fold_seed, int jobs) {
    if (k < 2) throw DomainError("cross-validation needs k >= 2");
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int> labels = encode_all(scheme, ds);
    const FoldAssignment folds = stratified_folds(labels, k, fold_seed);
    const ModelSpec spec = builder(scheme.class_count());

    CVReport report;
    report.architecture = spec.name;
    report.scheme = scheme;
    report.k = k;
    report.samples = ds.size();
    report.warnings = folds.warnings;
    report.folds.resize(static_cast<std::size_t>(k));
    std::vector<std::vector<std::string>> fold_warnings(static_cast<std::size_t>(k));

    detail::parallel_for(static_cast<std::size_t>(k), jobs, [&](std::size_t f) {
        const auto start = std::chrono::steady_clock::now();
        const auto held = folds.members(static_cast<int>(f));
        const auto rest = folds.complement(static_cast<int>(f));
        const LabeledDataset train_set = subset(ds, rest);
        const LabeledDataset test_set = subset(ds, held);
        const TrainResult tr = train(spec, train_set, scheme, cfg.reseeded(cfg.init_seed, f));
        FoldResult& out = report.folds[f];
        out.confusion = evaluate(tr.params, spec, test_set, scheme);
        out.accuracy = accuracy(out.confusion);
        out.macro_f1 = macro_f1(out.confusion);
        out.train_size = train_set.size();
        out.held_out.assign(held.begin(), held.end());
        out.epochs = static_cast<int>(tr.loss_history.size());
        out.seconds = seconds_since(start);
        for (const auto& w : tr.warnings) fold_warnings[f].push_back("fold " + std::to_string(f) + ": " + w);
    });
    for (const auto& ws : fold_warnings) report.warnings.insert(report.warnings.end(), ws.begin(), ws.end());
    summarise(report);
    report.seconds = seconds_since(t0);
    return report;
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    if (static_cast<int>(class_names.size()) != cm.classes()) throw DomainError("class name count mismatch");
    std::ostringstream out;
    out << "truth\\predicted";
    for (const auto& n : class_names) out << ',' << n;
    out << '\n';
    for (int r = 0; r < cm.classes(); ++r) {
        out << class_names[static_cast<std::size_t>(r)];
        for (int c = 0; c < cm.classes(); ++c) out << ',' << cm(r, c);
        out << '\n';
    }
    return out.str();
}

std::string format_report(const CVReport& r) {
    std::ostringstream out;
    std::string classes;
    for (const auto& n : r.scheme.class_names()) classes += (classes.empty() ? "" : ",") + n;
    out << "architecture " << r.architecture << '\n';
    out << "scheme " << to_string(r.scheme.kind()) << '\n';
    out << "classes " << classes << '\n';
    out << "k " << r.k << '\n';
    out << "samples " << r.samples << '\n';
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
        const auto& fr = r.folds[f];
        const std::string p = "fold." + std::to_string(f) + '.';
        out << p << "accuracy " << num(fr.accuracy) << '\n';
        out << p << "macro_f1 " << num(fr.macro_f1) << '\n';
        out << p << "train_size " << fr.train_size << '\n';
        out << p << "test_size " << fr.confusion.total() << '\n';
        out << p << "epochs " << fr.epochs << '\n';
        out << p << "confusion";
        for (int i = 0; i < fr.confusion.classes(); ++i)
            for (int j = 0; j < fr.confusion.classes(); ++j) out << ' ' << fr.confusion(i, j);
        out << '\n';
    }
    out << "mean_accuracy " << num(r.mean_accuracy) << '\n';
    out << "std_accuracy " << num(r.std_accuracy) << '\n';
    out << "sem_accuracy " << num(r.sem_accuracy) << '\n';
    out << "mean_macro_f1 " << num(r.mean_macro_f1) << '\n';
    out << "std_macro_f1 " << num(r.std_macro_f1) << '\n';
    out << "sem_macro_f1 " << num(r.sem_macro_f1) << '\n';
    for (const auto& w : r.warnings) out << "warning " << w << '\n';
    return out.str();
}

CVReport parse_report(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::string> kv;
    CVReport r;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw FormatError("malformed report line '" + line + "'", offset);
        const std::string key = line.substr(0, sp);
        const std::string value = line.substr(sp + 1);
        if (key == "warning")
            r.warnings.push_back(value);
        else
            kv[key] = value;
        offset += line.size() + 1;
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("report is missing '" + key + "'", 0);
        return it->second;
    };
    auto real = [&](const std::string& key) {
        const std::string& s = get(key);
        double v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{}) throw FormatError("bad number for '" + key + "'", 0);
        return v;
    };
    auto integer = [&](const std::string& key) { return std::stoll(get(key)); };

    r.architecture = get("architecture");
    const std::string& kind_name = get("scheme");
    LabelScheme::Kind kind = LabelScheme::Kind::Type;
    bool kind_found = false;
    for (auto k : {LabelScheme::Kind::Type, LabelScheme::Kind::Degree, LabelScheme::Kind::Joint})
        if (to_string(k) == kind_name) {
            kind = k;
            kind_found = true;
        }
    if (!kind_found) throw FormatError("unknown scheme kind '" + kind_name + "'", 0);
    std::vector<ClassKey> classes;
    std::istringstream cls(get("classes"));
    for (std::string name; std::getline(cls, name, ',');) classes.push_back(parse_class_name(name));
    try {
        r.scheme = scheme_from_classes(kind, classes);
    } catch (const DomainError& e) {
        throw FormatError(e.what(), 0);
    }
    r.k = static_cast<int>(integer("k"));
    r.samples = static_cast<std::size_t>(integer("samples"));
    const int c = r.scheme.class_count();
    for (int f = 0; f < r.k; ++f) {
        const std::string p = "fold." + std::to_string(f) + '.';
        FoldResult fr;
        fr.accuracy = real(p + "accuracy");
        fr.macro_f1 = real(p + "macro_f1");
        fr.train_size = static_cast<std::size_t>(integer(p + "train_size"));
        fr.epochs = static_cast<int>(integer(p + "epochs"));
        Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts(c, c);
        std::istringstream cs(get(p + "confusion"));
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j)
                if (!(cs >> counts(i, j))) throw FormatError("short confusion row in " + p, 0);
        fr.confusion = ConfusionMatrix::from_counts(counts);
        r.folds.push_back(std::move(fr));
    }
    summarise(r);
    return r;
}

void write_report(const CVReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream out(d / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (d / name).string());
        out << text;
    };
    put("report.txt", format_report(report));
    const auto names = report.scheme.class_names();
    for (std::size_t f = 0; f < report.folds.size(); ++f)
        put("fold_" + std::to_string(f) + "_confusion.csv", confusion_csv(report.folds[f].confusion, names));
    std::ostringstream timing;
    timing << "total_seconds " << report.seconds << '\n';
    for (std::size_t f = 0; f < report.folds.size(); ++f)
        timing << "fold." << f << ".seconds " << report.folds[f].seconds << '\n';
    put("timing.txt", timing.str());
}

CVReport read_report(const std::string& dir) {
    const auto bytes = detail::read_file((std::filesystem::path(dir) / "report.txt").string());
    return parse_report(std::string(bytes.begin(), bytes.end()));
}

}  // namespace fradiag
