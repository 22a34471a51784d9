#include "fradiag/diagsys.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

namespace fradiag {

namespace {

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_num(const std::string& s, const std::string& what) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw FormatError("bad number for " + what, 0);
    return v;
}

std::map<std::string, std::string> key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::size_t offset = 0;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') {
            offset += line.size() + 1;
            continue;
        }
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw FormatError("malformed line '" + line + "'", offset);
        kv[line.substr(0, sp)] = line.substr(sp + 1);
        offset += line.size() + 1;
    }
    return kv;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
    return out;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string item; std::getline(in, item, ',');) out.push_back(item);
    return out;
}

std::string probs_line(const Eigen::VectorXd& p) {
    std::string out;
    for (Eigen::Index i = 0; i < p.size(); ++i) out += (i ? " " : "") + num(p[i]);
    return out;
}

Eigen::VectorXd parse_probs(const std::string& s, std::size_t n, const std::string& what) {
    std::istringstream in(s);
    std::vector<double> v;
    for (std::string tok; in >> tok;) v.push_back(parse_num(tok, what));
    if (v.size() != n) throw FormatError(what + " has the wrong number of entries", 0);
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_sweep(const FRASweep& s, std::uint64_t grid_id, std::string_view which) {
    if (s.grid_id != grid_id) throw DomainError(std::string(which) + " sweep is not on the pipeline grid");
}

}  // namespace

Eigen::VectorXd MlpClassifier::predict(const FRASweep& sweep) const {
    return fradiag::predict<float>(model_.params, model_.spec, sweep.values).cast<double>();
}

Eigen::VectorXd fuse(const Eigen::Ref<const Eigen::VectorXd>& p1, const Eigen::Ref<const Eigen::VectorXd>& p2, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("fusion weight must be in [0, 1]");
    if (p1.size() != p2.size()) throw DomainError("fused prediction vectors differ in length");
    return lambda * p1 + (1.0 - lambda) * p2;
}

FusedClassifier::FusedClassifier(std::shared_ptr<const Classifier> first, std::shared_ptr<const Classifier> second,
                                 double lambda)
    : first_(std::move(first)), second_(std::move(second)), lambda_(lambda) {
    if (!first_ || !second_) throw DomainError("fusion needs two classifiers");
    if (!(first_->scheme() == second_->scheme())) throw DomainError("fused classifiers use different label schemes");
    if (first_->connection() != second_->connection()) throw DomainError("fused classifiers target different connections");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("fusion weight must be in [0, 1]");
}

Eigen::VectorXd FusedClassifier::predict(const FRASweep& sweep) const {
    return fuse(first_->predict(sweep), second_->predict(sweep), lambda_);
}

LambdaChoice tune_lambda(const Classifier& m1, const Classifier& m2, const LabeledDataset& validation) {
    if (!(m1.scheme() == m2.scheme())) throw DomainError("tune_lambda: models use different label schemes");
    if (validation.samples.empty()) throw DomainError("tune_lambda: empty validation set");
    const auto truth = encode_all(m1.scheme(), validation);
    std::vector<Eigen::VectorXd> p1, p2;
    for (const auto& s : validation.samples) {
        p1.push_back(m1.predict(s.sweep));
        p2.push_back(m2.predict(s.sweep));
    }
    LambdaChoice best;
    double best_acc = -1.0;
    int best_step = kLambdaSteps / 2;
    for (int i = 0; i <= kLambdaSteps; ++i) {
        const double lambda = static_cast<double>(i) / kLambdaSteps;
        int correct = 0;
        for (std::size_t j = 0; j < truth.size(); ++j)
            if (argmax(fuse(p1[j], p2[j], lambda)) == truth[j]) ++correct;
        const double acc = static_cast<double>(correct) / static_cast<double>(truth.size());
        best.grid_accuracy[static_cast<std::size_t>(i)] = acc;
        const bool better = acc > best_acc ||
                            (acc == best_acc && std::abs(2 * i - kLambdaSteps) < std::abs(2 * best_step - kLambdaSteps));
        if (better) {
            best_acc = acc;
            best_step = i;
        }
    }
    best.lambda = static_cast<double>(best_step) / kLambdaSteps;
    best.accuracy = best_acc;
    return best;
}

std::string Diagnosis::verdict() const {
    if (healthy) return "Healthy";
    return "Fault " + std::string(to_string(type)) + " " + std::to_string(degree);
}

namespace {

void run_stage2(Diagnosis& d, const Classifier& stage2, const FRASweep& ciw) {
    const Eigen::VectorXd p = stage2.predict(ciw);
    int top = argmax(p);
    if (stage2.scheme().decode(top).type == FaultType::Normal) {
        d.conflict = true;
        top = -1;
        for (int i = 0; i < p.size(); ++i)
            if (stage2.scheme().decode(i).type != FaultType::Normal && (top < 0 || p[i] > p[top])) top = i;
    }
    const ClassKey k = stage2.scheme().decode(top);
    d.healthy = false;
    d.type = k.type;
    d.degree = k.degree;
    d.stage2_classes = stage2.scheme().class_names();
    d.stage2_probs = p;
}

void check_stage2(const Classifier& stage2) {
    if (stage2.connection() != Connection::CIW) throw DomainError("stage-2 model was not trained on CIW data");
    if (stage2.scheme().kind() != LabelScheme::Kind::Joint)
        throw DomainError("stage-2 model must use the joint type-and-degree scheme");
}

}  // namespace

Diagnosis diagnose(const Classifier& stage1, const Classifier& stage2, const FRASweep& ee, const FRASweep& ciw,
                   std::uint64_t grid_id) {
    if (stage1.connection() != Connection::EE) throw DomainError("stage-1 model was not trained on EE data");
    if (stage1.scheme().decode(0).type != FaultType::Normal) throw DomainError("stage-1 scheme has no Normal class");
    check_stage2(stage2);
    check_sweep(ee, grid_id, "EE");
    check_sweep(ciw, grid_id, "CIW");

    Diagnosis d;
    d.stage1_classes = stage1.scheme().class_names();
    d.stage1_probs = stage1.predict(ee);
    if (stage1.scheme().decode(argmax(d.stage1_probs)).type == FaultType::Normal) return d;
    run_stage2(d, stage2, ciw);
    return d;
}

Diagnosis diagnose_stage2_only(const Classifier& stage2, const FRASweep& ciw, std::uint64_t grid_id) {
    check_stage2(stage2);
    check_sweep(ciw, grid_id, "CIW");
    Diagnosis d;
    run_stage2(d, stage2, ciw);
    return d;
}

std::string format_diagnosis(const Diagnosis& d) {
    std::ostringstream out;
    out << "verdict " << (d.healthy ? "Healthy" : "Fault") << '\n';
    if (!d.healthy) {
        out << "type " << to_string(d.type) << '\n';
        out << "degree " << d.degree << '\n';
    }
    out << "conflict " << (d.conflict ? 1 : 0) << '\n';
    if (!d.stage1_classes.empty()) {
        out << "stage1.classes " << join(d.stage1_classes) << '\n';
        out << "stage1.probs " << probs_line(d.stage1_probs) << '\n';
    }
    if (d.stage2_probs) {
        out << "stage2.classes " << join(d.stage2_classes) << '\n';
        out << "stage2.probs " << probs_line(*d.stage2_probs) << '\n';
    }
    return out.str();
}

Diagnosis parse_diagnosis(const std::string& text) {
    const auto kv = key_values(text);
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("diagnosis is missing '" + k + "'", 0);
        return it->second;
    };
    Diagnosis d;
    const std::string& verdict = get("verdict");
    if (verdict != "Healthy" && verdict != "Fault") throw FormatError("unknown verdict '" + verdict + "'", 0);
    d.healthy = verdict == "Healthy";
    if (!d.healthy) {
        try {
            d.type = parse_fault_type(get("type"));
        } catch (const DomainError& e) {
            throw FormatError(e.what(), 0);
        }
        d.degree = std::stoi(get("degree"));
    }
    d.conflict = get("conflict") == "1";
    if (kv.count("stage1.classes")) {
        d.stage1_classes = split(get("stage1.classes"));
        d.stage1_probs = parse_probs(get("stage1.probs"), d.stage1_classes.size(), "stage1.probs");
    }
    if (kv.count("stage2.classes")) {
        d.stage2_classes = split(get("stage2.classes"));
        d.stage2_probs = parse_probs(get("stage2.probs"), d.stage2_classes.size(), "stage2.probs");
    }
    return d;
}

std::string format_manifest(const PipelineManifest& m) {
    std::ostringstream out;
    auto stage = [&](const char* name, const StageRef& s) {
        out << name << ".model " << s.model << '\n';
        if (!s.partner.empty()) {
            out << name << ".partner " << s.partner << '\n';
            out << name << ".lambda " << num(s.lambda) << '\n';
        }
    };
    stage("stage1", m.stage1);
    stage("stage2", m.stage2);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(m.grid_id));
    out << "grid " << hex << '\n';
    return out.str();
}

PipelineManifest parse_manifest(const std::string& text) {
    const auto kv = key_values(text);
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("manifest is missing '" + k + "'", 0);
        return it->second;
    };
    PipelineManifest m;
    auto stage = [&](const std::string& name, StageRef& s) {
        s.model = get(name + ".model");
        if (kv.count(name + ".partner")) {
            s.partner = get(name + ".partner");
            s.lambda = parse_num(get(name + ".lambda"), name + ".lambda");
            if (!(s.lambda >= 0.0 && s.lambda <= 1.0)) throw FormatError(name + ".lambda outside [0, 1]", 0);
        }
    };
    stage("stage1", m.stage1);
    stage("stage2", m.stage2);
    const std::string& grid = get("grid");
    const auto res = std::from_chars(grid.data(), grid.data() + grid.size(), m.grid_id, 16);
    if (res.ec != std::errc{} || res.ptr != grid.data() + grid.size()) throw FormatError("bad grid hash", 0);
    return m;
}

Pipeline load_pipeline(const PipelineManifest& m, const std::string& base_dir) {
    const std::filesystem::path base(base_dir);
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return (path.is_absolute() ? path : base / path).string();
    };
    auto load = [&](const StageRef& s) -> std::shared_ptr<const Classifier> {
        auto first = std::make_shared<MlpClassifier>(load_model(resolve(s.model)));
        if (s.partner.empty()) return first;
        auto second = std::make_shared<MlpClassifier>(load_model(resolve(s.partner)));
        return std::make_shared<FusedClassifier>(first, second, s.lambda);
    };
    return Pipeline{load(m.stage1), load(m.stage2), m.grid_id};
}

}  // namespace fradiag
