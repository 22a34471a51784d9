#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fradiag/data.hpp"
#include "fradiag/detail/binio.hpp"
#include "fradiag/diagsys.hpp"
#include "fradiag/error.hpp"
#include "fradiag/metrics.hpp"
#include "fradiag/plot.hpp"
#include "fradiag/train.hpp"
#include "fradiag/winding.hpp"
#include "fradiag/zoo.hpp"

namespace fs = std::filesystem;
using namespace fradiag;

namespace {

constexpr const char* kOutDirEnv = "FRADIAG_OUT_DIR";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// --out if given, else $FRADIAG_OUT_DIR/<fallback>.
std::string output_path(const std::string& flag, const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (const char* dir = std::getenv(kOutDirEnv); dir != nullptr && *dir != '\0') return (fs::path(dir) / fallback).string();
    throw UsageError(std::string("--out is required (or set ") + kOutDirEnv + ")");
}

void ensure_parent(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const std::string& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

/// `path` as seen from the directory holding `file`, so written files do not embed the run location.
std::string relative_to_file(const std::string& path, const std::string& file) {
    const fs::path dir = fs::absolute(fs::path(file)).parent_path();
    const fs::path rel = fs::absolute(fs::path(path)).lexically_normal().lexically_relative(dir.lexically_normal());
    return rel.empty() ? path : rel.generic_string();
}

std::string read_text(const std::string& path) {
    const auto bytes = detail::read_file(path);
    return {bytes.begin(), bytes.end()};
}

struct TaskFlags {
    std::string task = "type";
    std::string fault = "FB";
};

void add_task_flags(CLI::App* cmd, TaskFlags& t) {
    cmd->add_option("--task", t.task, "Label scheme: type, degree or joint")
        ->check(CLI::IsMember({"type", "degree", "joint"}, CLI::ignore_case))
        ->capture_default_str();
    cmd->add_option("--fault", t.fault, "Fault type of a degree task (AD, DSV, FB, SC)")->capture_default_str();
}

/// The scheme a task selects and the dataset restricted to it.
std::pair<LabelScheme, LabeledDataset> task_view(const TaskFlags& t, LabeledDataset ds) {
    const std::string task = CLI::detail::to_lower(t.task);
    if (task == "type") return {LabelScheme::type_scheme(fault_types_in(ds)), std::move(ds)};
    if (task == "joint") return {LabelScheme::joint_scheme(fault_types_in(ds)), std::move(ds)};
    const FaultType f = parse_fault_type(t.fault);
    return {LabelScheme::degree_scheme(f), slice_degree_task(ds, f)};
}

LabeledDataset restrict_to(const LabelScheme& scheme, LabeledDataset ds) {
    if (scheme.kind() == LabelScheme::Kind::Degree) return slice_degree_task(ds, scheme.degree_type());
    return ds;
}

struct TrainFlags {
    std::string arch = "fra-diagnoser";
    double scale = 0.1;
    std::uint64_t seed = 1;
    TrainConfig cfg;
};

void add_train_flags(CLI::App* cmd, TrainFlags& t) {
    cmd->add_option("--arch", t.arch, "Architecture (case-insensitive)")->capture_default_str();
    cmd->add_option("--scale", t.scale, "Hidden-width scale in (0, 1]")->capture_default_str();
    cmd->add_option("--seed", t.seed, "Seed for initialisation, shuffling, dropout and folds")->capture_default_str();
    cmd->add_option("--epochs", t.cfg.max_epochs, "Maximum epochs")->capture_default_str();
    cmd->add_option("--batch", t.cfg.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--patience", t.cfg.patience, "Epochs without train-loss improvement before stopping")->capture_default_str();
    cmd->add_option("--lr", t.cfg.learning_rate, "Adam learning rate")->capture_default_str();
}

SpecBuilder spec_builder(const TrainFlags& t) {
    const Architecture a = parse_architecture(t.arch);
    const double scale = t.scale;
    return [a, scale](int classes) { return build(a, classes, scale); };
}

std::vector<std::size_t> parse_index_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoull(item)));
        } catch (const std::exception&) {
            throw UsageError("bad sample index '" + item + "'");
        }
    }
    return out;
}

std::string label_text(const FaultLabel& l) {
    return l.type == FaultType::Normal ? std::string("Normal")
                                       : std::string(to_string(l.type)) + "-" + std::to_string(l.degree);
}

int run_gen(int group, std::uint64_t seed, GenerationConfig cfg, std::size_t stride, double f_min, double f_max,
            const std::string& out_flag, const std::string& csv) {
    if (group < 1 || group > 3) throw UsageError("--group must be 1, 2 or 3");
    const Group g = static_cast<Group>(group);
    cfg.grid = FrequencyGrid(f_min, f_max);
    if (stride > 1) cfg.indices = strided_indices(group_labels(g).size(), stride);
    const LabeledDataset ds = generate_group(g, seed, cfg);
    const std::string out = output_path(out_flag, "group" + std::to_string(group) + ".frds");
    ensure_parent(out);
    write_dataset(ds, out);
    if (!csv.empty()) {
        ensure_parent(csv);
        std::ofstream c(csv, std::ios::binary);
        if (!c) throw std::runtime_error("cannot write " + csv);
        write_dataset_csv(ds, c);
    }
    std::cout << "wrote " << ds.size() << " samples to " << out << '\n';
    return 0;
}

int run_train(const std::string& data, const TaskFlags& task, const TrainFlags& tf, const std::string& out_flag,
              const std::string& history) {
    auto [scheme, ds] = task_view(task, read_dataset(data));
    const ModelSpec spec = spec_builder(tf)(scheme.class_count());
    const TrainResult r = train(spec, ds, scheme, tf.cfg.reseeded(tf.seed));
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    const ModelFile model{spec, scheme, ds.connection, ds.winding, r.params};
    const std::string out = output_path(out_flag, "model.fram");
    ensure_parent(out);
    save_model(model, out);
    if (!history.empty()) {
        std::ostringstream h;
        h << "epoch,loss\n";
        for (std::size_t e = 0; e < r.loss_history.size(); ++e) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.9g", r.loss_history[e]);
            h << e + 1 << ',' << buf << '\n';
        }
        write_text(history, h.str());
    }
    const ConfusionMatrix cm = evaluate(r.params, spec, ds, scheme);
    std::cout << spec.name << " trained for " << r.loss_history.size() << " epochs, train accuracy " << accuracy(cm)
              << ", wrote " << out << '\n';
    return 0;
}

int run_cv(const std::string& data, const TaskFlags& task, const TrainFlags& tf, int k, int jobs, const std::string& out_flag) {
    auto [scheme, ds] = task_view(task, read_dataset(data));
    const CVReport report = cross_validate(spec_builder(tf), ds, scheme, k, tf.cfg.reseeded(tf.seed), tf.seed, jobs);
    const std::string out = output_path(out_flag, "cv");
    write_report(report, out);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << report.architecture << " " << k << "-fold: accuracy " << report.mean_accuracy << " +- "
              << report.std_accuracy << ", macro-F1 " << report.mean_macro_f1 << " +- " << report.std_macro_f1 << '\n';
    return 0;
}

int run_eval(const std::string& model_path, const std::string& data, const std::string& out_flag) {
    const ModelFile m = load_model(model_path);
    const LabeledDataset ds = restrict_to(m.scheme, read_dataset(data));
    if (ds.connection != m.connection)
        throw DomainError("model was trained on " + std::string(to_string(m.connection)) + " data");
    const ConfusionMatrix cm = evaluate(m.params, m.spec, ds, m.scheme);
    const std::string out = output_path(out_flag, "eval");
    std::ostringstream t;
    t << "architecture " << m.spec.name << "\nsamples " << ds.size() << "\naccuracy " << accuracy(cm) << "\nmacro_f1 "
      << macro_f1(cm) << '\n';
    write_text((fs::path(out) / "metrics.txt").string(), t.str());
    write_text((fs::path(out) / "confusion.csv").string(), confusion_csv(cm, m.scheme.class_names()));
    std::cout << "accuracy " << accuracy(cm) << ", macro-F1 " << macro_f1(cm) << '\n';
    return 0;
}

int run_fuse(const std::string& m1_path, const std::string& m2_path, const std::string& data,
             std::optional<double> fixed_lambda, const std::string& out_flag) {
    const MlpClassifier m1(load_model(m1_path));
    const MlpClassifier m2(load_model(m2_path));
    const LabeledDataset ds = restrict_to(m1.scheme(), read_dataset(data));
    const LambdaChoice choice = tune_lambda(m1, m2, ds);
    double lambda = choice.lambda;
    double acc = choice.accuracy;
    if (fixed_lambda) {
        lambda = *fixed_lambda;
        const FusedClassifier f(std::make_shared<MlpClassifier>(m1), std::make_shared<MlpClassifier>(m2), lambda);
        const auto truth = encode_all(f.scheme(), ds);
        int correct = 0;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (argmax(f.predict(ds.samples[i].sweep)) == truth[i]) ++correct;
        acc = static_cast<double>(correct) / static_cast<double>(ds.size());
    }
    const std::string out = output_path(out_flag, "fusion.txt");
    std::ostringstream t;
    t << "model1 " << relative_to_file(m1_path, out) << "\nmodel2 " << relative_to_file(m2_path, out) << "\nlambda " << lambda << "\naccuracy " << acc << '\n';
    for (int i = 0; i <= kLambdaSteps; ++i)
        t << "grid." << i << ".accuracy " << choice.grid_accuracy[static_cast<std::size_t>(i)] << '\n';
    write_text(out, t.str());
    std::cout << "lambda " << lambda << ", validation accuracy " << acc << '\n';
    return 0;
}

struct DiagnoseFlags {
    std::string manifest;
    PipelineManifest pipeline;
    std::string ee, ciw;
    std::string indices;
    bool stage2_only = false;
    std::string save_manifest;
    std::string out;
};

int run_diagnose(DiagnoseFlags f) {
    const LabeledDataset ciw = read_dataset(f.ciw);
    std::string base = ".";
    if (!f.manifest.empty()) {
        f.pipeline = parse_manifest(read_text(f.manifest));
        base = fs::path(f.manifest).parent_path().string();
        if (base.empty()) base = ".";
    } else {
        if (f.pipeline.stage2.model.empty() || (!f.stage2_only && f.pipeline.stage1.model.empty()))
            throw UsageError("give --manifest or --stage1/--stage2 model paths");
        if (f.pipeline.stage1.model.empty()) f.pipeline.stage1.model = f.pipeline.stage2.model;
        f.pipeline.grid_id = ciw.grid.id();
    }
    if (!f.save_manifest.empty()) {
        PipelineManifest saved = f.pipeline;
        for (auto* stage : {&saved.stage1, &saved.stage2})
            for (auto* path : {&stage->model, &stage->partner})
                if (!path->empty()) *path = relative_to_file((fs::path(base) / *path).string(), f.save_manifest);
        write_text(f.save_manifest, format_manifest(saved));
    }
    const Pipeline pipe = load_pipeline(f.pipeline, base);

    std::optional<LabeledDataset> ee;
    if (!f.stage2_only) {
        if (f.ee.empty()) throw UsageError("--ee is required unless --stage2-only");
        ee = read_dataset(f.ee);
        if (ee->size() != ciw.size()) throw DomainError("EE and CIW datasets differ in sample count");
        for (std::size_t i = 0; i < ciw.size(); ++i)
            if (!(ee->samples[i].label == ciw.samples[i].label))
                throw DomainError("EE and CIW samples are not paired at index " + std::to_string(i));
    }
    std::vector<std::size_t> picked = f.indices.empty() ? strided_indices(ciw.size(), 1) : parse_index_list(f.indices);
    for (std::size_t i : picked)
        if (i >= ciw.size()) throw DomainError("sample index " + std::to_string(i) + " out of range");

    const std::string out = output_path(f.out, "diagnosis");
    std::ostringstream csv;
    csv << "index,truth,verdict,type,degree,conflict,stage2_invoked,match\n";
    std::size_t matches = 0, stage2_calls = 0, conflicts = 0, healthy = 0;
    for (std::size_t i : picked) {
        const auto& truth = ciw.samples[i].label;
        const Diagnosis d = f.stage2_only ? diagnose_stage2_only(*pipe.stage2, ciw.samples[i].sweep, pipe.grid_id)
                                          : diagnose(*pipe.stage1, *pipe.stage2, ee->samples[i].sweep,
                                                     ciw.samples[i].sweep, pipe.grid_id);
        const bool match = d.healthy ? truth.type == FaultType::Normal
                                     : (truth.type == d.type && truth.degree == d.degree);
        matches += match;
        stage2_calls += d.stage2_probs.has_value();
        conflicts += d.conflict;
        healthy += d.healthy;
        csv << i << ',' << label_text(truth) << ',' << (d.healthy ? "Healthy" : "Fault") << ','
            << (d.healthy ? "" : std::string(to_string(d.type))) << ',' << d.degree << ',' << d.conflict << ','
            << d.stage2_probs.has_value() << ',' << match << '\n';
        if (picked.size() == 1) write_text((fs::path(out) / "diagnosis.txt").string(), format_diagnosis(d));
    }
    std::ostringstream summary;
    summary << "samples " << picked.size() << "\nexact_match " << static_cast<double>(matches) / picked.size()
            << "\nhealthy_verdicts " << healthy << "\nstage2_invocations " << stage2_calls << "\nconflicts " << conflicts
            << '\n';
    write_text((fs::path(out) / "diagnoses.csv").string(), csv.str());
    write_text((fs::path(out) / "summary.txt").string(), summary.str());
    std::cout << summary.str();
    return 0;
}

int run_plot(const std::string& kind, const std::string& data, const std::string& indices, const std::string& report_dir,
             int fold, const std::string& fault, const std::string& title, const std::string& out_flag) {
    const std::string out = output_path(out_flag, kind + ".svg");
    PlotFiles plot;
    if (kind == "bode") {
        if (data.empty()) throw UsageError("bode plots need --data");
        const LabeledDataset ds = read_dataset(data);
        std::vector<BodeSeries> series;
        for (std::size_t i : indices.empty() ? std::vector<std::size_t>{0} : parse_index_list(indices)) {
            if (i >= ds.size()) throw DomainError("sample index " + std::to_string(i) + " out of range");
            series.push_back({label_text(ds.samples[i].label) + " #" + std::to_string(i), ds.samples[i].sweep});
        }
        plot = bode_plot(ds.grid, series, title.empty() ? "FRA magnitude" : title);
    } else if (kind == "confusion") {
        if (report_dir.empty()) throw UsageError("confusion plots need --report");
        const CVReport r = read_report(report_dir);
        if (fold >= r.k) throw DomainError("fold " + std::to_string(fold) + " out of range");
        const ConfusionMatrix cm = fold < 0 ? r.pooled_confusion() : r.folds[static_cast<std::size_t>(fold)].confusion;
        plot = confusion_plot(cm, r.scheme.class_names(), title.empty() ? r.architecture + " confusion" : title);
    } else {
        if (data.empty()) throw UsageError("cced plots need --data");
        const LabeledDataset ds = read_dataset(data);
        const FaultType t = parse_fault_type(fault);
        const CurveStats stats = cc_ed_map(ds, [t](const FaultLabel& l) { return l.type == t || l.type == FaultType::Normal; });
        plot = cced_plot(stats, title.empty() ? std::string("CC-ED map, ") + std::string(to_string(t)) : title);
    }
    write_plot(plot, out);
    std::cout << "wrote " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FRA winding fault diagnosis workbench"};
    app.require_subcommand(1, 1);
    app.set_config("--config", "", "Read flags from a TOML/INI file");
    int jobs = 1;
    app.add_option("--jobs", jobs, "Worker threads for generation and cross-validation")->capture_default_str();

    // gen
    int group = 1;
    std::uint64_t gen_seed = 1;
    GenerationConfig gen_cfg;
    std::size_t stride = 1;
    double f_min = 1e3, f_max = 1e6;
    std::string gen_out, gen_csv;
    auto* gen = app.add_subcommand("gen", "Synthesise a labelled FRA dataset for one group");
    gen->add_option("--group", group, "Group 1 (EE disc10), 2 (CIW disc10) or 3 (EE disc12)")->required();
    gen->add_option("--seed", gen_seed, "Run seed")->capture_default_str();
    gen->add_option("--jitter", gen_cfg.jitter_sigma, "Relative parameter jitter")->capture_default_str();
    gen->add_option("--noise", gen_cfg.noise_db, "Measurement noise (dB)")->capture_default_str();
    gen->add_option("--stride", stride, "Keep every n-th sample of the group")->capture_default_str();
    gen->add_option("--fmin", f_min, "Lowest frequency (Hz)")->capture_default_str();
    gen->add_option("--fmax", f_max, "Highest frequency (Hz)")->capture_default_str();
    gen->add_option("--out", gen_out, "Dataset file");
    gen->add_option("--csv", gen_csv, "Also write a CSV export");

    // train
    std::string train_data, train_out, train_history;
    TaskFlags train_task;
    TrainFlags train_flags;
    auto* trn = app.add_subcommand("train", "Train one model on a dataset");
    trn->add_option("--data", train_data, "Dataset file")->required()->check(CLI::ExistingFile);
    add_task_flags(trn, train_task);
    add_train_flags(trn, train_flags);
    trn->add_option("--out", train_out, "Model file");
    trn->add_option("--history", train_history, "Per-epoch loss CSV");

    // cv
    std::string cv_data, cv_out;
    TaskFlags cv_task;
    TrainFlags cv_flags;
    int k = 10;
    auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
    cv->add_option("--data", cv_data, "Dataset file")->required()->check(CLI::ExistingFile);
    add_task_flags(cv, cv_task);
    add_train_flags(cv, cv_flags);
    cv->add_option("--k", k, "Fold count")->capture_default_str();
    cv->add_option("--out", cv_out, "Report directory");

    // eval
    std::string eval_model, eval_data, eval_out;
    auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset");
    ev->add_option("--model", eval_model, "Model file")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", eval_data, "Dataset file")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", eval_out, "Output directory");

    // fuse
    std::string fuse_m1, fuse_m2, fuse_data, fuse_out;
    std::optional<double> fuse_lambda;
    auto* fu = app.add_subcommand("fuse", "Tune the fusion weight of two models on validation data");
    fu->add_option("--model1", fuse_m1, "First model")->required()->check(CLI::ExistingFile);
    fu->add_option("--model2", fuse_m2, "Second model")->required()->check(CLI::ExistingFile);
    fu->add_option("--data", fuse_data, "Validation dataset")->required()->check(CLI::ExistingFile);
    fu->add_option("--lambda", fuse_lambda, "Evaluate this weight instead of the tuned one")->check(CLI::Range(0.0, 1.0));
    fu->add_option("--out", fuse_out, "Result file");

    // diagnose
    DiagnoseFlags df;
    auto* dg = app.add_subcommand("diagnose", "Two-stage diagnosis of paired EE/CIW sweeps");
    dg->add_option("--manifest", df.manifest, "Pipeline manifest")->check(CLI::ExistingFile);
    dg->add_option("--stage1", df.pipeline.stage1.model, "Stage-1 (EE) model")->check(CLI::ExistingFile);
    dg->add_option("--stage1-partner", df.pipeline.stage1.partner, "Model fused with stage 1")->check(CLI::ExistingFile);
    dg->add_option("--stage1-lambda", df.pipeline.stage1.lambda, "Stage-1 fusion weight")->check(CLI::Range(0.0, 1.0));
    dg->add_option("--stage2", df.pipeline.stage2.model, "Stage-2 (CIW) model")->check(CLI::ExistingFile);
    dg->add_option("--stage2-partner", df.pipeline.stage2.partner, "Model fused with stage 2")->check(CLI::ExistingFile);
    dg->add_option("--stage2-lambda", df.pipeline.stage2.lambda, "Stage-2 fusion weight")->check(CLI::Range(0.0, 1.0));
    dg->add_option("--ee", df.ee, "EE dataset")->check(CLI::ExistingFile);
    dg->add_option("--ciw", df.ciw, "CIW dataset")->required()->check(CLI::ExistingFile);
    dg->add_option("--index", df.indices, "Comma-separated sample indices (default all)");
    dg->add_flag("--stage2-only", df.stage2_only, "Skip stage 1 for units known to be faulty");
    dg->add_option("--save-manifest", df.save_manifest, "Write the pipeline manifest used");
    dg->add_option("--out", df.out, "Output directory");

    // plot
    std::string plot_kind = "bode", plot_data, plot_indices, plot_report, plot_fault = "FB", plot_title, plot_out;
    int plot_fold = -1;
    auto* pl = app.add_subcommand("plot", "Emit an SVG chart and its CSV twin");
    pl->add_option("--kind", plot_kind, "bode, confusion or cced")
        ->check(CLI::IsMember({"bode", "confusion", "cced"}))
        ->capture_default_str();
    pl->add_option("--data", plot_data, "Dataset file (bode, cced)")->check(CLI::ExistingFile);
    pl->add_option("--index", plot_indices, "Comma-separated sample indices (bode)");
    pl->add_option("--report", plot_report, "Cross-validation report directory (confusion)")->check(CLI::ExistingDirectory);
    pl->add_option("--fold", plot_fold, "Fold to plot; pooled when omitted (confusion)");
    pl->add_option("--fault", plot_fault, "Fault type to map (cced)")->capture_default_str();
    pl->add_option("--title", plot_title, "Chart title");
    pl->add_option("--out", plot_out, "SVG file; the CSV twin is written next to it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        gen_cfg.jobs = jobs;
        if (gen->parsed()) return run_gen(group, gen_seed, gen_cfg, stride, f_min, f_max, gen_out, gen_csv);
        if (trn->parsed()) return run_train(train_data, train_task, train_flags, train_out, train_history);
        if (cv->parsed()) return run_cv(cv_data, cv_task, cv_flags, k, jobs, cv_out);
        if (ev->parsed()) return run_eval(eval_model, eval_data, eval_out);
        if (fu->parsed()) return run_fuse(fuse_m1, fuse_m2, fuse_data, fuse_lambda, fuse_out);
        if (dg->parsed()) return run_diagnose(df);
        if (pl->parsed())
            return run_plot(plot_kind, plot_data, plot_indices, plot_report, plot_fold, plot_fault, plot_title, plot_out);
    } catch (const UsageError& e) {
        std::cerr << app.help() << "error: " << e.what() << '\n';
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: format: " << e.what() << " (offset " << e.offset() << ")\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "error: domain: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "error: numerical: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
