// crowdbias command-line driver.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdbias/crowdbias.hpp"

namespace fs = std::filesystem;
using namespace crowdbias;
using ojson = nlohmann::ordered_json;

namespace {

enum class Level { quiet, error, warn, info, debug };

Level log_level() {
    const char* v = std::getenv("CROWDBIAS_LOG");
    if (!v) return Level::warn;
    const std::string s = v;
    if (s == "quiet" || s == "off") return Level::quiet;
    if (s == "error") return Level::error;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    return Level::warn;
}

template <class... Args>
void log(Level lvl, const char* fmt, Args... args) {
    static const Level threshold = log_level();
    if (lvl > threshold || threshold == Level::quiet) return;
    static const char* names[] = {"", "error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] ", names[static_cast<int>(lvl)]);
    if constexpr (sizeof...(Args) == 0) {
        std::fputs(fmt, stderr);
    } else {
        std::fprintf(stderr, fmt, args...);
    }
    std::fputc('\n', stderr);
}

struct Options {
    PipelineConfig pipeline;
    std::string out = "out";
    std::string format = "json";
    std::string data_format = "jsonl";
    std::string dataset, embeddings, latent, checkpoint, spec, input;
    std::vector<std::pair<std::string, double>> spam;
    std::vector<std::string> methods{"dawid_skene"};
    std::string loss;  // empty: both
    std::string mode = "joint";
    double lr = 0.0;          // 0: keep the command's default
    std::size_t epochs = 0;   // 0: keep the command's default
    std::size_t dim = 50;
    bool raw_attention = false;
    std::vector<double> split{0.7, 0.2, 0.1};
    std::vector<double> lr_range{1e-6, 1e-3};
};

// Argument vector that reproduces a parsed subcommand: given values (from the
// command line or the config file) plus every materialized default.
std::vector<std::string> resolved_argv(const CLI::App& sub) {
    std::vector<std::string> args{sub.get_name()};
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string flag = opt->get_name(false, true);
        if (flag.rfind("--", 0) != 0 || flag == "--help") continue;
        if (opt->get_items_expected_max() == 0) {
            if (opt->count() > 0 && opt->as<bool>()) args.push_back(flag);
            continue;
        }
        std::vector<std::string> values = opt->results();
        if (values.empty()) {
            const std::string def = opt->get_default_str();
            if (def.empty()) continue;
            if (def.front() == '[' && def.back() == ']') {
                std::stringstream ss(def.substr(1, def.size() - 2));
                for (std::string v; std::getline(ss, v, ',');) values.push_back(v);
            } else {
                values.push_back(def);
            }
        }
        args.push_back(flag);
        args.insert(args.end(), values.begin(), values.end());
    }
    return args;
}

class Run {
public:
    Run(std::string command, const Options& o, const CLI::App& app) : command_(std::move(command)), opt_(o), app_(app) {
        fs::create_directories(opt_.out);
    }

    std::string path(const std::string& name) {
        outputs_.push_back(name);
        return (fs::path(opt_.out) / name).string();
    }
    void input(const std::string& name, const std::string& p) {
        if (!p.empty()) inputs_[name] = p;
    }
    void track(const std::vector<std::string>& written) {
        for (const auto& w : written) outputs_.push_back(fs::path(w).filename().string());
    }

    void finish(const ojson& config) {
        ojson m;
        m["tool"] = "crowdbias";
        m["version"] = kVersion;
        m["command"] = command_;
        m["seed"] = opt_.pipeline.seed;
        m["config"] = config;
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        for (const CLI::App* sub : app_.get_subcommands()) m["argv"] = resolved_argv(*sub);
        write_text_file((fs::path(opt_.out) / "manifest.json").string(), m.dump(2) + "\n");
        log(Level::info, "%s: wrote %zu files to %s", command_.c_str(), outputs_.size(), opt_.out.c_str());
    }

private:
    std::string command_;
    const Options& opt_;
    const CLI::App& app_;
    ojson inputs_ = ojson::object();
    std::vector<std::string> outputs_;
};

void resolve(Options& o) {
    auto& p = o.pipeline;
    if (o.split.size() != 3) throw InvalidArgument("--split takes three fractions");
    p.ratios = {o.split[0], o.split[1], o.split[2]};
    if (o.lr_range.size() != 2) throw InvalidArgument("--lr-range takes two values");
    p.lr_min = o.lr_range[0];
    p.lr_max = o.lr_range[1];
    p.attention = o.raw_attention ? AttentionMode::raw : AttentionMode::normalized;
    if (!o.loss.empty()) p.losses = {parse_loss(o.loss)};
    if (o.mode == "joint") {
        p.finetune_mode = TrainMode::joint_finetune;
    } else if (o.mode == "frozen") {
        p.finetune_mode = TrainMode::frozen_base_bias;
    } else {
        throw InvalidArgument("--mode must be frozen or joint");
    }
    p.validate();
}

Embeddings need_embeddings(const Options& o) {
    if (o.embeddings.empty()) throw InvalidArgument("--embeddings is required");
    return load_embeddings(o.embeddings);
}

Dataset need_dataset(const Options& o) {
    if (o.dataset.empty()) throw InvalidArgument("--dataset is required");
    return load_dataset(o.dataset);
}

Dataset apply_spam(const Dataset& d, const Options& o, ojson& stats) {
    Dataset out = d;
    std::uint64_t k = 0;
    for (const auto& [target, rho] : o.spam) {
        out = inject_random_labels(out, target, rho, o.pipeline.seed + seeds::spam + k++);
        std::size_t total = 0, changed = 0;
        for (std::size_t n = 0; n < d.size(); ++n) {
            if (d.annotators[d.samples[n].annotator] != target) continue;
            ++total;
            changed += d.samples[n].label != out.samples[n].label;
        }
        stats[target] = {{"rho", rho},
                         {"samples", total},
                         {"changed", changed},
                         {"flip_rate", total ? static_cast<double>(changed) / static_cast<double>(total) : 0.0}};
        log(Level::info, "spam %s rho=%.2f: %zu of %zu labels changed", target.c_str(), rho, changed, total);
    }
    return out;
}

ReportFormat report_format(const Options& o) { return parse_report_format(o.format); }

std::vector<std::string> class_names(const Dataset& d) {
    return d.class_names.size() == d.num_classes ? d.class_names : default_class_names(d.num_classes);
}

// ---------------------------------------------------------------------------

void cmd_synth(const Options& o, const CLI::App& app) {
    SyntheticSpec spec = default_synthetic_spec();
    if (!o.spec.empty()) {
        std::ifstream in(o.spec);
        if (!in) throw Error("cannot open '" + o.spec + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("'" + o.spec + "': " + e.what());
        }
        spec = synthetic_spec_from_json(j);
    }
    spec.validate();  // before any write
    const auto syn = generate_synthetic(spec, o.pipeline.seed);
    Run run("synth", o, app);
    run.input("spec", o.spec);
    const DataFormat fmt = o.data_format == "csv" ? DataFormat::csv : DataFormat::jsonl;
    write_dataset(syn.dataset, run.path(fmt == DataFormat::csv ? "dataset.csv" : "dataset.jsonl"), fmt);
    save_latent_truth(latent_truth_map(syn.dataset, syn.latent), syn.dataset, run.path("latent.json"));
    ojson conf = ojson::object();
    for (std::size_t c = 0; c < syn.true_confusions.size(); ++c)
        conf[syn.dataset.annotators[c]] = detail::matrix_to_json(syn.true_confusions[c]);
    write_text_file(run.path("confusions.json"), conf.dump(2) + "\n");
    run.finish({{"spec", to_json(spec)}, {"seed", o.pipeline.seed}});
}

void cmd_synth_embeddings(const Options& o, const CLI::App& app) {
    std::vector<std::string> tokens;
    if (!o.dataset.empty()) {
        Vocab v;
        for (const auto& s : load_dataset(o.dataset).samples)
            for (auto& t : tokenize(s.text)) v.add(t);
        tokens = v.tokens();
    } else {
        SyntheticSpec spec = default_synthetic_spec();
        tokens = synthetic_vocabulary(spec);
    }
    Run run("synth-embeddings", o, app);
    run.input("dataset", o.dataset);
    write_embeddings(synth_embeddings(tokens, o.dim, o.pipeline.seed), run.path("embeddings.txt"));
    run.finish({{"dim", o.dim}, {"seed", o.pipeline.seed}, {"tokens", tokens.size()}});
}

void cmd_inject_noise(const Options& o, const CLI::App& app) {
    if (o.spam.empty()) throw InvalidArgument("--spam ANNOTATOR RHO is required");
    const Dataset d = need_dataset(o);
    ojson stats = ojson::object();
    const Dataset noisy = apply_spam(d, o, stats);
    Run run("inject-noise", o, app);
    run.input("dataset", o.dataset);
    const DataFormat fmt = o.data_format == "csv" ? DataFormat::csv : DataFormat::jsonl;
    write_dataset(noisy, run.path(fmt == DataFormat::csv ? "dataset.csv" : "dataset.jsonl"), fmt);
    write_text_file(run.path("noise.json"), stats.dump(2) + "\n");
    run.finish({{"spam", stats}, {"seed", o.pipeline.seed}});
}

void cmd_pretrain(const Options& o, const CLI::App& app) {
    const Dataset d = need_dataset(o);
    const Embeddings emb = need_embeddings(o);
    PipelineConfig cfg = o.pipeline;
    cfg.refine_epochs = 0;
    const auto prepared = prepare_base(d, emb, cfg);
    Run run("pretrain", o, app);
    run.input("dataset", o.dataset);
    run.input("embeddings", o.embeddings);
    save_checkpoint(make_ltnet(prepared.base, d.annotators, cfg.bias_noise, cfg.seed + seeds::bias_init),
                    run.path("checkpoint.json"));
    ojson cands = ojson::array();
    for (const auto& c : prepared.pretrain.candidates)
        cands.push_back({{"config", to_json(c.config)},
                         {"validation_accuracy", c.validation_accuracy},
                         {"validation_loss", c.validation_loss}});
    ojson rep = {{"best", prepared.pretrain.best}, {"candidates", cands}, {"training", to_json(prepared.pretrain.report)}};
    write_text_file(run.path("pretrain.json"), rep.dump(2) + "\n");
    run.finish(to_json(cfg));
}

void cmd_bias_convergence(const Options& o, const CLI::App& app) {
    const Dataset clean = need_dataset(o);
    const Embeddings emb = need_embeddings(o);
    ojson spam = ojson::object();
    const Dataset d = apply_spam(clean, o, spam);
    PipelineConfig cfg = o.pipeline;
    if (o.lr > 0.0) cfg.bias_lr = o.lr;
    if (o.epochs > 0) cfg.bias_epochs = o.epochs;
    log(Level::info, "bias-convergence: %zu samples, %zu annotators", d.size(), d.annotators.size());
    const auto bc = bias_convergence(d, emb, cfg);
    for (const auto& lb : bc.per_loss)
        for (const auto& a : lb.annotators)
            log(Level::info, "%s %s max_abs=%.4f", to_string(lb.loss), a.annotator.c_str(), a.mismatch.max_abs);

    Run run("bias-convergence", o, app);
    run.input("dataset", o.dataset);
    run.input("embeddings", o.embeddings);
    Report rep = to_report(bc, class_names(d));
    if (!spam.empty()) rep.metadata["spam"] = spam;
    const auto fmt = report_format(o);
    if (fmt == ReportFormat::json) {
        emit_report(rep, run.path("bias_convergence.json"), fmt);
    } else {
        run.track(emit_report(rep, (fs::path(o.out) / "bias_convergence.csv").string(), fmt));
        write_text_file(run.path("mismatch.json"), rep.metadata.dump(2) + "\n");
    }
    for (const auto& lb : bc.per_loss) {
        LTNetModel m{bc.prepared.base, d.annotators, {}};
        for (const auto& a : lb.annotators) m.biases.push_back(a.bias);
        if (m.biases.size() == d.annotators.size())
            save_checkpoint(m, run.path(std::string("checkpoint_") + to_string(lb.loss) + ".json"));
    }
    ojson c = to_json(cfg);
    c["spam"] = spam;
    run.finish(c);
}

void cmd_classify(const Options& o, const CLI::App& app) {
    const Dataset d = need_dataset(o);
    const Embeddings emb = need_embeddings(o);
    PipelineConfig cfg = o.pipeline;
    if (o.epochs > 0) cfg.finetune_epochs = o.epochs;
    if (o.lr > 0.0) cfg.lr_min = cfg.lr_max = o.lr;
    std::optional<LatentTruth> latent;
    if (!o.latent.empty()) latent = load_latent_truth(o.latent);
    const auto res = classify(d, emb, latent ? &*latent : nullptr, cfg);
    for (const auto& r : res.rows) log(Level::info, "%s acc=%.4f f1=%.4f", r.name.c_str(), r.accuracy, r.macro_f1);

    Run run("classify", o, app);
    run.input("dataset", o.dataset);
    run.input("embeddings", o.embeddings);
    run.input("latent", o.latent);
    if (report_format(o) == ReportFormat::json) {
        write_text_file(run.path("metrics.json"), to_json(res).dump(2) + "\n");
    } else {
        std::ostringstream csv;
        csv << "model,accuracy,macro_f1,validation_accuracy,learning_rate\n";
        char buf[160];
        for (const auto& r : res.rows) {
            std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6g\n", r.name.c_str(), r.accuracy, r.macro_f1,
                          r.validation_accuracy, r.learning_rate);
            csv << buf;
        }
        write_text_file(run.path("metrics.csv"), csv.str());
    }
    for (std::size_t i = 0; i < res.models.size(); ++i)
        save_checkpoint(res.models[i], run.path("checkpoint_" + res.rows[i + 1].name + ".json"));
    ojson c = to_json(cfg);
    c["reference"] = res.reference;
    run.finish(c);
}

void cmd_ground_truth(const Options& o, const CLI::App& app) {
    if (o.dataset.empty()) throw InvalidArgument("--dataset is required");
    const auto am = load_annotations(o.dataset, format_from_path(o.dataset));
    std::vector<TruthMethod> methods;
    bool needs_model = false;
    for (const auto& m : o.methods) {
        methods.push_back(parse_truth_method(m));
        needs_model = needs_model || methods.back() == TruthMethod::ltnet || methods.back() == TruthMethod::base_argmax ||
                      methods.back() == TruthMethod::dawid_skene_ltnet;
    }
    std::optional<LTNetModel> model;
    std::optional<Embeddings> emb;
    if (needs_model) {
        if (o.checkpoint.empty()) throw InvalidArgument("method needs a model checkpoint (--checkpoint)");
        model = load_checkpoint(o.checkpoint);
        emb = need_embeddings(o);
    }
    const auto g = ground_truth(am, methods, model ? &*model : nullptr, emb ? &*emb : nullptr);

    Run run("ground-truth", o, app);
    run.input("dataset", o.dataset);
    run.input("checkpoint", o.checkpoint);
    run.input("embeddings", o.embeddings);
    if (report_format(o) == ReportFormat::json) {
        write_text_file(run.path("ground_truth.json"), to_json(g).dump(2) + "\n");
    } else {
        std::ostringstream labels;
        labels << "id";
        for (const auto& r : g.results) labels << ',' << to_string(r.method);
        labels << '\n';
        for (std::size_t n = 0; n < am.num_items(); ++n) {
            labels << detail::csv_escape(am.items[n]);
            for (const auto& r : g.results) labels << ',' << r.labels[n];
            labels << '\n';
        }
        write_text_file(run.path("ground_truth.csv"), labels.str());
        std::vector<std::string> names;
        for (const auto& r : g.results) names.emplace_back(to_string(r.method));
        write_text_file(run.path("kappa.csv"), matrix_to_csv(g.kappa, names));
    }
    run.finish({{"methods", o.methods}});
}

void cmd_stability(const Options& o, const CLI::App& app) {
    const Dataset d = need_dataset(o);
    const Embeddings emb = need_embeddings(o);
    PipelineConfig cfg = o.pipeline;
    if (o.epochs > 0) cfg.bias_epochs = o.epochs;
    const auto st = stability(d, emb, cfg);
    for (const auto& ls : st.report.per_loss)
        log(Level::info, "%s mean std %.6g (%zu runs, %zu diverged)", to_string(ls.loss), ls.mean_std, ls.completed,
            ls.diverged.size());

    Run run("stability", o, app);
    run.input("dataset", o.dataset);
    run.input("embeddings", o.embeddings);
    if (report_format(o) == ReportFormat::json) {
        write_text_file(run.path("stability.json"), to_json(st.report, d.annotators).dump(2) + "\n");
    } else {
        Report rep;
        rep.class_names = class_names(d);
        for (const auto& ls : st.report.per_loss)
            for (std::size_t c = 0; c < d.annotators.size(); ++c) {
                rep.add(std::string(to_string(ls.loss)) + "." + d.annotators[c] + ".mean", ls.mean[c]);
                rep.add(std::string(to_string(ls.loss)) + "." + d.annotators[c] + ".std", ls.stddev[c]);
            }
        run.track(emit_report(rep, (fs::path(o.out) / "stability.csv").string(), ReportFormat::csv));
    }
    run.finish(to_json(cfg));
}

void cmd_report(const Options& o, const CLI::App& app) {
    if (o.input.empty()) throw InvalidArgument("--input is required");
    std::ifstream in(o.input);
    if (!in) throw Error("cannot open '" + o.input + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + o.input + "': " + e.what());
    }
    const Report rep = report_from_json(j);
    Run run("report", o, app);
    run.input("report", o.input);
    const auto fmt = report_format(o);
    const std::string name = fs::path(o.input).stem().string() + (fmt == ReportFormat::json ? ".json" : ".csv");
    run.track(emit_report(rep, (fs::path(o.out) / name).string(), fmt));
    run.finish({{"format", o.format}});
}

// ---------------------------------------------------------------------------

void add_common(CLI::App* sub, Options& o) {
    sub->configurable();
    sub->add_option("--seed", o.pipeline.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
}

void add_training(CLI::App* sub, Options& o) {
    auto& p = o.pipeline;
    sub->add_option("--dataset", o.dataset, "Dataset file (.jsonl or .csv)");
    sub->add_option("--embeddings", o.embeddings, "Embedding file (token v1 ... vD)");
    sub->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    sub->add_option("--batch-size", p.batch_size, "Mini-batch size (0 = full batch)")->capture_default_str();
    sub->add_option("--split", o.split, "Train/validation/test fractions")->expected(3)->capture_default_str();
    sub->add_flag("--raw-attention", o.raw_attention, "Use unnormalized attention scores");
    sub->add_option("--pretrain-lr", p.pretrain_lrs, "Pretraining grid learning rates")->capture_default_str();
    sub->add_option("--pretrain-epochs", p.pretrain_epochs)->capture_default_str();
    sub->add_option("--refine-lr", p.refine_lr)->capture_default_str();
    sub->add_option("--refine-epochs", p.refine_epochs, "Joint logfree refinement epochs (0 = off)")->capture_default_str();
    sub->add_option("--bias-noise", p.bias_noise, "Bias initialization noise")->capture_default_str();
    sub->add_option("--progress", p.progress, "Target alpha*E*N_k when epochs are automatic")->capture_default_str();
    sub->add_option("--loss", o.loss, "Restrict to one loss")->check(CLI::IsMember({"ce", "logfree"}));
    sub->add_option("--lr", o.lr, "Learning rate");
    sub->add_option("--epochs", o.epochs, "Epochs");
}

int run(int argc, char** argv) {
    CLI::App app{"Annotator bias modeling with latent-truth networks"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "TOML config file (command-line flags take precedence)");
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with known truth");
    add_common(synth, o);
    synth->add_option("--spec", o.spec, "Synthetic spec (JSON)");
    synth->add_option("--data-format", o.data_format)->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();

    auto* semb = app.add_subcommand("synth-embeddings", "Random unit embeddings for a vocabulary");
    add_common(semb, o);
    semb->add_option("--dataset", o.dataset, "Take the vocabulary from this dataset");
    semb->add_option("--dim", o.dim, "Embedding dimension")->capture_default_str();

    auto* noise = app.add_subcommand("inject-noise", "Replace a fraction of an annotator's labels at random");
    add_common(noise, o);
    noise->add_option("--dataset", o.dataset)->required();
    noise->add_option("--spam", o.spam, "ANNOTATOR RHO")->required();
    noise->add_option("--data-format", o.data_format)->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();

    auto* pre = app.add_subcommand("pretrain", "Train the annotator-blind base model");
    add_common(pre, o);
    add_training(pre, o);

    auto* bias = app.add_subcommand("bias-convergence", "Fit biases on a frozen base under both losses");
    add_common(bias, o);
    add_training(bias, o);
    bias->add_option("--spam", o.spam, "ANNOTATOR RHO: inject random labels first");

    auto* cls = app.add_subcommand("classify", "Base vs LTNet classification with a learning-rate sweep");
    add_common(cls, o);
    add_training(cls, o);
    cls->add_option("--latent", o.latent, "Latent truth file for evaluation");
    cls->add_option("--mode", o.mode, "Fine-tuning mode")->check(CLI::IsMember({"frozen", "joint"}))->capture_default_str();
    cls->add_option("--runs", o.pipeline.sweep_runs, "Sweep size")->capture_default_str();
    cls->add_option("--lr-range", o.lr_range, "Sweep range")->expected(2)->capture_default_str();

    auto* gt = app.add_subcommand("ground-truth", "Estimate ground truth and compare methods");
    add_common(gt, o);
    gt->add_option("--dataset", o.dataset, "Annotations (ids may repeat across annotators)")->required();
    gt->add_option("--checkpoint", o.checkpoint, "LTNet checkpoint");
    gt->add_option("--embeddings", o.embeddings);
    gt->add_option("--method", o.methods, "dawid_skene, dawid_skene_ltnet, ltnet, base_argmax, majority")
        ->capture_default_str();
    gt->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

    auto* stab = app.add_subcommand("stability", "Run-to-run spread of frozen-base bias fitting");
    add_common(stab, o);
    add_training(stab, o);
    stab->add_option("--runs", o.pipeline.stability_runs)->capture_default_str();
    stab->add_option("--lr-range", o.lr_range)->expected(2)->capture_default_str();

    auto* rep = app.add_subcommand("report", "Re-emit a saved JSON report");
    add_common(rep, o);
    rep->add_option("--input", o.input)->required();
    rep->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

    auto* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest");
    std::string manifest_path, rerun_out;
    rerun->add_option("manifest", manifest_path)->required();
    rerun->add_option("--out", rerun_out, "Override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // usage errors exit with 2, help and version with 0
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*rerun) {
            std::ifstream in(manifest_path);
            if (!in) throw Error("cannot open '" + manifest_path + "'");
            nlohmann::json m;
            in >> m;
            std::vector<std::string> args{argv[0]};
            for (const auto& a : m.at("argv")) args.push_back(a.get<std::string>());
            if (!rerun_out.empty()) {
                for (std::size_t i = 1; i + 1 < args.size(); ++i)
                    if (args[i] == "--out") args[i + 1] = rerun_out;
            }
            std::vector<char*> cargs;
            for (auto& a : args) cargs.push_back(a.data());
            return run(static_cast<int>(cargs.size()), cargs.data());
        }
        resolve(o);
        if (*synth) cmd_synth(o, app);
        if (*semb) cmd_synth_embeddings(o, app);
        if (*noise) cmd_inject_noise(o, app);
        if (*pre) cmd_pretrain(o, app);
        if (*bias) cmd_bias_convergence(o, app);
        if (*cls) cmd_classify(o, app);
        if (*gt) cmd_ground_truth(o, app);
        if (*stab) cmd_stability(o, app);
        if (*rep) cmd_report(o, app);
    } catch (const std::exception& e) {
        log(Level::error, "%s", e.what());
        return 1;
    }
    return 0;
}
}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
