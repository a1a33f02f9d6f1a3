#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// suite: base preparation, bias convergence, classification sweep,
// ground-truth comparison and the stability study.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "crowdbias/analysis.hpp"
#include "crowdbias/corpus.hpp"
#include "crowdbias/embedding.hpp"
#include "crowdbias/error.hpp"
#include "crowdbias/model.hpp"
#include "crowdbias/optim.hpp"
#include "crowdbias/random.hpp"
#include "crowdbias/truth.hpp"

namespace crowdbias {

inline constexpr const char* kVersion = "0.1.0";

// Offsets added to the run seed so each stage draws an independent stream.
namespace seeds {
inline constexpr std::uint64_t split = 0;
inline constexpr std::uint64_t pretrain = 100;
inline constexpr std::uint64_t refine = 200;
inline constexpr std::uint64_t bias_init = 300;
inline constexpr std::uint64_t bias_fit = 400;
inline constexpr std::uint64_t sweep = 500;
inline constexpr std::uint64_t stability = 600;
inline constexpr std::uint64_t spam = 700;
}  // namespace seeds

struct PipelineConfig {
    std::uint64_t seed = 0;
    SplitRatios ratios;
    AttentionMode attention = AttentionMode::normalized;
    std::size_t batch_size = 64;

    // annotator-blind pretraining grid (one candidate per learning rate)
    std::vector<double> pretrain_lrs{0.01, 0.03};
    std::size_t pretrain_epochs = 40;

    // joint logfree refinement of the latent layer before freezing; 0 epochs skips it
    double refine_lr = 0.03;
    std::size_t refine_epochs = 30;

    // frozen-base bias fitting
    std::vector<LossKind> losses{LossKind::logfree_ce, LossKind::standard_ce};
    double bias_lr = 1e-3;
    std::size_t bias_epochs = 0;  // 0: smallest E with alpha * E * N_k >= progress
    double progress = 100.0;
    double bias_noise = 0.1;

    // classification sweep
    std::size_t sweep_runs = 50;
    double lr_min = 1e-6;
    double lr_max = 1e-3;
    std::size_t finetune_epochs = 10;
    TrainMode finetune_mode = TrainMode::joint_finetune;

    std::size_t stability_runs = 10;

    void validate() const {
        ratios.validate();
        if (pretrain_lrs.empty()) throw InvalidArgument("pretraining grid is empty");
        if (losses.empty()) throw InvalidArgument("no loss selected");
        if (!(lr_min > 0.0 && lr_max >= lr_min)) throw InvalidArgument("invalid learning-rate range");
        if (finetune_mode == TrainMode::pretrain_base) throw InvalidArgument("fine-tuning mode must be frozen or joint");
    }
};

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
    std::vector<std::string> losses;
    for (auto l : c.losses) losses.emplace_back(to_string(l));
    return {{"seed", c.seed},
            {"split", {c.ratios.train, c.ratios.validation, c.ratios.test}},
            {"attention", c.attention == AttentionMode::raw ? "raw" : "normalized"},
            {"batch_size", c.batch_size},
            {"pretrain_lrs", c.pretrain_lrs},
            {"pretrain_epochs", c.pretrain_epochs},
            {"refine_lr", c.refine_lr},
            {"refine_epochs", c.refine_epochs},
            {"losses", losses},
            {"bias_lr", c.bias_lr},
            {"bias_epochs", c.bias_epochs},
            {"progress", c.progress},
            {"bias_noise", c.bias_noise},
            {"sweep_runs", c.sweep_runs},
            {"lr_range", {c.lr_min, c.lr_max}},
            {"finetune_epochs", c.finetune_epochs},
            {"finetune_mode", to_string(c.finetune_mode)},
            {"stability_runs", c.stability_runs}};
}

using LatentTruth = std::unordered_map<std::string, Label>;

inline LatentTruth latent_truth_map(const Dataset& d, const std::vector<Label>& latent) {
    if (latent.size() != d.size()) throw InvalidArgument("latent labels and samples are not aligned");
    LatentTruth m;
    for (std::size_t n = 0; n < d.size(); ++n) m.emplace(d.samples[n].id, latent[n]);
    return m;
}

inline void save_latent_truth(const LatentTruth& m, const Dataset& d, const std::string& path) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& s : d.samples) j[s.id] = m.at(s.id);
    write_text_file(path, j.dump(2) + "\n");
}

inline LatentTruth load_latent_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    LatentTruth m;
    for (const auto& [id, v] : j.items()) m.emplace(id, v.get<Label>());
    return m;
}

inline std::vector<Label> labels_for(const LatentTruth& m, const Dataset& d) {
    std::vector<Label> out;
    out.reserve(d.size());
    for (const auto& s : d.samples) {
        auto it = m.find(s.id);
        if (it == m.end()) throw InvalidArgument("no latent label for sample '" + s.id + "'");
        out.push_back(it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Base preparation

struct PreparedBase {
    PretrainResult pretrain;
    std::optional<TrainReport> refinement;
    BaseParams base;
};

inline std::vector<TrainConfig> pretrain_grid(const PipelineConfig& cfg) {
    std::vector<TrainConfig> grid;
    for (std::size_t i = 0; i < cfg.pretrain_lrs.size(); ++i) {
        TrainConfig t;
        t.loss = LossKind::standard_ce;
        t.learning_rate = cfg.pretrain_lrs[i];
        t.epochs = cfg.pretrain_epochs;
        t.batch_size = cfg.batch_size;
        t.seed = cfg.seed + seeds::pretrain + i;
        t.mode = TrainMode::pretrain_base;
        grid.push_back(t);
    }
    return grid;
}

/// Pretrains on the training split (selected on validation), then optionally
/// sharpens the latent layer with joint logfree training on all samples.
inline PreparedBase prepare_base(const Dataset& d, const Embeddings& emb, const PipelineConfig& cfg) {
    cfg.validate();
    const auto parts = split(d, cfg.ratios, cfg.seed + seeds::split);
    PreparedBase out;
    out.pretrain = pretrain_base(encode(parts.train, emb), encode(parts.validation, emb), emb.table.dim(),
                                 pretrain_grid(cfg), cfg.attention);
    out.base = out.pretrain.base;
    if (cfg.refine_epochs > 0) {
        TrainConfig t;
        t.loss = LossKind::logfree_ce;
        t.learning_rate = cfg.refine_lr;
        t.epochs = cfg.refine_epochs;
        t.batch_size = cfg.batch_size;
        t.seed = cfg.seed + seeds::refine;
        t.mode = TrainMode::joint_finetune;
        t.constraint = ConstraintPolicy::project_each_step;
        auto init = make_ltnet(out.base, d.annotators, cfg.bias_noise, cfg.seed + seeds::refine);
        auto [model, report] = finetune_ltnet(init, encode(d, emb), t);
        out.base = model.base;
        out.refinement = std::move(report);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bias convergence

struct AnnotatorBias {
    std::string annotator;
    Matrix bias;
    ConfusionCounts confusion;  // latent argmax (row) vs annotation (column)
    Mismatch mismatch;
};

struct LossBias {
    LossKind loss = LossKind::logfree_ce;
    TrainConfig config;
    TrainReport report;
    std::vector<AnnotatorBias> annotators;

    const AnnotatorBias& of(const std::string& id) const {
        for (const auto& a : annotators)
            if (a.annotator == id) return a;
        throw InvalidArgument("no bias for annotator '" + id + "'");
    }
};

struct BiasConvergence {
    PreparedBase prepared;
    std::vector<LossBias> per_loss;

    const LossBias& of(LossKind k) const {
        for (const auto& l : per_loss)
            if (l.loss == k) return l;
        throw InvalidArgument(std::string("no result for loss ") + to_string(k));
    }
};

/// Fits fresh biases on top of a frozen base under each configured loss and
/// compares them with each annotator's confusion against the base's argmax.
inline std::vector<LossBias> fit_frozen_biases(const BaseParams& base, const Dataset& d, const EncodedCorpus& corpus,
                                               const PipelineConfig& cfg) {
    const auto latent = predict_latent(base, corpus);
    const std::size_t L = d.num_classes;
    const LTNetModel init = make_ltnet(base, d.annotators, cfg.bias_noise, cfg.seed + seeds::bias_init);
    std::vector<LossBias> out;
    for (LossKind loss : cfg.losses) {
        LossBias lb;
        lb.loss = loss;
        lb.config.loss = loss;
        lb.config.learning_rate = cfg.bias_lr;
        lb.config.epochs =
            cfg.bias_epochs ? cfg.bias_epochs : epochs_for_progress(cfg.bias_lr, min_class_count(corpus), cfg.progress);
        lb.config.batch_size = cfg.batch_size;
        lb.config.seed = cfg.seed + seeds::bias_fit;
        lb.config.mode = TrainMode::frozen_base_bias;
        auto fit = fit_bias_frozen(init, corpus, lb.config);
        lb.report = std::move(fit.report);
        for (std::size_t c = 0; c < d.annotators.size(); ++c) {
            std::vector<Label> ref, obs;
            for (std::size_t n = 0; n < corpus.size(); ++n) {
                if (corpus.annotators[n] != c) continue;
                ref.push_back(latent.classes[n]);
                obs.push_back(corpus.labels[n]);
            }
            if (ref.empty()) continue;
            AnnotatorBias ab{d.annotators[c], fit.model.biases[c], confusion_matrix(ref, obs, L), {}};
            bool rows_present = true;
            for (std::size_t i = 0; i < L; ++i) rows_present = rows_present && ab.confusion.row_total(i) > 0;
            if (rows_present) {
                ab.mismatch = bias_mismatch(ab.bias, ab.confusion);
            } else {
                ab.mismatch = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
            }
            lb.annotators.push_back(std::move(ab));
        }
        out.push_back(std::move(lb));
    }
    return out;
}

inline BiasConvergence bias_convergence(const Dataset& d, const Embeddings& emb, const PipelineConfig& cfg) {
    BiasConvergence out;
    out.prepared = prepare_base(d, emb, cfg);
    out.per_loss = fit_frozen_biases(out.prepared.base, d, encode(d, emb), cfg);
    return out;
}

inline Report to_report(const BiasConvergence& bc, const std::vector<std::string>& class_names) {
    Report r;
    r.class_names = class_names;
    nlohmann::ordered_json mism = nlohmann::ordered_json::object();
    for (const auto& lb : bc.per_loss) {
        const std::string loss = to_string(lb.loss);
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (const auto& a : lb.annotators) {
            r.add(loss + "." + a.annotator + ".bias", a.bias);
            r.add(loss + "." + a.annotator + ".confusion", a.confusion.to_matrix());
            per[a.annotator] = {{"max_abs", a.mismatch.max_abs}, {"frobenius", a.mismatch.frobenius}};
        }
        mism[loss] = per;
    }
    r.metadata["mismatch"] = mism;
    nlohmann::ordered_json training = nlohmann::ordered_json::object();
    for (const auto& lb : bc.per_loss) training[to_string(lb.loss)] = to_json(lb.report);
    r.metadata["training"] = training;
    r.metadata["pretrain_validation_accuracy"] = bc.prepared.pretrain.candidates[bc.prepared.pretrain.best].validation_accuracy;
    return r;
}

// ---------------------------------------------------------------------------
// Classification

struct ClassifyRow {
    std::string name;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double validation_accuracy = 0.0;
    double learning_rate = 0.0;  // selected fine-tuning rate; 0 for the base row
};

struct ClassifyResult {
    PretrainResult pretrain;
    std::string reference;  // "latent" or "annotations"
    std::vector<ClassifyRow> rows;
    std::vector<LTNetModel> models;  // best fine-tuned model per loss, same order as rows[1..]

    const ClassifyRow& row(const std::string& name) const {
        for (const auto& r : rows)
            if (r.name == name) return r;
        throw InvalidArgument("no row '" + name + "'");
    }
};

inline std::string row_name(LossKind k) { return k == LossKind::logfree_ce ? "ltnet_logfree" : "ltnet_ce"; }

/// Pretrain, then per loss an LR sweep of fine-tuning runs selected on
/// validation accuracy against annotations. Test metrics use the latent
/// truth when given, else the test annotations.
inline ClassifyResult classify(const Dataset& d, const Embeddings& emb, const LatentTruth* latent,
                               const PipelineConfig& cfg) {
    cfg.validate();
    const auto parts = split(d, cfg.ratios, cfg.seed + seeds::split);
    const auto train = encode(parts.train, emb);
    const auto val = encode(parts.validation, emb);
    const auto test = encode(parts.test, emb);
    const std::vector<Label> gold = latent ? labels_for(*latent, parts.test) : parts.test.labels();

    ClassifyResult out;
    out.reference = latent ? "latent" : "annotations";
    out.pretrain = pretrain_base(train, val, emb.table.dim(), pretrain_grid(cfg), cfg.attention);
    const BaseParams& base = out.pretrain.base;

    auto evaluate = [&](const BaseParams& b, std::string name, double lr) {
        const auto pred = predict_latent(b, test).classes;
        return ClassifyRow{std::move(name), accuracy(pred, gold), macro_f1(pred, gold, d.num_classes),
                           latent_accuracy(b, val), lr};
    };
    out.rows.push_back(evaluate(base, "base", 0.0));

    std::vector<double> rates;
    Rng rng(cfg.seed + seeds::sweep);
    for (std::size_t r = 0; r < cfg.sweep_runs; ++r) rates.push_back(rng.log_uniform(cfg.lr_min, cfg.lr_max));
    const LTNetModel init = make_ltnet(base, d.annotators, cfg.bias_noise, cfg.seed + seeds::bias_init);

    for (LossKind loss : cfg.losses) {
        std::optional<LTNetModel> best;
        double best_val = -1.0, best_lr = 0.0;
        for (std::size_t r = 0; r < rates.size(); ++r) {
            TrainConfig t;
            t.loss = loss;
            t.learning_rate = rates[r];
            t.epochs = cfg.finetune_epochs;
            t.batch_size = cfg.batch_size;
            t.seed = cfg.seed + seeds::sweep + r;
            t.mode = cfg.finetune_mode;
            t.constraint = ConstraintPolicy::project_each_step;
            LTNetModel m;
            try {
                m = cfg.finetune_mode == TrainMode::joint_finetune ? finetune_ltnet(init, train, t).first
                                                                   : fit_bias_frozen(init, train, t).model;
            } catch (const DivergenceError&) {
                continue;
            }
            const double v = latent_accuracy(m.base, val);
            if (v > best_val) {
                best_val = v;
                best_lr = rates[r];
                best = std::move(m);
            }
        }
        if (!best) throw DivergenceError("every fine-tuning run diverged");
        out.rows.push_back(evaluate(best->base, row_name(loss), best_lr));
        out.models.push_back(std::move(*best));
    }
    return out;
}

inline nlohmann::ordered_json to_json(const ClassifyResult& r) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"model", row.name},
                        {"accuracy", row.accuracy},
                        {"macro_f1", row.macro_f1},
                        {"validation_accuracy", row.validation_accuracy},
                        {"learning_rate", row.learning_rate}});
    return {{"reference", r.reference}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Ground truth

struct GroundTruthComparison {
    std::vector<GroundTruth> results;
    Matrix kappa;  // pairwise, same order as results
};

/// Every annotator head labels every item with argmax(T^c' p): a fully
/// multi-labeled pseudo annotation matrix.
inline AnnotationMatrix head_annotations(const AnnotationMatrix& am, const std::vector<Vector>& latent,
                                         const std::vector<Matrix>& biases) {
    AnnotationMatrix out;
    out.num_classes = am.num_classes;
    out.items = am.items;
    out.texts = am.texts;
    out.annotators = am.annotators;
    out.entries.resize(am.num_items());
    for (std::size_t n = 0; n < am.num_items(); ++n)
        for (std::size_t c = 0; c < biases.size(); ++c)
            out.entries[n].push_back({c, argmax(annotator_forward(latent[n], biases[c]))});
    return out;
}

/// Base latent prediction of every item from its text.
inline std::vector<Vector> item_latent(const AnnotationMatrix& am, const BaseParams& base, const Embeddings& emb) {
    if (am.texts.size() != am.num_items()) throw InvalidArgument("annotation matrix carries no item texts");
    std::vector<Vector> out;
    out.reserve(am.num_items());
    for (const auto& t : am.texts) out.push_back(forward(embed_sequence(tokenize(t), emb.vocab, emb.table), base).p);
    return out;
}

inline GroundTruthComparison ground_truth(const AnnotationMatrix& am, const std::vector<TruthMethod>& methods,
                                          const LTNetModel* model, const Embeddings* emb, std::size_t ds_max_iters = 100) {
    if (methods.empty()) throw InvalidArgument("no ground-truth method selected");
    GroundTruthComparison out;
    std::optional<std::vector<Vector>> latent;
    auto need_latent = [&](TruthMethod m) -> const std::vector<Vector>& {
        if (!model) throw InvalidArgument(std::string(to_string(m)) + " ground truth needs a model checkpoint");
        if (!emb) throw InvalidArgument(std::string(to_string(m)) + " ground truth needs embeddings");
        if (!latent) latent = item_latent(am, model->base, *emb);
        return *latent;
    };
    for (TruthMethod m : methods) {
        switch (m) {
            case TruthMethod::dawid_skene: out.results.push_back(to_ground_truth(fast_dawid_skene(am, ds_max_iters))); break;
            case TruthMethod::majority: out.results.push_back(majority_vote(am)); break;
            case TruthMethod::dawid_skene_ltnet: {
                const auto& p = need_latent(m);
                auto gt = to_ground_truth(
                    fast_dawid_skene(head_annotations(am, p, align_to(*model, am.annotators).biases), ds_max_iters));
                gt.method = m;
                out.results.push_back(std::move(gt));
                break;
            }
            case TruthMethod::ltnet: {
                const auto& p = need_latent(m);
                out.results.push_back(ltnet_ground_truth(p, align_to(*model, am.annotators).biases, am));
                break;
            }
            case TruthMethod::base_argmax: {
                const auto& p = need_latent(m);
                GroundTruth gt{TruthMethod::base_argmax, am.items, {}};
                for (const auto& v : p) gt.labels.push_back(argmax(v));
                out.results.push_back(std::move(gt));
                break;
            }
            case TruthMethod::annotation: throw InvalidArgument("'annotation' is not an estimation method");
        }
    }
    const std::size_t k = out.results.size();
    out.kappa = Matrix(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) out.kappa(i, j) = cohens_kappa(out.results[i].labels, out.results[j].labels);
    return out;
}

inline nlohmann::ordered_json to_json(const GroundTruthComparison& g) {
    nlohmann::ordered_json labels = nlohmann::ordered_json::object();
    std::vector<std::string> names;
    for (const auto& r : g.results) {
        names.emplace_back(to_string(r.method));
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (std::size_t n = 0; n < r.items.size(); ++n) per[r.items[n]] = r.labels[n];
        labels[to_string(r.method)] = per;
    }
    return {{"methods", names}, {"kappa", detail::matrix_to_json(g.kappa)}, {"labels", labels}};
}

// ---------------------------------------------------------------------------
// Stability

struct StabilityOutcome {
    PreparedBase prepared;
    StabilityReport report;
};

inline StabilityConfig stability_config(const PipelineConfig& cfg) {
    StabilityConfig s;
    s.runs = cfg.stability_runs;
    s.lr_min = cfg.lr_min;
    s.lr_max = cfg.lr_max;
    s.losses = cfg.losses;
    s.batch_size = cfg.batch_size;
    s.epochs = cfg.bias_epochs;
    s.progress = cfg.progress;
    s.bias_noise = cfg.bias_noise;
    s.seed = cfg.seed + seeds::stability;
    return s;
}

inline StabilityOutcome stability(const Dataset& d, const Embeddings& emb, const PipelineConfig& cfg) {
    StabilityOutcome out;
    out.prepared = prepare_base(d, emb, cfg);
    out.report = stability_study(out.prepared.base, d.annotators, encode(d, emb), stability_config(cfg));
    return out;
}

inline nlohmann::ordered_json to_json(const StabilityReport& r, const std::vector<std::string>& annotators) {
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& run : r.runs)
        runs.push_back({{"learning_rate", run.learning_rate}, {"epochs", run.epochs}, {"seed", run.seed}});
    nlohmann::ordered_json losses = nlohmann::ordered_json::object();
    for (const auto& ls : r.per_loss) {
        nlohmann::ordered_json mean = nlohmann::ordered_json::object(), sd = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < annotators.size() && c < ls.mean.size(); ++c) {
            mean[annotators[c]] = detail::matrix_to_json(ls.mean[c]);
            sd[annotators[c]] = detail::matrix_to_json(ls.stddev[c]);
        }
        losses[to_string(ls.loss)] = {{"mean_std", std::isnan(ls.mean_std) ? nlohmann::ordered_json() : nlohmann::ordered_json(ls.mean_std)},
                                      {"completed", ls.completed},
                                      {"diverged", ls.diverged},
                                      {"mean", mean},
                                      {"std", sd}};
    }
    return {{"runs", runs}, {"losses", losses}};
}

}  // namespace crowdbias
