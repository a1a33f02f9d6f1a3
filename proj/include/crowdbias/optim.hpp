#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdbias/corpus.hpp"
#include "crowdbias/error.hpp"
#include "crowdbias/linalg.hpp"
#include "crowdbias/model.hpp"
#include "crowdbias/random.hpp"

namespace crowdbias {

enum class LossKind { standard_ce, logfree_ce };
enum class TrainMode { pretrain_base, frozen_base_bias, joint_finetune };
enum class ConstraintPolicy { none_then_final_normalize, project_each_step };

inline const char* to_string(LossKind k) { return k == LossKind::standard_ce ? "ce" : "logfree"; }
inline const char* to_string(TrainMode m) {
    switch (m) {
        case TrainMode::pretrain_base: return "pretrain";
        case TrainMode::frozen_base_bias: return "frozen";
        case TrainMode::joint_finetune: return "joint";
    }
    return "?";
}
inline const char* to_string(ConstraintPolicy p) {
    return p == ConstraintPolicy::project_each_step ? "project_each_step" : "none_then_final_normalize";
}

inline LossKind parse_loss(const std::string& s) {
    if (s == "ce" || s == "standard_ce") return LossKind::standard_ce;
    if (s == "logfree" || s == "logfree_ce") return LossKind::logfree_ce;
    throw InvalidArgument("unknown loss '" + s + "'");
}

/// Floor applied to p^c_y inside the logarithm of the standard loss.
inline constexpr double kProbabilityFloor = 1e-12;
/// Any bias entry beyond this magnitude aborts training.
inline constexpr double kDivergenceLimit = 1e9;

struct TrainConfig {
    LossKind loss = LossKind::standard_ce;
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;  // 0 = full batch
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::pretrain_base;
    ConstraintPolicy constraint = ConstraintPolicy::none_then_final_normalize;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw InvalidArgument("learning rate must be finite and nonnegative");
        if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
    }
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
    return {{"loss", to_string(c.loss)},         {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},                {"batch_size", c.batch_size},
            {"seed", c.seed},                    {"mode", to_string(c.mode)},
            {"constraint_policy", to_string(c.constraint)}};
}

struct TrainReport {
    TrainConfig config;
    std::vector<double> epoch_losses;  // mean per-sample loss seen during each epoch
    double initial_loss = 0.0;         // mean loss before the first update
    double final_loss = 0.0;           // mean loss after the last update
    double wall_seconds = 0.0;
};

inline nlohmann::ordered_json to_json(const TrainReport& r) {
    return {{"config", to_json(r.config)},
            {"epoch_losses", r.epoch_losses},
            {"initial_loss", r.initial_loss},
            {"final_loss", r.final_loss}};
}

// ---------------------------------------------------------------------------
// Losses

/// -ln(max(p_y, 1e-12)).
inline double standard_ce(std::span<const double> p, Label y) {
    return -std::log(std::max(p[y], kProbabilityFloor));
}

/// -p_y: cross entropy with the logarithm removed.
inline double logfree_ce(std::span<const double> p, Label y) { return -p[y]; }

inline double loss_value(LossKind k, std::span<const double> p, Label y) {
    return k == LossKind::standard_ce ? standard_ce(p, y) : logfree_ce(p, y);
}

/// d loss / d p_y (the only nonzero component).
inline double loss_slope(LossKind k, double py) {
    if (k == LossKind::logfree_ce) return -1.0;
    return py > kProbabilityFloor ? -1.0 / py : 0.0;
}

// ---------------------------------------------------------------------------
// Gradients

struct Gradients {
    bool has_base = false;
    bool has_biases = false;
    Vector attention;
    Matrix weights;
    Vector bias;
    std::vector<Matrix> biases;

    static Gradients zeros_like(const LTNetModel& m, TrainMode mode) {
        Gradients g;
        g.has_base = mode != TrainMode::frozen_base_bias;
        g.has_biases = mode != TrainMode::pretrain_base;
        if (g.has_base) {
            g.attention.assign(m.base.dim(), 0.0);
            g.weights = Matrix(m.num_classes(), m.base.dim());
            g.bias.assign(m.num_classes(), 0.0);
        }
        if (g.has_biases)
            for (const auto& T : m.biases) g.biases.emplace_back(T.rows(), T.cols());
        return g;
    }
};

namespace detail {

// Accumulates one sample's loss gradient into g and returns the loss.
// pretrain mode scores the latent truth directly (annotator-blind).
inline double accumulate_sample(const LTNetModel& m, const Matrix& x, std::size_t annotator, Label y, LossKind loss,
                                TrainMode mode, Gradients& g) {
    const auto& base = m.base;
    const std::size_t L = m.num_classes();
    const auto att = attention_forward(x, base.attention, base.mode);
    const Vector p = softmax(logits(att.context, base));

    Vector dp(L, 0.0);
    double value;
    if (mode == TrainMode::pretrain_base) {
        value = loss_value(loss, p, y);
        dp[y] = loss_slope(loss, p[y]);
    } else {
        const Matrix& T = m.biases.at(annotator);
        double py = 0.0;
        for (std::size_t h = 0; h < L; ++h) py += p[h] * T(h, y);
        value = loss == LossKind::standard_ce ? -std::log(std::max(py, kProbabilityFloor)) : -py;
        const double slope = loss_slope(loss, py);
        for (std::size_t h = 0; h < L; ++h) dp[h] = slope * T(h, y);
        if (g.has_biases) {
            Matrix& gT = g.biases.at(annotator);
            for (std::size_t h = 0; h < L; ++h) gT(h, y) += slope * p[h];
        }
    }
    if (!g.has_base) return value;

    // softmax Jacobian: du_i = p_i (dp_i - <p, dp>)
    const double pdp = dot(p, dp);
    Vector du(L);
    for (std::size_t i = 0; i < L; ++i) du[i] = p[i] * (dp[i] - pdp);

    const std::size_t D = base.dim();
    Vector dz(D, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
        g.bias[i] += du[i];
        auto gw = g.weights.row(i);
        const auto w = base.weights.row(i);
        for (std::size_t d = 0; d < D; ++d) {
            gw[d] += du[i] * att.context[d];
            dz[d] += du[i] * w[d];
        }
    }

    const std::size_t S = x.rows();
    Vector ds(S);
    for (std::size_t j = 0; j < S; ++j) ds[j] = dot(dz, x.row(j));
    if (base.mode == AttentionMode::normalized) {
        const double ada = dot(att.weights, ds);
        for (std::size_t j = 0; j < S; ++j) ds[j] = att.weights[j] * (ds[j] - ada);
    }
    for (std::size_t j = 0; j < S; ++j) {
        const auto row = x.row(j);
        for (std::size_t d = 0; d < D; ++d) g.attention[d] += ds[j] * row[d];
    }
    return value;
}

inline void check_divergence(const LTNetModel& m) {
    for (const auto& T : m.biases)
        for (double v : T.data())
            if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit)
                throw DivergenceError("learning rate too large: bias entry " + std::to_string(v));
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && std::abs(x) <= kDivergenceLimit; });
    };
    if (!finite(m.base.attention) || !finite(m.base.weights.data()) || !finite(m.base.bias))
        throw DivergenceError("learning rate too large: base parameters diverged");
}

}  // namespace detail

/// Gradient of the summed loss over `batch` (indices into `corpus`) for the
/// parameter groups trainable in `mode`. Returns the gradients and the loss sum.
inline std::pair<Gradients, double> backward(const LTNetModel& m, const EncodedCorpus& corpus,
                                             std::span<const std::size_t> batch, LossKind loss, TrainMode mode) {
    if (batch.empty()) throw InvalidArgument("backward on an empty batch");
    Gradients g = Gradients::zeros_like(m, mode);
    double total = 0.0;
    for (std::size_t n : batch)
        total += detail::accumulate_sample(m, corpus.inputs.at(n), corpus.annotators.at(n), corpus.labels.at(n), loss,
                                           mode, g);
    return {std::move(g), total};
}

/// Summed loss over the batch without gradients.
inline double batch_loss(const LTNetModel& m, const EncodedCorpus& corpus, std::span<const std::size_t> batch,
                         LossKind loss, TrainMode mode) {
    double total = 0.0;
    for (std::size_t n : batch) {
        const Prediction pr = forward(corpus.inputs.at(n), m.base);
        const Label y = corpus.labels.at(n);
        if (mode == TrainMode::pretrain_base) {
            total += loss_value(loss, pr.p, y);
        } else {
            const Matrix& T = m.biases.at(corpus.annotators.at(n));
            double py = 0.0;
            for (std::size_t h = 0; h < pr.p.size(); ++h) py += pr.p[h] * T(h, y);
            total += loss == LossKind::standard_ce ? -std::log(std::max(py, kProbabilityFloor)) : -py;
        }
    }
    return total;
}

inline double mean_loss(const LTNetModel& m, const EncodedCorpus& corpus, LossKind loss, TrainMode mode) {
    std::vector<std::size_t> all(corpus.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all.empty() ? 0.0 : batch_loss(m, corpus, all, loss, mode) / static_cast<double>(all.size());
}

/// theta <- theta - alpha * g on every group present in g.
inline void sgd_step(LTNetModel& m, const Gradients& g, double alpha) {
    if (g.has_base) {
        for (std::size_t d = 0; d < m.base.attention.size(); ++d) m.base.attention[d] -= alpha * g.attention[d];
        auto& w = m.base.weights.data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= alpha * g.weights.data()[i];
        for (std::size_t i = 0; i < m.base.bias.size(); ++i) m.base.bias[i] -= alpha * g.bias[i];
    }
    if (g.has_biases) {
        for (std::size_t c = 0; c < m.biases.size(); ++c) {
            auto& t = m.biases[c].data();
            const auto& gt = g.biases[c].data();
            for (std::size_t i = 0; i < t.size(); ++i) t[i] -= alpha * gt[i];
        }
    }
}

// ---------------------------------------------------------------------------
// Z matrix and the closed-form frozen-base solution

/// Z_hk = sum over samples annotated k of the latent probability of class h.
struct ZMatrix {
    Matrix values;
    std::vector<std::size_t> class_counts;  // N_k
};

inline ZMatrix accumulate_z(std::span<const Vector> latent, std::span<const Label> annotations, std::size_t L) {
    if (latent.size() != annotations.size()) throw InvalidArgument("latent predictions and annotations are not aligned");
    ZMatrix z{Matrix(L, L), std::vector<std::size_t>(L, 0)};
    for (std::size_t n = 0; n < latent.size(); ++n) {
        const Label k = annotations[n];
        if (k >= L || latent[n].size() != L) throw InvalidArgument("annotation or prediction outside [0, L)");
        ++z.class_counts[k];
        for (std::size_t h = 0; h < L; ++h) z.values(h, k) += latent[n][h];
    }
    return z;
}

/// row_normalize(T0 + alpha * E * Z): where E epochs of full-batch log-free
/// descent on a frozen base land.
inline Matrix closed_form_bias(const Matrix& T0, const ZMatrix& z, double alpha, std::size_t epochs) {
    if (!(alpha > 0.0)) throw InvalidArgument("closed_form_bias needs alpha > 0");
    if (epochs < 1) throw InvalidArgument("closed_form_bias needs E >= 1");
    if (T0.rows() != z.values.rows() || T0.cols() != z.values.cols()) throw InvalidArgument("shape mismatch");
    Matrix t = T0;
    const double scale = alpha * static_cast<double>(epochs);
    for (std::size_t i = 0; i < t.data().size(); ++i) t.data()[i] += scale * z.values.data()[i];
    return row_normalize(t);
}

// ---------------------------------------------------------------------------
// Training procedures

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t>& order, std::size_t batch_size,
                                                          Rng& rng, bool shuffle) {
    if (shuffle) rng.shuffle(order);
    const std::size_t bs = batch_size == 0 ? order.size() : batch_size;
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < order.size(); s += bs)
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + bs)));
    return out;
}

inline void project_biases(LTNetModel& m) {
    for (auto& T : m.biases) T = row_normalize(T);
}

inline double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Generic SGD loop over the groups trainable in cfg.mode.
inline TrainReport run_sgd(LTNetModel& m, const EncodedCorpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    if (corpus.size() == 0) throw InvalidArgument("training on an empty corpus");
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report{cfg, {}, mean_loss(m, corpus, cfg.loss, cfg.mode), 0.0, 0.0};
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool project = cfg.mode != TrainMode::pretrain_base && cfg.constraint == ConstraintPolicy::project_each_step;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        double epoch_loss = 0.0;
        for (const auto& batch : make_batches(order, cfg.batch_size, rng, cfg.batch_size != 0)) {
            auto [g, l] = backward(m, corpus, batch, cfg.loss, cfg.mode);
            epoch_loss += l;
            sgd_step(m, g, cfg.learning_rate);
            if (project) project_biases(m);
            check_divergence(m);
        }
        report.epoch_losses.push_back(epoch_loss / static_cast<double>(corpus.size()));
    }
    report.final_loss = mean_loss(m, corpus, cfg.loss, cfg.mode);
    report.wall_seconds = elapsed(t0);
    return report;
}

}  // namespace detail

struct FitResult {
    LTNetModel model;
    TrainReport report;
    std::vector<Matrix> raw_biases;  // before the final normalization
};

/// Trains only the annotator bias matrices on top of a frozen base. The
/// latent truth is evaluated once, since the base never changes. Under
/// none_then_final_normalize the matrices are unconstrained during descent
/// and row-normalized once at the end.
inline FitResult fit_bias_frozen(const LTNetModel& model, const EncodedCorpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.mode != TrainMode::frozen_base_bias) throw InvalidArgument("fit_bias_frozen needs mode frozen_base_bias");
    if (corpus.size() == 0) throw InvalidArgument("training on an empty corpus");
    if (model.biases.size() < corpus.num_annotators) throw InvalidArgument("model lacks bias matrices for some annotators");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t L = model.num_classes();

    const auto latent = predict_latent(model.base, corpus);
    const std::size_t N = corpus.size();
    std::vector<double> probs(N * L);
    for (std::size_t n = 0; n < N; ++n)
        std::copy(latent.predictions[n].p.begin(), latent.predictions[n].p.end(), probs.begin() + static_cast<std::ptrdiff_t>(n * L));

    FitResult out{model, {cfg, {}, 0.0, 0.0, 0.0}, {}};
    auto& biases = out.model.biases;
    const bool project = cfg.constraint == ConstraintPolicy::project_each_step;

    auto sample_loss = [&](std::size_t n) {
        const Matrix& T = biases[corpus.annotators[n]];
        const Label y = corpus.labels[n];
        const double* p = &probs[n * L];
        double py = 0.0;
        for (std::size_t h = 0; h < L; ++h) py += p[h] * T(h, y);
        return cfg.loss == LossKind::standard_ce ? -std::log(std::max(py, kProbabilityFloor)) : -py;
    };
    auto full_loss = [&] {
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) s += sample_loss(n);
        return s / static_cast<double>(N);
    };
    out.report.initial_loss = full_loss();

    std::vector<Matrix> grads;
    for (const auto& T : biases) grads.emplace_back(T.rows(), T.cols());
    std::vector<char> touched(biases.size(), 0);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = cfg.batch_size == 0 ? N : cfg.batch_size;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        if (cfg.batch_size != 0) rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < N; s += bs) {
            const std::size_t stop = std::min(N, s + bs);
            for (std::size_t i = s; i < stop; ++i) {
                const std::size_t n = order[i];
                const std::size_t c = corpus.annotators[n];
                const Label y = corpus.labels[n];
                const Matrix& T = biases[c];
                const double* p = &probs[n * L];
                double py = 0.0;
                for (std::size_t h = 0; h < L; ++h) py += p[h] * T(h, y);
                epoch_loss += cfg.loss == LossKind::standard_ce ? -std::log(std::max(py, kProbabilityFloor)) : -py;
                const double slope = loss_slope(cfg.loss, py);
                Matrix& G = grads[c];
                for (std::size_t h = 0; h < L; ++h) G(h, y) += slope * p[h];
                touched[c] = 1;
            }
            for (std::size_t c = 0; c < biases.size(); ++c) {
                if (!touched[c]) continue;
                auto& t = biases[c].data();
                auto& gd = grads[c].data();
                for (std::size_t i = 0; i < t.size(); ++i) {
                    t[i] -= cfg.learning_rate * gd[i];
                    if (!std::isfinite(t[i]) || std::abs(t[i]) > kDivergenceLimit)
                        throw DivergenceError("learning rate too large: bias entry " + std::to_string(t[i]));
                    gd[i] = 0.0;
                }
                if (project) biases[c] = row_normalize(biases[c]);
                touched[c] = 0;
            }
        }
        out.report.epoch_losses.push_back(epoch_loss / static_cast<double>(N));
    }
    out.report.final_loss = full_loss();
    out.raw_biases = biases;
    if (!project) {
        // annotators without samples keep T0, which is already normalized
        for (auto& T : biases) T = row_normalize(T);
    }
    out.report.wall_seconds = detail::elapsed(t0);
    return out;
}

/// Fine-tunes base and biases together (LTNet training). With
/// project_each_step every bias matrix is clamped and row-normalized after
/// every update.
inline std::pair<LTNetModel, TrainReport> finetune_ltnet(const LTNetModel& model, const EncodedCorpus& corpus,
                                                         const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::joint_finetune) throw InvalidArgument("finetune_ltnet needs mode joint_finetune");
    if (model.biases.size() < corpus.num_annotators) throw InvalidArgument("model lacks bias matrices for some annotators");
    LTNetModel m = model;
    auto report = detail::run_sgd(m, corpus, cfg);
    if (cfg.constraint == ConstraintPolicy::none_then_final_normalize) detail::project_biases(m);
    return {std::move(m), std::move(report)};
}

/// Trains a base classifier on the annotations alone, ignoring who annotated.
inline std::pair<BaseParams, TrainReport> train_base(const BaseParams& init, const EncodedCorpus& corpus,
                                                     const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::pretrain_base) throw InvalidArgument("train_base needs mode pretrain_base");
    LTNetModel m;
    m.base = init;
    auto report = detail::run_sgd(m, corpus, cfg);
    return {std::move(m.base), std::move(report)};
}

inline double latent_accuracy(const BaseParams& base, const EncodedCorpus& corpus) {
    if (corpus.size() == 0) return 0.0;
    const auto pred = predict_latent(base, corpus);
    std::size_t hit = 0;
    for (std::size_t n = 0; n < corpus.size(); ++n) hit += pred.classes[n] == corpus.labels[n];
    return static_cast<double>(hit) / static_cast<double>(corpus.size());
}

struct PretrainCandidate {
    TrainConfig config;
    double validation_accuracy = 0.0;
    double validation_loss = 0.0;
};

struct PretrainResult {
    BaseParams base;
    std::size_t best = 0;
    std::vector<PretrainCandidate> candidates;
    TrainReport report;  // of the winning candidate
};

/// Trains one annotator-blind base per grid entry (each from
/// init_base(D, L, entry.seed, mode)) and keeps the highest validation
/// accuracy; ties go to the lower validation cross entropy, then to the
/// earlier grid entry.
inline PretrainResult pretrain_base(const EncodedCorpus& train, const EncodedCorpus& validation, std::size_t dim,
                                    const std::vector<TrainConfig>& grid,
                                    AttentionMode mode = AttentionMode::normalized) {
    if (grid.empty()) throw InvalidArgument("empty hyper-parameter grid");
    if (validation.size() == 0) throw InvalidArgument("pretraining needs a validation split");
    PretrainResult out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto init = init_base(dim, train.num_classes, grid[i].seed, mode);
        auto [base, report] = train_base(init, train, grid[i]);
        LTNetModel probe;
        probe.base = base;
        PretrainCandidate cand{grid[i], latent_accuracy(base, validation),
                               mean_loss(probe, validation, LossKind::standard_ce, TrainMode::pretrain_base)};
        const bool better = i == 0 || cand.validation_accuracy > out.candidates[out.best].validation_accuracy ||
                            (cand.validation_accuracy == out.candidates[out.best].validation_accuracy &&
                             cand.validation_loss < out.candidates[out.best].validation_loss);
        out.candidates.push_back(cand);
        if (better) {
            out.best = i;
            out.base = std::move(base);
            out.report = std::move(report);
        }
    }
    return out;
}

/// Smallest N_k over annotators and annotated classes that occur at all.
inline std::size_t min_class_count(const EncodedCorpus& corpus) {
    std::vector<std::size_t> counts(corpus.num_annotators * corpus.num_classes, 0);
    for (std::size_t n = 0; n < corpus.size(); ++n) ++counts[corpus.annotators[n] * corpus.num_classes + corpus.labels[n]];
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t v : counts)
        if (v > 0) best = std::min(best, v);
    return best == std::numeric_limits<std::size_t>::max() ? 0 : best;
}

/// Epoch count such that alpha * E * N_k >= progress for every annotated class.
inline std::size_t epochs_for_progress(double alpha, std::size_t min_count, double progress) {
    if (!(alpha > 0.0) || min_count == 0) throw InvalidArgument("epochs_for_progress needs alpha > 0 and samples");
    return static_cast<std::size_t>(std::max(1.0, std::ceil(progress / (alpha * static_cast<double>(min_count)) - 1e-9)));
}

}  // namespace crowdbias
