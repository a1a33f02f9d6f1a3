#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdbias/error.hpp"
#include "crowdbias/linalg.hpp"
#include "crowdbias/model.hpp"
#include "crowdbias/optim.hpp"
#include "crowdbias/random.hpp"

namespace crowdbias {

/// counts(i, j) = #{n : reference_n = i and observed_n = j}; rows follow the
/// same orientation as bias matrices (truth row, annotation column).
struct ConfusionCounts {
    std::size_t num_classes = 0;
    std::vector<std::size_t> counts;

    std::size_t operator()(std::size_t i, std::size_t j) const { return counts[i * num_classes + j]; }
    std::size_t& operator()(std::size_t i, std::size_t j) { return counts[i * num_classes + j]; }

    std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    std::size_t row_total(std::size_t i) const {
        std::size_t t = 0;
        for (std::size_t j = 0; j < num_classes; ++j) t += (*this)(i, j);
        return t;
    }
    Matrix to_matrix() const {
        Matrix m(num_classes, num_classes);
        for (std::size_t i = 0; i < counts.size(); ++i) m.data()[i] = static_cast<double>(counts[i]);
        return m;
    }
};

inline ConfusionCounts confusion_matrix(std::span<const Label> reference, std::span<const Label> observed, std::size_t L) {
    if (reference.size() != observed.size()) throw InvalidArgument("confusion_matrix: length mismatch");
    if (reference.empty()) throw InvalidArgument("confusion_matrix: empty input");
    ConfusionCounts c{L, std::vector<std::size_t>(L * L, 0)};
    for (std::size_t n = 0; n < reference.size(); ++n) {
        if (reference[n] >= L || observed[n] >= L) throw InvalidArgument("confusion_matrix: label >= L");
        ++c(reference[n], observed[n]);
    }
    return c;
}

struct Mismatch {
    double max_abs = 0.0;
    double frobenius = 0.0;
};

/// Distance between a bias matrix and the row-normalized confusion counts.
inline Mismatch bias_mismatch(const Matrix& T, const ConfusionCounts& c) {
    for (std::size_t i = 0; i < c.num_classes; ++i)
        if (c.row_total(i) == 0) throw InvalidArgument("confusion matrix row " + std::to_string(i) + " is empty");
    const Matrix ref = row_normalize(c.to_matrix());
    return {max_abs_diff(T, ref), frobenius_diff(T, ref)};
}

inline double accuracy(std::span<const Label> pred, std::span<const Label> gold) {
    if (pred.size() != gold.size()) throw InvalidArgument("accuracy: length mismatch");
    if (pred.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) hit += pred[n] == gold[n];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

/// Unweighted mean of per-class F1 over all L classes. A class with no true
/// positives (including one absent from both vectors) scores 0.
inline double macro_f1(std::span<const Label> pred, std::span<const Label> gold, std::size_t L) {
    if (pred.size() != gold.size()) throw InvalidArgument("macro_f1: length mismatch");
    if (L == 0) throw InvalidArgument("macro_f1: L must be positive");
    std::vector<double> tp(L, 0.0), fp(L, 0.0), fn(L, 0.0);
    for (std::size_t n = 0; n < pred.size(); ++n) {
        if (pred[n] >= L || gold[n] >= L) throw InvalidArgument("macro_f1: label >= L");
        if (pred[n] == gold[n]) {
            tp[pred[n]] += 1.0;
        } else {
            fp[pred[n]] += 1.0;
            fn[gold[n]] += 1.0;
        }
    }
    double total = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
        const double denom = 2.0 * tp[k] + fp[k] + fn[k];
        total += denom > 0.0 ? 2.0 * tp[k] / denom : 0.0;
    }
    return total / static_cast<double>(L);
}

/// (p_o - p_e) / (1 - p_e). When p_e = 1 the statistic is undefined; we
/// return 1 for perfect agreement and 0 otherwise.
inline double cohens_kappa(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size()) throw InvalidArgument("cohens_kappa: length mismatch");
    if (a.empty()) throw InvalidArgument("cohens_kappa: empty input");
    std::size_t L = 0;
    for (std::size_t n = 0; n < a.size(); ++n) L = std::max({L, a[n] + 1, b[n] + 1});
    std::vector<double> ma(L, 0.0), mb(L, 0.0);
    double agree = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        ma[a[n]] += 1.0;
        mb[b[n]] += 1.0;
        agree += a[n] == b[n];
    }
    const double N = static_cast<double>(a.size());
    const double po = agree / N;
    double pe = 0.0;
    for (std::size_t k = 0; k < L; ++k) pe += (ma[k] / N) * (mb[k] / N);
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

// ---------------------------------------------------------------------------
// Run-to-run stability of frozen-base bias fitting

struct StabilityConfig {
    std::size_t runs = 10;
    double lr_min = 1e-6;
    double lr_max = 1e-3;
    std::vector<LossKind> losses{LossKind::logfree_ce, LossKind::standard_ce};
    std::size_t batch_size = 64;
    /// Fixed epoch count; 0 selects the per-run count with alpha*E*N_k >= progress.
    std::size_t epochs = 0;
    double progress = 100.0;
    double bias_noise = 0.1;
    std::uint64_t seed = 0;
};

struct StabilityRun {
    double learning_rate = 0.0;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
};

struct LossStability {
    LossKind loss = LossKind::logfree_ce;
    std::vector<Matrix> mean;   // per annotator
    std::vector<Matrix> stddev; // per annotator, sample standard deviation across runs
    double mean_std = 0.0;      // average of every stddev entry
    std::size_t completed = 0;
    std::vector<std::size_t> diverged;  // run indices
    std::vector<std::vector<Matrix>> finals;  // per completed run
};

struct StabilityReport {
    StabilityConfig config;
    std::vector<StabilityRun> runs;
    std::vector<LossStability> per_loss;
};

/// Fits the biases of a frozen base `runs` times per loss. Only the learning
/// rate varies on purpose: run r draws it log-uniformly from
/// [lr_min, lr_max] and shuffles with seed + r, while every run starts from
/// the same bias initialization. Runs are shared across losses (paired).
inline StabilityReport stability_study(const BaseParams& base, const std::vector<std::string>& annotators,
                                       const EncodedCorpus& corpus, const StabilityConfig& cfg) {
    if (cfg.runs < 2) throw InvalidArgument("stability study needs at least two runs");
    StabilityReport rep;
    rep.config = cfg;
    Rng lr_rng(cfg.seed);
    const std::size_t min_count = min_class_count(corpus);
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        StabilityRun run;
        run.learning_rate = lr_rng.log_uniform(cfg.lr_min, cfg.lr_max);
        run.seed = cfg.seed + r;
        run.epochs = cfg.epochs ? cfg.epochs : epochs_for_progress(run.learning_rate, min_count, cfg.progress);
        rep.runs.push_back(run);
    }
    const std::size_t L = base.num_classes();
    const LTNetModel init = make_ltnet(base, annotators, cfg.bias_noise, cfg.seed);
    for (LossKind loss : cfg.losses) {
        LossStability ls;
        ls.loss = loss;
        for (std::size_t r = 0; r < rep.runs.size(); ++r) {
            const auto& run = rep.runs[r];
            TrainConfig tc;
            tc.loss = loss;
            tc.learning_rate = run.learning_rate;
            tc.epochs = run.epochs;
            tc.batch_size = cfg.batch_size;
            tc.seed = run.seed;
            tc.mode = TrainMode::frozen_base_bias;
            try {
                ls.finals.push_back(fit_bias_frozen(init, corpus, tc).model.biases);
            } catch (const DivergenceError&) {
                ls.diverged.push_back(r);
            }
        }
        ls.completed = ls.finals.size();
        ls.mean.assign(annotators.size(), Matrix(L, L));
        ls.stddev.assign(annotators.size(), Matrix(L, L));
        if (ls.completed >= 2) {
            const double R = static_cast<double>(ls.completed);
            double acc = 0.0;
            std::size_t entries = 0;
            for (std::size_t c = 0; c < annotators.size(); ++c) {
                for (std::size_t i = 0; i < L * L; ++i) {
                    double m = 0.0;
                    for (const auto& f : ls.finals) m += f[c].data()[i];
                    m /= R;
                    double v = 0.0;
                    for (const auto& f : ls.finals) v += (f[c].data()[i] - m) * (f[c].data()[i] - m);
                    ls.mean[c].data()[i] = m;
                    ls.stddev[c].data()[i] = std::sqrt(v / (R - 1.0));
                    acc += ls.stddev[c].data()[i];
                    ++entries;
                }
            }
            ls.mean_std = acc / static_cast<double>(entries);
        } else {
            ls.mean_std = std::numeric_limits<double>::quiet_NaN();
        }
        rep.per_loss.push_back(std::move(ls));
    }
    return rep;
}

inline const LossStability& stability_for(const StabilityReport& r, LossKind k) {
    for (const auto& ls : r.per_loss)
        if (ls.loss == k) return ls;
    throw InvalidArgument(std::string("stability report has no entry for loss ") + to_string(k));
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { json, csv };

inline ReportFormat parse_report_format(const std::string& s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    throw InvalidArgument("unknown report format '" + s + "'");
}

/// Named matrices plus free-form metadata, emitted as one JSON document or
/// as one CSV file per matrix.
struct Report {
    std::vector<std::string> class_names;
    std::vector<std::pair<std::string, Matrix>> matrices;
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

    void add(std::string name, Matrix m) { matrices.emplace_back(std::move(name), std::move(m)); }
};

inline std::vector<std::string> default_class_names(std::size_t L) {
    std::vector<std::string> v;
    for (std::size_t k = 0; k < L; ++k) v.push_back(std::to_string(k));
    return v;
}

/// Header "class,<names...>" then one row per matrix row, 6 decimals.
inline std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& names) {
    const auto cols = names.size() == m.cols() ? names : default_class_names(m.cols());
    const auto rows = names.size() == m.rows() ? names : default_class_names(m.rows());
    std::string out = "class";
    for (const auto& n : cols) out += "," + n;
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += rows[i];
        for (double v : m.row(i)) {
            std::snprintf(buf, sizeof buf, ",%.6f", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json report_to_json(const Report& r) {
    nlohmann::ordered_json j;
    j["class_names"] = r.class_names;
    nlohmann::ordered_json mats = nlohmann::ordered_json::object();
    for (const auto& [name, m] : r.matrices) mats[name] = detail::matrix_to_json(m);
    j["matrices"] = mats;
    for (const auto& [k, v] : r.metadata.items()) j[k] = v;
    return j;
}

inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& [name, m] : j.at("matrices").items()) r.add(name, detail::matrix_from_json(m));
    return r;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path + "'");
}

/// Writes the report and returns the paths written. CSV with several
/// matrices produces "<stem>.<name>.csv" per matrix.
inline std::vector<std::string> emit_report(const Report& r, const std::string& path, ReportFormat format) {
    if (format == ReportFormat::json) {
        write_text_file(path, report_to_json(r).dump(2) + "\n");
        return {path};
    }
    if (r.matrices.size() == 1) {
        write_text_file(path, matrix_to_csv(r.matrices.front().second, r.class_names));
        return {path};
    }
    std::string stem = path;
    if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".csv") == 0) stem.resize(stem.size() - 4);
    std::vector<std::string> written;
    for (const auto& [name, m] : r.matrices) {
        written.push_back(stem + "." + name + ".csv");
        write_text_file(written.back(), matrix_to_csv(m, r.class_names));
    }
    return written;
}

}  // namespace crowdbias
