#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdbias/corpus.hpp"
#include "crowdbias/error.hpp"
#include "crowdbias/linalg.hpp"

namespace crowdbias {

enum class TruthMethod { dawid_skene, dawid_skene_ltnet, ltnet, base_argmax, majority, annotation };

inline const char* to_string(TruthMethod m) {
    switch (m) {
        case TruthMethod::dawid_skene: return "dawid_skene";
        case TruthMethod::dawid_skene_ltnet: return "dawid_skene_ltnet";
        case TruthMethod::ltnet: return "ltnet";
        case TruthMethod::base_argmax: return "base_argmax";
        case TruthMethod::majority: return "majority";
        case TruthMethod::annotation: return "annotation";
    }
    return "?";
}

inline TruthMethod parse_truth_method(const std::string& s) {
    for (auto m : {TruthMethod::dawid_skene, TruthMethod::dawid_skene_ltnet, TruthMethod::ltnet, TruthMethod::base_argmax, TruthMethod::majority,
                   TruthMethod::annotation})
        if (s == to_string(m)) return m;
    throw InvalidArgument("unknown ground-truth method '" + s + "'");
}

/// One estimated class per item, in the order of the input's items.
struct GroundTruth {
    TruthMethod method = TruthMethod::annotation;
    std::vector<std::string> items;
    std::vector<Label> labels;
};

struct DSResult {
    std::vector<std::string> items;
    std::vector<Label> labels;
    std::vector<Matrix> confusions;  // per annotator, row = estimated truth, column = annotation
    Vector priors;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Most frequent class per item; ties go to the lowest class index.
inline GroundTruth majority_vote(const AnnotationMatrix& am) {
    am.validate();
    GroundTruth gt{TruthMethod::majority, am.items, {}};
    gt.labels.reserve(am.num_items());
    std::vector<std::size_t> votes(am.num_classes);
    for (const auto& entries : am.entries) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& e : entries) ++votes[e.label];
        std::size_t best = 0;
        for (std::size_t k = 1; k < votes.size(); ++k)
            if (votes[k] > votes[best]) best = k;
        gt.labels.push_back(best);
    }
    return gt;
}

namespace detail {

inline constexpr double kDsSmoothing = 1e-6;

// M-step: per-annotator (truth x annotation) counts with additive smoothing.
// An annotator never seen on a given truth class has no evidence of confusion
// there; that row falls back to the (smoothed) identity.
inline void ds_m_step(const AnnotationMatrix& am, const std::vector<Label>& labels, std::vector<Matrix>& conf,
                      Vector& priors) {
    const std::size_t L = am.num_classes;
    conf.assign(am.annotators.size(), Matrix(L, L));
    priors.assign(L, 0.0);
    for (std::size_t n = 0; n < am.num_items(); ++n) {
        priors[labels[n]] += 1.0;
        for (const auto& e : am.entries[n]) conf[e.annotator](labels[n], e.label) += 1.0;
    }
    for (double& p : priors) p /= static_cast<double>(am.num_items());
    for (auto& m : conf) {
        for (std::size_t i = 0; i < L; ++i) {
            auto row = m.row(i);
            double total = sum(row);
            if (total == 0.0) {
                row[i] = 1.0;
                total = 1.0;
            }
            const double denom = total + static_cast<double>(L) * kDsSmoothing;
            for (double& v : row) v = (v + kDsSmoothing) / denom;
        }
    }
}

}  // namespace detail

/// Hard-assignment ("fast") Dawid-Skene. Starts from majority vote, then
/// alternates the M-step with an argmax E-step until no label changes or
/// max_iters is reached. Posteriors are compared in log space; ties go to the
/// lowest class index. `tol` is the fraction of items allowed to change in
/// the last iteration for the run to still count as converged (0 = none).
inline DSResult fast_dawid_skene(const AnnotationMatrix& am, std::size_t max_iters = 100, double tol = 0.0) {
    am.validate();
    if (am.num_classes < 2) throw InvalidArgument("Dawid-Skene needs at least two classes");
    const std::size_t L = am.num_classes;
    DSResult r;
    r.items = am.items;
    r.labels = majority_vote(am).labels;
    std::vector<double> score(L);
    for (r.iterations = 0; r.iterations < max_iters;) {
        detail::ds_m_step(am, r.labels, r.confusions, r.priors);
        ++r.iterations;
        std::size_t changed = 0;
        for (std::size_t n = 0; n < am.num_items(); ++n) {
            for (std::size_t k = 0; k < L; ++k) {
                score[k] = r.priors[k] > 0.0 ? std::log(r.priors[k]) : -std::numeric_limits<double>::infinity();
                for (const auto& e : am.entries[n]) score[k] += std::log(r.confusions[e.annotator](k, e.label));
            }
            const Label best = argmax(score);
            if (best != r.labels[n]) {
                r.labels[n] = best;
                ++changed;
            }
        }
        if (static_cast<double>(changed) <= tol * static_cast<double>(am.num_items())) {
            r.converged = true;
            if (changed == 0) break;
        } else {
            r.converged = false;
        }
    }
    detail::ds_m_step(am, r.labels, r.confusions, r.priors);
    return r;
}

inline GroundTruth to_ground_truth(const DSResult& r) { return {TruthMethod::dawid_skene, r.items, r.labels}; }

/// LTNet posterior argmax: score(k) = p_n[k] * prod_c T^c[k][annotation_c].
/// `latent` is aligned with am.items; `biases` with am.annotators.
inline GroundTruth ltnet_ground_truth(const std::vector<Vector>& latent, const std::vector<Matrix>& biases,
                                      const AnnotationMatrix& am) {
    am.validate();
    if (latent.size() != am.num_items()) throw InvalidArgument("latent predictions and items are not aligned");
    const std::size_t L = am.num_classes;
    GroundTruth gt{TruthMethod::ltnet, am.items, {}};
    gt.labels.reserve(am.num_items());
    std::vector<double> score(L);
    for (std::size_t n = 0; n < am.num_items(); ++n) {
        if (latent[n].size() != L) throw InvalidArgument("latent prediction has the wrong length");
        for (std::size_t k = 0; k < L; ++k) {
            score[k] = latent[n][k];
            for (const auto& e : am.entries[n]) {
                if (e.annotator >= biases.size())
                    throw InvalidArgument("annotation by unknown annotator '" + am.annotators[e.annotator] + "'");
                score[k] *= biases[e.annotator](k, e.label);
            }
        }
        gt.labels.push_back(argmax(score));
    }
    return gt;
}

inline nlohmann::ordered_json to_json(const DSResult& r, const std::vector<std::string>& annotators) {
    nlohmann::ordered_json conf = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < r.confusions.size(); ++c) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < r.confusions[c].rows(); ++i)
            rows.push_back(std::vector<double>(r.confusions[c].row(i).begin(), r.confusions[c].row(i).end()));
        conf[annotators.at(c)] = rows;
    }
    nlohmann::ordered_json labels = nlohmann::ordered_json::object();
    for (std::size_t n = 0; n < r.items.size(); ++n) labels[r.items[n]] = r.labels[n];
    return {{"iterations", r.iterations}, {"converged", r.converged}, {"priors", r.priors}, {"confusions", conf},
            {"labels", labels}};
}

}  // namespace crowdbias
