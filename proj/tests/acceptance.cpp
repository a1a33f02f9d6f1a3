// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>

#include "crowdbias/crowdbias.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace crowdbias;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, double secs, const std::string& detail) {
    std::printf("criterion %d %-28s %s  (%.1f s)  %s\n", id, name, ok ? "PASS" : "FAIL", secs, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double worst_mismatch(const LossBias& lb) {
    double w = 0.0;
    for (const auto& a : lb.annotators) w = std::max(w, a.mismatch.max_abs);
    return w;
}

const AnnotatorBias& annotator(const LossBias& lb, const std::string& name) {
    for (const auto& a : lb.annotators)
        if (a.annotator == name) return a;
    throw InvalidArgument("no annotator " + name);
}

// Shared by criteria 2 and 6.
struct DefaultRun {
    SyntheticCorpus syn;
    Embeddings emb;
    BiasConvergence bc;
};

DefaultRun default_run() {
    DefaultRun r;
    const auto spec = default_synthetic_spec();
    r.syn = generate_synthetic(spec, 1);
    r.emb = synth_embeddings(synthetic_vocabulary(spec), 8, 2);
    r.bc = bias_convergence(r.syn.dataset, r.emb, PipelineConfig{});
    return r;
}

void criterion1() {
    const auto t0 = Clock::now();
    auto spec = default_synthetic_spec();
    spec.samples_per_annotator = 2500;
    const auto syn = generate_synthetic(spec, 11);
    const auto emb = synth_embeddings(synthetic_vocabulary(spec), 8, 12);
    const auto corpus = encode(syn.dataset, emb);
    const auto model = make_ltnet(init_base(8, 2, 13), syn.dataset.annotators, 0.1, 14);
    const double lr = 1e-3;
    const std::size_t E = 25;
    const TrainConfig cfg{LossKind::logfree_ce, lr, E, 0, 15, TrainMode::frozen_base_bias,
                          ConstraintPolicy::none_then_final_normalize};
    const auto fit = fit_bias_frozen(model, corpus, cfg);
    const auto latent = predict_latent(model.base, corpus);
    double worst = 0.0;
    for (std::size_t c = 0; c < model.biases.size(); ++c) {
        std::vector<Vector> p;
        std::vector<Label> y;
        for (std::size_t n = 0; n < corpus.size(); ++n)
            if (corpus.annotators[n] == c) {
                p.push_back(latent.predictions[n].p);
                y.push_back(corpus.labels[n]);
            }
        const Matrix cf = closed_form_bias(model.biases[c], accumulate_z(p, y, 2), lr, E);
        const Matrix ref = oracle::frozen_logfree_limit(model.biases[c], p, y, lr, E);
        for (std::size_t i = 0; i < cf.data().size(); ++i) {
            const double got = fit.model.biases[c].data()[i];
            worst = std::max(worst, std::abs(got - cf.data()[i]) / std::abs(cf.data()[i]));
            worst = std::max(worst, std::abs(got - ref.data()[i]) / std::abs(ref.data()[i]));
        }
    }
    const double secs = seconds_since(t0);
    report(1, "closed-form bias", worst <= 1e-6 && secs < 10, secs, fmt("max relative error %.2e", worst));
}

void criterion2(const DefaultRun& r, double secs) {
    const double lf = worst_mismatch(r.bc.of(LossKind::logfree_ce));
    const double ce = worst_mismatch(r.bc.of(LossKind::standard_ce));
    report(2, "bias matches confusion", lf <= 0.02 && ce > 0.02 && secs < 120, secs,
           fmt("logfree max-abs %.4f", lf) + fmt(", ce max-abs %.4f", ce) +
               fmt(", E=%.0f", static_cast<double>(r.bc.of(LossKind::logfree_ce).config.epochs)));
}

void criterion3() {
    const auto t0 = Clock::now();
    const auto spec = default_synthetic_spec();
    const auto syn = generate_synthetic(spec, 1);
    const auto emb = synth_embeddings(synthetic_vocabulary(spec), 8, 2);
    PipelineConfig cfg;
    const auto noisy = inject_random_labels(syn.dataset, "a0", 0.8, cfg.seed + seeds::spam);
    std::size_t total = 0, changed = 0;
    for (std::size_t n = 0; n < noisy.size(); ++n) {
        if (noisy.annotators[noisy.samples[n].annotator] != "a0") continue;
        ++total;
        changed += noisy.samples[n].label != syn.dataset.samples[n].label;
    }
    const double flip = static_cast<double>(changed) / static_cast<double>(total);
    const auto bc = bias_convergence(noisy, emb, cfg);
    const double lf = annotator(bc.of(LossKind::logfree_ce), "a0").mismatch.max_abs;
    const double secs = seconds_since(t0);
    report(3, "spammer robustness", std::abs(flip - 0.40) <= 0.03 && lf <= 0.02, secs,
           fmt("flip rate %.4f", flip) + fmt(" over %.0f labels", static_cast<double>(total)) +
               fmt(", logfree a0 max-abs %.4f", lf));
}

void criterion4() {
    const auto t0 = Clock::now();
    const auto spec = default_synthetic_spec();
    const auto syn = generate_synthetic(spec, 1);
    const auto emb = synth_embeddings(synthetic_vocabulary(spec), 8, 2);
    const auto out = stability(syn.dataset, emb, PipelineConfig{});
    const auto& lf = stability_for(out.report, LossKind::logfree_ce);
    const auto& ce = stability_for(out.report, LossKind::standard_ce);
    const double secs = seconds_since(t0);
    const bool ok = lf.completed == 10 && ce.completed == 10 && lf.mean_std < ce.mean_std && lf.mean_std <= 0.05 &&
                    secs < 300;
    report(4, "learning-rate stability", ok, secs,
           fmt("logfree mean std %.3e", lf.mean_std) + fmt(", ce mean std %.3e", ce.mean_std));
}

void criterion5() {
    const auto t0 = Clock::now();
    Rng rng(5);
    std::size_t items = 0, equal = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t L = 2 + rng.below(4), C = 1 + rng.below(8), N = 1 + rng.below(200);
        AnnotationMatrix am;
        am.num_classes = L;
        for (std::size_t c = 0; c < C; ++c) am.annotators.push_back("c" + std::to_string(c));
        std::vector<Label> given;
        for (std::size_t n = 0; n < N; ++n) {
            am.items.push_back(std::to_string(n));
            am.texts.push_back("");
            given.push_back(rng.below(L));
            am.entries.push_back({{rng.below(C), given.back()}});
        }
        const auto ds = fast_dawid_skene(am).labels;
        for (std::size_t n = 0; n < N; ++n) equal += ds[n] == given[n];
        items += N;
    }
    const double secs = seconds_since(t0);
    report(5, "single-label degeneracy", equal == items, secs,
           fmt("%.0f", static_cast<double>(equal)) + fmt(" of %.0f items match", static_cast<double>(items)));
}

void criterion6(const DefaultRun& r) {
    const auto t0 = Clock::now();
    LTNetModel m;
    m.base = r.bc.prepared.base;
    m.annotators = r.syn.dataset.annotators;
    for (const auto& a : r.bc.of(LossKind::logfree_ce).annotators) m.biases.push_back(a.bias);
    const auto am = AnnotationMatrix::from_dataset(r.syn.dataset);
    const auto g = ground_truth(am, {TruthMethod::ltnet, TruthMethod::dawid_skene_ltnet, TruthMethod::dawid_skene}, &m,
                                &r.emb);
    bool diag = true;
    for (std::size_t i = 0; i < 3; ++i) diag = diag && g.kappa(i, i) == 1.0;
    const double k = g.kappa(0, 1);
    report(6, "ground-truth agreement", k >= 0.90 && diag, seconds_since(t0),
           fmt("kappa(ltnet, ds on heads) %.4f", k) + fmt(", kappa(ltnet, ds on annotations) %.4f", g.kappa(0, 2)));
}

void criterion7() {
    const auto t0 = Clock::now();
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.num_annotators = 4;
    spec.samples_per_annotator = 2000;
    spec.true_confusions = {SyntheticSpec::symmetric_confusion(3, 0.9), SyntheticSpec::symmetric_confusion(3, 0.8),
                            SyntheticSpec::symmetric_confusion(3, 0.7),
                            Matrix{{0.9, 0.05, 0.05}, {0.3, 0.65, 0.05}, {0.1, 0.3, 0.6}}};
    spec.class_priors = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const auto syn = generate_synthetic(spec, 1);
    const auto emb = synth_embeddings(synthetic_vocabulary(spec), 8, 2);
    const auto latent = latent_truth_map(syn.dataset, syn.latent);
    PipelineConfig cfg;
    cfg.seed = 7;
    const auto res = classify(syn.dataset, emb, &latent, cfg);
    const double base = res.rows[0].accuracy;
    bool ok = res.rows.size() == 3;
    std::string detail = fmt("base %.4f", base);
    for (std::size_t i = 1; i < res.rows.size(); ++i) {
        ok = ok && res.rows[i].accuracy >= base;
        detail += ", " + res.rows[i].name + fmt(" %.4f", res.rows[i].accuracy);
    }
    report(7, "classification ordering", ok, seconds_since(t0), detail);
}

void criterion8() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checks = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto mode = seed % 2 ? AttentionMode::raw : AttentionMode::normalized;
        const auto p = gradcheck::random_problem(5000 + seed, mode);
        for (auto loss : {LossKind::logfree_ce, LossKind::standard_ce})
            for (auto tm : {TrainMode::joint_finetune, TrainMode::frozen_base_bias, TrainMode::pretrain_base}) {
                worst = std::max(worst, gradcheck::max_relative_error(p, loss, tm));
                ++checks;
            }
    }
    report(8, "gradient correctness", worst < 1e-4, seconds_since(t0),
           fmt("max relative error %.2e", worst) + fmt(" over %.0f checks", static_cast<double>(checks)));
}

void criterion9() {
    const auto t0 = Clock::now();
    Rng rng(9);
    std::size_t violations = 0;
    auto check = [&](bool ok) { violations += !ok; };
    for (int t = 0; t < 2000; ++t) {
        const std::size_t L = 2 + rng.below(5);
        Vector u(L);
        for (double& v : u) v = rng.uniform(-5, 5);
        const Vector p = softmax(u);
        const Matrix T = gradcheck::random_stochastic(L, rng);
        const Vector q = annotator_forward(p, T);
        check(std::abs(sum(q) - 1.0) <= 1e-9);
        check(std::all_of(q.begin(), q.end(), [](double v) { return v >= 0.0; }));

        Matrix raw(L, L);
        for (double& v : raw.data()) v = rng.uniform(0.0, 10.0);
        check(is_row_stochastic(row_normalize(raw), 1e-9));
        check(is_row_stochastic(init_bias_matrix(L, rng.uniform(0, 0.5), rng.next()), 1e-9));

        const std::size_t N = 1 + rng.below(100);
        std::vector<Vector> latent;
        std::vector<Label> a(N), b(N);
        for (std::size_t n = 0; n < N; ++n) {
            for (double& v : u) v = rng.uniform(-3, 3);
            latent.push_back(softmax(u));
            a[n] = rng.below(L);
            b[n] = rng.uniform() < 0.5 ? a[n] : rng.below(L);
        }
        const auto z = accumulate_z(latent, b, L);
        for (std::size_t k = 0; k < L; ++k) {
            double col = 0.0;
            for (std::size_t h = 0; h < L; ++h) col += z.values(h, k);
            check(std::abs(col - static_cast<double>(z.class_counts[k])) <= 1e-9);
        }
        check(cohens_kappa(a, b) == cohens_kappa(b, a));
        const auto cm = confusion_matrix(a, b, L);
        std::size_t rows = 0;
        for (std::size_t k = 0; k < L; ++k) rows += cm.row_total(k);
        check(cm.total() == N && rows == N);
    }
    // projection after every step of a joint fine-tune
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = gradcheck::random_problem(9000 + seed, AttentionMode::normalized);
        const TrainConfig cfg{LossKind::logfree_ce, 0.5, 5, 1, seed, TrainMode::joint_finetune,
                              ConstraintPolicy::project_each_step};
        const auto [m, rep] = finetune_ltnet(p.model, p.corpus, cfg);
        for (const auto& T : m.biases) check(is_row_stochastic(T, 1e-9));
    }
    const double secs = seconds_since(t0);
    report(9, "structural invariants", violations == 0 && secs < 30, secs,
           fmt("%.0f violations", static_cast<double>(violations)));
}

}  // namespace

int main() {
    try {
        criterion1();
        const auto t0 = Clock::now();
        const auto run = default_run();
        criterion2(run, seconds_since(t0));
        criterion3();
        criterion4();
        criterion5();
        criterion6(run);
        criterion7();
        criterion8();
        criterion9();
    } catch (const std::exception& e) {
        std::printf("aborted: %s\n", e.what());
        return 2;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
