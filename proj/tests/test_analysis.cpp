#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "crowdbias/crowdbias.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace crowdbias;
using testing_util::TempDir;

namespace {

using Labels = std::vector<Label>;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Confusion, Examples) {
    const auto c = confusion_matrix(Labels{0, 0, 1, 1}, Labels{0, 1, 1, 1}, 2);
    EXPECT_EQ(c.to_matrix(), (Matrix{{1, 1}, {0, 2}}));
    EXPECT_EQ(confusion_matrix(Labels{0, 2, 2}, Labels{0, 2, 2}, 3).to_matrix(), (Matrix{{1, 0, 0}, {0, 0, 0}, {0, 0, 2}}));
    EXPECT_EQ(c.row_total(1), 2u);
    EXPECT_THROW(confusion_matrix(Labels{0}, Labels{0, 1}, 2), InvalidArgument);
    EXPECT_THROW(confusion_matrix(Labels{3}, Labels{0}, 2), InvalidArgument);
}

TEST(Confusion, TotalsAndTrace) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const std::size_t L = 1 + rng.below(5), N = 1 + rng.below(100);
        Labels a(N), b(N);
        for (auto& v : a) v = rng.below(L);
        for (auto& v : b) v = rng.below(L);
        const auto c = confusion_matrix(a, b, L);
        EXPECT_EQ(c.total(), N);
        double trace = 0;
        for (std::size_t k = 0; k < L; ++k) {
            EXPECT_EQ(c.row_total(k), static_cast<std::size_t>(std::count(a.begin(), a.end(), k)));
            trace += static_cast<double>(c(k, k));
        }
        EXPECT_DOUBLE_EQ(accuracy(b, a), trace / static_cast<double>(N));
    }
}

TEST(Mismatch, Examples) {
    ConfusionCounts c{2, {3, 1, 2, 6}};
    const Matrix ref = row_normalize(c.to_matrix());
    EXPECT_EQ(bias_mismatch(ref, c).max_abs, 0.0);
    EXPECT_EQ(bias_mismatch(ref, c).frobenius, 0.0);

    const auto m = bias_mismatch(Matrix::identity(2), ConfusionCounts{2, {1, 1, 1, 1}});
    EXPECT_DOUBLE_EQ(m.max_abs, 0.5);
    EXPECT_DOUBLE_EQ(m.frobenius, 1.0);

    const Matrix t{{0.7, 0.3}, {0.1, 0.9}};
    ConfusionCounts scaled{2, {30, 10, 20, 60}};
    const auto a = bias_mismatch(t, c), b = bias_mismatch(t, scaled);
    EXPECT_NEAR(a.max_abs, b.max_abs, 1e-15);
    EXPECT_NEAR(a.frobenius, b.frobenius, 1e-15);

    EXPECT_THROW(bias_mismatch(t, ConfusionCounts{2, {0, 0, 1, 1}}), InvalidArgument);
}

TEST(Kappa, Examples) {
    EXPECT_DOUBLE_EQ(cohens_kappa(Labels{0, 1, 2, 1}, Labels{0, 1, 2, 1}), 1.0);
    EXPECT_DOUBLE_EQ(cohens_kappa(Labels{1, 0, 1, 0}, Labels{1, 1, 0, 0}), 0.0);
    // p_e = 1
    EXPECT_EQ(cohens_kappa(Labels{1, 1}, Labels{1, 1}), 1.0);
}

TEST(Kappa, SymmetricAndMatchesOracle) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const std::size_t L = 2 + rng.below(4), N = 2 + rng.below(80);
        Labels a(N), b(N);
        for (auto& v : a) v = rng.below(L);
        for (std::size_t n = 0; n < N; ++n) b[n] = rng.uniform() < 0.6 ? a[n] : rng.below(L);
        EXPECT_DOUBLE_EQ(cohens_kappa(a, b), cohens_kappa(b, a));
        EXPECT_NEAR(cohens_kappa(a, b), oracle::kappa(a, b), 1e-12);
        if (std::set<Label>(a.begin(), a.end()).size() >= 2) {
            EXPECT_DOUBLE_EQ(cohens_kappa(a, a), 1.0);
        }
    }
}

TEST(Kappa, BelowChanceIsNonPositive) {
    // constant b: p_e = share of class 0 in a; agreement below it
    const Labels a{0, 1, 1, 1}, b{0, 0, 0, 0};
    EXPECT_LE(cohens_kappa(a, b), 0.0);
    const Labels c{1, 0, 1, 0}, d{0, 1, 0, 1};
    EXPECT_LT(cohens_kappa(c, d), 0.0);
}

TEST(Metrics, AccuracyAndMacroF1) {
    const Labels gold{0, 0, 1, 1};
    EXPECT_EQ(accuracy(gold, gold), 1.0);
    EXPECT_EQ(macro_f1(gold, gold, 2), 1.0);
    const Labels pred{0, 0, 0, 0};
    EXPECT_DOUBLE_EQ(accuracy(pred, gold), 0.5);
    EXPECT_NEAR(macro_f1(pred, gold, 2), 1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(macro_f1(Labels{2, 2}, Labels{2, 2}, 4), 0.25);
    EXPECT_DOUBLE_EQ(accuracy(Labels{2, 2}, Labels{2, 2}), 1.0);
}

TEST(Stability, IdenticalRatesGiveZeroSpread) {
    const auto spec = testing_util::binary_spec(0.9, 0.7, 200);
    const auto syn = generate_synthetic(spec, 3);
    const auto emb = synth_embeddings(synthetic_vocabulary(spec), 5, 4);
    const auto corpus = encode(syn.dataset, emb);
    StabilityConfig cfg;
    cfg.runs = 4;
    cfg.lr_min = cfg.lr_max = 1e-3;
    cfg.batch_size = 0;
    cfg.epochs = 20;
    cfg.seed = 5;
    const auto rep = stability_study(init_base(5, 2, 6), syn.dataset.annotators, corpus, cfg);
    ASSERT_EQ(rep.per_loss.size(), 2u);
    for (const auto& ls : rep.per_loss) {
        EXPECT_EQ(ls.completed, 4u);
        EXPECT_EQ(ls.mean_std, 0.0) << to_string(ls.loss);
        for (const auto& s : ls.stddev)
            for (double v : s.data()) EXPECT_GE(v, 0.0);
    }
    EXPECT_THROW(stability_for(rep, LossKind::logfree_ce).mean.at(2), std::out_of_range);
}

TEST(Stability, RunsFollowProtocol) {
    const auto spec = testing_util::binary_spec(0.9, 0.7, 100);
    const auto syn = generate_synthetic(spec, 7);
    const auto emb = synth_embeddings(synthetic_vocabulary(spec), 4, 8);
    const auto corpus = encode(syn.dataset, emb);
    StabilityConfig cfg;
    cfg.runs = 3;
    cfg.lr_min = 1e-2;
    cfg.lr_max = 1e-1;
    cfg.seed = 11;
    const auto rep = stability_study(init_base(4, 2, 9), syn.dataset.annotators, corpus, cfg);
    const std::size_t nmin = min_class_count(corpus);
    for (std::size_t r = 0; r < 3; ++r) {
        const auto& run = rep.runs[r];
        EXPECT_GE(run.learning_rate, 1e-2);
        EXPECT_LE(run.learning_rate, 1e-1);
        EXPECT_EQ(run.seed, 11 + r);
        EXPECT_GE(run.learning_rate * static_cast<double>(run.epochs * nmin), 100.0 - 1e-6);
    }
    cfg.runs = 1;
    EXPECT_THROW(stability_study(init_base(4, 2, 9), syn.dataset.annotators, corpus, cfg), InvalidArgument);
}

TEST(Report, CsvLayout) {
    const std::string csv = matrix_to_csv(Matrix{{0.9, 0.1}, {0.25, 0.75}}, {"neg", "pos"});
    EXPECT_EQ(csv, "class,neg,pos\nneg,0.900000,0.100000\npos,0.250000,0.750000\n");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Report, EmitCsvAndJson) {
    TempDir tmp;
    Report r;
    r.class_names = {"0", "1"};
    r.add("a0.bias", Matrix{{0.8, 0.2}, {0.1, 0.9}});
    r.add("a0.confusion", Matrix{{0.75, 0.25}, {0.125, 0.875}});
    r.metadata["mismatch"] = {{"a0", 0.05}};

    const auto written = emit_report(r, tmp.file("out.csv"), ReportFormat::csv);
    ASSERT_EQ(written.size(), 2u);
    EXPECT_EQ(written[0], tmp.file("out.a0.bias.csv"));
    EXPECT_EQ(slurp(written[1]), "class,0,1\n0,0.750000,0.250000\n1,0.125000,0.875000\n");

    emit_report(r, tmp.file("out.json"), ReportFormat::json);
    const auto j = nlohmann::json::parse(slurp(tmp.file("out.json")));
    const auto back = report_from_json(j);
    ASSERT_EQ(back.matrices.size(), 2u);
    EXPECT_EQ(back.matrices[0], r.matrices[0]);
    EXPECT_EQ(back.matrices[1], r.matrices[1]);
    EXPECT_DOUBLE_EQ(j.at("mismatch").at("a0").get<double>(), 0.05);

    Report single;
    single.add("t", Matrix::identity(2));
    EXPECT_EQ(emit_report(single, tmp.file("one.csv"), ReportFormat::csv), std::vector<std::string>{tmp.file("one.csv")});
    EXPECT_THROW(parse_report_format("xml"), InvalidArgument);
}
