#include <gtest/gtest.h>

#include "crowdbias/crowdbias.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace crowdbias;

namespace {

using Labels = std::vector<Label>;

// rows: items, columns: annotators
AnnotationMatrix dense(const std::vector<Labels>& votes, std::size_t L) {
    AnnotationMatrix am;
    am.num_classes = L;
    for (std::size_t c = 0; c < votes.front().size(); ++c) am.annotators.push_back("a" + std::to_string(c));
    for (std::size_t n = 0; n < votes.size(); ++n) {
        am.items.push_back("i" + std::to_string(n));
        am.texts.push_back("");
        am.entries.emplace_back();
        for (std::size_t c = 0; c < votes[n].size(); ++c) am.entries.back().push_back({c, votes[n][c]});
    }
    return am;
}

struct Simulated {
    AnnotationMatrix am;
    Labels truth;
};

Simulated simulate(std::size_t items, const std::vector<Matrix>& conf, const Vector& priors, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Labels> votes;
    Simulated s;
    for (std::size_t n = 0; n < items; ++n) {
        const Label k = rng.categorical(priors);
        s.truth.push_back(k);
        Labels row;
        for (const auto& T : conf) row.push_back(rng.categorical(T.row(k)));
        votes.push_back(row);
    }
    s.am = dense(votes, priors.size());
    return s;
}

double agreement(const Labels& a, const Labels& b) {
    double hit = 0;
    for (std::size_t n = 0; n < a.size(); ++n) hit += a[n] == b[n];
    return hit / static_cast<double>(a.size());
}

}  // namespace

TEST(MajorityVote, Examples) {
    const auto am = dense({{1, 1, 0}}, 2);
    EXPECT_EQ(majority_vote(am).labels, Labels{1});
    EXPECT_EQ(majority_vote(dense({{0, 1}}, 2)).labels, Labels{0});
    EXPECT_EQ(majority_vote(dense({{1, 0}}, 2)).labels, Labels{0});
    EXPECT_EQ(majority_vote(dense({{2}}, 3)).labels, Labels{2});
}

TEST(DawidSkene, SingleLabelDegeneratesToAnnotations) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t L = 2 + rng.below(4), C = 1 + rng.below(6), N = 1 + rng.below(60);
        AnnotationMatrix am;
        am.num_classes = L;
        for (std::size_t c = 0; c < C; ++c) am.annotators.push_back("c" + std::to_string(c));
        Labels given;
        for (std::size_t n = 0; n < N; ++n) {
            am.items.push_back(std::to_string(n));
            am.texts.push_back("");
            given.push_back(rng.below(L));
            am.entries.push_back({{rng.below(C), given.back()}});
        }
        EXPECT_EQ(fast_dawid_skene(am).labels, given) << "trial " << trial;
    }
}

TEST(DawidSkene, UnanimousAnnotators) {
    const auto am = dense(std::vector<Labels>(6, Labels{1, 1, 1}), 2);
    const auto r = fast_dawid_skene(am);
    EXPECT_EQ(r.labels, Labels(6, 1));
    EXPECT_TRUE(r.converged);
    for (const auto& T : r.confusions) {
        EXPECT_NEAR(T(1, 1), 1.0, 1e-5);
        EXPECT_NEAR(T(1, 0), 0.0, 1e-5);
        EXPECT_NEAR(T(0, 0) + T(0, 1), 1.0, 1e-12);
    }
    EXPECT_NEAR(r.priors[1], 1.0, 1e-12);
}

TEST(DawidSkene, DissentingSpammerAgainstBruteForce) {
    const Labels truth{0, 1, 0, 1, 1};
    const Labels spam{1, 0, 1, 1, 0};
    std::vector<Labels> votes;
    for (std::size_t n = 0; n < truth.size(); ++n) votes.push_back({truth[n], truth[n], spam[n]});
    const auto am = dense(votes, 2);
    const auto r = fast_dawid_skene(am);
    EXPECT_EQ(r.labels, truth);

    // the result is a fixed point of an independently written EM step ...
    EXPECT_EQ(oracle::ds_step(am, r.labels), r.labels);
    const auto fixed = oracle::ds_fixed_points(am);
    EXPECT_NE(std::find(fixed.begin(), fixed.end(), r.labels), fixed.end());
    // ... and the one reached from the majority vote
    Labels cur = majority_vote(am).labels;
    for (int it = 0; it < 100; ++it) {
        const Labels next = oracle::ds_step(am, cur);
        if (next == cur) break;
        cur = next;
    }
    EXPECT_EQ(cur, r.labels);
}

TEST(DawidSkene, MatchesOracleIterationOnRandomData) {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t L = 2 + rng.below(2), C = 2 + rng.below(4), N = 5 + rng.below(40);
        std::vector<Labels> votes(N, Labels(C));
        for (auto& row : votes)
            for (auto& v : row) v = rng.below(L);
        const auto am = dense(votes, L);
        Labels cur = majority_vote(am).labels;
        for (int it = 0; it < 100; ++it) {
            const Labels next = oracle::ds_step(am, cur);
            if (next == cur) break;
            cur = next;
        }
        EXPECT_EQ(fast_dawid_skene(am).labels, cur) << "trial " << trial;
    }
}

TEST(DawidSkene, PermutationEquivariant) {
    const std::vector<Matrix> conf(5, SyntheticSpec::symmetric_confusion(2, 0.75));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto sim = simulate(150, conf, {0.3, 0.7}, seed);
        auto swapped = sim.am;
        for (auto& row : swapped.entries)
            for (auto& e : row) e.label = 1 - e.label;
        const auto a = fast_dawid_skene(sim.am).labels, b = fast_dawid_skene(swapped).labels;
        for (std::size_t n = 0; n < a.size(); ++n) EXPECT_EQ(b[n], 1 - a[n]);
    }
}

TEST(DawidSkene, AtLeastAsGoodAsMajorityVote) {
    std::vector<Matrix> conf{SyntheticSpec::symmetric_confusion(3, 0.9), SyntheticSpec::symmetric_confusion(3, 0.8),
                             SyntheticSpec::symmetric_confusion(3, 0.7),
                             Matrix{{0.7, 0.3, 0.0}, {0.0, 0.7, 0.3}, {0.3, 0.0, 0.7}},
                             Matrix{{0.85, 0.1, 0.05}, {0.2, 0.75, 0.05}, {0.1, 0.15, 0.75}}};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto sim = simulate(500, conf, {0.5, 0.3, 0.2}, 100 + seed);
        const double ds = agreement(fast_dawid_skene(sim.am).labels, sim.truth);
        const double mv = agreement(majority_vote(sim.am).labels, sim.truth);
        EXPECT_GE(ds, mv - 0.01) << "seed " << seed;
    }
}

TEST(DawidSkene, ConfusionsAndPriorsAreStochastic) {
    const std::vector<Matrix> conf(4, SyntheticSpec::symmetric_confusion(3, 0.7));
    const auto r = fast_dawid_skene(simulate(80, conf, {0.2, 0.3, 0.5}, 9).am);
    double ps = 0;
    for (double p : r.priors) ps += p;
    EXPECT_NEAR(ps, 1.0, 1e-9);
    for (const auto& T : r.confusions) EXPECT_TRUE(is_row_stochastic(T, 1e-9));
}

TEST(DawidSkene, RejectsSingleClass) { EXPECT_THROW(fast_dawid_skene(dense({{0}}, 1)), InvalidArgument); }

TEST(LtnetGroundTruth, HandExample) {
    const auto am = dense({{1}}, 2);
    const auto gt = ltnet_ground_truth({{0.6, 0.4}}, {Matrix{{0.9, 0.1}, {0.3, 0.7}}}, am);
    EXPECT_EQ(gt.labels, Labels{1});
    // scores 0.06 and 0.28
    EXPECT_NEAR(0.6 * 0.1, 0.06, 1e-15);
    EXPECT_NEAR(0.4 * 0.7, 0.28, 1e-15);
}

TEST(LtnetGroundTruth, IdentityBiasDefersToAnnotation) {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const Label j = rng.below(3);
        Vector u{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const auto gt = ltnet_ground_truth({softmax(u)}, {Matrix::identity(3)}, dense({{j}}, 3));
        EXPECT_EQ(gt.labels, Labels{j});
    }
}

TEST(LtnetGroundTruth, SpammerDefersToLatent) {
    const Matrix spam(3, 3, 1.0 / 3);
    const auto gt = ltnet_ground_truth({{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}}, {spam, spam}, dense({{0, 0}, {2, 1}}, 3));
    EXPECT_EQ(gt.labels, (Labels{1, 0}));
}

TEST(LtnetGroundTruth, InvariantToPositiveScaling) {
    Rng rng(4);
    const std::vector<Matrix> biases{init_bias_matrix(3, 0.5, 1), init_bias_matrix(3, 0.5, 2)};
    for (int t = 0; t < 50; ++t) {
        Vector p{rng.uniform(0.01, 1), rng.uniform(0.01, 1), rng.uniform(0.01, 1)};
        const auto am = dense({{rng.below(3), rng.below(3)}}, 3);
        Vector scaled = p;
        for (double& v : scaled) v *= 1e-3;
        EXPECT_EQ(ltnet_ground_truth({p}, biases, am).labels, ltnet_ground_truth({scaled}, biases, am).labels);
    }
}

TEST(LtnetGroundTruth, Validation) {
    const auto am = dense({{1, 0}}, 2);
    EXPECT_THROW(ltnet_ground_truth({}, {Matrix::identity(2), Matrix::identity(2)}, am), InvalidArgument);
    EXPECT_THROW(ltnet_ground_truth({{0.5, 0.5}}, {Matrix::identity(2)}, am), InvalidArgument);
}

TEST(TruthMethod, NamesRoundTrip) {
    for (auto m : {TruthMethod::dawid_skene, TruthMethod::dawid_skene_ltnet, TruthMethod::ltnet, TruthMethod::base_argmax,
                   TruthMethod::majority})
        EXPECT_EQ(parse_truth_method(to_string(m)), m);
    EXPECT_THROW(parse_truth_method("oracle"), InvalidArgument);
}
