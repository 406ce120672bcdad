#include "mdre/theory.hpp"

#include <cmath>

#include "doctest.h"
#include "test_helpers.hpp"

using namespace mdre;
using mdre::testing::log_uniform_vec;
using mdre::testing::simplex_vec;

TEST_CASE("perspective transform: hand-checkable scalar case") {
    // f(t) = t^2 -> pf(u) = u^2 / (1+u); both identity sides equal 1/36 at
    // u = 2, v = 1
    const ConvexObjective p2 = ConvexObjective::power(2, 2.0);
    const ObjectiveFunction f(p2);
    CHECK(persp_value(f, Vec{2.0}.data()) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    Vec g(1);
    persp_gradient(f, Vec{1.0}.data(), g.data());
    CHECK(g[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(persp_bregman(f, Vec{2.0}.data(), Vec{1.0}.data()) ==
          doctest::Approx(1.0 / 12.0).epsilon(1e-13));
    CHECK(verify_bregman_identity(f, Vec{2.0}, Vec{1.0}) <= 1e-12);
}

TEST_CASE("perspective gradient matches finite differences") {
    RngStream rng(89, "persp-fd");
    for (int k : {2, 3, 5}) {
        const std::vector<ConvexObjective> bases = {
            ConvexObjective::lsif(k), ConvexObjective::kliep(k), ConvexObjective::power(k, 1.5)};
        for (const ConvexObjective& base : bases) {
            const ObjectiveFunction f(base);
            for (int t = 0; t < 20; ++t) {
                const Vec u = log_uniform_vec(rng, k - 1, -1.5, 1.5);
                Vec g(k - 1);
                persp_gradient(f, u.data(), g.data());
                for (int i = 0; i < k - 1; ++i) {
                    const double fd = testing::central_diff(
                        [&](const Vec& v) { return persp_value(f, v.data()); }, u, i, 1e-6);
                    CHECK(testing::rel_err(g[i], fd) <= 1e-6);
                }
            }
        }
    }
}

TEST_CASE("perspective function is midpoint convex") {
    RngStream rng(97, "persp-convex");
    for (int k : {2, 3, 5}) {
        const std::vector<ConvexObjective> bases = {
            ConvexObjective::lsif(k), ConvexObjective::kliep(k), ConvexObjective::power(k, 1.5)};
        for (const ConvexObjective& base : bases) {
            const ObjectiveFunction f(base);
            for (int t = 0; t < 1000; ++t) {
                const Vec u = log_uniform_vec(rng, k - 1);
                const Vec v = log_uniform_vec(rng, k - 1);
                Vec mid(k - 1);
                for (int i = 0; i < k - 1; ++i) mid[i] = 0.5 * (u[i] + v[i]);
                CHECK(persp_value(f, mid.data()) <=
                      0.5 * (persp_value(f, u.data()) + persp_value(f, v.data())) + 1e-12);
            }
        }
    }
}

TEST_CASE("scaling identity holds over random pairs") {
    RngStream rng(101, "scal-id");
    for (int k : {2, 3, 5}) {
        const std::vector<ConvexObjective> bases = {
            ConvexObjective::lsif(k), ConvexObjective::kliep(k), ConvexObjective::power(k, 1.5)};
        for (const ConvexObjective& base : bases) {
            const ObjectiveFunction f(base);
            for (int t = 0; t < 1000; ++t) {
                const Vec u = log_uniform_vec(rng, k - 1);
                const Vec v = log_uniform_vec(rng, k - 1);
                CHECK(verify_bregman_identity(f, u, v) <= 1e-10);
            }
            const Vec same = log_uniform_vec(rng, k - 1);
            CHECK(verify_bregman_identity(f, same, same) == 0.0);
        }
    }
}

TEST_CASE("prior-weighted identity as a property") {
    RngStream rng(103, "pi-id");
    for (int k : {2, 3, 5}) {
        const std::vector<ConvexObjective> bases = {
            ConvexObjective::lsif(k), ConvexObjective::kliep(k), ConvexObjective::power(k, 1.5)};
        for (const ConvexObjective& base : bases) {
            const ObjectiveFunction f(base);
            for (int t = 0; t < 300; ++t) {
                const Prior prior(simplex_vec(rng, k));
                const Vec eta = simplex_vec(rng, k);
                const Vec eta_hat = simplex_vec(rng, k);
                const Vec r = link_forward(eta, prior);
                const Vec rh = link_forward(eta_hat, prior);
                double mix = prior.w[k - 1];
                for (int i = 0; i < k - 1; ++i) mix += prior.w[i] * r[i];
                const double lhs = bregman_generic(f, eta.data(), eta_hat.data()) * mix;
                const double rhs =
                    prior.w[k - 1] * persp_pi_bregman(f, prior, r.data(), rh.data());
                CHECK(std::fabs(lhs - rhs) <= 1e-10);
            }
        }
    }
}

TEST_CASE("negative generalized entropy rejects the pseudo-spherical rule") {
    CHECK_THROWS_AS(NegEntropy(RuleKind::PseudoSpherical, 3), ValidationError);
}

TEST_CASE("regret identity: zero at the Bayes predictor") {
    const Prior prior(Vec{0.2, 0.3, 0.5});
    Matrix cond(3, 3);
    const double rows[3][3] = {{0.5, 0.3, 0.2}, {0.25, 0.5, 0.25}, {0.2, 0.2, 0.6}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) cond.at(i, j) = rows[i][j];
    const DiscreteExperiment exp(prior, cond);
    for (const ScoringRule& rule : {ScoringRule::log_score(), ScoringRule::brier()}) {
        const double res = verify_regret_identity(rule, exp, [&](int x) { return exp.eta(x); });
        CHECK(res <= 1e-13);
    }
}

TEST_CASE("regret identity on hand-set experiments") {
    // k=2, m=2, uniform prior, log rule
    {
        Matrix cond(2, 2);
        cond.at(0, 0) = 0.7;
        cond.at(0, 1) = 0.3;
        cond.at(1, 0) = 0.4;
        cond.at(1, 1) = 0.6;
        const DiscreteExperiment exp(Prior::uniform(2), cond);
        const std::vector<Vec> guesses = {{0.55, 0.45}, {0.35, 0.65}};
        const double res = verify_regret_identity(ScoringRule::log_score(), exp,
                                                  [&](int x) { return guesses[x]; });
        CHECK(res <= 1e-10);
    }
    // k=3, m=3, skewed prior, brier rule
    {
        const Prior prior(Vec{0.2, 0.3, 0.5});
        Matrix cond(3, 3);
        const double rows[3][3] = {{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.3, 0.3, 0.4}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) cond.at(i, j) = rows[i][j];
        const DiscreteExperiment exp(prior, cond);
        RngStream rng(7, "regret");
        std::vector<Vec> guesses;
        for (int j = 0; j < 3; ++j) guesses.push_back(simplex_vec(rng, 3));
        const double res = verify_regret_identity(ScoringRule::brier(), exp,
                                                  [&](int x) { return guesses[x]; });
        CHECK(res <= 1e-10);
    }
}

TEST_CASE("plug-in divergence: trivial and discrete hand cases") {
    // identical distributions: r == 1 everywhere -> zero for any objective
    const auto unit_ratio = [](const double*) { return Vec{1.0}; };
    Matrix samples(10, 1);
    for (int i = 0; i < 10; ++i) samples.at(i, 0) = 0.1 * i;
    CHECK(fdiv_plugin(ConvexObjective::kliep(2), unit_ratio, samples) == 0.0);

    // two-point exact case: lsif-normalized divergence is 0.125
    const Vec p1{0.75, 0.25}, p2{0.5, 0.5};
    Matrix support(2, 1);
    support.at(0, 0) = 0.0;
    support.at(1, 0) = 1.0;
    const auto ratio = [&](const double* x) {
        const int j = *x > 0.5 ? 1 : 0;
        return Vec{p1[j] / p2[j]};
    };
    // exact expectation: replicate points by mass (0.5, 0.5 -> one each)
    CHECK(fdiv_plugin(ConvexObjective::lsif(2), ratio, support) ==
          doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("variational value equals the negated normalized loss") {
    RngStream rng(107, "var-eq");
    for (int k : {2, 3}) {
        const std::vector<ConvexObjective> objs = {
            ConvexObjective::lsif(k), ConvexObjective::kliep(k), ConvexObjective::multi_lr(k),
            ConvexObjective::power(k, 1.5), ConvexObjective::log_sum_exp(k, 2.0)};
        for (const ConvexObjective& obj : objs) {
            LossBatch batch;
            batch.per_group.resize(k);
            for (int g = 0; g < k; ++g)
                for (int i = 0; i < 6; ++i)
                    batch.per_group[g].push_back(log_uniform_vec(rng, k - 1, -1.0, 1.0));
            CHECK(std::fabs(fdiv_variational(obj, batch) + dre_loss(obj.normalized(), batch)) <=
                  1e-12);
        }
    }
}

TEST_CASE("variational equals plug-in at the true ratios on a discrete experiment") {
    // replicate support points by rational masses so sample means are exact
    const Vec p1{0.75, 0.25}, p2{0.5, 0.5};
    const Vec truth{1.5, 0.5};
    LossBatch batch;
    batch.per_group.resize(2);
    // group 0 ~ p1: 3 copies of x0, 1 of x1; pivot ~ p2: 2 and 2
    for (int c = 0; c < 3; ++c) batch.per_group[0].push_back(Vec{truth[0]});
    batch.per_group[0].push_back(Vec{truth[1]});
    for (int c = 0; c < 2; ++c) batch.per_group[1].push_back(Vec{truth[0]});
    for (int c = 0; c < 2; ++c) batch.per_group[1].push_back(Vec{truth[1]});

    Matrix support(4, 1);  // pivot-replicated support
    support.at(0, 0) = 0.0;
    support.at(1, 0) = 0.0;
    support.at(2, 0) = 1.0;
    support.at(3, 0) = 1.0;
    const auto ratio = [&](const double* x) { return Vec{*x > 0.5 ? truth[1] : truth[0]}; };

    for (const ConvexObjective& obj :
         {ConvexObjective::lsif(2), ConvexObjective::kliep(2), ConvexObjective::power(2, 1.5)}) {
        const double plug = fdiv_plugin(obj, ratio, support);
        const double vari = fdiv_variational(obj, batch);
        CHECK(vari == doctest::Approx(plug).epsilon(1e-12));
    }
}

TEST_CASE("unit model gives a zero lower bound") {
    RngStream rng(109, "var-zero");
    const GroupedDataset ds = testing::random_dataset(rng, 3, 2, 10);
    RatioModel unit = RatioModel::log_linear(FeatureMap::identity(2), 3);
    unit.init(0);
    CHECK(fdiv_variational(ConvexObjective::kliep(3), unit, ds) == 0.0);
}

TEST_CASE("theory suite passes at its shipped tolerances") {
    const TheoryReport report = run_theory_suite(20260810, 100);
    for (const TheoryCheck& check : report.checks) {
        INFO(check.name, " residual ", check.max_residual);
        CHECK(check.pass);
    }
    CHECK(report.all_pass());
}

TEST_CASE("variational bound stays below the plug-in estimate for any model") {
    // gaussian pair at distance 1; oracle ratios for the plug-in, an
    // arbitrary (random, untrained) model for the bound
    RngStream rng(113, "var-bound");
    const std::size_t n = 20000;
    Matrix g1(n, 1), g2(n, 1);
    for (std::size_t i = 0; i < n; ++i) g1.at(i, 0) = rng.normal();
    for (std::size_t i = 0; i < n; ++i) g2.at(i, 0) = 1.0 + rng.normal();
    const GroupedDataset ds({g1, g2}, 1);
    const auto oracle = [](const double* x) { return Vec{std::exp(0.5 - *x)}; };

    for (const ConvexObjective& obj : {ConvexObjective::kliep(2), ConvexObjective::lsif(2)}) {
        const double plugin = fdiv_plugin(obj, oracle, ds.groups.back());
        const ConvexObjective norm = obj.normalized();
        double s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec r = oracle(ds.groups.back().row(i));
            const double d = norm.value(r.data()) - plugin;
            s2 += d * d;
        }
        const double se = std::sqrt(s2 / static_cast<double>(n - 1) / static_cast<double>(n));
        for (int t = 0; t < 5; ++t) {
            RatioModel model = RatioModel::log_linear(FeatureMap::identity(1), 2);
            model.init(0);
            auto p = model.params();
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.7 * rng.normal();
            CHECK(fdiv_variational(obj, model, ds) <= plugin + 3.0 * se);
        }
    }
}
