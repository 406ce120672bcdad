#include "mdre/applications.hpp"

#include <cmath>

#include "doctest.h"
#include "test_helpers.hpp"

using namespace mdre;

namespace {

RatioModel constant_model(int k, const Vec& log_r) {
    RatioModel m = RatioModel::log_linear(FeatureMap::identity(1), k);
    m.init(0);
    auto p = m.params();
    // weights zero, biases = log ratios
    for (std::size_t i = 0; i < log_r.size(); ++i) p[k - 1 + i] = log_r[i];
    return m;
}

}  // namespace

TEST_CASE("pairwise ratios derive from the canonical vector") {
    RatioModel m = constant_model(4, {std::log(2.0), std::log(3.0), std::log(5.0)});
    const double x = 0.0;
    CHECK(pairwise_ratio(m, &x, 0, 3) == doctest::Approx(2.0));   // against the pivot
    CHECK(pairwise_ratio(m, &x, 3, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(pairwise_ratio(m, &x, 0, 1) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(pairwise_ratio(m, &x, 2, 2), ValidationError);
    CHECK_THROWS_AS(pairwise_ratio(m, &x, 0, 4), ValidationError);

    // transitivity is exact by construction
    const double lhs = pairwise_ratio(m, &x, 0, 1) * pairwise_ratio(m, &x, 1, 2);
    CHECK(lhs == doctest::Approx(pairwise_ratio(m, &x, 0, 2)).epsilon(1e-15));

    RatioModel unit = constant_model(4, {0.0, 0.0, 0.0});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) CHECK(pairwise_ratio(unit, &x, i, j) == 1.0);
}

TEST_CASE("mae basics") {
    // k=2, truth 2, unit model -> single pair with constant gap 1
    RatioModel unit = constant_model(2, {0.0});
    Matrix pts(5, 1);
    for (int i = 0; i < 5; ++i) pts.at(i, 0) = i;
    const auto truth2 = [](int, int, const double*) { return 2.0; };
    CHECK(mae(unit, truth2, pts) == doctest::Approx(1.0));

    // a model that matches the truth exactly scores zero
    RatioModel exact = constant_model(2, {std::log(2.0)});
    const auto truth_pair = [&](int i, int j, const double* x) {
        const double r = exact.eval_vec({x[0]})[0];
        return i == 0 && j == 1 ? r : 1.0 / r;
    };
    CHECK(mae(exact, truth_pair, pts) <= 1e-12);

    // clipped diagnostic saturates huge true ratios
    const auto truth_huge = [](int, int, const double*) { return 1e6; };
    const MaeReport rep = mae_report(unit, truth_huge, pts, 50.0);
    CHECK(rep.mae == doctest::Approx(1e6 - 1.0));
    CHECK(rep.clipped == doctest::Approx(49.0));

    // order invariance
    Matrix rev(5, 1);
    for (int i = 0; i < 5; ++i) rev.at(i, 0) = 4 - i;
    RatioModel skew = constant_model(2, {0.3});
    const auto truth_fn = [](int i, int j, const double* x) {
        const double r = std::exp(0.2 * x[0]);
        return i < j ? r : 1.0 / r;
    };
    CHECK(mae(skew, truth_fn, pts) == doctest::Approx(mae(skew, truth_fn, rev)).epsilon(1e-15));
}

TEST_CASE("importance sampling: degenerate and reduction cases") {
    Matrix samples(4, 1);
    for (int i = 0; i < 4; ++i) samples.at(i, 0) = i;
    const ScalarFn unit_ratio = [](const double*) { return 1.0; };
    const ScalarFn phi_const = [](const double*) { return 3.25; };
    CHECK(importance_estimate(unit_ratio, phi_const, samples) == doctest::Approx(3.25));

    // point-mass weights reduce bit-for-bit to the single-proposal estimator
    const ScalarFn ratio_a = [](const double* x) { return 1.0 + 0.1 * x[0]; };
    const ScalarFn phi = [](const double* x) { return x[0] * x[0] - 1.5; };
    const double single = importance_estimate(ratio_a, phi, samples);
    const double via_mis = mis_estimate({ratio_a}, MisWeights(Vec{1.0}), phi, {samples});
    CHECK(via_mis == single);

    Matrix other(3, 1);
    for (int i = 0; i < 3; ++i) other.at(i, 0) = -i;
    const ScalarFn ratio_b = [](const double* x) { return 1.0 - 0.05 * x[0]; };
    const double mass_on_first =
        mis_estimate({ratio_a, ratio_b}, MisWeights(Vec{1.0, 0.0}), phi, {samples, other});
    CHECK(mass_on_first == single);

    CHECK_THROWS_AS(MisWeights(Vec{0.5, 0.4}), ValidationError);
    CHECK_THROWS_AS(MisWeights(Vec{1.5, -0.5}), ValidationError);
    Matrix empty;
    CHECK_THROWS_AS(mis_estimate({ratio_a}, MisWeights(Vec{1.0}), phi, {empty}),
                    ValidationError);
}

TEST_CASE("mis is unbiased on a discrete three-point instance") {
    // exact target/proposals with known ratios; oracle expectation computed
    // in closed form from the mass tables
    const Vec q{0.5, 0.3, 0.2}, p1{0.2, 0.5, 0.3}, p2{0.4, 0.2, 0.4};
    const Vec phi_tab{1.0, -2.0, 3.5};
    const double exact = q[0] * phi_tab[0] + q[1] * phi_tab[1] + q[2] * phi_tab[2];  // 0.6

    const ScalarFn phi = [&](const double* x) { return phi_tab[static_cast<int>(*x)]; };
    const ScalarFn r1 = [&](const double* x) {
        const int i = static_cast<int>(*x);
        return q[i] / p1[i];
    };
    const ScalarFn r2 = [&](const double* x) {
        const int i = static_cast<int>(*x);
        return q[i] / p2[i];
    };

    // exact per-proposal variances of r*phi for the standard-error bound
    auto var_under = [&](const Vec& p, const ScalarFn& r) {
        double m = 0.0, m2 = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double xi = i;
            const double z = r(&xi) * phi_tab[i];
            m += p[i] * z;
            m2 += p[i] * z * z;
        }
        return m2 - m * m;
    };
    const std::size_t n = 10000;
    const double se = std::sqrt(0.25 * var_under(p1, r1) / n + 0.25 * var_under(p2, r2) / n);

    int failures = 0;
    for (int seed = 0; seed < 20; ++seed) {
        RngStream rng(seed, "mis-sample");
        auto draw = [&](const Vec& p) {
            Matrix s(n, 1);
            for (std::size_t i = 0; i < n; ++i) {
                const double u = rng.uniform();
                s.at(i, 0) = u < p[0] ? 0.0 : (u < p[0] + p[1] ? 1.0 : 2.0);
            }
            return s;
        };
        const double est =
            mis_estimate({r1, r2}, MisWeights(Vec{0.5, 0.5}), phi, {draw(p1), draw(p2)});
        if (std::fabs(est - exact) > 3.0 * se) ++failures;
    }
    CHECK(failures <= 1);  // 3-sigma level, one outlier allowed in 20
}

TEST_CASE("sir resampling") {
    // degenerate: a single positive weight takes every draw
    const auto all_two = sir_resample({0.0, 0.0, 5.0}, 100, 42);
    for (std::size_t i : all_two) CHECK(i == 2);

    CHECK_THROWS_AS(sir_resample({0.0, 0.0}, 10, 1), ValidationError);
    CHECK_THROWS_AS(sir_resample({}, 10, 1), ValidationError);
    CHECK_THROWS_AS(sir_resample({-1.0, 2.0}, 10, 1), ValidationError);

    // weights (1,3): index-1 frequency within 3 binomial sigma at m = 1e4
    const std::size_t m = 10000;
    const auto idx = sir_resample({1.0, 3.0}, m, 7);
    std::size_t ones = 0;
    for (std::size_t i : idx) ones += i == 1;
    const double freq = static_cast<double>(ones) / m;
    const double sigma = std::sqrt(0.75 * 0.25 / m);
    CHECK(std::fabs(freq - 0.75) <= 3.0 * sigma);

    // equal weights: empirical frequencies uniform within L1 0.05 at 1e5
    const std::size_t big = 100000;
    const auto eq = sir_resample(Vec(8, 1.0), big, 3);
    Vec counts(8, 0.0);
    for (std::size_t i : eq) counts[i] += 1.0;
    double l1 = 0.0;
    for (double c : counts) l1 += std::fabs(c / big - 0.125);
    CHECK(l1 <= 0.05);

    // determinism
    CHECK(sir_resample({1.0, 3.0}, 50, 11) == sir_resample({1.0, 3.0}, 50, 11));

    CHECK(sir_effective_sample_size({1.0, 3.0}) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("auroc") {
    CHECK(auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
    CHECK(auroc({0.0, 0.0, 1.0, 1.0}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), ValidationError);
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {0, 2}), ValidationError);

    // complement symmetry for tie-free scores
    RngStream rng(13, "auroc-sym");
    Vec scores;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        scores.push_back(rng.normal());
        labels.push_back(static_cast<int>(rng.below(2)));
    }
    labels[0] = 0;
    labels[1] = 1;
    Vec neg = scores;
    for (double& s : neg) s = -s;
    CHECK(auroc(scores, labels) + auroc(neg, labels) == doctest::Approx(1.0).epsilon(1e-12));
}
