#pragma once

#include <cstdint>
#include <functional>

#include "mdre/models.hpp"

namespace mdre {

// p_i / p_j recovered from the canonical vector; the pivot's own ratio is 1.
// i and j are 0-based and must differ.
double pairwise_ratio(const RatioModel& model, const double* x, int i, int j);

// Pairwise-averaged mean absolute error against a ground-truth ratio
// oracle, over the given evaluation points. The headline number is
// unclipped; `clipped` caps both true and estimated ratios at `clip`
// (tail diagnostic).
struct MaeReport {
    double mae = 0.0;
    double clipped = 0.0;
    std::size_t points = 0;
};

using TruthFn = std::function<double(int, int, const double*)>;

MaeReport mae_report(const RatioModel& model, const TruthFn& truth, const Matrix& eval_points,
                     double clip = 50.0);
double mae(const RatioModel& model, const TruthFn& truth, const Matrix& eval_points);

using ScalarFn = std::function<double(const double*)>;

// Single-proposal importance estimate: mean over samples of ratio(x) phi(x).
double importance_estimate(const ScalarFn& ratio, const ScalarFn& phi, const Matrix& samples);

struct MisWeights {
    Vec omega;
    explicit MisWeights(Vec w);  // nonnegative, sums to 1
};

// Multiple importance sampling: sum_i omega_i mean_{p_i} [q/p_i phi]. A
// point-mass omega reduces bit-for-bit to the single-proposal estimator.
double mis_estimate(const std::vector<ScalarFn>& ratio_fns, const MisWeights& weights,
                    const ScalarFn& phi, const std::vector<Matrix>& proposal_samples);

// m indices drawn with replacement proportionally to the weights, from the
// "sir" stream of `seed`.
std::vector<std::size_t> sir_resample(const Vec& weights, std::size_t m, std::uint64_t seed);

// sum(w) / max(w), the resampling effective-sample-size diagnostic.
double sir_effective_sample_size(const Vec& weights);

// Rank-based AUROC with average ranks for ties; both classes required.
double auroc(const Vec& scores, const std::vector<int>& labels);

}  // namespace mdre
