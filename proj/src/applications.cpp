#include "mdre/applications.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdre/rng.hpp"

namespace mdre {

double pairwise_ratio(const RatioModel& model, const double* x, int i, int j) {
    const int k = model.k();
    if (i == j) throw ValidationError("pairwise ratio needs two distinct indices");
    if (i < 0 || j < 0 || i >= k || j >= k) throw ValidationError("pair index out of range");
    thread_local Vec r;
    r.resize(model.out_dim());
    model.eval(x, r.data());
    const double num = (i == k - 1) ? 1.0 : r[i];
    const double den = (j == k - 1) ? 1.0 : r[j];
    return num / den;
}

MaeReport mae_report(const RatioModel& model, const TruthFn& truth, const Matrix& eval_points,
                     double clip) {
    if (eval_points.rows == 0) throw ValidationError("mae needs at least one evaluation point");
    if (static_cast<int>(eval_points.cols) != model.input_dim())
        throw ValidationError("evaluation points have wrong dimension");
    const int k = model.k();
    MaeReport rep;
    rep.points = eval_points.rows;
    Vec r(model.out_dim());
    double acc = 0.0, acc_clip = 0.0;
    for (std::size_t p = 0; p < eval_points.rows; ++p) {
        const double* x = eval_points.row(p);
        model.eval(x, r.data());
        for (int i = 0; i < k; ++i) {
            const double ri = (i == k - 1) ? 1.0 : r[i];
            for (int j = i + 1; j < k; ++j) {
                const double rj = (j == k - 1) ? 1.0 : r[j];
                const double est = ri / rj;
                const double tru = truth(i, j, x);
                acc += std::fabs(tru - est);
                acc_clip += std::fabs(std::min(tru, clip) - std::min(est, clip));
            }
        }
    }
    const double norm = 2.0 / (static_cast<double>(k) * (k - 1)) / eval_points.rows;
    rep.mae = acc * norm;
    rep.clipped = acc_clip * norm;
    return rep;
}

double mae(const RatioModel& model, const TruthFn& truth, const Matrix& eval_points) {
    return mae_report(model, truth, eval_points).mae;
}

double importance_estimate(const ScalarFn& ratio, const ScalarFn& phi, const Matrix& samples) {
    if (samples.rows == 0) throw ValidationError("importance estimate needs samples");
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.rows; ++i)
        acc += ratio(samples.row(i)) * phi(samples.row(i));
    return acc / static_cast<double>(samples.rows);
}

MisWeights::MisWeights(Vec w) : omega(std::move(w)) {
    if (omega.empty()) throw ValidationError("proposal weights must be nonempty");
    double s = 0.0;
    for (double x : omega) {
        if (x < 0.0 || !std::isfinite(x))
            throw ValidationError("proposal weights must be nonnegative");
        s += x;
    }
    if (std::fabs(s - 1.0) > kSimplexTol)
        throw ValidationError("proposal weights must sum to 1");
}

double mis_estimate(const std::vector<ScalarFn>& ratio_fns, const MisWeights& weights,
                    const ScalarFn& phi, const std::vector<Matrix>& proposal_samples) {
    if (ratio_fns.size() != weights.omega.size() ||
        proposal_samples.size() != weights.omega.size())
        throw ValidationError("mis: one ratio function and sample set per proposal");
    double acc = 0.0;
    for (std::size_t i = 0; i < ratio_fns.size(); ++i) {
        if (weights.omega[i] == 0.0) continue;
        acc += weights.omega[i] * importance_estimate(ratio_fns[i], phi, proposal_samples[i]);
    }
    return acc;
}

std::vector<std::size_t> sir_resample(const Vec& weights, std::size_t m, std::uint64_t seed) {
    if (weights.empty()) throw ValidationError("sir: weights must be nonempty");
    Vec cum(weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0 || !std::isfinite(weights[i]))
            throw ValidationError("sir: weights must be finite and nonnegative");
        total += weights[i];
        cum[i] = total;
    }
    if (!(total > 0.0)) throw ValidationError("sir: at least one weight must be positive");
    RngStream rng(seed, "sir");
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double u = rng.uniform() * total;
        out[i] = static_cast<std::size_t>(
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (out[i] >= weights.size()) out[i] = weights.size() - 1;
    }
    return out;
}

double sir_effective_sample_size(const Vec& weights) {
    double s = 0.0, mx = 0.0;
    for (double w : weights) {
        s += w;
        mx = std::max(mx, w);
    }
    return mx > 0.0 ? s / mx : 0.0;
}

double auroc(const Vec& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw ValidationError("auroc: scores and labels must match and be nonempty");
    std::size_t n_pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw ValidationError("auroc: labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(l);
    }
    const std::size_t n = scores.size();
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("auroc: both classes must be present");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over tie groups, accumulate positive ranks
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t p = i; p <= j; ++p)
            if (labels[order[p]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace mdre
