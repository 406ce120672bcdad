#include "mdre/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include "mdre/kernels.hpp"

namespace mdre {

std::vector<Vec> default_means(int dim, int k, bool fix_mean5) {
    if (k != 5)
        throw ValidationError("only the predefined five-mean family exists; pass custom means");
    if (dim < 2) throw ValidationError("the five-mean family needs dim >= 2");
    std::vector<Vec> means(5, Vec(static_cast<std::size_t>(dim), 0.0));
    means[0][0] = 1.0;
    means[1][0] = -1.0;
    means[2][1] = 1.0;
    means[3][1] = -1.0;
    if (fix_mean5) {
        if (dim < 3) throw ValidationError("--fix-mean5 needs dim >= 3");
        means[4][2] = 1.0;
    } else {
        means[4][0] = 1.0;  // duplicated on purpose; see default_means docs
    }
    return means;
}

double true_gaussian_ratio(const Vec& mu_i, const Vec& mu_j, const double* x) {
    if (mu_i.size() != mu_j.size()) throw ValidationError("mean dimensions disagree");
    double dot = 0.0, ni = 0.0, nj = 0.0;
    for (std::size_t d = 0; d < mu_i.size(); ++d) {
        dot += x[d] * (mu_i[d] - mu_j[d]);
        ni += mu_i[d] * mu_i[d];
        nj += mu_j[d] * mu_j[d];
    }
    return std::exp(dot - 0.5 * (ni - nj));
}

Matrix sample_gaussian(const Vec& mean, std::size_t n, RngStream& rng) {
    Matrix out(n, mean.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < mean.size(); ++d) out.at(i, d) = mean[d] + rng.normal();
    return out;
}

RatioModel ModelSpec::build(const GroupedDataset& ds, std::uint64_t seed) const {
    RatioModel model = [&] {
        if (kind == RatioModel::Kind::Mlp)
            return RatioModel::mlp(ds.dim, hidden, ds.k(), clamp);
        FeatureMap fm = [&] {
            switch (features) {
                case FeatureMap::Kind::Identity: return FeatureMap::identity(ds.dim);
                case FeatureMap::Kind::Polynomial:
                    return FeatureMap::polynomial(ds.dim, poly_degree);
                case FeatureMap::Kind::Rbf: {
                    RngStream rng(seed, "rbf-centers");
                    return FeatureMap::rbf_from_pivot(ds, rbf_centers, rng);
                }
            }
            return FeatureMap::identity(ds.dim);
        }();
        return RatioModel::log_linear(std::move(fm), ds.k(), clamp);
    }();
    model.init(seed);
    return model;
}

namespace {

Matrix default_quadratic_h(int k) {
    Matrix h(k - 1, k - 1);
    for (int i = 0; i < k - 1; ++i)
        for (int j = 0; j < k - 1; ++j) h.at(i, j) = std::pow(0.5, std::abs(i - j));
    return h;
}

double mean_of(const Vec& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const Vec& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Runs fn(job) for job in [0, count) on up to `jobs` threads. Each job is
// independent and writes only to its own slot, so results are identical for
// any thread count. The first exception, if any, is rethrown on the caller.
void parallel_for_jobs(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(count));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

double mean_finite(const Vec& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double std_finite(const Vec& v) {
    const double m = mean_finite(v);
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += (x - m) * (x - m);
            ++n;
        }
    return n > 1 ? std::sqrt(s / static_cast<double>(n - 1)) : 0.0;
}

}  // namespace

MethodSpec make_method(const std::string& name, int k, double power_alpha, double lse_alpha,
                       double ps_alpha) {
    if (name == "random-init")
        return MethodSpec{name, false, ConvexObjective::lsif(k)};  // loss unused
    if (name == "multi-lr") return MethodSpec{name, true, ConvexObjective::multi_lr(k)};
    if (name == "multi-kliep") return MethodSpec{name, true, ConvexObjective::kliep(k)};
    if (name == "multi-lsif") return MethodSpec{name, true, ConvexObjective::lsif(k)};
    if (name == "power") return MethodSpec{name, true, ConvexObjective::power(k, power_alpha)};
    if (name == "logsumexp")
        return MethodSpec{name, true, ConvexObjective::log_sum_exp(k, lse_alpha)};
    if (name == "quadratic")
        return MethodSpec{name, true,
                          ConvexObjective::quadratic(k, default_quadratic_h(k), Vec(k - 1, -2.0))};
    if (name == "log") return MethodSpec{name, true, CpeLoss{ScoringRule::log_score(), {}}};
    if (name == "brier") return MethodSpec{name, true, CpeLoss{ScoringRule::brier(), {}}};
    if (name == "spherical")
        return MethodSpec{name, true, CpeLoss{ScoringRule::pseudo_spherical(ps_alpha), {}}};
    throw ValidationError("unknown method: " + name);
}

std::vector<MethodSpec> default_method_set(int k) {
    std::vector<MethodSpec> methods;
    for (const char* name : {"random-init", "multi-lr", "multi-kliep", "multi-lsif", "power",
                             "brier", "spherical", "logsumexp", "quadratic"})
        methods.push_back(make_method(name, k));
    return methods;
}

std::vector<BenchRow> run_gaussian_benchmark(const GaussianSpec& spec,
                                             const std::vector<MethodSpec>& methods,
                                             const ModelSpec& model_spec,
                                             const OptimizerConfig& opt, int n_seeds,
                                             std::uint64_t base_seed, int jobs) {
    if (spec.means.size() < 2) throw ValidationError("benchmark needs k >= 2 means");
    if (n_seeds < 1) throw ValidationError("benchmark needs at least one seed");
    const int k = static_cast<int>(spec.means.size());
    for (const Vec& mu : spec.means)
        if (static_cast<int>(mu.size()) != spec.dim)
            throw ValidationError("mean dimension disagrees with spec");

    const std::size_t n_jobs = methods.size() * static_cast<std::size_t>(n_seeds);
    std::vector<Vec> maes(methods.size(), Vec(n_seeds, 0.0));
    std::vector<Vec> clips(methods.size(), Vec(n_seeds, 0.0));
    std::vector<std::vector<std::string>> failures(methods.size(),
                                                   std::vector<std::string>(n_seeds));

    parallel_for_jobs(n_jobs, jobs, [&](std::size_t job) {
        const std::size_t mi = job / n_seeds;
        const int s = static_cast<int>(job % n_seeds);
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);

        std::vector<Matrix> train_groups, eval_groups;
        for (int g = 0; g < k; ++g) {
            RngStream train_rng(seed, "bench/train/g" + std::to_string(g));
            RngStream eval_rng(seed, "bench/eval/g" + std::to_string(g));
            train_groups.push_back(sample_gaussian(spec.means[g], spec.n_train, train_rng));
            eval_groups.push_back(sample_gaussian(spec.means[g], spec.n_eval, eval_rng));
        }
        GroupedDataset train_ds(std::move(train_groups), spec.dim);
        Matrix pooled(static_cast<std::size_t>(k) * spec.n_eval, spec.dim);
        for (int g = 0; g < k; ++g)
            std::copy(eval_groups[g].data.begin(), eval_groups[g].data.end(),
                      pooled.data.begin() + static_cast<std::size_t>(g) * spec.n_eval * spec.dim);

        RatioModel model = model_spec.build(train_ds, seed);
        const MethodSpec& method = methods[mi];
        if (method.trained) {
            OptimizerConfig cfg = opt;
            cfg.seed = seed;
            try {
                train(method.loss, model, train_ds, cfg);
            } catch (const NumericalError& e) {
                // the divergence guard fired; keep the row with a NaN entry
                maes[mi][s] = std::numeric_limits<double>::quiet_NaN();
                clips[mi][s] = std::numeric_limits<double>::quiet_NaN();
                failures[mi][s] = e.what();
                return;
            }
        }
        const TruthFn truth = [&](int i, int j, const double* x) {
            return true_gaussian_ratio(spec.means[i], spec.means[j], x);
        };
        const MaeReport rep = mae_report(model, truth, pooled);
        maes[mi][s] = rep.mae;
        clips[mi][s] = rep.clipped;
    });

    std::vector<BenchRow> rows;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        BenchRow row;
        row.method = methods[mi].name;
        row.mae_per_seed = maes[mi];
        row.clipped_per_seed = clips[mi];
        row.failures = failures[mi];
        row.mae_mean = mean_finite(maes[mi]);
        row.mae_std = std_finite(maes[mi]);
        row.clipped_mean = mean_finite(clips[mi]);
        row.clipped_std = std_finite(clips[mi]);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

double normal_pdf(double x, double mu) {
    const double d = x - mu;
    return std::exp(-0.5 * d * d) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

std::vector<OodRow> run_ood_benchmark(const OodSpec& spec, const std::vector<MethodSpec>& methods,
                                      const ModelSpec& model_spec, const OptimizerConfig& opt,
                                      int n_seeds, std::uint64_t base_seed, int jobs) {
    const int n_comp = static_cast<int>(spec.component_means.size());
    if (n_comp < 2) throw ValidationError("ood benchmark needs at least two components");
    Vec alpha = spec.mixture_weights;
    if (alpha.empty()) alpha.assign(n_comp, 1.0 / n_comp);
    if (static_cast<int>(alpha.size()) != n_comp)
        throw ValidationError("mixture weights must match the components");
    double asum = 0.0;
    for (double a : alpha) {
        if (!(a > 0.0)) throw ValidationError("mixture weights must be positive");
        asum += a;
    }
    if (std::fabs(asum - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");

    const std::size_t n_jobs = methods.size() * static_cast<std::size_t>(n_seeds);
    std::vector<Vec> scores(methods.size(), Vec(n_seeds, 0.0));

    parallel_for_jobs(n_jobs, jobs, [&](std::size_t job) {
        const std::size_t mi = job / n_seeds;
        const int s = static_cast<int>(job % n_seeds);
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);

        std::vector<Matrix> groups;
        for (int c = 0; c < n_comp; ++c) {
            RngStream rng(seed, "ood/train/c" + std::to_string(c));
            groups.push_back(sample_gaussian({spec.component_means[c]}, spec.n_train, rng));
        }
        {  // pivot: the mixture itself
            RngStream rng(seed, "ood/train/mix");
            Matrix mix(spec.n_train, 1);
            for (std::size_t i = 0; i < spec.n_train; ++i) {
                const double u = rng.uniform();
                int c = 0;
                double acc = alpha[0];
                while (u > acc && c + 1 < n_comp) acc += alpha[++c];
                mix.at(i, 0) = spec.component_means[c] + rng.normal();
            }
            groups.push_back(std::move(mix));
        }
        GroupedDataset train_ds(std::move(groups), 1);

        // held-out mixture samples with known component labels
        RngStream eval_rng(seed, "ood/eval");
        Matrix eval_pts(spec.n_eval, 1);
        std::vector<int> origin(spec.n_eval);
        for (std::size_t i = 0; i < spec.n_eval; ++i) {
            const double u = eval_rng.uniform();
            int c = 0;
            double acc = alpha[0];
            while (u > acc && c + 1 < n_comp) acc += alpha[++c];
            origin[i] = c;
            eval_pts.at(i, 0) = spec.component_means[c] + eval_rng.normal();
        }

        RatioModel model = model_spec.build(train_ds, seed);
        const MethodSpec& method = methods[mi];
        if (method.trained) {
            OptimizerConfig cfg = opt;
            cfg.seed = seed;
            train(method.loss, model, train_ds, cfg);
        }

        Vec r(model.out_dim());
        Matrix score_mat(spec.n_eval, n_comp);
        for (std::size_t i = 0; i < spec.n_eval; ++i) {
            model.eval(eval_pts.row(i), r.data());
            for (int c = 0; c < n_comp; ++c) score_mat.at(i, c) = r[c];
        }
        double avg = 0.0;
        for (int c = 0; c < n_comp; ++c) {
            Vec sc(spec.n_eval);
            std::vector<int> lab(spec.n_eval);
            for (std::size_t i = 0; i < spec.n_eval; ++i) {
                sc[i] = score_mat.at(i, c);
                lab[i] = origin[i] == c ? 1 : 0;
            }
            avg += auroc(sc, lab);
        }
        scores[mi][s] = avg / n_comp;
    });

    std::vector<OodRow> rows;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        OodRow row;
        row.method = methods[mi].name;
        row.per_seed = scores[mi];
        row.auroc_mean = mean_of(scores[mi]);
        row.auroc_std = std_of(scores[mi]);
        rows.push_back(std::move(row));
    }
    return rows;
}

double ood_oracle_auroc(const OodSpec& spec, double grid_lo, double grid_hi, std::size_t grid_n) {
    const int n_comp = static_cast<int>(spec.component_means.size());
    Vec alpha = spec.mixture_weights;
    if (alpha.empty()) alpha.assign(n_comp, 1.0 / n_comp);

    Vec xs(grid_n);
    for (std::size_t i = 0; i < grid_n; ++i)
        xs[i] = grid_lo + (grid_hi - grid_lo) * static_cast<double>(i) / (grid_n - 1);

    double avg = 0.0;
    for (int c = 0; c < n_comp; ++c) {
        Vec score(grid_n), pos_w(grid_n), neg_w(grid_n);
        double pos_tot = 0.0, neg_tot = 0.0;
        for (std::size_t i = 0; i < grid_n; ++i) {
            double mix = 0.0;
            for (int j = 0; j < n_comp; ++j)
                mix += alpha[j] * normal_pdf(xs[i], spec.component_means[j]);
            const double pc = normal_pdf(xs[i], spec.component_means[c]);
            score[i] = pc / mix;
            pos_w[i] = alpha[c] * pc;
            neg_w[i] = mix - pos_w[i];
            pos_tot += pos_w[i];
            neg_tot += neg_w[i];
        }
        std::vector<std::size_t> order(grid_n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
        double cum_neg = 0.0, a = 0.0;
        for (std::size_t i : order) {
            const double pw = pos_w[i] / pos_tot;
            const double nw = neg_w[i] / neg_tot;
            a += pw * (cum_neg + 0.5 * nw);
            cum_neg += nw;
        }
        avg += a;
    }
    return avg / n_comp;
}

}  // namespace mdre
