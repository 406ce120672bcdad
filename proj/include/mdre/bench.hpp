#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdre/applications.hpp"
#include "mdre/training.hpp"

namespace mdre {

// Synthetic unit-covariance Gaussian family with closed-form ratios.
struct GaussianSpec {
    int dim = 2;
    std::vector<Vec> means;
    std::size_t n_train = 2000;
    std::size_t n_eval = 1000;
};

// The predefined five-mean family, padded with zeros beyond the first two
// coordinates. The fifth mean deliberately duplicates the first (the family
// is reproduced verbatim, so the 1-5 pairwise ratio is identically one);
// fix_mean5 swaps in the unit vector along the third axis, which needs
// dim >= 3.
std::vector<Vec> default_means(int dim, int k = 5, bool fix_mean5 = false);

// exp(x^T (mu_i - mu_j) - (|mu_i|^2 - |mu_j|^2) / 2)
double true_gaussian_ratio(const Vec& mu_i, const Vec& mu_j, const double* x);

Matrix sample_gaussian(const Vec& mean, std::size_t n, RngStream& rng);

struct ModelSpec {
    RatioModel::Kind kind = RatioModel::Kind::Mlp;
    FeatureMap::Kind features = FeatureMap::Kind::Identity;  // loglinear only
    int poly_degree = 2;
    std::size_t rbf_centers = 100;
    std::vector<int> hidden = {32, 32};
    double clamp = 30.0;

    RatioModel build(const GroupedDataset& ds, std::uint64_t seed) const;
};

struct MethodSpec {
    std::string name;
    bool trained = true;  // false: evaluate the initialized model as-is
    LossSpec loss;
};

// The benchmark method battery, one row per loss family.
std::vector<MethodSpec> default_method_set(int k);
MethodSpec make_method(const std::string& name, int k, double power_alpha = 1.5,
                       double lse_alpha = 5.0, double ps_alpha = 1.8);

struct BenchRow {
    std::string method;
    double mae_mean = 0.0, mae_std = 0.0;
    double clipped_mean = 0.0, clipped_std = 0.0;
    Vec mae_per_seed;
    Vec clipped_per_seed;
    // per-seed divergence-guard messages; the corresponding MAE entries are
    // NaN and excluded from the means (all-NaN rows report NaN)
    std::vector<std::string> failures;
};

// Trains each method on freshly sampled groups for each seed and evaluates
// pairwise MAE on held-out pooled samples. Deterministic for fixed seeds
// regardless of `jobs`.
std::vector<BenchRow> run_gaussian_benchmark(const GaussianSpec& spec,
                                             const std::vector<MethodSpec>& methods,
                                             const ModelSpec& model_spec,
                                             const OptimizerConfig& opt, int n_seeds,
                                             std::uint64_t base_seed, int jobs = 1);

struct OodSpec {
    Vec component_means = {-3.0, 0.0, 3.0};  // 1-D unit-variance components
    Vec mixture_weights = {};                // default: uniform
    std::size_t n_train = 2000;
    std::size_t n_eval = 2000;
};

struct OodRow {
    std::string method;
    double auroc_mean = 0.0, auroc_std = 0.0;
    Vec per_seed;
};

// Builds k-1 component groups plus their mixture as the pivot, trains,
// scores held-out mixture samples by each r_i and reports the average
// AUROC against component-membership labels.
std::vector<OodRow> run_ood_benchmark(const OodSpec& spec,
                                      const std::vector<MethodSpec>& methods,
                                      const ModelSpec& model_spec, const OptimizerConfig& opt,
                                      int n_seeds, std::uint64_t base_seed, int jobs = 1);

// Average AUROC of the exact ratio oracle on the OOD instance, computed by
// grid integration (no sampling); the ceiling for any learned scorer.
double ood_oracle_auroc(const OodSpec& spec, double grid_lo = -12.0, double grid_hi = 12.0,
                        std::size_t grid_n = 4801);

}  // namespace mdre
