#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdre/objectives.hpp"
#include "mdre/scoring.hpp"

namespace mdre {

// Generic differentiable convex function on (a subset of) R^{k-1}; the
// abstraction shared by the ratio objectives and the entropy-derived
// functions below.
class ConvexFunction {
public:
    virtual ~ConvexFunction() = default;
    virtual int dim() const = 0;
    virtual double value(const double* x) const = 0;
    virtual void gradient(const double* x, double* out) const = 0;
};

class ObjectiveFunction : public ConvexFunction {
public:
    explicit ObjectiveFunction(const ConvexObjective& obj) : obj_(&obj) {}
    int dim() const override { return obj_->dim(); }
    double value(const double* x) const override { return obj_->value(x); }
    void gradient(const double* x, double* out) const override { obj_->gradient(x, out); }

private:
    const ConvexObjective* obj_;
};

// Negative generalized entropy of a proper scoring rule, as a function of
// the first k-1 simplex coordinates (the k-th is 1 minus their sum):
//   Log    sum_j w_j log w_j
//   Brier  sum_j w_j^2 - 1
// The pseudo-spherical rule has no matching entropy of this form and is
// rejected.
class NegEntropy : public ConvexFunction {
public:
    NegEntropy(RuleKind rule, int k);
    int dim() const override { return k_ - 1; }
    double value(const double* w) const override;
    void gradient(const double* w, double* out) const override;

private:
    RuleKind rule_;
    int k_;
};

// Three-term Bregman divergence of a generic convex function.
double bregman_generic(const ConvexFunction& f, const double* x, const double* y);

// Perspective-style associate of f: pf(u) = S f(u / S) with S = 1 + sum(u).
// Its gradient is f(w) 1 + grad f(w) - (<u, grad f(w)> / S) 1 at w = u / S.
double persp_value(const ConvexFunction& f, const double* u);
void persp_gradient(const ConvexFunction& f, const double* u, double* out);
double persp_bregman(const ConvexFunction& f, const double* u, const double* v);

// Prior-weighted variant: ppf(r) = pf((pi o r) / pi_k) restricted to the
// first k-1 coordinates.
double persp_pi_value(const ConvexFunction& f, const Prior& prior, const double* r);
void persp_pi_gradient(const ConvexFunction& f, const Prior& prior, const double* r, double* out);
double persp_pi_bregman(const ConvexFunction& f, const Prior& prior, const double* u,
                        const double* v);

// A fully explicit k-distribution experiment on a finite support:
// prior over classes, one conditional distribution per class.
struct DiscreteExperiment {
    Prior prior;
    Matrix cond;  // k x m, rows are the conditionals, strictly positive

    DiscreteExperiment(Prior p, Matrix c);
    int k() const { return prior.k(); }
    int m() const { return static_cast<int>(cond.cols); }
    Vec marginal() const;       // mixture over the support
    Vec eta(int x) const;       // class probabilities at support point x
    Vec ratio(int x) const;     // canonical ratio vector at x
};

// Plug-in divergence estimate: the sample mean of f~(r(x)) over pivot
// samples, with f~ the normalized objective (so identical distributions
// give exactly zero).
double fdiv_plugin(const ConvexObjective& obj,
                   const std::function<Vec(const double*)>& true_ratio,
                   const Matrix& pivot_samples);

// Variational lower bound evaluated at s = grad f~(r(x)):
//   sum_i mean_i [s_i] - mean_pivot [f*(s)],  f*(s) = <s, r> - f~(r).
double fdiv_variational(const ConvexObjective& obj, const LossBatch& batch);
double fdiv_variational(const ConvexObjective& obj, const RatioModel& model,
                        const GroupedDataset& ds);

// |lhs - rhs| of the scaling identity
//   B_f(u/(1+sum u), v/(1+sum v)) = B_pf(u, v) / (1 + sum u).
double verify_bregman_identity(const ConvexFunction& f, const Vec& u, const Vec& v);

// |lhs - rhs| of the regret identity: classification regret of eta_hat
// against the Bayes predictor equals pi_k E_pivot B_ppf(r, r_hat) with
// f the rule's negative generalized entropy. Exact finite-support sums.
double verify_regret_identity(const ScoringRule& rule, const DiscreteExperiment& exp,
                              const std::function<Vec(int)>& eta_hat);

struct TheoryCheck {
    std::string name;
    double max_residual = 0.0;
    double tolerance = 0.0;
    long trials = 0;
    bool pass = false;
};

struct TheoryReport {
    std::vector<TheoryCheck> checks;
    bool all_pass() const;
};

// The full verifier battery driven by `verify-theory`: the scaling identity
// (Lsif / Kliep / Power 1.5 bases), the prior-weighted pointwise identity,
// the regret identity (Log and Brier, k in {2,3}, uniform and skewed
// priors), and the exactness of the variational/batch-loss equality.
TheoryReport run_theory_suite(std::uint64_t seed, long trials);

}  // namespace mdre
