#include "mdre/theory.hpp"

#include <cmath>

#include "mdre/kernels.hpp"
#include "mdre/rng.hpp"

namespace mdre {

NegEntropy::NegEntropy(RuleKind rule, int k) : rule_(rule), k_(k) {
    if (k < 2) throw ValidationError("entropy function needs k >= 2");
    if (rule != RuleKind::Log && rule != RuleKind::Brier)
        throw ValidationError("no closed-form generalized entropy for this rule");
}

double NegEntropy::value(const double* w) const {
    const int m = k_ - 1;
    double tail = 1.0;
    for (int i = 0; i < m; ++i) tail -= w[i];
    if (!(tail > 0.0)) throw ValidationError("entropy argument leaves the simplex");
    if (rule_ == RuleKind::Log) {
        double s = tail * std::log(tail);
        for (int i = 0; i < m; ++i) {
            if (!(w[i] > 0.0)) throw ValidationError("entropy argument leaves the simplex");
            s += w[i] * std::log(w[i]);
        }
        return s;
    }
    double s = tail * tail - 1.0;
    for (int i = 0; i < m; ++i) s += w[i] * w[i];
    return s;
}

void NegEntropy::gradient(const double* w, double* out) const {
    const int m = k_ - 1;
    double tail = 1.0;
    for (int i = 0; i < m; ++i) tail -= w[i];
    if (!(tail > 0.0)) throw ValidationError("entropy argument leaves the simplex");
    if (rule_ == RuleKind::Log) {
        const double lt = std::log(tail);
        for (int i = 0; i < m; ++i) out[i] = std::log(w[i]) - lt;
        return;
    }
    for (int i = 0; i < m; ++i) out[i] = 2.0 * (w[i] - tail);
}

double bregman_generic(const ConvexFunction& f, const double* x, const double* y) {
    const int m = f.dim();
    Vec g(m), d(m);
    f.gradient(y, g.data());
    for (int i = 0; i < m; ++i) d[i] = x[i] - y[i];
    return f.value(x) - f.value(y) - kern::dot(g.data(), d.data(), m);
}

double persp_value(const ConvexFunction& f, const double* u) {
    const int m = f.dim();
    double s = 1.0 + kern::sum(u, m);
    Vec w(m);
    for (int i = 0; i < m; ++i) w[i] = u[i] / s;
    return s * f.value(w.data());
}

void persp_gradient(const ConvexFunction& f, const double* u, double* out) {
    const int m = f.dim();
    const double s = 1.0 + kern::sum(u, m);
    Vec w(m);
    for (int i = 0; i < m; ++i) w[i] = u[i] / s;
    Vec g(m);
    f.gradient(w.data(), g.data());
    const double fw = f.value(w.data());
    const double ug = kern::dot(u, g.data(), m);
    for (int i = 0; i < m; ++i) out[i] = fw + g[i] - ug / s;
}

double persp_bregman(const ConvexFunction& f, const double* u, const double* v) {
    const int m = f.dim();
    Vec g(m), d(m);
    persp_gradient(f, v, g.data());
    for (int i = 0; i < m; ++i) d[i] = u[i] - v[i];
    return persp_value(f, u) - persp_value(f, v) - kern::dot(g.data(), d.data(), m);
}

namespace {

Vec pi_scale(const Prior& prior, const double* r) {
    const int m = prior.k() - 1;
    Vec u(m);
    for (int i = 0; i < m; ++i) u[i] = prior.w[i] * r[i] / prior.w[m];
    return u;
}

}  // namespace

double persp_pi_value(const ConvexFunction& f, const Prior& prior, const double* r) {
    return persp_value(f, pi_scale(prior, r).data());
}

void persp_pi_gradient(const ConvexFunction& f, const Prior& prior, const double* r,
                       double* out) {
    const int m = prior.k() - 1;
    const Vec u = pi_scale(prior, r);
    persp_gradient(f, u.data(), out);
    for (int i = 0; i < m; ++i) out[i] *= prior.w[i] / prior.w[m];
}

double persp_pi_bregman(const ConvexFunction& f, const Prior& prior, const double* u,
                        const double* v) {
    const Vec su = pi_scale(prior, u);
    const Vec sv = pi_scale(prior, v);
    return persp_bregman(f, su.data(), sv.data());
}

DiscreteExperiment::DiscreteExperiment(Prior p, Matrix c) : prior(std::move(p)), cond(std::move(c)) {
    if (static_cast<int>(cond.rows) != prior.k())
        throw ValidationError("experiment needs one conditional per class");
    if (cond.cols == 0) throw ValidationError("experiment needs a nonempty support");
    for (std::size_t i = 0; i < cond.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cond.cols; ++j) {
            if (!(cond.at(i, j) > 0.0))
                throw ValidationError("conditionals must be strictly positive");
            s += cond.at(i, j);
        }
        if (std::fabs(s - 1.0) > 1e-9)
            throw ValidationError("conditionals must sum to 1");
    }
}

Vec DiscreteExperiment::marginal() const {
    Vec mx(cond.cols, 0.0);
    for (int i = 0; i < k(); ++i)
        for (int j = 0; j < m(); ++j) mx[j] += prior.w[i] * cond.at(i, j);
    return mx;
}

Vec DiscreteExperiment::eta(int x) const {
    Vec e(k());
    double mx = 0.0;
    for (int i = 0; i < k(); ++i) {
        e[i] = prior.w[i] * cond.at(i, x);
        mx += e[i];
    }
    for (double& v : e) v /= mx;
    return e;
}

Vec DiscreteExperiment::ratio(int x) const {
    Vec r(k() - 1);
    const double pk = cond.at(k() - 1, x);
    for (int i = 0; i < k() - 1; ++i) r[i] = cond.at(i, x) / pk;
    return r;
}

double fdiv_plugin(const ConvexObjective& obj,
                   const std::function<Vec(const double*)>& true_ratio,
                   const Matrix& pivot_samples) {
    const ConvexObjective norm = obj.is_normalized() ? obj : obj.normalized();
    double acc = 0.0;
    for (std::size_t i = 0; i < pivot_samples.rows; ++i) {
        const Vec r = true_ratio(pivot_samples.row(i));
        acc += norm.value(r.data());
    }
    return acc / static_cast<double>(pivot_samples.rows);
}

double fdiv_variational(const ConvexObjective& obj, const LossBatch& batch) {
    const ConvexObjective norm = obj.is_normalized() ? obj : obj.normalized();
    const int m = norm.dim();
    batch.validate(m);
    if (batch.k() != norm.k()) throw ValidationError("batch and objective disagree on k");
    Vec s(m);
    double val = 0.0;
    for (int i = 0; i + 1 < batch.k(); ++i) {
        const auto& group = batch.per_group[i];
        double acc = 0.0;
        for (const Vec& r : group) {
            norm.gradient(r.data(), s.data());
            acc += s[i];
        }
        val += acc / group.size();
    }
    const auto& pivot = batch.per_group.back();
    double conj = 0.0;
    for (const Vec& r : pivot) {
        norm.gradient(r.data(), s.data());
        conj += kern::dot(s.data(), r.data(), m) - norm.value(r.data());
    }
    val -= conj / pivot.size();
    return val;
}

double fdiv_variational(const ConvexObjective& obj, const RatioModel& model,
                        const GroupedDataset& ds) {
    return fdiv_variational(obj, make_loss_batch(model, ds));
}

double verify_bregman_identity(const ConvexFunction& f, const Vec& u, const Vec& v) {
    const int m = f.dim();
    if (static_cast<int>(u.size()) != m || static_cast<int>(v.size()) != m)
        throw ValidationError("identity arguments have wrong length");
    const double su = 1.0 + kern::sum(u.data(), m);
    const double sv = 1.0 + kern::sum(v.data(), m);
    Vec wu(m), wv(m);
    for (int i = 0; i < m; ++i) {
        wu[i] = u[i] / su;
        wv[i] = v[i] / sv;
    }
    const double lhs = bregman_generic(f, wu.data(), wv.data());
    const double rhs = persp_bregman(f, u.data(), v.data()) / su;
    return std::fabs(lhs - rhs);
}

double verify_regret_identity(const ScoringRule& rule, const DiscreteExperiment& exp,
                              const std::function<Vec(int)>& eta_hat) {
    const int k = exp.k();
    const int m = exp.m();
    const Vec marg = exp.marginal();

    // regret route: exact l-risk gap over the finite support
    double lhs = 0.0;
    for (int x = 0; x < m; ++x) {
        const Vec eta = exp.eta(x);
        const Vec guess = eta_hat(x);
        if (static_cast<int>(guess.size()) != k)
            throw ValidationError("eta_hat has wrong length");
        double gap = 0.0;
        for (int y = 0; y < k; ++y)
            gap += eta[y] * (pointwise_loss(rule, y, guess) - pointwise_loss(rule, y, eta));
        lhs += marg[x] * gap;
    }

    // divergence route: prior-weighted perspective Bregman on ratio space
    const NegEntropy f(rule.kind, k);
    const double pk = exp.prior.w[k - 1];
    double rhs = 0.0;
    for (int x = 0; x < m; ++x) {
        const Vec r = link_forward(exp.eta(x), exp.prior);
        const Vec rh = link_forward(eta_hat(x), exp.prior);
        rhs += exp.cond.at(k - 1, x) * persp_pi_bregman(f, exp.prior, r.data(), rh.data());
    }
    rhs *= pk;
    return std::fabs(lhs - rhs);
}

namespace {

Vec random_positive(RngStream& rng, int m, double lo_log, double hi_log) {
    Vec v(m);
    for (double& x : v) x = std::exp(lo_log + (hi_log - lo_log) * rng.uniform());
    return v;
}

// interior simplex point: Dirichlet(1) mixed with 10% uniform mass so no
// coordinate collapses (ratios must stay well-defined)
Vec random_simplex(RngStream& rng, int k) {
    Vec v(k);
    double s = 0.0;
    for (double& x : v) {
        x = -std::log(1.0 - rng.uniform());
        s += x;
    }
    for (double& x : v) x = 0.9 * (x / s) + 0.1 / k;
    double t = 0.0;
    for (double x : v) t += x;
    for (double& x : v) x /= t;
    return v;
}

std::vector<ConvexObjective> identity_bases(int k) {
    std::vector<ConvexObjective> bases;
    bases.push_back(ConvexObjective::lsif(k));
    bases.push_back(ConvexObjective::kliep(k));
    bases.push_back(ConvexObjective::power(k, 1.5));
    return bases;
}

}  // namespace

bool TheoryReport::all_pass() const {
    for (const TheoryCheck& c : checks)
        if (!c.pass) return false;
    return true;
}

TheoryReport run_theory_suite(std::uint64_t seed, long trials) {
    if (trials <= 0) throw ValidationError("trials must be positive");
    TheoryReport report;

    {  // scaling identity over random positive pairs
        TheoryCheck check{"bregman-scaling-identity", 0.0, 1e-10, 0, false};
        RngStream rng(seed, "theory/scaling");
        for (int k : {2, 3, 5}) {
            for (const ConvexObjective& base : identity_bases(k)) {
                const ObjectiveFunction f(base);
                for (long t = 0; t < trials; ++t) {
                    const Vec u = random_positive(rng, k - 1, -3.0, 3.0);
                    const Vec v = random_positive(rng, k - 1, -3.0, 3.0);
                    check.max_residual =
                        std::max(check.max_residual, verify_bregman_identity(f, u, v));
                    ++check.trials;
                }
            }
        }
        check.pass = check.max_residual <= check.tolerance;
        report.checks.push_back(check);
    }

    {  // prior-weighted pointwise identity
        TheoryCheck check{"prior-weighted-identity", 0.0, 1e-10, 0, false};
        RngStream rng(seed, "theory/prior");
        for (int k : {2, 3, 5}) {
            for (const ConvexObjective& base : identity_bases(k)) {
                const ObjectiveFunction f(base);
                for (long t = 0; t < trials; ++t) {
                    const Prior prior(random_simplex(rng, k));
                    const Vec eta = random_simplex(rng, k);
                    const Vec eta_hat = random_simplex(rng, k);
                    const Vec r = link_forward(eta, prior);
                    const Vec rh = link_forward(eta_hat, prior);
                    double t_mix = prior.w[k - 1];
                    for (int i = 0; i < k - 1; ++i) t_mix += prior.w[i] * r[i];
                    const double lhs =
                        bregman_generic(f, eta.data(), eta_hat.data()) * t_mix;
                    const double rhs =
                        prior.w[k - 1] * persp_pi_bregman(f, prior, r.data(), rh.data());
                    check.max_residual = std::max(check.max_residual, std::fabs(lhs - rhs));
                    ++check.trials;
                }
            }
        }
        check.pass = check.max_residual <= check.tolerance;
        report.checks.push_back(check);
    }

    {  // regret identity on discrete experiments
        TheoryCheck check{"regret-identity", 0.0, 1e-10, 0, false};
        RngStream rng(seed, "theory/regret");
        const ScoringRule rules[] = {ScoringRule::log_score(), ScoringRule::brier()};
        for (const ScoringRule& rule : rules) {
            for (int k : {2, 3}) {
                for (int m : {2, 3}) {
                    std::vector<Prior> priors;
                    priors.push_back(Prior::uniform(k));
                    if (k == 3) priors.push_back(Prior(Vec{0.2, 0.3, 0.5}));
                    for (const Prior& prior : priors) {
                        const long reps = std::max<long>(1, trials / 10);
                        for (long t = 0; t < reps; ++t) {
                            Matrix cond(k, m);
                            for (int i = 0; i < k; ++i) {
                                const Vec row = random_simplex(rng, m);
                                for (int j = 0; j < m; ++j) cond.at(i, j) = row[j];
                            }
                            const DiscreteExperiment exp(prior, std::move(cond));
                            std::vector<Vec> guesses(m);
                            for (int j = 0; j < m; ++j) guesses[j] = random_simplex(rng, k);
                            const double res = verify_regret_identity(
                                rule, exp, [&](int x) { return guesses[x]; });
                            check.max_residual = std::max(check.max_residual, res);
                            ++check.trials;
                        }
                    }
                }
            }
        }
        check.pass = check.max_residual <= check.tolerance;
        report.checks.push_back(check);
    }

    {  // variational value vs negated batch loss of the normalized objective
        TheoryCheck check{"variational-equals-loss", 0.0, 1e-12, 0, false};
        RngStream rng(seed, "theory/variational");
        for (int k : {2, 3, 5}) {
            std::vector<ConvexObjective> objs = identity_bases(k);
            objs.push_back(ConvexObjective::multi_lr(k));
            objs.push_back(ConvexObjective::log_sum_exp(k, 2.0));
            Matrix h(k - 1, k - 1);
            for (int i = 0; i < k - 1; ++i)
                for (int j = 0; j < k - 1; ++j) h.at(i, j) = std::pow(0.5, std::abs(i - j));
            objs.push_back(ConvexObjective::quadratic(k, h, Vec(k - 1, -2.0)));
            for (const ConvexObjective& obj : objs) {
                const long reps = std::max<long>(1, trials / 20);
                for (long t = 0; t < reps; ++t) {
                    LossBatch batch;
                    batch.per_group.resize(k);
                    for (int g = 0; g < k; ++g)
                        for (int i = 0; i < 4; ++i)
                            batch.per_group[g].push_back(
                                random_positive(rng, k - 1, -1.5, 1.5));
                    const double variational = fdiv_variational(obj, batch);
                    const double loss = dre_loss(obj.normalized(), batch);
                    check.max_residual =
                        std::max(check.max_residual, std::fabs(variational + loss));
                    ++check.trials;
                }
            }
        }
        check.pass = check.max_residual <= check.tolerance;
        report.checks.push_back(check);
    }

    return report;
}

}  // namespace mdre
