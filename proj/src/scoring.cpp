#include "mdre/scoring.hpp"

#include <atomic>
#include <cmath>

#include "mdre/kernels.hpp"

namespace mdre {

namespace {

std::atomic<std::uint64_t> g_cap_hits{0};

// log sum_j eta_j^a with max shift
double log_power_sum(const Vec& eta, double a) {
    double mx = 0.0;
    for (double e : eta) mx = std::max(mx, e);
    double s = 0.0;
    for (double e : eta) s += (e > 0.0) ? std::exp(a * (std::log(e) - std::log(mx))) : 0.0;
    return a * std::log(mx) + std::log(s);
}

}  // namespace

const char* rule_kind_name(RuleKind k) {
    switch (k) {
        case RuleKind::Log: return "log";
        case RuleKind::Brier: return "brier";
        case RuleKind::PseudoSpherical: return "pseudospherical";
    }
    return "?";
}

ScoringRule ScoringRule::log_score() { return ScoringRule{RuleKind::Log, 1.8, 1e6}; }
ScoringRule ScoringRule::brier() { return ScoringRule{RuleKind::Brier, 1.8, 1e6}; }

ScoringRule ScoringRule::pseudo_spherical(double alpha) {
    if (!(alpha > 1.0)) throw ValidationError("pseudo-spherical rule needs alpha > 1");
    return ScoringRule{RuleKind::PseudoSpherical, alpha, 1e6};
}

std::string ScoringRule::describe() const {
    std::string s = rule_kind_name(kind);
    if (kind == RuleKind::PseudoSpherical) s += " alpha=" + std::to_string(alpha);
    return s;
}

std::uint64_t ScoringRule::cap_count() { return g_cap_hits.load(); }
void ScoringRule::reset_cap_count() { g_cap_hits.store(0); }

double pointwise_loss(const ScoringRule& rule, int label, const Vec& eta_hat) {
    const int k = static_cast<int>(eta_hat.size());
    if (label < 0 || label >= k) throw ValidationError("label out of range");
    const double ey = eta_hat[label];
    switch (rule.kind) {
        case RuleKind::Log:
            if (ey <= 0.0) {
                g_cap_hits.fetch_add(1, std::memory_order_relaxed);
                return rule.loss_cap;
            }
            return -std::log(ey);
        case RuleKind::Brier: {
            double s = 0.0;
            for (double e : eta_hat) s += e * e;
            return -2.0 * ey + s + 1.0;
        }
        case RuleKind::PseudoSpherical: {
            if (ey <= 0.0) {
                g_cap_hits.fetch_add(1, std::memory_order_relaxed);
                return rule.loss_cap;
            }
            const double a = rule.alpha;
            return -(a - 1.0) * std::log(ey) + ((a - 1.0) / a) * log_power_sum(eta_hat, a);
        }
    }
    return 0.0;
}

Vec pointwise_loss_grad_eta(const ScoringRule& rule, int label, const Vec& eta_hat) {
    const int k = static_cast<int>(eta_hat.size());
    if (label < 0 || label >= k) throw ValidationError("label out of range");
    Vec g(eta_hat.size(), 0.0);
    switch (rule.kind) {
        case RuleKind::Log:
            g[label] = -1.0 / eta_hat[label];
            break;
        case RuleKind::Brier:
            for (int j = 0; j < k; ++j) g[j] = 2.0 * eta_hat[j];
            g[label] -= 2.0;
            break;
        case RuleKind::PseudoSpherical: {
            const double a = rule.alpha;
            const double lps = log_power_sum(eta_hat, a);
            for (int j = 0; j < k; ++j)
                g[j] = (eta_hat[j] > 0.0)
                           ? (a - 1.0) * std::exp((a - 1.0) * std::log(eta_hat[j]) - lps)
                           : 0.0;
            g[label] -= (a - 1.0) / eta_hat[label];
            break;
        }
    }
    return g;
}

namespace {

// eta = pi o (r, 1) / T with T = pi_k + sum_i pi_i r_i; returns T
double inverse_link_inplace(const Vec& pi, const double* r, Vec& eta) {
    const int k = static_cast<int>(pi.size());
    double t = pi[k - 1];
    for (int i = 0; i < k - 1; ++i) t += pi[i] * r[i];
    eta.resize(k);
    for (int i = 0; i < k - 1; ++i) eta[i] = pi[i] * r[i] / t;
    eta[k - 1] = pi[k - 1] / t;
    return t;
}

}  // namespace

double cpe_dre_loss(const ScoringRule& rule, const RatioModel& model, const GroupedDataset& ds,
                    const Prior& prior, const IndexSets& idx) {
    if (prior.k() != ds.k()) throw ValidationError("prior does not match dataset");
    if (model.out_dim() != ds.k() - 1) throw ValidationError("model does not match dataset");
    if (static_cast<int>(idx.size()) != ds.k())
        throw ValidationError("index sets must match the dataset groups");
    RatioModel::Trace t;
    Vec eta;
    double loss = 0.0;
    for (int g = 0; g < ds.k(); ++g) {
        if (idx[g].empty()) throw ValidationError("group index set is empty");
        double acc = 0.0;
        for (std::size_t i : idx[g]) {
            model.forward(ds.point(g, i), t);
            inverse_link_inplace(prior.w, t.r.data(), eta);
            acc += pointwise_loss(rule, g, eta);
        }
        loss += prior.w[g] * acc / static_cast<double>(idx[g].size());
    }
    return loss;
}

LossGrad cpe_dre_loss_gradient(const ScoringRule& rule, const RatioModel& model,
                               const GroupedDataset& ds, const Prior& prior,
                               const IndexSets& idx) {
    if (prior.k() != ds.k()) throw ValidationError("prior does not match dataset");
    if (model.out_dim() != ds.k() - 1) throw ValidationError("model does not match dataset");
    if (static_cast<int>(idx.size()) != ds.k())
        throw ValidationError("index sets must match the dataset groups");
    const int k = ds.k();
    const int m = k - 1;
    LossGrad out;
    out.grad.assign(model.param_count(), 0.0);
    RatioModel::Trace t;
    Vec eta, w(m);
    for (int g = 0; g < k; ++g) {
        if (idx[g].empty()) throw ValidationError("group index set is empty");
        const double scale = prior.w[g] / static_cast<double>(idx[g].size());
        for (std::size_t i : idx[g]) {
            model.forward(ds.point(g, i), t);
            const double big_t = inverse_link_inplace(prior.w, t.r.data(), eta);
            out.loss += scale * pointwise_loss(rule, g, eta);
            const Vec dl = pointwise_loss_grad_eta(rule, g, eta);
            const double dl_eta = kern::dot(dl.data(), eta.data(), k);
            for (int j = 0; j < m; ++j)
                w[j] = scale * prior.w[j] / big_t * (dl[j] - dl_eta);
            model.backward_acc(t, w.data(), out.grad.data());
        }
    }
    return out;
}

}  // namespace mdre
