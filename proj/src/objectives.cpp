#include "mdre/objectives.hpp"

#include <atomic>
#include <cmath>

#include "mdre/kernels.hpp"

namespace mdre {

namespace {

std::atomic<std::uint64_t> g_log_clamps{0};

double safe_log(double x) {
    if (x < 1e-300) {
        g_log_clamps.fetch_add(1, std::memory_order_relaxed);
        x = 1e-300;
    }
    return std::log(x);
}

// t^a - 1 - a (t - 1), the scalar Bregman kernel of t^a, in a difference
// form that keeps precision for t near 1
double power_kernel(double t, double a) {
    return std::expm1(a * std::log(t)) - a * (t - 1.0);
}

}  // namespace

const char* objective_kind_name(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::MultiLr: return "multi-lr";
        case ObjectiveKind::Lsif: return "lsif";
        case ObjectiveKind::Kliep: return "kliep";
        case ObjectiveKind::Power: return "power";
        case ObjectiveKind::Quadratic: return "quadratic";
        case ObjectiveKind::LogSumExp: return "logsumexp";
    }
    return "?";
}

std::uint64_t ConvexObjective::log_clamp_count() { return g_log_clamps.load(); }
void ConvexObjective::reset_log_clamp_count() { g_log_clamps.store(0); }

ConvexObjective::ConvexObjective(ObjectiveKind kind, int k)
    : kind_(kind), k_(k), prior_(Prior::uniform(k > 1 ? k : 2)) {
    if (k < 2) throw ValidationError("objective needs k >= 2");
}

ConvexObjective ConvexObjective::multi_lr(int k) { return multi_lr(k, Prior::uniform(k)); }

ConvexObjective ConvexObjective::multi_lr(int k, Prior prior) {
    ConvexObjective o(ObjectiveKind::MultiLr, k);
    if (prior.k() != k) throw ValidationError("multi-lr prior has wrong length");
    o.prior_ = std::move(prior);
    return o;
}

ConvexObjective ConvexObjective::lsif(int k) { return ConvexObjective(ObjectiveKind::Lsif, k); }

ConvexObjective ConvexObjective::kliep(int k) { return ConvexObjective(ObjectiveKind::Kliep, k); }

ConvexObjective ConvexObjective::power(int k, double alpha) {
    if (!(alpha > 1.0)) throw ValidationError("power objective needs alpha > 1");
    ConvexObjective o(ObjectiveKind::Power, k);
    o.alpha_ = alpha;
    return o;
}

ConvexObjective ConvexObjective::quadratic(int k, Matrix h, Vec q) {
    ConvexObjective o(ObjectiveKind::Quadratic, k);
    const std::size_t m = static_cast<std::size_t>(k - 1);
    if (h.rows != m || h.cols != m || q.size() != m)
        throw ValidationError("quadratic objective: H must be (k-1)x(k-1) and q length k-1");
    if (!is_symmetric(h, 1e-10)) throw ValidationError("quadratic objective: H must be symmetric");
    Matrix l;
    if (!cholesky(h, l))
        throw ValidationError("quadratic objective: H is not positive definite");
    o.h_ = std::move(h);
    o.q_ = std::move(q);
    return o;
}

ConvexObjective ConvexObjective::log_sum_exp(int k, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError("logsumexp objective needs alpha > 0");
    ConvexObjective o(ObjectiveKind::LogSumExp, k);
    o.alpha_ = alpha;
    return o;
}

ConvexObjective ConvexObjective::normalized() const {
    ConvexObjective o(*this);
    o.normalized_ = false;  // evaluate the base at 1
    Vec ones(static_cast<std::size_t>(dim()), 1.0);
    o.value_at_one_ = o.base_value(ones.data());
    o.grad_at_one_.assign(static_cast<std::size_t>(dim()), 0.0);
    o.base_gradient(ones.data(), o.grad_at_one_.data());
    o.normalized_ = true;
    return o;
}

double ConvexObjective::base_value(const double* r) const {
    const int m = dim();
    switch (kind_) {
        case ObjectiveKind::Lsif: {
            double s = 0.0;
            for (int i = 0; i < m; ++i) {
                const double d = r[i] - 1.0;
                s += d * d;
            }
            return 0.5 * s;
        }
        case ObjectiveKind::Kliep: {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += r[i] * safe_log(r[i]) - r[i];
            return s;
        }
        case ObjectiveKind::Power: {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += std::pow(r[i], alpha_);
            return s;
        }
        case ObjectiveKind::Quadratic: {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += r[i] * (kern::dot(h_.row(i), r, m) + q_[i]);
            return s;
        }
        case ObjectiveKind::LogSumExp: {
            double mx = r[0];
            for (int i = 1; i < m; ++i) mx = std::max(mx, r[i]);
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += std::exp((r[i] - mx) / alpha_);
            return mx + alpha_ * std::log(s);
        }
        case ObjectiveKind::MultiLr: {
            const Vec& pi = prior_.w;
            double t = pi[m];
            for (int i = 0; i < m; ++i) t += pi[i] * r[i];
            double s = pi[m] * safe_log(pi[m]) - t * safe_log(t);
            for (int i = 0; i < m; ++i) {
                const double u = pi[i] * r[i];
                s += u * safe_log(u);
            }
            return s;
        }
    }
    return 0.0;
}

void ConvexObjective::base_gradient(const double* r, double* out) const {
    const int m = dim();
    switch (kind_) {
        case ObjectiveKind::Lsif:
            for (int i = 0; i < m; ++i) out[i] = r[i] - 1.0;
            return;
        case ObjectiveKind::Kliep:
            for (int i = 0; i < m; ++i) out[i] = safe_log(r[i]);
            return;
        case ObjectiveKind::Power:
            for (int i = 0; i < m; ++i) out[i] = alpha_ * std::pow(r[i], alpha_ - 1.0);
            return;
        case ObjectiveKind::Quadratic:
            kern::matvec(h_.data.data(), m, m, r, out);
            for (int i = 0; i < m; ++i) out[i] = 2.0 * out[i] + q_[i];
            return;
        case ObjectiveKind::LogSumExp: {
            double mx = r[0];
            for (int i = 1; i < m; ++i) mx = std::max(mx, r[i]);
            double s = 0.0;
            for (int i = 0; i < m; ++i) {
                out[i] = std::exp((r[i] - mx) / alpha_);
                s += out[i];
            }
            for (int i = 0; i < m; ++i) out[i] /= s;
            return;
        }
        case ObjectiveKind::MultiLr: {
            const Vec& pi = prior_.w;
            double t = pi[m];
            for (int i = 0; i < m; ++i) t += pi[i] * r[i];
            const double log_t = safe_log(t);
            for (int i = 0; i < m; ++i) out[i] = pi[i] * (safe_log(pi[i] * r[i]) - log_t);
            return;
        }
    }
}

double ConvexObjective::value(const double* r) const {
    double v = base_value(r);
    if (normalized_) {
        v -= value_at_one_;
        for (int i = 0; i < dim(); ++i) v -= grad_at_one_[i] * (r[i] - 1.0);
    }
    return v;
}

void ConvexObjective::gradient(const double* r, double* out) const {
    base_gradient(r, out);
    if (normalized_)
        for (int i = 0; i < dim(); ++i) out[i] -= grad_at_one_[i];
}

void ConvexObjective::hess_apply(const double* r, const double* v, double* out) const {
    const int m = dim();
    switch (kind_) {
        case ObjectiveKind::Lsif:
            for (int i = 0; i < m; ++i) out[i] = v[i];
            return;
        case ObjectiveKind::Kliep:
            for (int i = 0; i < m; ++i) out[i] = v[i] / r[i];
            return;
        case ObjectiveKind::Power:
            for (int i = 0; i < m; ++i)
                out[i] = alpha_ * (alpha_ - 1.0) * std::pow(r[i], alpha_ - 2.0) * v[i];
            return;
        case ObjectiveKind::Quadratic:
            kern::matvec(h_.data.data(), m, m, v, out);
            for (int i = 0; i < m; ++i) out[i] *= 2.0;
            return;
        case ObjectiveKind::LogSumExp: {
            // (1/alpha) (diag(s) - s s^T) v with s the softmax of r/alpha
            Vec s(m);
            base_gradient(r, s.data());
            const double sv = kern::dot(s.data(), v, m);
            for (int i = 0; i < m; ++i) out[i] = (s[i] * v[i] - s[i] * sv) / alpha_;
            return;
        }
        case ObjectiveKind::MultiLr: {
            // diag(pi/r) v - pi <pi, v> / T
            const Vec& pi = prior_.w;
            double t = pi[m];
            double pv = 0.0;
            for (int i = 0; i < m; ++i) {
                t += pi[i] * r[i];
                pv += pi[i] * v[i];
            }
            for (int i = 0; i < m; ++i) out[i] = pi[i] * v[i] / r[i] - pi[i] * pv / t;
            return;
        }
    }
}

double ConvexObjective::bregman(const double* x, const double* y) const {
    const int m = dim();
    switch (kind_) {
        case ObjectiveKind::Lsif: {
            double s = 0.0;
            for (int i = 0; i < m; ++i) {
                const double d = x[i] - y[i];
                s += d * d;
            }
            return 0.5 * s;
        }
        case ObjectiveKind::Quadratic: {
            // quadratic f gives exactly (x-y)^T H (x-y)
            Vec d(m);
            for (int i = 0; i < m; ++i) d[i] = x[i] - y[i];
            Vec hd(m);
            kern::matvec(h_.data.data(), m, m, d.data(), hd.data());
            return kern::dot(d.data(), hd.data(), m);
        }
        case ObjectiveKind::Power: {
            if (alpha_ == 2.0) {
                double s = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double d = x[i] - y[i];
                    s += d * d;
                }
                return s;
            }
            double s = 0.0;
            for (int i = 0; i < m; ++i)
                s += std::pow(y[i], alpha_) * power_kernel(x[i] / y[i], alpha_);
            return s;
        }
        case ObjectiveKind::Kliep: {
            // x log(x/y) - (x - y), via log1p for x near y
            double s = 0.0;
            for (int i = 0; i < m; ++i) {
                const double d = x[i] - y[i];
                s += x[i] * std::log1p(d / y[i]) - d;
            }
            return s;
        }
        default: {
            // three-term form; exact zero at x == y since both differences
            // cancel bitwise
            Vec g(m);
            Vec diff(m);
            for (int i = 0; i < m; ++i) diff[i] = x[i] - y[i];
            gradient(y, g.data());
            return value(x) - value(y) - kern::dot(g.data(), diff.data(), m);
        }
    }
}

double ConvexObjective::value(const Vec& r) const {
    if (static_cast<int>(r.size()) != dim())
        throw ValidationError("ratio vector has wrong length for objective");
    return value(r.data());
}

Vec ConvexObjective::gradient(const Vec& r) const {
    if (static_cast<int>(r.size()) != dim())
        throw ValidationError("ratio vector has wrong length for objective");
    Vec g(r.size());
    gradient(r.data(), g.data());
    return g;
}

double ConvexObjective::bregman(const Vec& x, const Vec& y) const {
    if (x.size() != y.size() || static_cast<int>(x.size()) != dim())
        throw ValidationError("bregman arguments have wrong length");
    return bregman(x.data(), y.data());
}

std::string ConvexObjective::describe() const {
    std::string s = objective_kind_name(kind_);
    if (kind_ == ObjectiveKind::Power || kind_ == ObjectiveKind::LogSumExp)
        s += " alpha=" + std::to_string(alpha_);
    return s;
}

void LossBatch::validate(int expect_dim) const {
    if (k() < 2) throw ValidationError("loss batch needs k >= 2 groups");
    for (const auto& group : per_group) {
        if (group.empty()) throw ValidationError("loss batch has an empty group");
        for (const Vec& r : group)
            if (static_cast<int>(r.size()) != expect_dim)
                throw ValidationError("loss batch ratio vector has wrong length");
    }
}

LossBatch make_loss_batch(const RatioModel& model, const GroupedDataset& ds) {
    LossBatch batch;
    batch.per_group.resize(ds.k());
    RatioModel::Trace t;
    for (int g = 0; g < ds.k(); ++g) {
        batch.per_group[g].reserve(ds.size(g));
        for (std::size_t i = 0; i < ds.size(g); ++i) {
            model.forward(ds.point(g, i), t);
            batch.per_group[g].push_back(t.r);
        }
    }
    return batch;
}

double dre_loss(const ConvexObjective& obj, const LossBatch& batch) {
    const int m = obj.dim();
    if (batch.k() != obj.k()) throw ValidationError("loss batch and objective disagree on k");
    batch.validate(m);
    Vec g(m);
    double loss = 0.0;
    const auto& pivot = batch.per_group.back();
    for (const Vec& r : pivot) {
        obj.gradient(r.data(), g.data());
        loss += (kern::dot(g.data(), r.data(), m) - obj.value(r.data())) / pivot.size();
    }
    for (int i = 0; i + 1 < batch.k(); ++i) {
        const auto& group = batch.per_group[i];
        double acc = 0.0;
        for (const Vec& r : group) {
            obj.gradient(r.data(), g.data());
            acc += g[i];
        }
        loss -= acc / group.size();
    }
    return loss;
}

IndexSets full_index_sets(const GroupedDataset& ds) {
    IndexSets idx(ds.k());
    for (int g = 0; g < ds.k(); ++g) {
        idx[g].resize(ds.size(g));
        for (std::size_t i = 0; i < ds.size(g); ++i) idx[g][i] = i;
    }
    return idx;
}

LossGrad dre_loss_gradient(const ConvexObjective& obj, const RatioModel& model,
                           const GroupedDataset& ds, const IndexSets& idx) {
    if (model.out_dim() != obj.dim())
        throw ValidationError("model output dimension does not match objective");
    if (static_cast<int>(idx.size()) != ds.k() || ds.k() != obj.k())
        throw ValidationError("index sets must match the dataset groups");
    const int m = obj.dim();
    LossGrad out;
    out.grad.assign(model.param_count(), 0.0);
    RatioModel::Trace t;
    Vec g(m), w(m);

    const auto& pivot_idx = idx.back();
    if (pivot_idx.empty()) throw ValidationError("pivot index set is empty");
    const double inv_nk = 1.0 / static_cast<double>(pivot_idx.size());
    for (std::size_t i : pivot_idx) {
        model.forward(ds.point(ds.k() - 1, i), t);
        obj.gradient(t.r.data(), g.data());
        out.loss += (kern::dot(g.data(), t.r.data(), m) - obj.value(t.r.data())) * inv_nk;
        obj.hess_apply(t.r.data(), t.r.data(), w.data());
        for (int j = 0; j < m; ++j) w[j] *= inv_nk;
        model.backward_acc(t, w.data(), out.grad.data());
    }

    Vec e(m, 0.0);
    for (int gi = 0; gi + 1 < ds.k(); ++gi) {
        const auto& gidx = idx[gi];
        if (gidx.empty()) throw ValidationError("group index set is empty");
        const double inv_n = 1.0 / static_cast<double>(gidx.size());
        e[gi] = 1.0;
        for (std::size_t i : gidx) {
            model.forward(ds.point(gi, i), t);
            obj.gradient(t.r.data(), g.data());
            out.loss -= g[gi] * inv_n;
            obj.hess_apply(t.r.data(), e.data(), w.data());
            for (int j = 0; j < m; ++j) w[j] *= -inv_n;
            model.backward_acc(t, w.data(), out.grad.data());
        }
        e[gi] = 0.0;
    }
    return out;
}

}  // namespace mdre
