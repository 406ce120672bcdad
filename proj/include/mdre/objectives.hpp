#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdre/core.hpp"
#include "mdre/models.hpp"

namespace mdre {

enum class ObjectiveKind { MultiLr, Lsif, Kliep, Power, Quadratic, LogSumExp };

const char* objective_kind_name(ObjectiveKind k);

// A strictly convex f: R_+^{k-1} -> R with analytic gradient and
// Hessian-vector products. Each kind induces a ratio-matching loss through
// the expected Bregman divergence construction:
//
//   MultiLr    sum_i pi_i r_i log(pi_i r_i) - T log T,  T = sum_i pi_i r_i
//              (r_k = 1 implied; uniform prior reduces to
//               (1/k) sum_i r_i log(r_i / sum_j r_j))
//   Lsif       1/2 |r - 1|^2
//   Kliep      <r, log r> - |r|_1
//   Power      |r|_alpha^alpha,                alpha > 1
//   Quadratic  r^T H r + q^T r,                H symmetric positive definite
//   LogSumExp  alpha log sum_i exp(r_i/alpha), alpha > 0 (convex but not
//              strictly convex along the diagonal; kept as stated)
//
// normalized() shifts to f~(r) = f(r) - f(1) - <grad f(1), r - 1>, the
// unique affine correction with f~(1) = 0 and grad f~(1) = 0. Bregman
// divergences and loss gradients are unchanged by the shift; divergence
// values are reported under f~.
class ConvexObjective {
public:
    static ConvexObjective multi_lr(int k);               // uniform prior
    static ConvexObjective multi_lr(int k, Prior prior);  // general prior
    static ConvexObjective lsif(int k);
    static ConvexObjective kliep(int k);
    static ConvexObjective power(int k, double alpha);
    static ConvexObjective quadratic(int k, Matrix h, Vec q);
    static ConvexObjective log_sum_exp(int k, double alpha);

    ConvexObjective normalized() const;

    double value(const double* r) const;
    void gradient(const double* r, double* out) const;
    // out = (Hessian of f at r) v; the affine normalization does not enter.
    void hess_apply(const double* r, const double* v, double* out) const;

    // Cancellation-safe closed forms per kind: exactly zero when x == y,
    // and evaluated through difference forms so near-equal arguments do not
    // lose the leading digits (needed by the Power/Lsif scaling identity).
    double bregman(const double* x, const double* y) const;

    double value(const Vec& r) const;
    Vec gradient(const Vec& r) const;
    double bregman(const Vec& x, const Vec& y) const;

    ObjectiveKind kind() const { return kind_; }
    int k() const { return k_; }
    int dim() const { return k_ - 1; }
    double alpha() const { return alpha_; }
    bool is_normalized() const { return normalized_; }
    const Prior& prior() const { return prior_; }
    const Matrix& quad_h() const { return h_; }
    const Vec& quad_q() const { return q_; }
    std::string describe() const;

    // Diagnostic counter for log arguments clamped at 1e-300.
    static std::uint64_t log_clamp_count();
    static void reset_log_clamp_count();

private:
    ConvexObjective(ObjectiveKind kind, int k);

    double base_value(const double* r) const;
    void base_gradient(const double* r, double* out) const;

    ObjectiveKind kind_;
    int k_;
    double alpha_ = 0.0;
    Matrix h_;
    Vec q_;
    Prior prior_;
    bool normalized_ = false;
    double value_at_one_ = 0.0;
    Vec grad_at_one_;
};

// Model outputs evaluated on each group's samples: per_group[i][j] is the
// ratio vector at the j-th point of group i. Group k-1 (the pivot) supplies
// the conjugate term of the loss.
struct LossBatch {
    std::vector<std::vector<Vec>> per_group;

    int k() const { return static_cast<int>(per_group.size()); }
    void validate(int expect_dim) const;
};

LossBatch make_loss_batch(const RatioModel& model, const GroupedDataset& ds);

// Empirical multi-distribution ratio-matching loss:
//   mean_{pivot} [ <grad f(r), r> - f(r) ] - sum_{i<k-1} mean_{group i} d_i f(r)
double dre_loss(const ConvexObjective& obj, const LossBatch& batch);

// One index set per group; expectations are per-group means.
using IndexSets = std::vector<std::vector<std::size_t>>;

IndexSets full_index_sets(const GroupedDataset& ds);

struct LossGrad {
    double loss = 0.0;
    Vec grad;
};

// Minibatch loss and its exact parameter gradient. The pivot integrand
// <grad f(r), r> - f(r) differentiates to (Hess f(r) r)^T J_theta r, and the
// group-i integrand d_i f to (Hess f(r) e_i)^T J_theta r; both go through
// the per-kind Hessian products rather than generic autodiff.
LossGrad dre_loss_gradient(const ConvexObjective& obj, const RatioModel& model,
                           const GroupedDataset& ds, const IndexSets& idx);

}  // namespace mdre
