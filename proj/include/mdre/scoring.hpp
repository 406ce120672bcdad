#pragma once

#include <cstdint>
#include <optional>

#include "mdre/core.hpp"
#include "mdre/objectives.hpp"

namespace mdre {

enum class RuleKind { Log, Brier, PseudoSpherical };

const char* rule_kind_name(RuleKind k);

// Classification losses used as ratio-estimation objectives by composing
// with the inverse link:
//   Log              -log(eta_y)
//   Brier            -2 eta_y + sum_j eta_j^2 + 1
//   PseudoSpherical  -log(eta_y^(a-1) / (sum_j eta_j^a)^((a-1)/a)), a > 1
struct ScoringRule {
    RuleKind kind = RuleKind::Log;
    double alpha = 1.8;     // PseudoSpherical only
    double loss_cap = 1e6;  // cap when eta_y == 0 under Log/PseudoSpherical

    static ScoringRule log_score();
    static ScoringRule brier();
    static ScoringRule pseudo_spherical(double alpha);

    std::string describe() const;

    // Count of losses that hit the zero-probability cap.
    static std::uint64_t cap_count();
    static void reset_cap_count();
};

// label is 0-based here; the CLI speaks 1-based group indices.
double pointwise_loss(const ScoringRule& rule, int label, const Vec& eta_hat);

// d loss / d eta evaluated at eta_hat (all k coordinates).
Vec pointwise_loss_grad_eta(const ScoringRule& rule, int label, const Vec& eta_hat);

// sum_i pi_i mean_{x in group i} loss(i, link_inverse(r(x), pi)); the
// empirical class-probability-estimation risk of the induced classifier.
double cpe_dre_loss(const ScoringRule& rule, const RatioModel& model, const GroupedDataset& ds,
                    const Prior& prior, const IndexSets& idx);

// Same loss plus the exact parameter gradient, chained through the inverse
// link: d eta_c / d r_j = (delta_cj pi_c - eta_c pi_j) / T with
// T = sum_l pi_l r_l, so the cotangent on r is
// (pi_j / T) (dl_j - <dl, eta>).
LossGrad cpe_dre_loss_gradient(const ScoringRule& rule, const RatioModel& model,
                               const GroupedDataset& ds, const Prior& prior,
                               const IndexSets& idx);

}  // namespace mdre
