#include "mdre/training.hpp"

#include <chrono>
#include <cmath>

#include "mdre/rng.hpp"

namespace mdre {

namespace {

constexpr double kDivergenceGuard = 1e8;

const Prior& resolve_prior(const CpeLoss& spec, const GroupedDataset& ds,
                           std::optional<Prior>& storage) {
    if (spec.prior) return *spec.prior;
    if (!storage) storage = estimate_prior(ds);
    return *storage;
}

// Per-group sample stream: a shuffled pass over the group's indices,
// reshuffled when exhausted.
class GroupStream {
public:
    GroupStream(std::size_t n, RngStream* rng) : rng_(rng), perm_(n) {
        for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
        reshuffle();
    }
    void reshuffle() {
        rng_->shuffle(perm_);
        pos_ = 0;
    }
    void take(std::size_t count, std::vector<std::size_t>& out) {
        out.clear();
        for (std::size_t i = 0; i < count; ++i) {
            if (pos_ == perm_.size()) reshuffle();
            out.push_back(perm_[pos_++]);
        }
    }

private:
    RngStream* rng_;
    std::vector<std::size_t> perm_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string loss_spec_name(const LossSpec& spec) {
    if (const auto* obj = std::get_if<ConvexObjective>(&spec)) return obj->describe();
    return std::get<CpeLoss>(spec).rule.describe();
}

LossGrad loss_gradient(const LossSpec& spec, const RatioModel& model, const GroupedDataset& ds,
                       const IndexSets& idx) {
    if (const auto* obj = std::get_if<ConvexObjective>(&spec))
        return dre_loss_gradient(*obj, model, ds, idx);
    const auto& cpe = std::get<CpeLoss>(spec);
    std::optional<Prior> storage;
    return cpe_dre_loss_gradient(cpe.rule, model, ds, resolve_prior(cpe, ds, storage), idx);
}

double full_loss(const LossSpec& spec, const RatioModel& model, const GroupedDataset& ds) {
    const IndexSets idx = full_index_sets(ds);
    if (const auto* obj = std::get_if<ConvexObjective>(&spec))
        return dre_loss(*obj, make_loss_batch(model, ds));
    const auto& cpe = std::get<CpeLoss>(spec);
    std::optional<Prior> storage;
    return cpe_dre_loss(cpe.rule, model, ds, resolve_prior(cpe, ds, storage), idx);
}

TrainReport train(const LossSpec& spec, RatioModel& model, const GroupedDataset& ds,
                  const OptimizerConfig& cfg, std::ostream* log, int log_every) {
    if (!(cfg.step_size > 0.0)) throw ValidationError("step size must be positive");
    if (cfg.batch == 0) throw ValidationError("batch size must be positive");
    if (cfg.epochs < 0) throw ValidationError("epochs must be nonnegative");
    if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0))
        throw ValidationError("adam betas must lie in (0, 1)");
    ds.validate();

    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;

    std::size_t n_max = 0;
    for (int g = 0; g < ds.k(); ++g) n_max = std::max(n_max, ds.size(g));
    const std::size_t steps_per_epoch = std::max<std::size_t>(1, n_max / cfg.batch);

    RngStream shuffle_rng(cfg.seed, "shuffle");
    std::vector<GroupStream> streams;
    streams.reserve(ds.k());
    for (int g = 0; g < ds.k(); ++g) streams.emplace_back(ds.size(g), &shuffle_rng);

    const std::size_t p = model.param_count();
    Vec m1, m2;
    if (cfg.method == OptimizerConfig::Method::Adam) {
        m1.assign(p, 0.0);
        m2.assign(p, 0.0);
    }

    IndexSets idx(ds.k());
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int g = 0; g < ds.k(); ++g) streams[g].reshuffle();
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            for (int g = 0; g < ds.k(); ++g)
                streams[g].take(std::min(cfg.batch, ds.size(g)), idx[g]);
            LossGrad lg = loss_gradient(spec, model, ds, idx);
            ++step;
            if (!std::isfinite(lg.loss) || std::fabs(lg.loss) > kDivergenceGuard)
                throw NumericalError("training aborted at step " + std::to_string(step) +
                                     ": loss = " + std::to_string(lg.loss));
            auto params = model.params();
            if (cfg.method == OptimizerConfig::Method::Sgd) {
                for (std::size_t i = 0; i < p; ++i) params[i] -= cfg.step_size * lg.grad[i];
            } else {
                const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
                const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
                for (std::size_t i = 0; i < p; ++i) {
                    m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * lg.grad[i];
                    m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * lg.grad[i] * lg.grad[i];
                    params[i] -=
                        cfg.step_size * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + cfg.epsilon);
                }
            }
        }
        const double epoch_loss = full_loss(spec, model, ds);
        if (!std::isfinite(epoch_loss) || std::fabs(epoch_loss) > kDivergenceGuard)
            throw NumericalError("training aborted after epoch " + std::to_string(epoch + 1) +
                                 ": loss = " + std::to_string(epoch_loss));
        report.loss_history.push_back(epoch_loss);
        if (log && log_every > 0 && ((epoch + 1) % log_every == 0 || epoch + 1 == cfg.epochs))
            (*log) << epoch + 1 << ',' << epoch_loss << '\n';
    }

    report.steps = step;
    report.final_loss = report.loss_history.empty() ? full_loss(spec, model, ds)
                                                    : report.loss_history.back();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

double gradient_check(const LossSpec& spec, RatioModel& model, const GroupedDataset& ds,
                      double epsilon,
                      const std::function<Vec(const IndexSets&)>& analytic_override) {
    if (!(epsilon > 0.0) || epsilon > 1e-2)
        throw ValidationError("gradient check epsilon must be in (0, 1e-2]");
    // fixed minibatch: leading samples of every group
    IndexSets idx(ds.k());
    for (int g = 0; g < ds.k(); ++g) {
        const std::size_t n = std::min<std::size_t>(64, ds.size(g));
        idx[g].resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[g][i] = i;
    }
    const Vec analytic =
        analytic_override ? analytic_override(idx) : loss_gradient(spec, model, ds, idx).grad;

    auto params = model.params();
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        const double h = epsilon * std::max(1.0, std::fabs(saved));
        params[i] = saved + h;
        const double up = loss_gradient(spec, model, ds, idx).loss;
        params[i] = saved - h;
        const double down = loss_gradient(spec, model, ds, idx).loss;
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1.0});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace mdre
