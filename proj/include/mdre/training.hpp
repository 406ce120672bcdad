#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <variant>

#include "mdre/objectives.hpp"
#include "mdre/scoring.hpp"

namespace mdre {

// Scoring-rule loss spec; the prior defaults to group-size estimates.
struct CpeLoss {
    ScoringRule rule;
    std::optional<Prior> prior;
};

using LossSpec = std::variant<ConvexObjective, CpeLoss>;

std::string loss_spec_name(const LossSpec& spec);

struct OptimizerConfig {
    enum class Method { Sgd, Adam };
    Method method = Method::Adam;
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch = 128;  // per group
    int epochs = 200;
    std::uint64_t seed = 0;
};

struct TrainReport {
    Vec loss_history;  // full-dataset loss after each epoch
    double final_loss = 0.0;
    long steps = 0;
    double wall_seconds = 0.0;
};

// Loss and exact gradient on one minibatch (one index set per group).
LossGrad loss_gradient(const LossSpec& spec, const RatioModel& model, const GroupedDataset& ds,
                       const IndexSets& idx);

double full_loss(const LossSpec& spec, const RatioModel& model, const GroupedDataset& ds);

// First-order training of the model in place. Minibatches are drawn
// per-group without replacement, reshuffled from the "shuffle" stream at
// every epoch; groups smaller than the largest cycle with a reshuffle.
// Aborts with NumericalError if the minibatch loss goes non-finite or
// above 1e8. log_every > 0 prints "epoch,loss" CSV lines.
TrainReport train(const LossSpec& spec, RatioModel& model, const GroupedDataset& ds,
                  const OptimizerConfig& cfg, std::ostream* log = nullptr, int log_every = 0);

// Maximum over parameters of the relative error between the analytic
// gradient and central finite differences on one fixed minibatch.
// analytic_override substitutes the gradient under test (negative-control
// fixture in the tests).
double gradient_check(const LossSpec& spec, RatioModel& model, const GroupedDataset& ds,
                      double epsilon,
                      const std::function<Vec(const IndexSets&)>& analytic_override = {});

}  // namespace mdre
