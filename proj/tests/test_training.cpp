#include "mdre/training.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mdre/bench.hpp"
#include "test_helpers.hpp"

using namespace mdre;

namespace {

GroupedDataset same_distribution_pair(std::uint64_t seed, std::size_t n) {
    RngStream rng(seed, "train-data");
    Matrix a(n, 2), b(n, 2);
    for (double& x : a.data) x = rng.normal();
    for (double& x : b.data) x = rng.normal();
    return GroupedDataset({a, b}, 2);
}

}  // namespace

TEST_CASE("zero epochs is a no-op") {
    GroupedDataset ds = same_distribution_pair(1, 50);
    RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
    model.init(3);
    const Vec before(model.params().begin(), model.params().end());
    OptimizerConfig cfg;
    cfg.epochs = 0;
    const TrainReport rep = train(ConvexObjective::lsif(2), model, ds, cfg);
    CHECK(rep.loss_history.empty());
    CHECK(rep.steps == 0);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(model.params()[i] == before[i]);
}

TEST_CASE("training is deterministic for a fixed seed") {
    for (int run = 0; run < 2; ++run) {
        GroupedDataset ds = same_distribution_pair(2, 64);
        OptimizerConfig cfg;
        cfg.epochs = 5;
        cfg.batch = 16;
        cfg.seed = 99;
        RatioModel a = RatioModel::log_linear(FeatureMap::identity(2), 2);
        a.init(7);
        const TrainReport ra = train(ConvexObjective::kliep(2), a, ds, cfg);
        RatioModel b = RatioModel::log_linear(FeatureMap::identity(2), 2);
        b.init(7);
        const TrainReport rb = train(ConvexObjective::kliep(2), b, ds, cfg);
        CHECK(ra.loss_history.size() == rb.loss_history.size());
        for (std::size_t i = 0; i < ra.loss_history.size(); ++i)
            CHECK(ra.loss_history[i] == rb.loss_history[i]);  // bitwise
        for (std::size_t i = 0; i < a.params().size(); ++i)
            CHECK(a.params()[i] == b.params()[i]);
    }
}

TEST_CASE("lsif on identical distributions concentrates near unit ratios") {
    GroupedDataset ds = same_distribution_pair(5, 400);
    RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
    model.init(11);
    OptimizerConfig cfg;
    cfg.epochs = 60;
    cfg.batch = 100;
    cfg.seed = 4;
    train(ConvexObjective::lsif(2), model, ds, cfg);
    RngStream rng(6, "heldout");
    Vec errs;
    for (int i = 0; i < 200; ++i) {
        const Vec x{rng.normal(), rng.normal()};
        errs.push_back(std::fabs(model.eval_vec(x)[0] - 1.0));
    }
    CHECK(median(errs) <= 0.1);
}

TEST_CASE("history length equals epochs and the report is consistent") {
    GroupedDataset ds = same_distribution_pair(8, 64);
    RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
    model.init(0);
    OptimizerConfig cfg;
    cfg.epochs = 7;
    cfg.batch = 32;
    const TrainReport rep = train(ConvexObjective::lsif(2), model, ds, cfg);
    CHECK(rep.loss_history.size() == 7);
    CHECK(rep.final_loss == rep.loss_history.back());
    CHECK(rep.steps == 7 * 2);  // 64/32 = 2 steps per epoch
    CHECK(rep.wall_seconds >= 0.0);
}

TEST_CASE("divergence guard aborts with a step index") {
    GroupedDataset ds = same_distribution_pair(9, 64);
    RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
    model.init(0);
    OptimizerConfig cfg;
    cfg.method = OptimizerConfig::Method::Sgd;
    cfg.step_size = 1e5;  // blows up kliep immediately
    cfg.epochs = 10;
    cfg.batch = 64;
    CHECK_THROWS_AS(train(ConvexObjective::kliep(2), model, ds, cfg), NumericalError);
}

TEST_CASE("full-batch gradient descent is monotone on convex instances") {
    // log-linear + identity features make lsif/kliep/multi-lr losses smooth
    // in the parameters; small-step full-batch descent must not increase the
    // full loss
    const GaussianSpec spec{2, default_means(2), 300, 100};
    std::vector<Matrix> groups;
    for (int g = 0; g < 5; ++g) {
        RngStream rng(31 + g, "mono");
        groups.push_back(sample_gaussian(spec.means[g], spec.n_train, rng));
    }
    GroupedDataset ds(std::move(groups), 2);
    for (const LossSpec& spec_loss :
         {LossSpec{ConvexObjective::lsif(5)}, LossSpec{ConvexObjective::kliep(5)},
          LossSpec{ConvexObjective::multi_lr(5)}}) {
        RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 5);
        model.init(0);
        OptimizerConfig cfg;
        cfg.method = OptimizerConfig::Method::Sgd;
        cfg.step_size = 1e-3;
        cfg.batch = spec.n_train;  // full batch
        cfg.epochs = 40;
        const TrainReport rep = train(spec_loss, model, ds, cfg);
        for (std::size_t e = 1; e < rep.loss_history.size(); ++e)
            CHECK(rep.loss_history[e] <= rep.loss_history[e - 1] + 1e-9);
    }
}

TEST_CASE("gradient check passes for analytic gradients and catches corruption") {
    RngStream rng(83, "gcheck");
    const GroupedDataset ds = testing::random_dataset(rng, 2, 2, 32);
    {
        RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
        model.init(0);
        CHECK(gradient_check(ConvexObjective::lsif(2), model, ds, 1e-5) <= 1e-6);
    }
    {
        RatioModel model = RatioModel::mlp(2, {8}, 2);
        model.init(19);
        CHECK(gradient_check(ConvexObjective::multi_lr(2), model, ds, 1e-5) <= 1e-4);
    }
    {
        RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
        model.init(0);
        const LossSpec spec{ConvexObjective::lsif(2)};
        const auto corrupted = [&](const IndexSets& idx) {
            Vec g = loss_gradient(spec, model, ds, idx).grad;
            g[0] += 0.5;
            return g;
        };
        CHECK(gradient_check(spec, model, ds, 1e-5, corrupted) > 1e-2);
    }
    {
        RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
        model.init(0);
        CHECK_THROWS_AS(gradient_check(ConvexObjective::lsif(2), model, ds, 0.5),
                        ValidationError);
    }
}

TEST_CASE("cpe route trains too") {
    GroupedDataset ds = same_distribution_pair(10, 128);
    RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
    model.init(0);
    OptimizerConfig cfg;
    cfg.epochs = 10;
    cfg.batch = 64;
    const TrainReport rep = train(CpeLoss{ScoringRule::brier(), {}}, model, ds, cfg);
    CHECK(rep.loss_history.size() == 10);
    CHECK(std::isfinite(rep.final_loss));
}

TEST_CASE("log rule and multi-lr follow the same optimizer trajectory") {
    // the two losses are the same function of the parameters, so training
    // from the same initialization with the same shuffle seed must produce
    // the same epoch losses and parameters
    GroupedDataset ds = same_distribution_pair(12, 90);
    OptimizerConfig cfg;
    cfg.epochs = 6;
    cfg.batch = 30;
    cfg.seed = 21;
    RatioModel a = RatioModel::log_linear(FeatureMap::identity(2), 2);
    a.init(0);
    const TrainReport ra = train(ConvexObjective::multi_lr(2), a, ds, cfg);
    RatioModel b = RatioModel::log_linear(FeatureMap::identity(2), 2);
    b.init(0);
    const TrainReport rb =
        train(CpeLoss{ScoringRule::log_score(), Prior::uniform(2)}, b, ds, cfg);
    for (std::size_t e = 0; e < ra.loss_history.size(); ++e)
        CHECK(std::fabs(ra.loss_history[e] - rb.loss_history[e]) <= 1e-8);
    for (std::size_t i = 0; i < a.params().size(); ++i)
        CHECK(std::fabs(a.params()[i] - b.params()[i]) <= 1e-8);
}

TEST_CASE("log-every emits epoch csv lines") {
    GroupedDataset ds = same_distribution_pair(13, 40);
    RatioModel model = RatioModel::log_linear(FeatureMap::identity(2), 2);
    model.init(0);
    OptimizerConfig cfg;
    cfg.epochs = 4;
    cfg.batch = 40;
    std::ostringstream log;
    train(ConvexObjective::lsif(2), model, ds, cfg, &log, 2);
    const std::string text = log.str();
    CHECK(text.find("2,") != std::string::npos);
    CHECK(text.find("4,") != std::string::npos);
}
