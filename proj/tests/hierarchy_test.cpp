#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace hio;
using hio::testing::params_identical;
using hio::testing::random_labels;
using hio::testing::random_matrix;

namespace {

constexpr std::size_t kWidth = 6;

HierModel small_model(std::uint64_t seed = 1, std::size_t d = kWidth) {
    const Mlp p = init_mlp({d, 5, 5, 5, 5, 3}, Activation::ReLU, Activation::Softmax, Rng::derive(seed, 1));
    const Mlp c = init_mlp({d, 5, 5, 5, 5, 3}, Activation::ReLU, Activation::Softmax, Rng::derive(seed, 2));
    const Mlp pi = init_mlp({d, 5, 5, 5, 3}, Activation::ReLU, Activation::Softmax, Rng::derive(seed, 3));
    const std::size_t head[] = {11, 5, 5, 5, 3};
    return compose(p, c, pi, head, Rng::derive(seed, 4));
}

struct Batch {
    Matrix x;
    std::vector<int> y;
    GateSet gate;
};

Batch small_batch(std::uint64_t seed = 2, std::size_t n = 12) {
    Batch b;
    b.x = random_matrix(n, kWidth, Rng::derive(seed, 1));
    b.y = random_labels(n, Rng::derive(seed, 2));
    b.gate = {random_matrix(n, kWidth, Rng::derive(seed, 3)), random_labels(n, Rng::derive(seed, 4)),
              random_labels(n, Rng::derive(seed, 5))};
    return b;
}

/// Candidate losses P and C would have after one step from this model.
std::pair<double, double> candidate_losses(const HierModel& model, const Batch& b, double lr) {
    HierModel copy = model;
    end_to_end_step(copy, b.x, b.y, lr);
    return {subtask_loss(copy.passion, b.gate.x, b.gate.passion),
            subtask_loss(copy.credibility, b.gate.x, b.gate.credibility)};
}

GateConfig gate_with(double eps, ReferenceMode mode = ReferenceMode::LastAccepted, std::size_t interval = 1) {
    GateConfig g;
    g.epsilon = eps;
    g.reference_mode = mode;
    g.gate_interval_steps = interval;
    return g;
}

} // namespace

TEST(ComposeTest, HeadWidthIsElevenForDefaultArchitecture) {
    const HierModel m = small_model();
    EXPECT_EQ(m.head_input_width(), 11u);
    EXPECT_EQ(m.trunk.layer_sizes(), (std::vector<std::size_t>{kWidth, 5, 5, 5}));
    EXPECT_EQ(m.head.layer_sizes(), (std::vector<std::size_t>{11, 5, 5, 5, 3}));
    EXPECT_EQ(m.head.output_activation(), Activation::Softmax);
}

TEST(ComposeTest, RejectsBadHeads) {
    const Mlp p = init_mlp({4, 5, 3}, Activation::ReLU, Activation::Softmax, 1);
    const Mlp pi = init_mlp({4, 5, 5, 3}, Activation::ReLU, Activation::Softmax, 2);
    const std::size_t one[] = {11};
    EXPECT_THROW(compose(p, p, pi, one, 3), ArchitectureError);
    const std::size_t wrong[] = {10, 3};
    EXPECT_THROW(compose(p, p, pi, wrong, 3), ShapeError);
    const Mlp other = init_mlp({7, 5, 3}, Activation::ReLU, Activation::Softmax, 1);
    const std::size_t ok[] = {11, 3};
    EXPECT_THROW(compose(other, p, pi, ok, 3), ShapeError);
    EXPECT_NO_THROW(compose(p, p, pi, ok, 3));
}

TEST(ComposeTest, StagedEvaluationMatchesComposedForward) {
    const HierModel m = small_model();
    const Matrix x = random_matrix(9, kWidth, 4);
    const Matrix parts[] = {forward_batch(m.passion, x), forward_batch(m.credibility, x), forward_batch(m.trunk, x)};
    const Matrix staged = forward_batch(m.head, hconcat(parts));
    EXPECT_EQ(forward_hier(m, x), staged);
    EXPECT_EQ(forward_hier_cached(m, x).head.output(), staged);
}

TEST(ComposeTest, ZeroHeadGivesUniformOutput) {
    HierModel m = small_model();
    for (auto& l : m.head.layers()) {
        std::fill(l.weights.data().begin(), l.weights.data().end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    const Matrix probs = forward_hier(m, random_matrix(5, kWidth, 8));
    for (double p : probs.data())
        EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
}

TEST(ComposeTest, HierarchicalGradientMatchesFiniteDifferences) {
    HierModel m = small_model(3);
    const Batch b = small_batch(5, 6);
    const HierGradients g = backward_hier(m, b.x, b.y);
    EXPECT_DOUBLE_EQ(g.loss, cross_entropy_loss(forward_hier(m, b.x), b.y));
    auto check = [&](Mlp& net, const Gradients& grads) {
        for (std::size_t l = 0; l < net.depth(); ++l) {
            auto& w = net.layers()[l].weights.data();
            for (std::size_t k : {std::size_t{0}, w.size() / 2, w.size() - 1}) {
                const double saved = w[k];
                const double h = 1e-5;
                w[k] = saved + h;
                const double up = cross_entropy_loss(forward_hier(m, b.x), b.y);
                w[k] = saved - h;
                const double down = cross_entropy_loss(forward_hier(m, b.x), b.y);
                w[k] = saved;
                const double numeric = (up - down) / (2 * h);
                const double analytic = grads.layers[l].d_weights.data()[k];
                EXPECT_NEAR(analytic, numeric, 1e-6 + 1e-4 * std::abs(numeric));
            }
        }
    };
    check(m.passion, g.passion);
    check(m.credibility, g.credibility);
    check(m.trunk, g.trunk);
    check(m.head, g.head);
}

TEST(GateTest, AcceptanceRule) {
    EXPECT_FALSE(gate_accepts(1.2, 1.0, 1.0));
    EXPECT_TRUE(gate_accepts(0.9, 1.0, 1.0));
    EXPECT_TRUE(gate_accepts(1.0, 1.0, 1.0));
    EXPECT_TRUE(gate_accepts(1.05, 1.0, 1.1));
    EXPECT_FALSE(gate_accepts(1.2, 1.0, 1.1));
    EXPECT_TRUE(gate_accepts(1e300, 1.0, kInfiniteEpsilon));
    EXPECT_TRUE(gate_accepts(5.0, 0.0, kInfiniteEpsilon));
}

TEST(GateTest, RejectRevertsBitExactly) {
    HierModel m = small_model();
    const Batch b = small_batch();
    const double lr = 0.05;
    const auto [cand_p, cand_c] = candidate_losses(m, b, lr);
    TrainerState state = init_trainer_state(m, b.gate);
    state.passion_reference = cand_p / 1.2;
    state.credibility_reference = cand_c / 0.9;
    const Mlp p_before = m.passion;
    const Mlp c_before = m.credibility;
    const Mlp head_before = m.head;
    const auto decisions = hio_step(m, b.x, b.y, b.gate, gate_with(1.0), lr, state);
    ASSERT_EQ(decisions.size(), 2u);
    EXPECT_EQ(decisions[0].network, NetworkId::Passion);
    EXPECT_FALSE(decisions[0].accepted);
    EXPECT_TRUE(decisions[1].accepted);
    EXPECT_TRUE(params_identical(m.passion, p_before));
    EXPECT_FALSE(params_identical(m.credibility, c_before));
    EXPECT_FALSE(params_identical(m.head, head_before));
    EXPECT_DOUBLE_EQ(state.passion_reference, cand_p / 1.2);
    EXPECT_DOUBLE_EQ(state.credibility_reference, cand_c);
}

TEST(GateTest, ToleranceAndInfinity) {
    const Batch b = small_batch(7);
    const double lr = 0.05;
    for (double eps : {1.1, kInfiniteEpsilon}) {
        HierModel m = small_model(2);
        const auto [cand_p, cand_c] = candidate_losses(m, b, lr);
        TrainerState state = init_trainer_state(m, b.gate);
        state.passion_reference = cand_p / 1.05;
        state.credibility_reference = cand_c / 1.05;
        const auto d = hio_step(m, b.x, b.y, b.gate, gate_with(eps), lr, state);
        EXPECT_TRUE(d[0].accepted && d[1].accepted) << eps;
    }
    HierModel m = small_model(2);
    const auto [cand_p, cand_c] = candidate_losses(m, b, lr);
    TrainerState state = init_trainer_state(m, b.gate);
    state.passion_reference = cand_p / 1.2;
    state.credibility_reference = cand_c / 1.2;
    const auto d = hio_step(m, b.x, b.y, b.gate, gate_with(1.1), lr, state);
    EXPECT_FALSE(d[0].accepted);
    EXPECT_FALSE(d[1].accepted);
}

TEST(GateTest, InfiniteEpsilonEqualsPlainEndToEndTraining) {
    HierModel gated = small_model(4);
    HierModel plain = gated;
    const Batch b = small_batch(6, 20);
    TrainerState state = init_trainer_state(gated, b.gate);
    for (int i = 0; i < 100; ++i) {
        hio_step(gated, b.x, b.y, b.gate, gate_with(kInfiniteEpsilon), 0.01, state);
        end_to_end_step(plain, b.x, b.y, 0.01);
    }
    EXPECT_TRUE(params_identical(gated.passion, plain.passion));
    EXPECT_TRUE(params_identical(gated.credibility, plain.credibility));
    EXPECT_TRUE(params_identical(gated.trunk, plain.trunk));
    EXPECT_TRUE(params_identical(gated.head, plain.head));
    EXPECT_EQ(state.decisions.size(), 200u);
}

TEST(GateTest, FrozenModeLeavesIntermediatesUntouched) {
    HierModel m = small_model();
    const HierModel before = m;
    const Batch b = small_batch();
    TrainerState state;
    for (int i = 0; i < 10; ++i)
        hio_step(m, b.x, b.y, GateSet{}, gate_with(1.0), 0.05, state, IntermediateMode::Frozen);
    EXPECT_TRUE(params_identical(m.passion, before.passion));
    EXPECT_TRUE(params_identical(m.credibility, before.credibility));
    EXPECT_FALSE(params_identical(m.head, before.head));
    EXPECT_FALSE(params_identical(m.trunk, before.trunk));
    EXPECT_TRUE(state.decisions.empty());
    EXPECT_EQ(state.step, 10u);
}

TEST(GateTest, LastAcceptedReferencesNeverIncrease) {
    HierModel m = small_model(5);
    const Batch b = small_batch(9, 30);
    TrainerState state = init_trainer_state(m, b.gate);
    for (int i = 0; i < 300; ++i)
        hio_step(m, b.x, b.y, b.gate, gate_with(1.0), 0.05, state);
    double last_p = std::numeric_limits<double>::infinity();
    double last_c = last_p;
    std::size_t reverts = 0;
    for (const auto& d : state.decisions) {
        double& last = d.network == NetworkId::Passion ? last_p : last_c;
        EXPECT_LE(d.reference_loss, last);
        last = d.reference_loss;
        if (d.accepted) {
            EXPECT_LE(d.candidate_loss, d.reference_loss);
        }
        reverts += !d.accepted;
    }
    EXPECT_GT(reverts, 0u);
    EXPECT_LE(subtask_loss(m.passion, b.gate.x, b.gate.passion), state.decisions.front().reference_loss);
}

TEST(GateTest, ReferenceModes) {
    const Batch b = small_batch(3);
    const double lr = 0.05;
    for (auto mode : {ReferenceMode::PretrainedFixed, ReferenceMode::LastAccepted, ReferenceMode::RunningBest}) {
        HierModel m = small_model(6);
        const auto [cand_p, cand_c] = candidate_losses(m, b, lr);
        TrainerState state = init_trainer_state(m, b.gate);
        const double ref = cand_p * 2.0;
        state.passion_reference = ref;
        hio_step(m, b.x, b.y, b.gate, gate_with(1.5, mode), lr, state);
        const double expected = mode == ReferenceMode::PretrainedFixed ? ref : cand_p;
        EXPECT_DOUBLE_EQ(state.passion_reference, expected) << to_string(mode);
    }
    // running best keeps the minimum even when a worse candidate is accepted
    HierModel m = small_model(6);
    const auto [cand_p, cand_c] = candidate_losses(m, b, lr);
    TrainerState state = init_trainer_state(m, b.gate);
    state.passion_reference = cand_p / 1.2;
    hio_step(m, b.x, b.y, b.gate, gate_with(1.5, ReferenceMode::RunningBest), lr, state);
    EXPECT_TRUE(state.decisions[0].accepted);
    EXPECT_DOUBLE_EQ(state.passion_reference, cand_p / 1.2);
}

TEST(GateTest, IntervalRevertsToWindowStart) {
    HierModel m = small_model(7);
    const Batch b = small_batch(4);
    TrainerState state = init_trainer_state(m, b.gate);
    state.passion_reference = 1e-9;
    state.credibility_reference = 1e-9;
    const HierModel start = m;
    const GateConfig cfg = gate_with(1.0, ReferenceMode::LastAccepted, 3);
    EXPECT_TRUE(hio_step(m, b.x, b.y, b.gate, cfg, 0.05, state).empty());
    EXPECT_FALSE(params_identical(m.passion, start.passion));
    EXPECT_TRUE(hio_step(m, b.x, b.y, b.gate, cfg, 0.05, state).empty());
    const auto d = hio_step(m, b.x, b.y, b.gate, cfg, 0.05, state);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d[0].step, 2u);
    EXPECT_FALSE(d[0].accepted);
    EXPECT_TRUE(params_identical(m.passion, start.passion));
    EXPECT_TRUE(params_identical(m.credibility, start.credibility));
    EXPECT_FALSE(params_identical(m.head, start.head));
}

TEST(GateTest, MissingGateLabels) {
    HierModel m = small_model();
    Batch b = small_batch();
    b.gate.credibility.clear();
    EXPECT_THROW(init_trainer_state(m, b.gate), GateError);
    TrainerState state;
    EXPECT_THROW(hio_step(m, b.x, b.y, b.gate, gate_with(1.0), 0.01, state), GateError);
    EXPECT_THROW(hio_step(m, b.x, b.y, GateSet{}, gate_with(1.0), 0.01, state), GateError);
}

TEST(GateTest, ConfigValidation) {
    EXPECT_THROW(gate_with(-1.0).validate(), ConfigError);
    EXPECT_THROW(gate_with(std::nan("")).validate(), ConfigError);
    EXPECT_THROW(gate_with(1.0, ReferenceMode::LastAccepted, 0).validate(), ConfigError);
    EXPECT_NO_THROW(gate_with(kInfiniteEpsilon).validate());
    EXPECT_EQ(parse_reference_mode(to_string(ReferenceMode::RunningBest)), ReferenceMode::RunningBest);
    EXPECT_EQ(parse_gate_data(to_string(GateDataSource::Training)), GateDataSource::Training);
    EXPECT_EQ(parse_network_id("C"), NetworkId::Credibility);
    EXPECT_THROW(parse_reference_mode("best"), ConfigError);
}

TEST(PretrainTest, LearnsSeparableClasses) {
    Matrix x(60, 2);
    std::vector<int> y(60);
    Rng rng(3);
    const double centers[3][2] = {{-3, 0}, {3, 0}, {0, 4}};
    for (std::size_t i = 0; i < 60; ++i) {
        y[i] = static_cast<int>(i % 3);
        x(i, 0) = centers[y[i]][0] + 0.3 * rng.normal();
        x(i, 1) = centers[y[i]][1] + 0.3 * rng.normal();
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.epochs = 500;
    const auto r = pretrain_subtask(init_mlp({2, 5, 3}, Activation::ReLU, Activation::Softmax, 4), x, y, Matrix(),
                                    {}, cfg);
    EXPECT_LT(cross_entropy_loss(forward_batch(r.net, x), y), 0.1);
    EXPECT_DOUBLE_EQ(r.validation_accuracy, 1.0);
    EXPECT_EQ(r.curve.size(), 501u);
}

TEST(PretrainTest, ZeroEpochsKeepsInitialNetwork) {
    const Mlp net = init_mlp({4, 5, 3}, Activation::ReLU, Activation::Softmax, 4);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto r = pretrain_subtask(net, random_matrix(8, 4, 1), random_labels(8, 2), Matrix(), {}, cfg);
    EXPECT_TRUE(params_identical(r.net, net));
    EXPECT_EQ(r.best_epoch, 0u);
    EXPECT_THROW(pretrain_subtask(net, Matrix(), {}, Matrix(), {}, cfg), DataError);
    EXPECT_THROW(pretrain_subtask(net, random_matrix(8, 4, 1), random_labels(7, 2), Matrix(), {}, cfg), DataError);
}

TEST(PretrainTest, CheckpointTieBreak) {
    EXPECT_TRUE(detail::better_checkpoint(0.8, 5.0, 0.7, 1.0));
    EXPECT_TRUE(detail::better_checkpoint(0.7, 0.9, 0.7, 1.0));
    EXPECT_FALSE(detail::better_checkpoint(0.7, 1.0, 0.7, 1.0));
    EXPECT_FALSE(detail::better_checkpoint(0.6, 0.1, 0.7, 1.0));
}

TEST(PretrainTest, EpochBatches) {
    Rng a(1), b(1);
    const auto full = detail::epoch_batches(7, kFullBatch, a);
    ASSERT_EQ(full.size(), 1u);
    EXPECT_EQ(a.next_u64(), b.next_u64());
    const auto mini = detail::epoch_batches(7, 3, a);
    ASSERT_EQ(mini.size(), 3u);
    EXPECT_EQ(mini[2].size(), 1u);
    std::set<std::size_t> seen;
    for (const auto& batch : mini)
        seen.insert(batch.begin(), batch.end());
    EXPECT_EQ(seen.size(), 7u);
}

TEST(TrainerTest, HierarchicalTrainingKeepsBestCheckpoint) {
    const FoldData fold = hio::testing::small_fold();
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.checkpoint_interval_epochs = 5;
    const auto r = train_hio(fold, HierArchitecture{}, GateConfig{}, cfg);
    EXPECT_EQ(r.curve.size(), 31u);
    EXPECT_EQ(r.state.step, 30u);
    EXPECT_EQ(r.state.decisions.size(), 60u);
    EXPECT_EQ(r.model.head_input_width(), 11u);
    ASSERT_TRUE(r.state.best_model.has_value());
    EXPECT_TRUE(r.model == *r.state.best_model);
    EXPECT_EQ(r.state.best_epoch % 5, 0u);
    const double acc = accuracy(forward_hier(r.model, fold.validation.fused()), fold.validation.persuasion);
    EXPECT_DOUBLE_EQ(acc, r.state.best_accuracy);

    const auto again = train_hio(fold, HierArchitecture{}, GateConfig{}, cfg);
    EXPECT_TRUE(again.model == r.model);
    EXPECT_EQ(again.state.decisions, r.state.decisions);
}

TEST(TrainerTest, StackingVariants) {
    const FoldData fold = hio::testing::small_fold();
    TrainConfig cfg;
    cfg.epochs = 10;
    const auto frozen = train_stacking(fold, HierArchitecture{}, cfg, true);
    EXPECT_TRUE(frozen.state.decisions.empty());
    EXPECT_TRUE(params_identical(frozen.model.passion, frozen.passion_pretrain.net));
    const auto open = train_stacking(fold, HierArchitecture{}, cfg, false);
    for (const auto& d : open.state.decisions)
        EXPECT_TRUE(d.accepted);
}

TEST(TrainerTest, RejectsMissingData) {
    FoldData fold = hio::testing::small_fold();
    fold.train.passion.clear();
    EXPECT_THROW(train_hio(fold, HierArchitecture{}, GateConfig{}, TrainConfig{}), DataError);
    FoldData empty;
    EXPECT_THROW(train_hio(empty, HierArchitecture{}, GateConfig{}, TrainConfig{}), DataError);
}

TEST(LateFusionTest, ShapesAndTraining) {
    const std::size_t dims[] = {4, 6, 5};
    const LateFusionModel m = build_late_fusion(dims, 3);
    ASSERT_EQ(m.modality_nets.size(), 3u);
    EXPECT_EQ(m.fusion.input_width(), 9u);
    EXPECT_EQ(m.modality_nets[1].layer_sizes(), (std::vector<std::size_t>{6, 5, 5, 3}));
    EXPECT_THROW(build_late_fusion(std::span<const std::size_t>{}, 3), ConfigError);
    const std::vector<Matrix> mods{random_matrix(5, 4, 1), random_matrix(5, 6, 2), random_matrix(5, 5, 3)};
    EXPECT_EQ(late_fusion_inputs(m, mods).cols(), 9u);
    EXPECT_EQ(forward_late_fusion(m, mods).cols(), 3u);
    EXPECT_THROW(late_fusion_inputs(m, std::span<const Matrix>(mods).first(2)), ShapeError);

    const FoldData fold = hio::testing::small_fold();
    TrainConfig cfg;
    cfg.epochs = 20;
    const auto r = train_late_fusion(build_late_fusion(fold.train.modality_widths(), 5), fold.train,
                                     fold.train.persuasion, fold.validation, fold.validation.persuasion, cfg);
    EXPECT_EQ(r.modality_results.size(), fold.train.modalities.size());
    const double acc = accuracy(forward_late_fusion(r.model, fold.validation.modalities), fold.validation.persuasion);
    EXPECT_DOUBLE_EQ(acc, r.fusion_result.validation_accuracy);
}
