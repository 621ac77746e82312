#pragma once

// Hierarchical persuasion model: pretrained passion (P) and credibility (C)
// networks plus an intermediate persuasion trunk feed a fully connected head.
// The HIO trainer backpropagates end to end and gates every update to P and C
// on their own subtask loss; stacking is the same trainer with an infinite
// acceptable error rate. The late-fusion baseline lives here too.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hio/errors.hpp"
#include "hio/features.hpp"
#include "hio/matrix.hpp"
#include "hio/nn.hpp"
#include "hio/rng.hpp"

namespace hio {

// ---------------------------------------------------------------------------
// data handed to the trainers

/// Samples of one fold role: per-modality feature blocks and the three trait
/// labels. Subtask label vectors may be empty when unavailable.
struct TraitBatch {
    std::vector<Matrix> modalities;
    std::vector<int> persuasion;
    std::vector<int> passion;
    std::vector<int> credibility;

    std::size_t size() const { return modalities.empty() ? 0 : modalities.front().rows(); }
    bool empty() const { return size() == 0; }

    /// All modalities concatenated in order.
    Matrix fused() const { return hconcat(modalities); }

    std::vector<std::size_t> modality_widths() const {
        std::vector<std::size_t> w;
        for (const auto& m : modalities)
            w.push_back(m.cols());
        return w;
    }
};

struct FoldData {
    TraitBatch train;
    TraitBatch validation;
    TraitBatch test;
    /// Training subset used for Phase 1 pretraining of P and C.
    TraitBatch pretrain;
};

// ---------------------------------------------------------------------------
// single-network training with checkpointed early stopping

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = std::numeric_limits<double>::quiet_NaN();
    double validation_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct PretrainResult {
    Mlp net;
    double validation_loss = 0.0;
    double validation_accuracy = 0.0;
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> curve;
};

namespace detail {

/// Higher accuracy wins; equal accuracy falls back to lower loss.
inline bool better_checkpoint(double acc, double loss, double best_acc, double best_loss) {
    if (acc != best_acc)
        return acc > best_acc;
    return loss < best_loss;
}

/// Minibatch index lists for one epoch. Full batch consumes no randomness.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    if (batch_size == kFullBatch || batch_size >= n)
        return {std::move(order)};
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

inline std::vector<int> select(std::span<const int> v, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out[i] = v[idx[i]];
    return out;
}

} // namespace detail

/// SGD on the summed cross-entropy. Every checkpoint_interval_epochs (and at
/// epoch 0) the validation accuracy is measured and the best network kept.
/// An empty validation set falls back to the training set.
inline PretrainResult pretrain_subtask(Mlp net, const Matrix& x, std::span<const int> y, const Matrix& val_x,
                                       std::span<const int> val_y, const TrainConfig& cfg) {
    cfg.validate();
    if (x.rows() == 0)
        throw DataError("pretrain_subtask: empty training data");
    if (y.size() != x.rows())
        throw DataError("pretrain_subtask: training data lacks labels for the subtask");
    const bool has_val = val_x.rows() > 0;
    if (has_val && val_y.size() != val_x.rows())
        throw DataError("pretrain_subtask: validation data lacks labels for the subtask");
    const Matrix& vx = has_val ? val_x : x;
    const std::span<const int> vy = has_val ? val_y : y;

    PretrainResult result;
    auto evaluate = [&](const Mlp& m) {
        const Matrix probs = forward_batch(m, vx);
        return std::pair{accuracy(probs, vy), cross_entropy_loss(probs, vy)};
    };
    auto [best_acc, best_loss] = evaluate(net);
    Mlp best = net;
    result.curve.push_back({0, cross_entropy_loss(forward_batch(net, x), y), best_loss, best_acc});

    Rng rng(cfg.rng_seed);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (const auto& idx : detail::epoch_batches(x.rows(), cfg.batch_size, rng)) {
            const Matrix bx = idx.size() == x.rows() ? x : x.select_rows(idx);
            const std::vector<int> by = detail::select(y, idx);
            const ForwardCache cache = forward_cached(net, bx);
            epoch_loss += cross_entropy_loss(cache.output(), by);
            const auto back = backward_cross_entropy(net, cache, by);
            sgd_step(net, back.grads, cfg.learning_rate);
        }
        EpochRecord rec{epoch, epoch_loss};
        if (epoch % cfg.checkpoint_interval_epochs == 0 || epoch == cfg.epochs) {
            const auto [acc, loss] = evaluate(net);
            rec.validation_accuracy = acc;
            rec.validation_loss = loss;
            if (detail::better_checkpoint(acc, loss, best_acc, best_loss)) {
                best_acc = acc;
                best_loss = loss;
                best = net;
                result.best_epoch = epoch;
            }
        }
        result.curve.push_back(rec);
    }
    result.net = std::move(best);
    result.validation_accuracy = best_acc;
    result.validation_loss = best_loss;
    return result;
}

// ---------------------------------------------------------------------------
// composed model

struct HierModel {
    Mlp passion;     ///< P
    Mlp credibility; ///< C
    Mlp trunk;       ///< intermediate persuasion network with its output layer removed
    Mlp head;        ///< fully connected fusion head, Softmax output

    std::size_t head_input_width() const {
        return passion.output_width() + credibility.output_width() + trunk.output_width();
    }

    bool operator==(const HierModel&) const = default;
};

/// Pops the intermediate network's output layer and attaches a fresh head.
/// P, C and the trunk keep their pretrained parameters.
inline HierModel compose(Mlp passion, Mlp credibility, const Mlp& intermediate,
                         std::span<const std::size_t> head_sizes, std::uint64_t seed) {
    if (head_sizes.size() < 2)
        throw ArchitectureError("the head must be a fully connected network of 2 or more layers");
    HierModel model;
    model.trunk = pop_last_layer(intermediate);
    model.passion = std::move(passion);
    model.credibility = std::move(credibility);
    if (model.passion.input_width() != model.trunk.input_width() ||
        model.credibility.input_width() != model.trunk.input_width())
        throw ShapeError("P, C and the intermediate network must consume the same feature vector");
    if (head_sizes.front() != model.head_input_width())
        throw ShapeError("head input width " + std::to_string(head_sizes.front()) + " != concatenated width " +
                         std::to_string(model.head_input_width()));
    model.head = init_mlp(head_sizes, Activation::ReLU, Activation::Softmax, seed);
    return model;
}

struct HierCache {
    ForwardCache passion;
    ForwardCache credibility;
    ForwardCache trunk;
    ForwardCache head;
};

inline HierCache forward_hier_cached(const HierModel& model, const Matrix& x) {
    HierCache cache;
    cache.passion = forward_cached(model.passion, x);
    cache.credibility = forward_cached(model.credibility, x);
    cache.trunk = forward_cached(model.trunk, x);
    const Matrix parts[] = {cache.passion.output(), cache.credibility.output(), cache.trunk.output()};
    cache.head = forward_cached(model.head, hconcat(parts));
    return cache;
}

/// Persuasion class probabilities {negative, neutral, positive}.
inline Matrix forward_hier(const HierModel& model, const Matrix& x) {
    const Matrix parts[] = {forward_batch(model.passion, x), forward_batch(model.credibility, x),
                            forward_batch(model.trunk, x)};
    return forward_batch(model.head, hconcat(parts));
}

struct HierGradients {
    Gradients passion;
    Gradients credibility;
    Gradients trunk;
    Gradients head;
    double loss = 0.0; ///< persuasion loss of the batch before the update
};

/// Gradients of the summed persuasion cross-entropy through the head into
/// every sub-network.
inline HierGradients backward_hier(const HierModel& model, const Matrix& x, std::span<const int> labels) {
    if (x.rows() == 0)
        throw ShapeError("backward_hier needs a nonempty batch");
    const HierCache cache = forward_hier_cached(model, x);
    HierGradients g;
    g.loss = cross_entropy_loss(cache.head.output(), labels);
    auto head_back = backward_cross_entropy(model.head, cache.head, labels);
    g.head = std::move(head_back.grads);
    const std::size_t wp = model.passion.output_width();
    const std::size_t wc = model.credibility.output_width();
    const std::size_t wt = model.trunk.output_width();
    g.passion = backward_from_output(model.passion, cache.passion, col_block(head_back.input_grad, 0, wp)).grads;
    g.credibility =
        backward_from_output(model.credibility, cache.credibility, col_block(head_back.input_grad, wp, wc)).grads;
    g.trunk = backward_from_output(model.trunk, cache.trunk, col_block(head_back.input_grad, wp + wc, wt)).grads;
    return g;
}

/// One unconstrained SGD step on every parameter of the composed network.
/// Returns the batch loss before the update.
inline double end_to_end_step(HierModel& model, const Matrix& x, std::span<const int> labels, double learning_rate) {
    const HierGradients g = backward_hier(model, x, labels);
    sgd_step(model.head, g.head, learning_rate);
    sgd_step(model.trunk, g.trunk, learning_rate);
    sgd_step(model.passion, g.passion, learning_rate);
    sgd_step(model.credibility, g.credibility, learning_rate);
    return g.loss;
}

// ---------------------------------------------------------------------------
// gate

inline constexpr double kInfiniteEpsilon = std::numeric_limits<double>::infinity();

enum class ReferenceMode {
    PretrainedFixed, ///< reference stays at the post-pretraining loss
    LastAccepted,    ///< reference <- candidate on every accept
    RunningBest,     ///< reference <- min(reference, candidate) on accept
};

enum class GateDataSource { Validation, Training };

enum class NetworkId { Passion, Credibility };

inline std::string_view to_string(ReferenceMode m) {
    switch (m) {
    case ReferenceMode::PretrainedFixed: return "pretrained_fixed";
    case ReferenceMode::LastAccepted: return "last_accepted";
    case ReferenceMode::RunningBest: return "running_best";
    }
    return "?";
}

inline ReferenceMode parse_reference_mode(std::string_view s) {
    if (s == "pretrained_fixed") return ReferenceMode::PretrainedFixed;
    if (s == "last_accepted") return ReferenceMode::LastAccepted;
    if (s == "running_best") return ReferenceMode::RunningBest;
    throw ConfigError("unknown reference mode '" + std::string(s) + "'");
}

inline std::string_view to_string(GateDataSource g) {
    return g == GateDataSource::Validation ? "validation" : "training";
}

inline GateDataSource parse_gate_data(std::string_view s) {
    if (s == "validation") return GateDataSource::Validation;
    if (s == "training") return GateDataSource::Training;
    throw ConfigError("unknown gate data source '" + std::string(s) + "'");
}

inline std::string_view to_string(NetworkId n) { return n == NetworkId::Passion ? "P" : "C"; }

inline NetworkId parse_network_id(std::string_view s) {
    if (s == "P") return NetworkId::Passion;
    if (s == "C") return NetworkId::Credibility;
    throw ConfigError("unknown network id '" + std::string(s) + "'");
}

struct GateConfig {
    double epsilon = 1.0; ///< acceptable error rate; kInfiniteEpsilon never reverts
    ReferenceMode reference_mode = ReferenceMode::LastAccepted;
    std::size_t gate_interval_steps = 1;
    GateDataSource gate_data = GateDataSource::Validation;

    void validate() const {
        if (std::isnan(epsilon) || epsilon < 0.0)
            throw ConfigError("epsilon must be >= 0 or infinity");
        if (gate_interval_steps < 1)
            throw ConfigError("gate_interval_steps must be >= 1");
    }
};

/// candidate <= epsilon * reference, with an infinite epsilon accepting all.
inline bool gate_accepts(double candidate_loss, double reference_loss, double epsilon) {
    if (std::isinf(epsilon) && epsilon > 0.0)
        return true;
    return candidate_loss <= epsilon * reference_loss;
}

struct GateDecision {
    std::uint64_t step = 0;
    NetworkId network = NetworkId::Passion;
    double reference_loss = 0.0;
    double candidate_loss = 0.0;
    double epsilon = 1.0;
    bool accepted = true;

    bool operator==(const GateDecision&) const = default;
};

/// Held-out data for the imaginary forward pass: features with P's and C's
/// own labels.
struct GateSet {
    Matrix x;
    std::vector<int> passion;
    std::vector<int> credibility;
};

enum class IntermediateMode {
    Gated,  ///< P and C are updated, then accepted or reverted by the gate
    Frozen, ///< P and C receive no update (classical stacking)
};

struct TrainerState {
    std::uint64_t step = 0;
    double last_batch_loss = 0.0; ///< persuasion loss before the latest update
    double passion_reference = 0.0;
    double credibility_reference = 0.0;
    /// P and C as they were at the start of the current gate window.
    std::optional<Snapshot> passion_window;
    std::optional<Snapshot> credibility_window;
    std::vector<GateDecision> decisions;

    std::optional<HierModel> best_model;
    double best_accuracy = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
};

namespace detail {

inline void check_gate_set(const GateSet& gate) {
    if (gate.x.rows() == 0)
        throw GateError("gate data is empty");
    if (gate.passion.size() != gate.x.rows() || gate.credibility.size() != gate.x.rows())
        throw GateError("gate data lacks passion or credibility labels");
}

} // namespace detail

inline double subtask_loss(const Mlp& net, const Matrix& x, std::span<const int> labels) {
    return cross_entropy_loss(forward_batch(net, x), labels);
}

/// Reference losses of the pretrained P and C on the gate data.
inline TrainerState init_trainer_state(const HierModel& model, const GateSet& gate) {
    detail::check_gate_set(gate);
    TrainerState state;
    state.passion_reference = subtask_loss(model.passion, gate.x, gate.passion);
    state.credibility_reference = subtask_loss(model.credibility, gate.x, gate.credibility);
    return state;
}

/// One HIO optimizer step: backprop through the whole hierarchy, update all
/// parameters, then (on gate steps) run the imaginary forward pass for P and
/// C and revert either network whose subtask loss exceeds epsilon times its
/// reference. Head and trunk are never gated. Returns this step's decisions.
inline std::vector<GateDecision> hio_step(HierModel& model, const Matrix& x, std::span<const int> labels,
                                          const GateSet& gate, const GateConfig& gate_cfg, double learning_rate,
                                          TrainerState& state, IntermediateMode mode = IntermediateMode::Gated) {
    gate_cfg.validate();
    const bool gated = mode == IntermediateMode::Gated;
    if (gated)
        detail::check_gate_set(gate);

    if (gated && (state.step % gate_cfg.gate_interval_steps == 0 || !state.passion_window)) {
        state.passion_window = snapshot(model.passion, state.step);
        state.credibility_window = snapshot(model.credibility, state.step);
    }

    const HierGradients g = backward_hier(model, x, labels);
    state.last_batch_loss = g.loss;
    sgd_step(model.head, g.head, learning_rate);
    sgd_step(model.trunk, g.trunk, learning_rate);
    if (gated) {
        sgd_step(model.passion, g.passion, learning_rate);
        sgd_step(model.credibility, g.credibility, learning_rate);
    }
    const std::uint64_t step = state.step++;

    std::vector<GateDecision> decisions;
    if (!gated || state.step % gate_cfg.gate_interval_steps != 0)
        return decisions;

    auto gate_one = [&](NetworkId id, Mlp& net, std::span<const int> gate_labels, double& reference,
                        const Snapshot& window) {
        GateDecision d;
        d.step = step;
        d.network = id;
        d.reference_loss = reference;
        d.candidate_loss = subtask_loss(net, gate.x, gate_labels);
        d.epsilon = gate_cfg.epsilon;
        d.accepted = gate_accepts(d.candidate_loss, d.reference_loss, d.epsilon);
        if (!d.accepted) {
            restore(net, window);
        } else if (gate_cfg.reference_mode == ReferenceMode::LastAccepted) {
            reference = d.candidate_loss;
        } else if (gate_cfg.reference_mode == ReferenceMode::RunningBest) {
            reference = std::min(reference, d.candidate_loss);
        }
        decisions.push_back(d);
    };
    gate_one(NetworkId::Passion, model.passion, gate.passion, state.passion_reference, *state.passion_window);
    gate_one(NetworkId::Credibility, model.credibility, gate.credibility, state.credibility_reference,
             *state.credibility_window);
    state.decisions.insert(state.decisions.end(), decisions.begin(), decisions.end());
    return decisions;
}

// ---------------------------------------------------------------------------
// full hierarchical trainer (phases 1-3)

struct HierArchitecture {
    std::vector<std::size_t> passion_hidden{5, 5, 5, 5};
    std::vector<std::size_t> credibility_hidden{5, 5, 5, 5};
    std::vector<std::size_t> intermediate_hidden{5, 5, 5};
    std::vector<std::size_t> head_hidden{5, 5, 5};
};

struct HierTrainResult {
    HierModel model;
    TrainerState state;
    PretrainResult passion_pretrain;
    PretrainResult credibility_pretrain;
    PretrainResult intermediate_pretrain;
    std::vector<EpochRecord> curve; ///< Phase 3
};

namespace detail {

inline std::vector<std::size_t> sizes_with(std::size_t input, std::span<const std::size_t> hidden,
                                           std::size_t output) {
    std::vector<std::size_t> s{input};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(output);
    return s;
}

inline void require_labels(const TraitBatch& b, std::string_view role) {
    const std::string r(role);
    if (b.persuasion.size() != b.size())
        throw DataError(r + " data lacks persuasion labels");
    if (b.passion.size() != b.size() || b.credibility.size() != b.size())
        throw DataError(r + " data lacks passion or credibility labels");
}

} // namespace detail

/// Phases 1-3: pretrain P and C on fold.pretrain, pretrain the intermediate
/// network on fold.train, compose, then train end to end with hio_step.
/// Early stopping keeps the checkpoint with the best validation persuasion
/// accuracy, evaluated every checkpoint_interval_epochs.
inline HierTrainResult train_hierarchical(const FoldData& fold, const HierArchitecture& arch,
                                          const GateConfig& gate_cfg, const TrainConfig& train_cfg,
                                          IntermediateMode mode = IntermediateMode::Gated) {
    gate_cfg.validate();
    train_cfg.validate();
    if (fold.train.empty() || fold.pretrain.empty())
        throw DataError("training data is empty");
    detail::require_labels(fold.train, "training");
    detail::require_labels(fold.pretrain, "pretraining");
    if (!fold.validation.empty())
        detail::require_labels(fold.validation, "validation");

    const Matrix x_train = fold.train.fused();
    const Matrix x_pre = fold.pretrain.fused();
    const Matrix x_val = fold.validation.empty() ? Matrix() : fold.validation.fused();
    const std::size_t d = x_train.cols();
    const std::uint64_t seed = train_cfg.rng_seed;
    auto phase_cfg = [&](std::uint64_t stream) {
        TrainConfig c = train_cfg;
        c.rng_seed = Rng::derive(seed, stream);
        return c;
    };

    HierTrainResult out;
    // Phase 1
    const auto p_sizes = detail::sizes_with(d, arch.passion_hidden, kNumClasses);
    const auto c_sizes = detail::sizes_with(d, arch.credibility_hidden, kNumClasses);
    out.passion_pretrain =
        pretrain_subtask(init_mlp(p_sizes, Activation::ReLU, Activation::Softmax, Rng::derive(seed, 1)), x_pre,
                         fold.pretrain.passion, x_val, fold.validation.passion, phase_cfg(11));
    out.credibility_pretrain =
        pretrain_subtask(init_mlp(c_sizes, Activation::ReLU, Activation::Softmax, Rng::derive(seed, 2)), x_pre,
                         fold.pretrain.credibility, x_val, fold.validation.credibility, phase_cfg(12));
    // Phase 2
    const auto i_sizes = detail::sizes_with(d, arch.intermediate_hidden, kNumClasses);
    out.intermediate_pretrain =
        pretrain_subtask(init_mlp(i_sizes, Activation::ReLU, Activation::Softmax, Rng::derive(seed, 3)), x_train,
                         fold.train.persuasion, x_val, fold.validation.persuasion, phase_cfg(13));
    // Phase 3
    const std::size_t head_in = 2 * kNumClasses + out.intermediate_pretrain.net.layer_sizes().rbegin()[1];
    const auto h_sizes = detail::sizes_with(head_in, arch.head_hidden, kNumClasses);
    HierModel model = compose(out.passion_pretrain.net, out.credibility_pretrain.net, out.intermediate_pretrain.net,
                              h_sizes, Rng::derive(seed, 4));

    GateSet gate;
    if (gate_cfg.gate_data == GateDataSource::Validation && !fold.validation.empty())
        gate = {x_val, fold.validation.passion, fold.validation.credibility};
    else
        gate = {x_train, fold.train.passion, fold.train.credibility};

    TrainerState state = init_trainer_state(model, gate);
    const Matrix& x_check = fold.validation.empty() ? x_train : x_val;
    const std::vector<int>& y_check = fold.validation.empty() ? fold.train.persuasion : fold.validation.persuasion;
    auto checkpoint = [&](std::size_t epoch, EpochRecord& rec) {
        const Matrix probs = forward_hier(model, x_check);
        rec.validation_accuracy = accuracy(probs, y_check);
        rec.validation_loss = cross_entropy_loss(probs, y_check);
        if (detail::better_checkpoint(rec.validation_accuracy, rec.validation_loss, state.best_accuracy,
                                      state.best_loss)) {
            state.best_accuracy = rec.validation_accuracy;
            state.best_loss = rec.validation_loss;
            state.best_model = model;
            state.best_epoch = epoch;
        }
    };
    EpochRecord initial{0, cross_entropy_loss(forward_hier(model, x_train), fold.train.persuasion)};
    checkpoint(0, initial);
    out.curve.push_back(initial);

    Rng rng(Rng::derive(seed, 5));
    for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        EpochRecord rec{epoch, 0.0};
        for (const auto& idx : detail::epoch_batches(x_train.rows(), train_cfg.batch_size, rng)) {
            const bool whole = idx.size() == x_train.rows();
            const Matrix bx = whole ? x_train : x_train.select_rows(idx);
            const std::vector<int> by = detail::select(fold.train.persuasion, idx);
            hio_step(model, bx, by, gate, gate_cfg, train_cfg.learning_rate, state, mode);
            rec.train_loss += state.last_batch_loss;
        }
        if (epoch % train_cfg.checkpoint_interval_epochs == 0 || epoch == train_cfg.epochs)
            checkpoint(epoch, rec);
        out.curve.push_back(rec);
    }
    out.model = *state.best_model;
    out.state = std::move(state);
    return out;
}

/// HIO: gated end-to-end training with the configured acceptable error rate.
inline HierTrainResult train_hio(const FoldData& fold, const HierArchitecture& arch, const GateConfig& gate_cfg,
                                 const TrainConfig& train_cfg) {
    return train_hierarchical(fold, arch, gate_cfg, train_cfg, IntermediateMode::Gated);
}

/// Stacking: the same trainer with an infinite acceptable error rate, or with
/// P and C frozen when frozen_intermediates is set.
inline HierTrainResult train_stacking(const FoldData& fold, const HierArchitecture& arch,
                                      const TrainConfig& train_cfg, bool frozen_intermediates = false) {
    GateConfig gate;
    gate.epsilon = kInfiniteEpsilon;
    return train_hierarchical(fold, arch, gate, train_cfg,
                              frozen_intermediates ? IntermediateMode::Frozen : IntermediateMode::Gated);
}

// ---------------------------------------------------------------------------
// late-fusion baseline

struct LateFusionModel {
    std::vector<Mlp> modality_nets; ///< one per modality, each predicting 3 classes
    Mlp fusion;                     ///< consumes the concatenated modality outputs

    bool operator==(const LateFusionModel&) const = default;
};

struct LateFusionArchitecture {
    std::vector<std::size_t> modality_hidden{5, 5};
    std::vector<std::size_t> fusion_hidden{5};
};

inline LateFusionModel build_late_fusion(std::span<const std::size_t> modality_dims, std::uint64_t seed,
                                         const LateFusionArchitecture& arch = {}) {
    if (modality_dims.empty())
        throw ConfigError("late fusion needs at least one modality");
    LateFusionModel model;
    for (std::size_t m = 0; m < modality_dims.size(); ++m)
        model.modality_nets.push_back(init_mlp(detail::sizes_with(modality_dims[m], arch.modality_hidden, kNumClasses),
                                               Activation::ReLU, Activation::Softmax, Rng::derive(seed, 100 + m)));
    model.fusion = init_mlp(detail::sizes_with(kNumClasses * modality_dims.size(), arch.fusion_hidden, kNumClasses),
                            Activation::ReLU, Activation::Softmax, Rng::derive(seed, 99));
    return model;
}

inline Matrix late_fusion_inputs(const LateFusionModel& model, std::span<const Matrix> modalities) {
    if (modalities.size() != model.modality_nets.size())
        throw ShapeError("late fusion expects " + std::to_string(model.modality_nets.size()) + " modalities, got " +
                         std::to_string(modalities.size()));
    std::vector<Matrix> outs;
    for (std::size_t m = 0; m < modalities.size(); ++m)
        outs.push_back(forward_batch(model.modality_nets[m], modalities[m]));
    return hconcat(outs);
}

inline Matrix forward_late_fusion(const LateFusionModel& model, std::span<const Matrix> modalities) {
    return forward_batch(model.fusion, late_fusion_inputs(model, modalities));
}

struct LateFusionTrainResult {
    LateFusionModel model;
    std::vector<PretrainResult> modality_results;
    PretrainResult fusion_result;
};

/// Trains each modality network on the target labels, then the fusion network
/// on their frozen outputs. Both stages use checkpointed early stopping.
inline LateFusionTrainResult train_late_fusion(LateFusionModel model, const TraitBatch& train,
                                               std::span<const int> train_labels, const TraitBatch& validation,
                                               std::span<const int> val_labels, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty())
        throw DataError("late fusion: empty training data");
    const bool has_val = !validation.empty();
    LateFusionTrainResult out;
    for (std::size_t m = 0; m < model.modality_nets.size(); ++m) {
        TrainConfig c = cfg;
        c.rng_seed = Rng::derive(cfg.rng_seed, 200 + m);
        auto r = pretrain_subtask(model.modality_nets[m], train.modalities[m], train_labels,
                                  has_val ? validation.modalities[m] : Matrix(), val_labels, c);
        model.modality_nets[m] = r.net;
        out.modality_results.push_back(std::move(r));
    }
    TrainConfig c = cfg;
    c.rng_seed = Rng::derive(cfg.rng_seed, 299);
    const Matrix fused_train = late_fusion_inputs(model, train.modalities);
    const Matrix fused_val = has_val ? late_fusion_inputs(model, validation.modalities) : Matrix();
    out.fusion_result = pretrain_subtask(model.fusion, fused_train, train_labels, fused_val, val_labels, c);
    model.fusion = out.fusion_result.net;
    out.model = std::move(model);
    return out;
}

} // namespace hio
