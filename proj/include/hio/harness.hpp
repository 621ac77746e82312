#pragma once

// Experiment driver: speaker-independent cross-validation over one model
// variant, paired multi-variant comparison, and report emission.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hio/dataset.hpp"
#include "hio/errors.hpp"
#include "hio/features.hpp"
#include "hio/hierarchy.hpp"
#include "hio/nn.hpp"

namespace hio {

enum class ModelVariant { LateFusionBaseline, Stacking, Hio, FrozenStacking, TextOnly };

inline std::string_view to_string(ModelVariant v) {
    switch (v) {
    case ModelVariant::LateFusionBaseline: return "late_fusion";
    case ModelVariant::Stacking: return "stacking";
    case ModelVariant::Hio: return "hio";
    case ModelVariant::FrozenStacking: return "frozen_stacking";
    case ModelVariant::TextOnly: return "text_only";
    }
    return "?";
}

inline ModelVariant parse_variant(std::string_view s) {
    if (s == "late_fusion") return ModelVariant::LateFusionBaseline;
    if (s == "stacking") return ModelVariant::Stacking;
    if (s == "hio") return ModelVariant::Hio;
    if (s == "frozen_stacking") return ModelVariant::FrozenStacking;
    if (s == "text_only") return ModelVariant::TextOnly;
    throw ConfigError("unknown model variant '" + std::string(s) + "'");
}

struct ExperimentConfig {
    std::string dataset_path; ///< empty selects the synthetic generator
    SyntheticConfig synthetic;
    ModelVariant variant = ModelVariant::Hio;
    GateConfig gate;
    TrainConfig train;
    HierArchitecture hier_arch;
    LateFusionArchitecture fusion_arch;
    std::size_t select_k = 100;                          ///< features kept per modality
    TTestGrouping selection_grouping = TTestGrouping::HighVsLow;
    std::size_t n_folds = 10;
    std::size_t pretrain_folds = 0; ///< folds used to pretrain P and C; 0 = all training folds
    std::uint64_t seed = 42;
    std::size_t threads = 0; ///< concurrent folds; 0 = hardware concurrency

    /// Gate settings actually used by the variant.
    GateConfig effective_gate() const {
        GateConfig g = gate;
        if (variant == ModelVariant::Stacking || variant == ModelVariant::FrozenStacking)
            g.epsilon = kInfiniteEpsilon;
        return g;
    }

    void validate() const {
        if (dataset_path.empty())
            synthetic.validate();
        gate.validate();
        train.validate();
        if (select_k == 0)
            throw ConfigError("select_k must be positive");
        if (n_folds < 3)
            throw ConfigError("n_folds must be at least 3");
        if (pretrain_folds > n_folds - 2)
            throw ConfigError("pretrain_folds exceeds the number of training folds");
    }
};

using ConfusionMatrix = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>; ///< [true][predicted]

struct GateSummary {
    std::size_t passion_accepts = 0;
    std::size_t passion_reverts = 0;
    std::size_t credibility_accepts = 0;
    std::size_t credibility_reverts = 0;

    bool operator==(const GateSummary&) const = default;
};

struct FoldReport {
    FoldRoles roles;
    std::size_t n_test = 0;
    double accuracy = 0.0;
    ConfusionMatrix confusion{};
    GateSummary gate;
    double validation_accuracy = 0.0; ///< of the kept checkpoint
    std::size_t best_epoch = 0;
    std::vector<GateDecision> decisions;
    std::vector<EpochRecord> curve;
    double wall_seconds = 0.0; ///< not part of the deterministic outputs
};

struct RunReport {
    nlohmann::ordered_json config; ///< echo of the effective configuration
    FoldPlan plan;
    std::vector<FoldReport> folds;
    double mean_accuracy = 0.0;
};

// ---------------------------------------------------------------------------
// configuration echo

inline nlohmann::ordered_json epsilon_to_json(double eps) {
    if (std::isinf(eps))
        return "inf";
    return eps;
}

inline double epsilon_from_json(const nlohmann::ordered_json& j) {
    if (j.is_string())
        return parse_double(j.get<std::string>());
    return j.get<double>();
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    if (cfg.dataset_path.empty()) {
        const auto& s = cfg.synthetic;
        j["dataset"] = {{"source", "synthetic"},
                        {"n_samples", s.n_samples},
                        {"n_speakers", s.n_speakers},
                        {"modality_widths", s.modality_widths},
                        {"modality_names", s.modality_names},
                        {"noise_level", s.noise_level},
                        {"passion_persuasion_corr", s.passion_persuasion_corr},
                        {"credibility_persuasion_corr", s.credibility_persuasion_corr},
                        {"speaker_scale", s.speaker_scale},
                        {"seed", s.seed}};
    } else {
        j["dataset"] = {{"source", "file"}, {"path", cfg.dataset_path}};
    }
    const GateConfig g = cfg.effective_gate();
    j["variant"] = to_string(cfg.variant);
    j["gate"] = {{"epsilon", epsilon_to_json(g.epsilon)},
                 {"reference_mode", to_string(g.reference_mode)},
                 {"gate_interval_steps", g.gate_interval_steps},
                 {"gate_data", to_string(g.gate_data)}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"checkpoint_interval_epochs", cfg.train.checkpoint_interval_epochs}};
    j["select_k"] = cfg.select_k;
    j["selection_grouping"] = cfg.selection_grouping == TTestGrouping::HighVsLow ? "high_vs_low" : "one_vs_rest";
    j["n_folds"] = cfg.n_folds;
    j["pretrain_folds"] = cfg.pretrain_folds;
    j["seed"] = cfg.seed;
    return j;
}

// ---------------------------------------------------------------------------
// per-fold preprocessing

namespace detail {

inline std::vector<std::size_t> gather(const std::vector<std::vector<std::size_t>>& members,
                                       std::span<const std::size_t> folds) {
    std::vector<std::size_t> out;
    for (auto f : folds)
        out.insert(out.end(), members[f].begin(), members[f].end());
    std::sort(out.begin(), out.end());
    return out;
}

/// Column selection and z-scoring fitted on training rows only.
struct ModalityTransform {
    std::size_t modality = 0;
    std::vector<std::size_t> columns;
    std::vector<double> mean;
    std::vector<double> scale;

    Matrix apply(const Dataset& data, std::span<const std::size_t> rows) const {
        Matrix m = data.modality_matrix(modality, rows).select_cols(columns);
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                m(r, c) = (m(r, c) - mean[c]) / scale[c];
        return m;
    }
};

inline ModalityTransform fit_transform(const Dataset& data, std::size_t modality, std::span<const std::size_t> rows,
                                       std::span<const int> persuasion, std::size_t k, TTestGrouping grouping) {
    ModalityTransform t;
    t.modality = modality;
    const Matrix raw = data.modality_matrix(modality, rows);
    TTestOptions opt;
    opt.grouping = grouping;
    auto sel = ttest_select(raw, persuasion, k, opt).selected_indices;
    std::sort(sel.begin(), sel.end());
    t.columns = std::move(sel);
    const Matrix chosen = raw.select_cols(t.columns);
    const double n = static_cast<double>(chosen.rows());
    t.mean.assign(chosen.cols(), 0.0);
    t.scale.assign(chosen.cols(), 1.0);
    for (std::size_t c = 0; c < chosen.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < chosen.rows(); ++r)
            sum += chosen(r, c);
        const double mu = sum / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < chosen.rows(); ++r)
            ss += (chosen(r, c) - mu) * (chosen(r, c) - mu);
        const double sd = std::sqrt(ss / n);
        t.mean[c] = mu;
        t.scale[c] = sd > 1e-12 ? sd : 1.0;
    }
    return t;
}

inline TraitBatch make_batch(const Dataset& data, const std::vector<ModalityTransform>& transforms,
                             std::span<const std::size_t> rows) {
    TraitBatch b;
    for (const auto& t : transforms)
        b.modalities.push_back(t.apply(data, rows));
    b.persuasion = data.labels(kPersuasion, rows);
    b.passion = data.labels(kPassion, rows);
    b.credibility = data.labels(kCredibility, rows);
    return b;
}

} // namespace detail

/// Feature selection, scaling and role split for one test fold.
inline FoldData prepare_fold(const Dataset& data, const FoldPlan& plan, const FoldRoles& roles,
                             const ExperimentConfig& cfg) {
    const auto members = plan.members(data);
    const auto train_rows = detail::gather(members, roles.training_folds);
    const std::size_t val_fold[] = {roles.validation_fold};
    const std::size_t test_fold[] = {roles.test_fold};
    const auto val_rows = detail::gather(members, val_fold);
    const auto test_rows = detail::gather(members, test_fold);
    std::vector<std::size_t> pre_rows = train_rows;
    if (cfg.pretrain_folds != 0)
        pre_rows = detail::gather(members, semisupervised_plan(plan, roles, cfg.pretrain_folds));
    if (train_rows.empty() || test_rows.empty())
        throw DataError("empty training or test fold");

    std::vector<std::size_t> modalities;
    if (cfg.variant == ModelVariant::TextOnly) {
        modalities.push_back(data.modality_index(kTextModality));
    } else {
        for (std::size_t m = 0; m < data.modality_names().size(); ++m)
            modalities.push_back(m);
    }
    const auto persuasion = data.labels(kPersuasion, train_rows);
    std::vector<detail::ModalityTransform> transforms;
    for (auto m : modalities)
        transforms.push_back(
            detail::fit_transform(data, m, train_rows, persuasion, cfg.select_k, cfg.selection_grouping));

    FoldData fold;
    fold.train = detail::make_batch(data, transforms, train_rows);
    fold.validation = detail::make_batch(data, transforms, val_rows);
    fold.test = detail::make_batch(data, transforms, test_rows);
    fold.pretrain = detail::make_batch(data, transforms, pre_rows);
    return fold;
}

inline ConfusionMatrix confusion_matrix(const Matrix& probs, std::span<const int> labels) {
    ConfusionMatrix cm{};
    const auto pred = predict_classes(probs);
    for (std::size_t i = 0; i < labels.size(); ++i)
        ++cm.at(static_cast<std::size_t>(labels[i])).at(static_cast<std::size_t>(pred[i]));
    return cm;
}

inline GateSummary summarize(std::span<const GateDecision> decisions) {
    GateSummary s;
    for (const auto& d : decisions) {
        if (d.network == NetworkId::Passion)
            ++(d.accepted ? s.passion_accepts : s.passion_reverts);
        else
            ++(d.accepted ? s.credibility_accepts : s.credibility_reverts);
    }
    return s;
}

/// Trains the configured variant on one fold and scores the test role.
inline FoldReport run_fold(const Dataset& data, const FoldPlan& plan, const FoldRoles& roles,
                           const ExperimentConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    const FoldData fold = prepare_fold(data, plan, roles, cfg);
    TrainConfig tc = cfg.train;
    tc.rng_seed = Rng::derive(cfg.seed, 2000 + roles.test_fold);

    FoldReport rep;
    rep.roles = roles;
    rep.n_test = fold.test.size();
    Matrix probs;
    if (cfg.variant == ModelVariant::LateFusionBaseline) {
        auto model = build_late_fusion(fold.train.modality_widths(), tc.rng_seed, cfg.fusion_arch);
        auto res = train_late_fusion(std::move(model), fold.train, fold.train.persuasion, fold.validation,
                                     fold.validation.persuasion, tc);
        probs = forward_late_fusion(res.model, fold.test.modalities);
        rep.validation_accuracy = res.fusion_result.validation_accuracy;
        rep.best_epoch = res.fusion_result.best_epoch;
        rep.curve = res.fusion_result.curve;
    } else {
        const auto mode =
            cfg.variant == ModelVariant::FrozenStacking ? IntermediateMode::Frozen : IntermediateMode::Gated;
        auto res = train_hierarchical(fold, cfg.hier_arch, cfg.effective_gate(), tc, mode);
        probs = forward_hier(res.model, fold.test.fused());
        rep.validation_accuracy = res.state.best_accuracy;
        rep.best_epoch = res.state.best_epoch;
        rep.decisions = std::move(res.state.decisions);
        rep.curve = std::move(res.curve);
    }
    rep.accuracy = accuracy(probs, fold.test.persuasion);
    rep.confusion = confusion_matrix(probs, fold.test.persuasion);
    rep.gate = summarize(rep.decisions);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rep;
}

inline Dataset resolve_dataset(const ExperimentConfig& cfg) {
    return cfg.dataset_path.empty() ? gen_synthetic(cfg.synthetic) : load_dataset(cfg.dataset_path);
}

/// Cross-validation over every fold as test fold; folds run concurrently.
inline RunReport run_cv(const ExperimentConfig& cfg, const Dataset& data) {
    cfg.validate();
    RunReport report;
    report.config = config_to_json(cfg);
    report.plan = split_folds(data, cfg.n_folds, cfg.seed);
    report.folds.resize(cfg.n_folds);

    std::vector<std::exception_ptr> errors(cfg.n_folds);
    std::size_t workers = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, cfg.n_folds);
    std::mutex next_mutex;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t f = 0;
            {
                std::lock_guard lock(next_mutex);
                if (next == cfg.n_folds)
                    return;
                f = next++;
            }
            try {
                report.folds[f] = run_fold(data, report.plan, draw_roles(report.plan, f, cfg.seed), cfg);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(worker);
    }
    for (std::size_t f = 0; f < errors.size(); ++f) {
        if (!errors[f])
            continue;
        try {
            std::rethrow_exception(errors[f]);
        } catch (const std::exception& e) {
            throw Error("fold " + std::to_string(f) + ": " + e.what());
        }
    }
    double total = 0.0;
    for (const auto& f : report.folds)
        total += f.accuracy;
    report.mean_accuracy = total / static_cast<double>(report.folds.size());
    return report;
}

inline RunReport run_cv(const ExperimentConfig& cfg) {
    cfg.validate();
    return run_cv(cfg, resolve_dataset(cfg));
}

// ---------------------------------------------------------------------------
// comparison

struct VariantComparison {
    std::string name;
    double mean_accuracy = 0.0;
    std::vector<double> fold_accuracy;
    std::vector<double> paired_difference; ///< fold accuracy minus the reference variant's
    double mean_difference = 0.0;
    GateSummary gate;
};

struct ComparisonTable {
    std::string reference; ///< first variant; differences are taken against it
    std::vector<VariantComparison> variants;
};

/// Pairs reports fold by fold. All reports must share the fold plan and the
/// validation draw of every fold.
inline ComparisonTable compare_reports(const std::vector<RunReport>& reports, const std::vector<std::string>& names) {
    if (reports.empty() || reports.size() != names.size())
        throw ConfigError("comparison needs one name per report and at least one report");
    const RunReport& ref = reports.front();
    ComparisonTable table;
    table.reference = names.front();
    for (std::size_t v = 0; v < reports.size(); ++v) {
        const RunReport& r = reports[v];
        if (!(r.plan == ref.plan) || r.folds.size() != ref.folds.size())
            throw ConfigError("variant '" + names[v] + "' uses a different fold plan");
        VariantComparison vc;
        vc.name = names[v];
        vc.mean_accuracy = r.mean_accuracy;
        std::vector<GateDecision> all;
        for (std::size_t f = 0; f < r.folds.size(); ++f) {
            if (!(r.folds[f].roles == ref.folds[f].roles))
                throw ConfigError("variant '" + names[v] + "' uses different fold roles at fold " + std::to_string(f));
            vc.fold_accuracy.push_back(r.folds[f].accuracy);
            vc.paired_difference.push_back(r.folds[f].accuracy - ref.folds[f].accuracy);
            all.insert(all.end(), r.folds[f].decisions.begin(), r.folds[f].decisions.end());
        }
        double sum = 0.0;
        for (double d : vc.paired_difference)
            sum += d;
        vc.mean_difference = sum / static_cast<double>(vc.paired_difference.size());
        vc.gate = summarize(all);
        table.variants.push_back(std::move(vc));
    }
    return table;
}

inline std::string variant_label(const ExperimentConfig& cfg) {
    std::string name(to_string(cfg.variant));
    if (cfg.variant == ModelVariant::Hio || cfg.variant == ModelVariant::TextOnly)
        name += "@eps=" + format_double(cfg.effective_gate().epsilon);
    if (cfg.pretrain_folds != 0)
        name += "+pretrain" + std::to_string(cfg.pretrain_folds);
    return name;
}

/// Runs every config on one shared dataset and pairs the results.
inline std::pair<ComparisonTable, std::vector<RunReport>> compare_variants(const std::vector<ExperimentConfig>& cfgs) {
    if (cfgs.empty())
        throw ConfigError("nothing to compare");
    for (const auto& c : cfgs) {
        if (c.seed != cfgs.front().seed || c.n_folds != cfgs.front().n_folds ||
            c.dataset_path != cfgs.front().dataset_path ||
            config_to_json(c)["dataset"] != config_to_json(cfgs.front())["dataset"])
            throw ConfigError("compared variants must share dataset, folds and seed");
    }
    const Dataset data = resolve_dataset(cfgs.front());
    std::vector<RunReport> reports;
    std::vector<std::string> names;
    for (const auto& c : cfgs) {
        reports.push_back(run_cv(c, data));
        names.push_back(variant_label(c));
    }
    return {compare_reports(reports, names), std::move(reports)};
}

// ---------------------------------------------------------------------------
// serialization and emission

inline nlohmann::ordered_json decision_to_json(const GateDecision& d) {
    nlohmann::ordered_json j;
    j["step"] = d.step;
    j["network"] = to_string(d.network);
    j["reference_loss"] = d.reference_loss;
    j["candidate_loss"] = d.candidate_loss;
    j["epsilon"] = epsilon_to_json(d.epsilon);
    j["accepted"] = d.accepted;
    return j;
}

inline GateDecision decision_from_json(const nlohmann::ordered_json& j) {
    GateDecision d;
    d.step = j.at("step").get<std::uint64_t>();
    d.network = parse_network_id(j.at("network").get<std::string>());
    d.reference_loss = j.at("reference_loss").get<double>();
    d.candidate_loss = j.at("candidate_loss").get<double>();
    d.epsilon = epsilon_from_json(j.at("epsilon"));
    d.accepted = j.at("accepted").get<bool>();
    return d;
}

namespace detail {

inline nlohmann::ordered_json maybe_number(double v) {
    if (std::isnan(v))
        return nullptr;
    return v;
}

inline double number_or_nan(const nlohmann::ordered_json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace detail

/// Deterministic JSON form of a report; wall-clock times are excluded.
inline nlohmann::ordered_json report_to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["config"] = r.config;
    j["mean_accuracy"] = r.mean_accuracy;
    j["plan"] = {{"n_folds", r.plan.n_folds}, {"seed", r.plan.seed}, {"assignment", r.plan.assignment}};
    auto& folds = j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : r.folds) {
        nlohmann::ordered_json fj;
        fj["test_fold"] = f.roles.test_fold;
        fj["validation_fold"] = f.roles.validation_fold;
        fj["training_folds"] = f.roles.training_folds;
        fj["n_test"] = f.n_test;
        fj["accuracy"] = f.accuracy;
        fj["confusion"] = f.confusion;
        fj["validation_accuracy"] = f.validation_accuracy;
        fj["best_epoch"] = f.best_epoch;
        auto& dj = fj["decisions"] = nlohmann::ordered_json::array();
        for (const auto& d : f.decisions)
            dj.push_back(decision_to_json(d));
        auto& cj = fj["curve"] = nlohmann::ordered_json::array();
        for (const auto& e : f.curve)
            cj.push_back({e.epoch, e.train_loss, detail::maybe_number(e.validation_loss),
                          detail::maybe_number(e.validation_accuracy)});
        folds.push_back(std::move(fj));
    }
    return j;
}

inline RunReport report_from_json(const nlohmann::ordered_json& j) {
    try {
        RunReport r;
        r.config = j.at("config");
        r.mean_accuracy = j.at("mean_accuracy").get<double>();
        r.plan.n_folds = j.at("plan").at("n_folds").get<std::size_t>();
        r.plan.seed = j.at("plan").at("seed").get<std::uint64_t>();
        r.plan.assignment = j.at("plan").at("assignment").get<std::map<std::string, std::size_t>>();
        for (const auto& fj : j.at("folds")) {
            FoldReport f;
            f.roles.test_fold = fj.at("test_fold").get<std::size_t>();
            f.roles.validation_fold = fj.at("validation_fold").get<std::size_t>();
            f.roles.training_folds = fj.at("training_folds").get<std::vector<std::size_t>>();
            f.n_test = fj.at("n_test").get<std::size_t>();
            f.accuracy = fj.at("accuracy").get<double>();
            f.confusion = fj.at("confusion").get<ConfusionMatrix>();
            f.validation_accuracy = fj.at("validation_accuracy").get<double>();
            f.best_epoch = fj.at("best_epoch").get<std::size_t>();
            for (const auto& dj : fj.at("decisions"))
                f.decisions.push_back(decision_from_json(dj));
            for (const auto& cj : fj.at("curve"))
                f.curve.push_back({cj.at(0).get<std::size_t>(), cj.at(1).get<double>(),
                                   detail::number_or_nan(cj.at(2)), detail::number_or_nan(cj.at(3))});
            f.gate = summarize(f.decisions);
            r.folds.push_back(std::move(f));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed report: ") + e.what());
    }
}

inline RunReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open report '" + path + "'");
    try {
        return report_from_json(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(path + ": " + e.what());
    }
}

/// One row of metrics.csv.
struct FoldMetrics {
    std::size_t test_fold = 0;
    std::size_t validation_fold = 0;
    std::size_t n_test = 0;
    double accuracy = 0.0;
    ConfusionMatrix confusion{};
    GateSummary gate;
    std::size_t best_epoch = 0;

    bool operator==(const FoldMetrics&) const = default;
};

inline FoldMetrics fold_metrics(const FoldReport& f) {
    return {f.roles.test_fold, f.roles.validation_fold, f.n_test, f.accuracy, f.confusion, f.gate, f.best_epoch};
}

inline constexpr std::string_view kMetricsHeader =
    "test_fold,validation_fold,n_test,accuracy,c00,c01,c02,c10,c11,c12,c20,c21,c22,"
    "p_accepts,p_reverts,c_accepts,c_reverts,best_epoch";

inline std::vector<FoldMetrics> load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open metrics file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw LoadError(path + ": unexpected header");
    std::vector<FoldMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 18)
            throw LoadError(path + ": expected 18 columns, got " + std::to_string(cells.size()));
        auto as_size = [&](std::size_t i) { return static_cast<std::size_t>(std::stoull(cells[i])); };
        FoldMetrics m;
        m.test_fold = as_size(0);
        m.validation_fold = as_size(1);
        m.n_test = as_size(2);
        m.accuracy = parse_double(cells[3]);
        for (std::size_t k = 0; k < 9; ++k)
            m.confusion[k / 3][k % 3] = std::stoll(cells[4 + k]);
        m.gate = {as_size(13), as_size(14), as_size(15), as_size(16)};
        m.best_epoch = as_size(17);
        rows.push_back(m);
    }
    return rows;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out)
        throw IoError("cannot write '" + p.string() + "'");
    return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& p) {
    out.close();
    if (!out)
        throw IoError("failed while writing '" + p.string() + "'");
}

} // namespace detail

inline std::string summary_text(const RunReport& r) {
    std::ostringstream out;
    const auto& c = r.config;
    out << "variant: " << c.value("variant", std::string("?")) << '\n';
    if (c.contains("gate")) {
        const auto& g = c["gate"];
        out << "epsilon: " << (g["epsilon"].is_string() ? g["epsilon"].get<std::string>()
                                                         : format_double(g["epsilon"].get<double>()))
            << '\n';
        out << "reference_mode: " << g.value("reference_mode", std::string("?")) << '\n';
        out << "gate_data: " << g.value("gate_data", std::string("?")) << '\n';
    }
    out << "select_k: " << c.value("select_k", 0) << '\n';
    out << "pretrain_folds: " << c.value("pretrain_folds", 0) << '\n';
    out << "n_folds: " << r.folds.size() << '\n';
    out << "mean_accuracy: " << format_double(r.mean_accuracy) << '\n';
    out << "fold accuracies:";
    for (const auto& f : r.folds)
        out << ' ' << format_double(f.accuracy);
    out << '\n';
    const GateSummary total = [&] {
        std::vector<GateDecision> all;
        for (const auto& f : r.folds)
            all.insert(all.end(), f.decisions.begin(), f.decisions.end());
        return summarize(all);
    }();
    out << "gate P: " << total.passion_accepts << " accepted, " << total.passion_reverts << " reverted\n";
    out << "gate C: " << total.credibility_accepts << " accepted, " << total.credibility_reverts << " reverted\n";
    return out.str();
}

/// Writes results.json, metrics.csv, decisions.jsonl, summary.txt,
/// loss_curve.csv, accept_rate.csv and (when any fold was timed) timing.csv.
inline void emit_report(const RunReport& r, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    {
        const auto p = out_dir / "results.json";
        auto out = detail::open_out(p);
        out << report_to_json(r).dump(1) << '\n';
        detail::close_out(out, p);
    }
    {
        const auto p = out_dir / "metrics.csv";
        auto out = detail::open_out(p);
        out << kMetricsHeader << '\n';
        for (const auto& f : r.folds) {
            const auto m = fold_metrics(f);
            out << m.test_fold << ',' << m.validation_fold << ',' << m.n_test << ',' << format_double(m.accuracy);
            for (const auto& row : m.confusion)
                for (auto v : row)
                    out << ',' << v;
            out << ',' << m.gate.passion_accepts << ',' << m.gate.passion_reverts << ','
                << m.gate.credibility_accepts << ',' << m.gate.credibility_reverts << ',' << m.best_epoch << '\n';
        }
        detail::close_out(out, p);
    }
    {
        const auto p = out_dir / "decisions.jsonl";
        auto out = detail::open_out(p);
        for (const auto& f : r.folds)
            for (const auto& d : f.decisions) {
                nlohmann::ordered_json j;
                j["fold"] = f.roles.test_fold;
                j.update(decision_to_json(d));
                out << j.dump() << '\n';
            }
        detail::close_out(out, p);
    }
    {
        const auto p = out_dir / "summary.txt";
        auto out = detail::open_out(p);
        out << summary_text(r);
        detail::close_out(out, p);
    }
    {
        const auto p = out_dir / "loss_curve.csv";
        auto out = detail::open_out(p);
        out << "fold,epoch,train_loss,validation_loss,validation_accuracy\n";
        for (const auto& f : r.folds)
            for (const auto& e : f.curve)
                out << f.roles.test_fold << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
                    << (std::isnan(e.validation_loss) ? "" : format_double(e.validation_loss)) << ','
                    << (std::isnan(e.validation_accuracy) ? "" : format_double(e.validation_accuracy)) << '\n';
        detail::close_out(out, p);
    }
    {
        const auto p = out_dir / "accept_rate.csv";
        auto out = detail::open_out(p);
        out << "fold,step,network,accepted,running_accept_rate\n";
        for (const auto& f : r.folds) {
            std::map<NetworkId, std::pair<std::size_t, std::size_t>> seen; // accepted, total
            for (const auto& d : f.decisions) {
                auto& [acc, total] = seen[d.network];
                acc += d.accepted;
                ++total;
                out << f.roles.test_fold << ',' << d.step << ',' << to_string(d.network) << ','
                    << (d.accepted ? 1 : 0) << ','
                    << format_double(static_cast<double>(acc) / static_cast<double>(total)) << '\n';
            }
        }
        detail::close_out(out, p);
    }
    bool timed = false;
    for (const auto& f : r.folds)
        timed = timed || f.wall_seconds > 0.0;
    if (timed) {
        const auto p = out_dir / "timing.csv";
        auto out = detail::open_out(p);
        out << "test_fold,wall_seconds\n";
        for (const auto& f : r.folds)
            out << f.roles.test_fold << ',' << format_double(f.wall_seconds) << '\n';
        detail::close_out(out, p);
    }
}

inline void emit_comparison(const ComparisonTable& t, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
    const auto p = out_dir / "comparison.csv";
    auto out = detail::open_out(p);
    out << "variant,fold,accuracy,paired_difference\n";
    for (const auto& v : t.variants)
        for (std::size_t f = 0; f < v.fold_accuracy.size(); ++f)
            out << v.name << ',' << f << ',' << format_double(v.fold_accuracy[f]) << ','
                << format_double(v.paired_difference[f]) << '\n';
    detail::close_out(out, p);

    const auto ps = out_dir / "comparison.txt";
    auto summary = detail::open_out(ps);
    summary << "reference: " << t.reference << '\n';
    for (const auto& v : t.variants)
        summary << v.name << ": mean_accuracy " << format_double(v.mean_accuracy) << ", mean paired difference "
                << format_double(v.mean_difference) << ", gate P " << v.gate.passion_accepts << '/'
                << v.gate.passion_reverts << ", gate C " << v.gate.credibility_accepts << '/'
                << v.gate.credibility_reverts << " (accepted/reverted)\n";
    detail::close_out(summary, ps);
}

} // namespace hio
