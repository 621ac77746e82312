// Command-line front end: generate, train, compare, report.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hio/hio.hpp"

namespace {

struct CliOptions {
    hio::ExperimentConfig cfg;
    std::string epsilon = "1.0";
    std::string reference_mode = "last_accepted";
    std::string gate_data = "validation";
    std::string variant = "hio";
    std::string grouping = "high_vs_low";
    std::string out_dir = "hio_out";
};

void add_dataset_flags(CLI::App& app, CliOptions& o) {
    auto& s = o.cfg.synthetic;
    app.add_option("--data", o.cfg.dataset_path, "dataset file (JSON lines); synthetic data when omitted");
    app.add_option("--n-samples", s.n_samples, "synthetic: number of samples")->capture_default_str();
    app.add_option("--n-speakers", s.n_speakers, "synthetic: number of speakers")->capture_default_str();
    app.add_option("--widths", s.modality_widths, "synthetic: per-modality feature widths")->capture_default_str();
    app.add_option("--modalities", s.modality_names, "synthetic: modality names")->capture_default_str();
    app.add_option("--noise", s.noise_level, "synthetic: noise level in [0,1]")->capture_default_str();
    app.add_option("--passion-corr", s.passion_persuasion_corr, "synthetic: passion/persuasion correlation target")
        ->capture_default_str();
    app.add_option("--credibility-corr", s.credibility_persuasion_corr,
                   "synthetic: credibility/persuasion correlation target")
        ->capture_default_str();
    app.add_option("--data-seed", s.seed, "synthetic: generator seed")->capture_default_str();
}

void add_experiment_flags(CLI::App& app, CliOptions& o) {
    add_dataset_flags(app, o);
    auto& c = o.cfg;
    app.add_option("--epsilon", o.epsilon, "acceptable error rate (number or 'inf')")->capture_default_str();
    app.add_option("--reference-mode", o.reference_mode, "pretrained_fixed | last_accepted | running_best")
        ->capture_default_str();
    app.add_option("--gate-interval", c.gate.gate_interval_steps, "optimizer steps between gate checks")
        ->capture_default_str();
    app.add_option("--gate-data", o.gate_data, "validation | training")->capture_default_str();
    app.add_option("--lr", c.train.learning_rate, "learning rate (loss is summed over samples)")
        ->capture_default_str();
    app.add_option("--epochs", c.train.epochs, "epochs per training phase")->capture_default_str();
    app.add_option("--batch-size", c.train.batch_size, "minibatch size; 0 = full batch")->capture_default_str();
    app.add_option("--checkpoint-interval", c.train.checkpoint_interval_epochs, "epochs between checkpoints")
        ->capture_default_str();
    app.add_option("--k", c.select_k, "features kept per modality by the t-test")->capture_default_str();
    app.add_option("--grouping", o.grouping, "t-test grouping: high_vs_low | one_vs_rest")->capture_default_str();
    app.add_option("--folds", c.n_folds, "number of speaker-independent folds")->capture_default_str();
    app.add_option("--pretrain-folds", c.pretrain_folds, "folds used to pretrain P and C; 0 = all")
        ->capture_default_str();
    app.add_option("--seed", c.seed, "experiment seed")->capture_default_str();
    app.add_option("--threads", c.threads, "concurrent folds; 0 = hardware concurrency")->capture_default_str();
    app.add_option("--out", o.out_dir, "output directory (HIO_OUT_DIR overrides)")->capture_default_str();
}

void finalize(CliOptions& o) {
    o.cfg.gate.epsilon = hio::parse_double(o.epsilon);
    o.cfg.gate.reference_mode = hio::parse_reference_mode(o.reference_mode);
    o.cfg.gate.gate_data = hio::parse_gate_data(o.gate_data);
    o.cfg.variant = hio::parse_variant(o.variant);
    if (o.grouping == "high_vs_low")
        o.cfg.selection_grouping = hio::TTestGrouping::HighVsLow;
    else if (o.grouping == "one_vs_rest")
        o.cfg.selection_grouping = hio::TTestGrouping::OneVsRest;
    else
        throw hio::ConfigError("unknown grouping '" + o.grouping + "'");
    if (const char* env = std::getenv("HIO_OUT_DIR"); env != nullptr && *env != '\0')
        o.out_dir = env;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical intermediate-objective ensembles: experiments on synthetic or file datasets"};
    app.require_subcommand(1);

    CliOptions gen;
    std::string gen_out = "synthetic.jsonl";
    std::string plan_out;
    std::size_t plan_folds = 10;
    std::uint64_t plan_seed = 42;
    auto* generate = app.add_subcommand("generate", "write a synthetic planted-hierarchy dataset");
    add_dataset_flags(*generate, gen);
    generate->add_option("-o,--output", gen_out, "dataset file to write")->capture_default_str();
    generate->add_option("--plan-output", plan_out, "also write a fold plan");
    generate->add_option("--folds", plan_folds, "folds in the written plan")->capture_default_str();
    generate->add_option("--seed", plan_seed, "fold plan seed")->capture_default_str();

    CliOptions train;
    auto* train_cmd = app.add_subcommand("train", "cross-validate one model variant");
    add_experiment_flags(*train_cmd, train);
    train_cmd->add_option("--variant", train.variant, "late_fusion | stacking | hio | frozen_stacking | text_only")
        ->capture_default_str();

    CliOptions cmp;
    std::vector<std::string> variants{"late_fusion", "stacking", "hio"};
    auto* compare = app.add_subcommand("compare", "cross-validate several variants on identical folds");
    add_experiment_flags(*compare, cmp);
    compare->add_option("--variants", variants, "variants to compare; the first is the reference")
        ->capture_default_str();

    std::string results_path;
    std::string report_out = "hio_out";
    auto* report = app.add_subcommand("report", "re-emit report files from a saved results.json");
    report->add_option("--results", results_path, "results.json written by train")->required();
    report->add_option("--out", report_out, "output directory (HIO_OUT_DIR overrides)")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            const hio::Dataset data = hio::gen_synthetic(gen.cfg.synthetic);
            hio::save_dataset(gen_out, data);
            std::cout << "wrote " << data.size() << " samples to " << gen_out << '\n';
            if (!plan_out.empty()) {
                hio::save_fold_plan(plan_out, hio::split_folds(data, plan_folds, plan_seed));
                std::cout << "wrote fold plan to " << plan_out << '\n';
            }
        } else if (train_cmd->parsed()) {
            finalize(train);
            const auto rep = hio::run_cv(train.cfg);
            hio::emit_report(rep, train.out_dir);
            std::cout << hio::summary_text(rep) << "outputs in " << train.out_dir << '\n';
        } else if (compare->parsed()) {
            finalize(cmp);
            std::vector<hio::ExperimentConfig> cfgs;
            for (const auto& v : variants) {
                hio::ExperimentConfig c = cmp.cfg;
                c.variant = hio::parse_variant(v);
                cfgs.push_back(c);
            }
            const auto [table, reports] = hio::compare_variants(cfgs);
            hio::emit_comparison(table, cmp.out_dir);
            for (std::size_t i = 0; i < reports.size(); ++i)
                hio::emit_report(reports[i], std::filesystem::path(cmp.out_dir) / table.variants[i].name);
            for (const auto& v : table.variants)
                std::cout << v.name << ": mean accuracy " << v.mean_accuracy << " (paired diff vs " << table.reference
                          << ": " << v.mean_difference << ")\n";
            std::cout << "outputs in " << cmp.out_dir << '\n';
        } else if (report->parsed()) {
            if (const char* env = std::getenv("HIO_OUT_DIR"); env != nullptr && *env != '\0')
                report_out = env;
            const auto rep = hio::load_report(results_path);
            hio::emit_report(rep, report_out);
            std::cout << hio::summary_text(rep) << "outputs in " << report_out << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
