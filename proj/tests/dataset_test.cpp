#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace hio;
using hio::testing::TempDir;

namespace {

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines)
        out << l << '\n';
}

Sample make_sample(const std::string& id, const std::string& speaker, double rating = 4.0) {
    Sample s;
    s.sample_id = id;
    s.speaker_id = speaker;
    s.modality_features["acoustic"] = {1.0, 2.0};
    s.trait_ratings = {{"passion", rating}, {"credibility", rating}, {"persuasion", rating}};
    return s;
}

Dataset speakers_dataset(std::size_t n_speakers, std::size_t per_speaker) {
    std::vector<Sample> samples;
    for (std::size_t k = 0; k < n_speakers; ++k)
        for (std::size_t j = 0; j < per_speaker; ++j)
            samples.push_back(make_sample("s" + std::to_string(k) + "_" + std::to_string(j), "spk" + std::to_string(k)));
    return Dataset(std::move(samples));
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Ordinary least squares with an intercept, solved by Gaussian elimination
// with partial pivoting on the normal equations; returns fitted values.
std::vector<double> least_squares_fit(const Matrix& x, const std::vector<double>& y) {
    const std::size_t p = x.cols() + 1;
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> row(p, 1.0);
        for (std::size_t c = 0; c < x.cols(); ++c)
            row[c + 1] = x(r, c);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j)
                a[i][j] += row[i] * row[j];
            a[i][p] += row[i] * y[r];
        }
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col]))
                pivot = r;
        std::swap(a[col], a[pivot]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col)
                continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t k = col; k <= p; ++k)
                a[r][k] -= f * a[col][k];
        }
    }
    std::vector<double> fitted(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double v = a[0][p] / a[0][0];
        for (std::size_t c = 0; c < x.cols(); ++c)
            v += x(r, c) * a[c + 1][p] / a[c + 1][c + 1];
        fitted[r] = v;
    }
    return fitted;
}

std::vector<std::size_t> all_rows(const Dataset& d) {
    std::vector<std::size_t> rows(d.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = i;
    return rows;
}

} // namespace

TEST(DatasetTest, DerivesLabelsFromRatings) {
    const Dataset d({make_sample("a", "x", 2.9), make_sample("b", "x", 5.0), make_sample("c", "y", 5.1)});
    EXPECT_EQ(d.labels(kPersuasion, all_rows(d)), (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(d.modality_names(), (std::vector<std::string>{"acoustic"}));
    EXPECT_EQ(d.modality_widths(), (std::vector<std::size_t>{2}));
    EXPECT_THROW(d.modality_index("video"), DataError);
}

TEST(DatasetTest, RejectsInvalidSamples) {
    EXPECT_THROW(Dataset(std::vector<Sample>{}), DataError);
    EXPECT_THROW(Dataset({make_sample("a", "x"), make_sample("a", "y")}), DataError);
    try {
        Dataset({make_sample("ok", "x"), make_sample("bad7", "x", 7.5)});
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("bad7"), std::string::npos);
    }
    Sample wide = make_sample("w", "x");
    wide.modality_features["acoustic"].push_back(3.0);
    EXPECT_THROW(Dataset({make_sample("a", "x"), wide}), DataError);
    Sample missing = make_sample("m", "x");
    missing.trait_ratings.erase("credibility");
    EXPECT_THROW(Dataset({missing}), DataError);
}

TEST(LoadTest, ParsesVectorsFramesAndTranscripts) {
    TempDir dir("load");
    write_lines(dir / "d.jsonl",
                {R"({"sample_id":"a","speaker_id":"p1","features":{"visual":{"frames":[[1],[3]]},"acoustic":[0.5,1]},)"
                 R"("transcript":"Great great film","ratings":{"passion":2,"credibility":4,"persuasion":6}})",
                 "",
                 R"({"sample_id":"b","speaker_id":"p2","features":{"visual":{"frames":[[2]]},"acoustic":[1,2]},)"
                 R"("transcript":"bad film","ratings":{"passion":3,"credibility":4,"persuasion":1}})"});
    const Dataset d = load_dataset((dir / "d.jsonl").string());
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d.modality_names(), (std::vector<std::string>{"acoustic", "text", "visual"}));
    EXPECT_EQ(d[0].modality_features.at("visual"), (std::vector<double>{2, 1, 1, 3, 2}));
    // vocabulary bad, film, great; "great" occurs twice in one of two documents
    const auto& text = d[0].modality_features.at("text");
    ASSERT_EQ(text.size(), 3u);
    EXPECT_DOUBLE_EQ(text[2], 2.0 * (std::log(2.0) + 1.0));
    EXPECT_DOUBLE_EQ(text[1], 1.0);
    EXPECT_EQ(d.labels(kPersuasion, all_rows(d)), (std::vector<int>{2, 0}));
}

TEST(LoadTest, ReportsErrors) {
    TempDir dir("loaderr");
    EXPECT_THROW(load_dataset((dir / "absent.jsonl").string()), IoError);
    write_lines(dir / "bad.jsonl", {"{not json"});
    EXPECT_THROW(load_dataset((dir / "bad.jsonl").string()), LoadError);
    write_lines(dir / "range.jsonl", {R"({"sample_id":"r1","speaker_id":"p","features":{"a":[1]},)"
                                      R"("ratings":{"passion":7.5,"credibility":4,"persuasion":4}})"});
    EXPECT_THROW(load_dataset((dir / "range.jsonl").string()), RangeError);
    write_lines(dir / "width.jsonl", {R"({"sample_id":"x","speaker_id":"p","features":{"a":[1,2]},)"
                                      R"("ratings":{"passion":4,"credibility":4,"persuasion":4}})",
                                      R"({"sample_id":"y","speaker_id":"p","features":{"a":[1]},)"
                                      R"("ratings":{"passion":4,"credibility":4,"persuasion":4}})"});
    EXPECT_THROW(load_dataset((dir / "width.jsonl").string()), LoadError);
    write_lines(dir / "nofield.jsonl", {R"({"sample_id":"x","features":{"a":[1]},"ratings":{}})"});
    EXPECT_THROW(load_dataset((dir / "nofield.jsonl").string()), LoadError);
}

TEST(LoadTest, SaveLoadRoundTrip) {
    SyntheticConfig cfg;
    cfg.n_samples = 60;
    cfg.n_speakers = 12;
    const Dataset d = gen_synthetic(cfg);
    TempDir dir("roundtrip");
    save_dataset((dir / "syn.jsonl").string(), d);
    EXPECT_EQ(load_dataset((dir / "syn.jsonl").string()), d);
}

TEST(FoldTest, OneSpeakerPerFoldWithTenSpeakers) {
    const Dataset d = speakers_dataset(10, 3);
    const FoldPlan plan = split_folds(d, 10, 5);
    for (const auto& fold : plan.members(d)) {
        ASSERT_EQ(fold.size(), 3u);
        std::set<std::string> spk;
        for (auto i : fold)
            spk.insert(d[i].speaker_id);
        EXPECT_EQ(spk.size(), 1u);
    }
    EXPECT_THROW(split_folds(d, 11, 5), SplitError);
    EXPECT_THROW(split_folds(d, 0, 5), SplitError);
}

TEST(FoldTest, SpeakerDisjointAndBalanced) {
    const Dataset d = gen_synthetic({});
    const FoldPlan plan = split_folds(d, 10, 42);
    std::map<std::string, std::size_t> fold_of;
    for (const auto& s : d.samples()) {
        const auto f = plan.assignment.at(s.sample_id);
        const auto [it, fresh] = fold_of.emplace(s.speaker_id, f);
        EXPECT_EQ(it->second, f) << s.speaker_id;
    }
    std::vector<std::size_t> sizes;
    for (const auto& m : plan.members(d))
        sizes.push_back(m.size());
    // frozen from the reference run
    EXPECT_EQ(sizes, (std::vector<std::size_t>{103, 105, 99, 103, 97, 100, 95, 100, 95, 103}));
    EXPECT_EQ(split_folds(d, 10, 42), plan);
    EXPECT_FALSE(split_folds(d, 10, 43) == plan);
}

TEST(FoldTest, RolesAreDeterministicAndDisjoint) {
    const Dataset d = speakers_dataset(10, 2);
    const FoldPlan plan = split_folds(d, 10, 1);
    for (std::size_t t = 0; t < 10; ++t) {
        const FoldRoles r = draw_roles(plan, t, 42);
        EXPECT_EQ(r, draw_roles(plan, t, 42));
        EXPECT_NE(r.validation_fold, t);
        EXPECT_EQ(r.training_folds.size(), 8u);
        EXPECT_TRUE(std::is_sorted(r.training_folds.begin(), r.training_folds.end()));
        for (auto f : r.training_folds) {
            EXPECT_NE(f, t);
            EXPECT_NE(f, r.validation_fold);
        }
    }
    EXPECT_THROW(draw_roles(plan, 10, 42), PlanError);
    FoldPlan two = plan;
    two.n_folds = 2;
    EXPECT_THROW(draw_roles(two, 0, 42), PlanError);
}

TEST(FoldTest, SemisupervisedPlan) {
    const Dataset d = speakers_dataset(10, 2);
    const FoldPlan plan = split_folds(d, 10, 1);
    const FoldRoles r = draw_roles(plan, 0, 42);
    const auto two = semisupervised_plan(plan, r, 2);
    EXPECT_EQ(two, (std::vector<std::size_t>{r.training_folds[0], r.training_folds[1]}));
    EXPECT_EQ(semisupervised_plan(plan, r, 8), r.training_folds);
    EXPECT_THROW(semisupervised_plan(plan, r, 0), PlanError);
    EXPECT_THROW(semisupervised_plan(plan, r, 9), PlanError);
}

TEST(FoldTest, PlanFileRoundTrip) {
    const Dataset d = speakers_dataset(6, 2);
    const FoldPlan plan = split_folds(d, 3, 9);
    TempDir dir("plan");
    save_fold_plan((dir / "plan.jsonl").string(), plan);
    EXPECT_EQ(load_fold_plan((dir / "plan.jsonl").string()), plan);
    write_lines(dir / "bad.jsonl", {R"({"n_folds":3,"seed":1})", R"({"sample_id":"a","fold":3})"});
    EXPECT_THROW(load_fold_plan((dir / "bad.jsonl").string()), LoadError);
    FoldPlan partial = plan;
    partial.assignment.erase(partial.assignment.begin());
    EXPECT_THROW(partial.members(d), PlanError);
}

TEST(SyntheticTest, DeterministicPerSeed) {
    SyntheticConfig cfg;
    cfg.n_samples = 200;
    cfg.n_speakers = 20;
    EXPECT_EQ(gen_synthetic(cfg), gen_synthetic(cfg));
    SyntheticConfig other = cfg;
    other.seed = 43;
    EXPECT_FALSE(gen_synthetic(cfg) == gen_synthetic(other));
}

TEST(SyntheticTest, DefaultShapeAndSupport) {
    const Dataset d = gen_synthetic({});
    EXPECT_EQ(d.size(), 1000u);
    EXPECT_EQ(d.modality_names(), (std::vector<std::string>{"acoustic", "text", "visual"}));
    EXPECT_EQ(d.modality_widths(), (std::vector<std::size_t>{20, 20, 20}));
    std::set<std::string> speakers;
    for (const auto& s : d.samples())
        speakers.insert(s.speaker_id);
    EXPECT_EQ(speakers.size(), 100u);
    for (auto trait : {kPassion, kCredibility, kPersuasion}) {
        std::array<std::size_t, 3> counts{};
        for (int y : d.labels(trait, all_rows(d)))
            ++counts[static_cast<std::size_t>(y)];
        for (auto c : counts)
            EXPECT_GE(c, 50u) << trait;
        for (double r : d.ratings(trait)) {
            EXPECT_GE(r, 1.0);
            EXPECT_LE(r, 7.0);
        }
    }
}

TEST(SyntheticTest, CorrelationTargets) {
    const Dataset d = gen_synthetic({});
    const auto persuasion = d.ratings(kPersuasion);
    EXPECT_NEAR(pearson(d.ratings(kPassion), persuasion), 0.55, 0.1);
    EXPECT_NEAR(pearson(d.ratings(kCredibility), persuasion), 0.73, 0.1);
}

TEST(SyntheticTest, NoiselessLabelsAreLinearlyRecoverable) {
    SyntheticConfig cfg;
    cfg.noise_level = 0.0;
    const Dataset d = gen_synthetic(cfg);
    const auto rows = all_rows(d);
    std::vector<Matrix> blocks;
    for (std::size_t m = 0; m < d.modality_names().size(); ++m)
        blocks.push_back(d.modality_matrix(m, rows));
    const Matrix x = hconcat(blocks);
    for (auto trait : {kPassion, kCredibility, kPersuasion}) {
        const auto fitted = least_squares_fit(x, d.ratings(trait));
        const auto truth = d.labels(trait, rows);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < rows.size(); ++i)
            correct += static_cast<int>(ternary_label(std::clamp(fitted[i], 1.0, 7.0))) == truth[i];
        EXPECT_EQ(correct, rows.size()) << trait;
    }
}

TEST(SyntheticTest, ConfigValidation) {
    SyntheticConfig cfg;
    cfg.passion_persuasion_corr = 0.8;
    cfg.credibility_persuasion_corr = 0.8;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = SyntheticConfig{};
    cfg.n_speakers = 2000;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = SyntheticConfig{};
    cfg.modality_names = {"a", "a", "b"};
    EXPECT_THROW(cfg.validate(), ConfigError);
}
