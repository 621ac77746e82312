#pragma once

// Dataset schema, JSON-lines loading/saving, speaker-independent folds, the
// semi-supervised pretraining subset and a planted-hierarchy generator.
//
// Dataset file: one JSON object per line.
//   {"sample_id": "s0001", "speaker_id": "spk03",
//    "features": {"acoustic": [..], "visual": {"frames": [[..], [..]]}},
//    "transcript": "optional review text",
//    "ratings": {"passion": 4.3, "credibility": 5.0, "persuasion": 2.7}}
// A modality given as {"frames": [...]} is pooled with pool_temporal. When
// transcripts are present they become the "text" modality via TF-IDF fitted
// on every transcript in the file. Modalities are ordered by name.
//
// Fold plan file: a header line {"n_folds": N, "seed": S} followed by one
// {"sample_id": .., "fold": k} line per sample.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hio/errors.hpp"
#include "hio/features.hpp"
#include "hio/hierarchy.hpp"
#include "hio/matrix.hpp"
#include "hio/rng.hpp"

namespace hio {

inline constexpr std::string_view kPassion = "passion";
inline constexpr std::string_view kCredibility = "credibility";
inline constexpr std::string_view kPersuasion = "persuasion";
inline constexpr std::string_view kTextModality = "text";

struct Sample {
    std::string sample_id;
    std::string speaker_id;
    std::map<std::string, std::vector<double>> modality_features;
    std::map<std::string, double> trait_ratings;
    std::map<std::string, TraitClass> trait_labels; ///< always ternary_label(trait_ratings)

    bool operator==(const Sample&) const = default;
};

class Dataset {
public:
    Dataset() = default;

    /// Validates the samples and derives every trait label from its rating.
    explicit Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
        if (samples_.empty())
            throw DataError("dataset has no samples");
        const auto& first = samples_.front().modality_features;
        if (first.empty())
            throw DataError("sample '" + samples_.front().sample_id + "' has no modalities");
        for (const auto& [name, values] : first) {
            modality_names_.push_back(name);
            modality_widths_.push_back(values.size());
        }
        std::set<std::string> ids;
        for (auto& s : samples_) {
            if (!ids.insert(s.sample_id).second)
                throw DataError("duplicate sample_id '" + s.sample_id + "'");
            if (s.modality_features.size() != modality_names_.size())
                throw DataError("sample '" + s.sample_id + "' has a different set of modalities");
            std::size_t m = 0;
            for (const auto& [name, values] : s.modality_features) {
                if (name != modality_names_[m] || values.size() != modality_widths_[m])
                    throw DataError("sample '" + s.sample_id + "': modality '" + name +
                                    "' is missing or has a different width");
                if (values.empty())
                    throw DataError("sample '" + s.sample_id + "': modality '" + name + "' is empty");
                for (double v : values)
                    if (!std::isfinite(v))
                        throw DataError("sample '" + s.sample_id + "': non-finite feature in '" + name + "'");
                ++m;
            }
            for (auto trait : {kPassion, kCredibility, kPersuasion})
                if (!s.trait_ratings.contains(std::string(trait)))
                    throw DataError("sample '" + s.sample_id + "' lacks a " + std::string(trait) + " rating");
            s.trait_labels.clear();
            for (const auto& [trait, rating] : s.trait_ratings) {
                try {
                    s.trait_labels[trait] = ternary_label(rating);
                } catch (const RangeError&) {
                    throw RangeError("sample '" + s.sample_id + "': " + trait + " rating " + std::to_string(rating) +
                                     " outside [1,7]");
                }
            }
        }
    }

    std::size_t size() const { return samples_.size(); }
    const std::vector<Sample>& samples() const { return samples_; }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    const std::vector<std::string>& modality_names() const { return modality_names_; }
    const std::vector<std::size_t>& modality_widths() const { return modality_widths_; }

    std::size_t modality_index(std::string_view name) const {
        for (std::size_t m = 0; m < modality_names_.size(); ++m)
            if (modality_names_[m] == name)
                return m;
        throw DataError("no modality named '" + std::string(name) + "'");
    }

    Matrix modality_matrix(std::size_t modality, std::span<const std::size_t> indices) const {
        const std::string& name = modality_names_.at(modality);
        Matrix out(indices.size(), modality_widths_[modality]);
        for (std::size_t r = 0; r < indices.size(); ++r) {
            const auto& v = samples_[indices[r]].modality_features.at(name);
            std::copy(v.begin(), v.end(), out.row(r).begin());
        }
        return out;
    }

    std::vector<int> labels(std::string_view trait, std::span<const std::size_t> indices) const {
        std::vector<int> out(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r)
            out[r] = static_cast<int>(samples_[indices[r]].trait_labels.at(std::string(trait)));
        return out;
    }

    std::vector<double> ratings(std::string_view trait) const {
        std::vector<double> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_)
            out.push_back(s.trait_ratings.at(std::string(trait)));
        return out;
    }

    bool operator==(const Dataset&) const = default;

private:
    std::vector<Sample> samples_;
    std::vector<std::string> modality_names_;
    std::vector<std::size_t> modality_widths_;
};

// ---------------------------------------------------------------------------
// file I/O

namespace detail {

inline std::vector<double> json_vector(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array())
        throw LoadError(where + ": expected an array of numbers");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& e : j) {
        if (!e.is_number())
            throw LoadError(where + ": expected an array of numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

inline Matrix json_frames(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw LoadError(where + ": 'frames' must be a nonempty array of arrays");
    std::vector<std::vector<double>> rows;
    for (const auto& f : j)
        rows.push_back(json_vector(f, where));
    try {
        return Matrix::from_rows(rows);
    } catch (const ShapeError&) {
        throw LoadError(where + ": frames differ in width");
    }
}

} // namespace detail

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open dataset file '" + path + "'");
    std::vector<Sample> samples;
    std::vector<std::string> transcripts;
    std::size_t with_transcript = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw LoadError(where + ": " + e.what());
        }
        if (!rec.is_object())
            throw LoadError(where + ": record is not an object");
        for (const char* key : {"sample_id", "speaker_id", "features", "ratings"})
            if (!rec.contains(key))
                throw LoadError(where + ": missing field '" + key + "'");
        if (!rec["sample_id"].is_string() || !rec["speaker_id"].is_string())
            throw LoadError(where + ": sample_id and speaker_id must be strings");
        if (!rec["features"].is_object() || !rec["ratings"].is_object())
            throw LoadError(where + ": features and ratings must be objects");
        Sample s;
        s.sample_id = rec["sample_id"].get<std::string>();
        s.speaker_id = rec["speaker_id"].get<std::string>();
        for (const auto& [name, value] : rec["features"].items()) {
            const std::string here = where + " modality '" + name + "'";
            if (value.is_object()) {
                if (!value.contains("frames"))
                    throw LoadError(here + ": object modality needs 'frames'");
                s.modality_features[name] = pool_temporal(detail::json_frames(value["frames"], here));
            } else {
                s.modality_features[name] = detail::json_vector(value, here);
            }
        }
        for (const auto& [trait, value] : rec["ratings"].items()) {
            if (!value.is_number())
                throw LoadError(where + ": rating '" + trait + "' is not a number");
            s.trait_ratings[trait] = value.get<double>();
        }
        if (rec.contains("transcript")) {
            if (!rec["transcript"].is_string())
                throw LoadError(where + ": transcript must be a string");
            if (s.modality_features.contains(std::string(kTextModality)))
                throw LoadError(where + ": both a transcript and a 'text' feature vector");
            ++with_transcript;
            transcripts.push_back(rec["transcript"].get<std::string>());
        } else {
            transcripts.emplace_back();
        }
        samples.push_back(std::move(s));
    }
    if (samples.empty())
        throw LoadError("dataset file '" + path + "' has no records");
    if (with_transcript != 0) {
        if (with_transcript != samples.size())
            throw LoadError(path + ": transcripts must be present on every record or none");
        std::vector<std::vector<std::string>> corpus;
        for (const auto& t : transcripts)
            corpus.push_back(tokenize(t));
        const TfidfVocabulary vocab = tfidf_fit(corpus);
        if (vocab.size() == 0)
            throw LoadError(path + ": transcripts contain no tokens");
        for (std::size_t i = 0; i < samples.size(); ++i)
            samples[i].modality_features[std::string(kTextModality)] =
                densify(tfidf_transform(vocab, corpus[i]), vocab.size());
    }
    try {
        return Dataset(std::move(samples));
    } catch (const RangeError&) {
        throw;
    } catch (const DataError& e) {
        throw LoadError(path + ": " + e.what());
    }
}

inline void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write dataset file '" + path + "'");
    for (const auto& s : data.samples()) {
        nlohmann::ordered_json rec;
        rec["sample_id"] = s.sample_id;
        rec["speaker_id"] = s.speaker_id;
        rec["features"] = nlohmann::ordered_json::object();
        for (const auto& [name, values] : s.modality_features)
            rec["features"][name] = values;
        rec["ratings"] = nlohmann::ordered_json::object();
        for (const auto& [trait, rating] : s.trait_ratings)
            rec["ratings"][trait] = rating;
        out << rec.dump() << '\n';
    }
    if (!out)
        throw IoError("failed while writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// folds

struct FoldPlan {
    std::size_t n_folds = 10;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> assignment; ///< sample_id -> fold

    /// Dataset row indices per fold, ascending.
    std::vector<std::vector<std::size_t>> members(const Dataset& data) const {
        std::vector<std::vector<std::size_t>> out(n_folds);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto it = assignment.find(data[i].sample_id);
            if (it == assignment.end())
                throw PlanError("sample '" + data[i].sample_id + "' has no fold");
            out.at(it->second).push_back(i);
        }
        return out;
    }

    bool operator==(const FoldPlan&) const = default;
};

/// Test and validation fold of one cross-validation run; the remaining folds
/// are training folds, ascending.
struct FoldRoles {
    std::size_t test_fold = 0;
    std::size_t validation_fold = 0;
    std::vector<std::size_t> training_folds;

    bool operator==(const FoldRoles&) const = default;
};

/// Speakers sorted, shuffled by seed, then each placed in the fold with the
/// fewest samples so far (lowest index on ties).
inline FoldPlan split_folds(const Dataset& data, std::size_t n_folds, std::uint64_t seed) {
    if (n_folds == 0)
        throw SplitError("n_folds must be positive");
    std::map<std::string, std::vector<std::size_t>> by_speaker;
    for (std::size_t i = 0; i < data.size(); ++i)
        by_speaker[data[i].speaker_id].push_back(i);
    if (by_speaker.size() < n_folds)
        throw SplitError("only " + std::to_string(by_speaker.size()) + " speakers for " + std::to_string(n_folds) +
                         " folds");
    std::vector<std::string> speakers;
    for (const auto& [spk, rows] : by_speaker)
        speakers.push_back(spk);
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(speakers));

    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    std::vector<std::size_t> load(n_folds, 0);
    for (const auto& spk : speakers) {
        const auto fold = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
        for (std::size_t i : by_speaker[spk])
            plan.assignment[data[i].sample_id] = fold;
        load[fold] += by_speaker[spk].size();
    }
    return plan;
}

/// Validation fold drawn uniformly from the non-test folds with a stream
/// derived from (seed, test_fold).
inline FoldRoles draw_roles(const FoldPlan& plan, std::size_t test_fold, std::uint64_t seed) {
    if (plan.n_folds < 3)
        throw PlanError("cross-validation needs at least 3 folds");
    if (test_fold >= plan.n_folds)
        throw PlanError("test fold out of range");
    std::vector<std::size_t> candidates;
    for (std::size_t f = 0; f < plan.n_folds; ++f)
        if (f != test_fold)
            candidates.push_back(f);
    Rng rng(Rng::derive(seed, 1000 + test_fold));
    FoldRoles roles;
    roles.test_fold = test_fold;
    roles.validation_fold = candidates[rng.below(candidates.size())];
    for (std::size_t f : candidates)
        if (f != roles.validation_fold)
            roles.training_folds.push_back(f);
    return roles;
}

/// The first n_pretrain_folds training folds, used to pretrain P and C.
inline std::vector<std::size_t> semisupervised_plan(const FoldPlan& plan, const FoldRoles& roles,
                                                    std::size_t n_pretrain_folds) {
    if (n_pretrain_folds == 0)
        throw PlanError("n_pretrain_folds must be positive");
    if (n_pretrain_folds > plan.n_folds - 2 || n_pretrain_folds > roles.training_folds.size())
        throw PlanError("n_pretrain_folds " + std::to_string(n_pretrain_folds) + " exceeds the " +
                        std::to_string(roles.training_folds.size()) + " training folds");
    return {roles.training_folds.begin(),
            roles.training_folds.begin() + static_cast<std::ptrdiff_t>(n_pretrain_folds)};
}

inline void save_fold_plan(const std::string& path, const FoldPlan& plan) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write fold plan '" + path + "'");
    nlohmann::ordered_json head;
    head["n_folds"] = plan.n_folds;
    head["seed"] = plan.seed;
    out << head.dump() << '\n';
    for (const auto& [id, fold] : plan.assignment) {
        nlohmann::ordered_json rec;
        rec["sample_id"] = id;
        rec["fold"] = fold;
        out << rec.dump() << '\n';
    }
}

inline FoldPlan load_fold_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open fold plan '" + path + "'");
    FoldPlan plan;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
            if (!header) {
                plan.n_folds = rec.at("n_folds").get<std::size_t>();
                plan.seed = rec.at("seed").get<std::uint64_t>();
                header = true;
                continue;
            }
            const auto fold = rec.at("fold").get<std::size_t>();
            if (fold >= plan.n_folds)
                throw LoadError("fold index out of range");
            plan.assignment[rec.at("sample_id").get<std::string>()] = fold;
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(path + ": " + e.what());
        }
    }
    if (!header)
        throw LoadError(path + ": missing header line");
    return plan;
}

// ---------------------------------------------------------------------------
// synthetic planted-hierarchy data

struct SyntheticConfig {
    std::size_t n_samples = 1000;
    std::size_t n_speakers = 100;
    std::vector<std::size_t> modality_widths{20, 20, 20};
    std::vector<std::string> modality_names{"acoustic", "visual", "text"};
    double noise_level = 0.3;
    double passion_persuasion_corr = 0.55;
    double credibility_persuasion_corr = 0.73;
    double speaker_scale = 0.5;     ///< std of per-speaker feature offsets
    double min_class_support = 0.05; ///< checked on persuasion labels; 0 disables
    std::uint64_t seed = 42;

    void validate() const {
        if (n_samples == 0 || n_speakers == 0 || n_speakers > n_samples)
            throw ConfigError("need 1 <= n_speakers <= n_samples");
        if (modality_widths.empty() || modality_widths.size() != modality_names.size())
            throw ConfigError("modality_widths and modality_names must be nonempty and equally long");
        for (auto w : modality_widths)
            if (w < 3)
                throw ConfigError("every modality width must be at least 3");
        std::set<std::string> names(modality_names.begin(), modality_names.end());
        if (names.size() != modality_names.size())
            throw ConfigError("modality names must be distinct");
        if (!(noise_level >= 0.0 && noise_level <= 1.0))
            throw ConfigError("noise_level must lie in [0,1]");
        const double rp = passion_persuasion_corr;
        const double rc = credibility_persuasion_corr;
        if (!(std::abs(rp) <= 1.0 && std::abs(rc) <= 1.0) || rp * rp + rc * rc > 1.0)
            throw ConfigError("correlation targets must satisfy rp^2 + rc^2 <= 1");
        if (!(speaker_scale >= 0.0))
            throw ConfigError("speaker_scale must be nonnegative");
    }
};

/// Generated data plus the latent scores behind the ratings.
struct SyntheticData {
    Dataset dataset;
    std::vector<double> passion_latent;
    std::vector<double> credibility_latent;
    std::vector<double> persuasion_latent;
};

/// Noise level at which the correlation targets are met exactly in
/// expectation; the residual term of the persuasion latent scales with
/// noise_level / kSyntheticReferenceNoise.
inline constexpr double kSyntheticReferenceNoise = 0.3;

namespace detail {

inline void standardize(std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v)
        var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    for (double& x : v)
        x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

inline std::vector<double> to_ratings(std::span<const double> latent) {
    const auto [lo, hi] = std::minmax_element(latent.begin(), latent.end());
    std::vector<double> r(latent.size());
    for (std::size_t i = 0; i < latent.size(); ++i)
        r[i] = *hi > *lo ? std::clamp(1.0 + 6.0 * (latent[i] - *lo) / (*hi - *lo), 1.0, 7.0) : 4.0;
    return r;
}

} // namespace detail

/// Planted hierarchy. Each modality's feature block is split into a passion
/// block, a credibility block, a small direct block and pure-noise columns.
/// Features are N(0,1) plus a per-speaker offset. With s = noise_level:
///   passion     = sqrt(1-s^2) * std(wP . x_P) + s * e_P
///   credibility = sqrt(1-s^2) * std(wC . x_C) + s * e_C
///   persuasion  = rp * passion + rc * credibility
///                 + sqrt(1 - rp^2 - rc^2) * (s / 0.3) * (0.6 * std(wD . x_D) + 0.8 * e_S)
/// Latents map to [1,7] by affine rescaling of their empirical range.
inline SyntheticData gen_synthetic_with_latents(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::size_t total_width = 0;
    for (auto w : cfg.modality_widths)
        total_width += w;

    std::vector<std::vector<double>> speaker_offset(cfg.n_speakers, std::vector<double>(total_width));
    for (auto& off : speaker_offset)
        for (double& v : off)
            v = cfg.speaker_scale * rng.normal();

    std::vector<std::size_t> speaker_of(cfg.n_samples);
    for (std::size_t i = 0; i < cfg.n_samples; ++i)
        speaker_of[i] = i < cfg.n_speakers ? i : static_cast<std::size_t>(rng.below(cfg.n_speakers));

    Matrix x(cfg.n_samples, total_width);
    for (std::size_t i = 0; i < cfg.n_samples; ++i)
        for (std::size_t j = 0; j < total_width; ++j)
            x(i, j) = speaker_offset[speaker_of[i]][j] + rng.normal();

    // planted column blocks, per modality
    std::vector<std::size_t> passion_cols, credibility_cols, direct_cols;
    std::size_t offset = 0;
    for (auto w : cfg.modality_widths) {
        const std::size_t block = std::max<std::size_t>(1, w / 4);
        const std::size_t direct = std::max<std::size_t>(1, block / 2);
        for (std::size_t j = 0; j < block; ++j) {
            passion_cols.push_back(offset + j);
            credibility_cols.push_back(offset + block + j);
        }
        for (std::size_t j = 0; j < direct && 2 * block + j < w; ++j)
            direct_cols.push_back(offset + 2 * block + j);
        offset += w;
    }
    auto projection = [&](const std::vector<std::size_t>& cols) {
        std::vector<double> weights(cols.size());
        for (double& w : weights)
            w = rng.normal();
        std::vector<double> proj(cfg.n_samples, 0.0);
        for (std::size_t i = 0; i < cfg.n_samples; ++i)
            for (std::size_t k = 0; k < cols.size(); ++k)
                proj[i] += weights[k] * x(i, cols[k]);
        detail::standardize(proj);
        return proj;
    };
    const auto proj_p = projection(passion_cols);
    const auto proj_c = projection(credibility_cols);
    const auto proj_d = projection(direct_cols);

    const double s = cfg.noise_level;
    const double signal = std::sqrt(1.0 - s * s);
    const double rp = cfg.passion_persuasion_corr;
    const double rc = cfg.credibility_persuasion_corr;
    const double residual = std::sqrt(std::max(0.0, 1.0 - rp * rp - rc * rc)) * (s / kSyntheticReferenceNoise);

    SyntheticData out;
    out.passion_latent.resize(cfg.n_samples);
    out.credibility_latent.resize(cfg.n_samples);
    out.persuasion_latent.resize(cfg.n_samples);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        const double zp = signal * proj_p[i] + s * rng.normal();
        const double zc = signal * proj_c[i] + s * rng.normal();
        const double extra = 0.6 * proj_d[i] + 0.8 * rng.normal();
        out.passion_latent[i] = zp;
        out.credibility_latent[i] = zc;
        out.persuasion_latent[i] = rp * zp + rc * zc + residual * extra;
    }
    const auto r_p = detail::to_ratings(out.passion_latent);
    const auto r_c = detail::to_ratings(out.credibility_latent);
    const auto r_s = detail::to_ratings(out.persuasion_latent);

    std::vector<Sample> samples(cfg.n_samples);
    const int id_width = static_cast<int>(std::to_string(cfg.n_samples).size());
    const int spk_width = static_cast<int>(std::to_string(cfg.n_speakers).size());
    auto padded = [](std::size_t v, int width) {
        std::string s = std::to_string(v);
        return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
    };
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        Sample& smp = samples[i];
        smp.sample_id = "s" + padded(i, id_width);
        smp.speaker_id = "spk" + padded(speaker_of[i], spk_width);
        std::size_t col = 0;
        for (std::size_t m = 0; m < cfg.modality_widths.size(); ++m) {
            auto& v = smp.modality_features[cfg.modality_names[m]];
            for (std::size_t j = 0; j < cfg.modality_widths[m]; ++j)
                v.push_back(x(i, col + j));
            col += cfg.modality_widths[m];
        }
        smp.trait_ratings[std::string(kPassion)] = r_p[i];
        smp.trait_ratings[std::string(kCredibility)] = r_c[i];
        smp.trait_ratings[std::string(kPersuasion)] = r_s[i];
    }
    out.dataset = Dataset(std::move(samples));

    if (cfg.min_class_support > 0.0) {
        std::array<std::size_t, kNumClasses> counts{};
        for (const auto& smp : out.dataset.samples())
            ++counts[static_cast<std::size_t>(smp.trait_labels.at(std::string(kPersuasion)))];
        for (std::size_t c = 0; c < counts.size(); ++c)
            if (static_cast<double>(counts[c]) < cfg.min_class_support * static_cast<double>(cfg.n_samples))
                throw DataError("synthetic persuasion class '" + std::string(to_string(static_cast<TraitClass>(c))) +
                                "' has only " + std::to_string(counts[c]) + " samples");
    }
    return out;
}

inline Dataset gen_synthetic(const SyntheticConfig& cfg) { return gen_synthetic_with_latents(cfg).dataset; }

} // namespace hio
