#pragma once

// Preprocessing: temporal pooling of per-frame descriptors, TF-IDF text
// vectors, Welch t-test feature selection and ternary Likert labels.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hio/errors.hpp"
#include "hio/matrix.hpp"

namespace hio {

// ---------------------------------------------------------------------------
// ternary labels

enum class TraitClass : int { Negative = 0, Neutral = 1, Positive = 2 };

inline constexpr int kNumClasses = 3;

inline std::string_view to_string(TraitClass c) {
    switch (c) {
    case TraitClass::Negative: return "negative";
    case TraitClass::Neutral: return "neutral";
    case TraitClass::Positive: return "positive";
    }
    return "?";
}

/// Average Likert rating in [1,7] to class: below 3 negative, above 5
/// positive, [3,5] inclusive neutral.
inline TraitClass ternary_label(double avg_rating) {
    if (!(avg_rating >= 1.0 && avg_rating <= 7.0))
        throw RangeError("rating " + std::to_string(avg_rating) + " outside [1,7]");
    if (avg_rating < 3.0)
        return TraitClass::Negative;
    if (avg_rating > 5.0)
        return TraitClass::Positive;
    return TraitClass::Neutral;
}

// ---------------------------------------------------------------------------
// temporal pooling

/// Rows are time units, columns descriptor dimensions. For each dimension
/// emits (mean, population std, min, max, max - min), dimension-major.
inline std::vector<double> pool_temporal(const Matrix& frames) {
    if (frames.rows() == 0 || frames.cols() == 0)
        throw DataError("pool_temporal needs a nonempty frame sequence");
    const std::size_t n = frames.rows();
    std::vector<double> out;
    out.reserve(5 * frames.cols());
    for (std::size_t d = 0; d < frames.cols(); ++d) {
        double sum = 0.0;
        double lo = frames(0, d);
        double hi = frames(0, d);
        for (std::size_t t = 0; t < n; ++t) {
            const double v = frames(t, d);
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        // clamp guards the last-ulp case where the rounded mean escapes [lo, hi]
        const double mean = std::clamp(sum / static_cast<double>(n), lo, hi);
        double sq = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double dv = frames(t, d) - mean;
            sq += dv * dv;
        }
        out.push_back(mean);
        out.push_back(std::sqrt(sq / static_cast<double>(n)));
        out.push_back(lo);
        out.push_back(hi);
        out.push_back(hi - lo);
    }
    return out;
}

// ---------------------------------------------------------------------------
// TF-IDF

/// Splits on ASCII whitespace, lowercases ASCII letters and deletes ASCII
/// punctuation inside tokens ("Don't!" -> "dont"). Other bytes pass through.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty())
            tokens.push_back(std::move(current));
        current.clear();
    };
    for (char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (u < 0x80 && std::isspace(u)) {
            flush();
        } else if (u < 0x80 && std::ispunct(u)) {
            continue;
        } else {
            current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
        }
    }
    flush();
    return tokens;
}

class TfidfVocabulary {
public:
    TfidfVocabulary() = default;
    TfidfVocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq, std::size_t n_docs)
        : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_docs_(n_docs) {
        for (std::size_t i = 0; i < terms_.size(); ++i)
            index_.emplace(terms_[i], i);
    }

    std::size_t size() const { return terms_.size(); }
    std::size_t n_docs() const { return n_docs_; }
    const std::vector<std::string>& terms() const { return terms_; }
    std::size_t doc_freq(std::size_t i) const { return doc_freq_[i]; }

    /// ln(N / df) + 1
    double idf(std::size_t i) const {
        return std::log(static_cast<double>(n_docs_) / static_cast<double>(doc_freq_[i])) + 1.0;
    }

    std::ptrdiff_t find(const std::string& term) const {
        const auto it = index_.find(term);
        return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    }

private:
    std::vector<std::string> terms_;
    std::vector<std::size_t> doc_freq_;
    std::size_t n_docs_ = 0;
    std::map<std::string, std::size_t> index_;
};

/// (term index, weight) pairs sorted by index; zero entries are omitted.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

inline TfidfVocabulary tfidf_fit(const std::vector<std::vector<std::string>>& corpus) {
    if (corpus.empty())
        throw DataError("tfidf_fit needs a nonempty corpus");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        std::vector<std::string> unique(doc);
        std::sort(unique.begin(), unique.end());
        unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
        for (auto& term : unique)
            ++df[term];
    }
    std::vector<std::string> terms;
    std::vector<std::size_t> freq;
    for (auto& [term, count] : df) {
        terms.push_back(term);
        freq.push_back(count);
    }
    return TfidfVocabulary(std::move(terms), std::move(freq), corpus.size());
}

/// Raw term count times smoothed idf; out-of-vocabulary tokens are ignored.
inline SparseVector tfidf_transform(const TfidfVocabulary& vocab, const std::vector<std::string>& doc) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& token : doc) {
        const auto idx = vocab.find(token);
        if (idx >= 0)
            ++counts[static_cast<std::size_t>(idx)];
    }
    SparseVector out;
    out.reserve(counts.size());
    for (auto [idx, tf] : counts)
        out.emplace_back(idx, static_cast<double>(tf) * vocab.idf(idx));
    return out;
}

inline std::vector<double> densify(const SparseVector& v, std::size_t dim) {
    std::vector<double> out(dim, 0.0);
    for (auto [idx, w] : v) {
        if (idx >= dim)
            throw ShapeError("sparse index beyond dense width");
        out[idx] = w;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Welch t-test and feature selection

inline constexpr double kVarianceFloor = 1e-12;

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps)
            break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability of Student's t with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
    if (t == 0.0)
        return 1.0;
    if (std::isinf(t))
        return 0.0;
    const double p = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    return std::clamp(p, 0.0, 1.0);
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

/// Welch's unequal-variance t-test of mean(a) - mean(b); each group needs
/// at least two values. Sample variances are floored at kVarianceFloor.
inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw SelectionError("Welch t-test needs at least two samples per group");
    auto moments = [](std::span<const double> v) {
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : v)
            ss += (x - mean) * (x - mean);
        return std::pair{mean, std::max(ss / (n - 1.0), kVarianceFloor)};
    };
    const auto [mean_a, var_a] = moments(a);
    const auto [mean_b, var_b] = moments(b);
    const double se_a = var_a / static_cast<double>(a.size());
    const double se_b = var_b / static_cast<double>(b.size());
    WelchResult r;
    r.t = (mean_a - mean_b) / std::sqrt(se_a + se_b);
    r.df = (se_a + se_b) * (se_a + se_b) /
           (se_a * se_a / static_cast<double>(a.size() - 1) + se_b * se_b / static_cast<double>(b.size() - 1));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

enum class TTestGrouping {
    HighVsLow, ///< high_class vs low_class, other classes excluded
    OneVsRest, ///< high_class vs every other class
};

struct TTestOptions {
    TTestGrouping grouping = TTestGrouping::HighVsLow;
    int high_class = static_cast<int>(TraitClass::Positive);
    int low_class = static_cast<int>(TraitClass::Negative);
};

struct SelectionResult {
    std::vector<std::size_t> selected_indices; ///< ascending p, then ascending index
    std::vector<double> t_statistics;          ///< one per feature
    std::vector<double> p_values;              ///< one per feature
};

/// Ranks every feature column by Welch p-value and keeps the best k.
inline SelectionResult ttest_select(const Matrix& features, std::span<const int> labels, std::size_t k,
                                    const TTestOptions& options = {}) {
    if (features.rows() != labels.size())
        throw ShapeError("ttest_select: feature rows and labels differ");
    if (k == 0)
        throw SelectionError("ttest_select: k must be positive");
    std::vector<std::size_t> group_a;
    std::vector<std::size_t> group_b;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == options.high_class)
            group_a.push_back(i);
        else if (options.grouping == TTestGrouping::OneVsRest || labels[i] == options.low_class)
            group_b.push_back(i);
    }
    if (group_a.empty() || group_b.empty())
        throw SelectionError("ttest_select: a compared class has no samples");
    if (group_a.size() < 2 || group_b.size() < 2)
        throw SelectionError("ttest_select: each compared class needs at least two samples");

    SelectionResult result;
    result.t_statistics.resize(features.cols());
    result.p_values.resize(features.cols());
    std::vector<double> va(group_a.size());
    std::vector<double> vb(group_b.size());
    for (std::size_t f = 0; f < features.cols(); ++f) {
        for (std::size_t i = 0; i < group_a.size(); ++i)
            va[i] = features(group_a[i], f);
        for (std::size_t i = 0; i < group_b.size(); ++i)
            vb[i] = features(group_b[i], f);
        const auto w = welch_t_test(va, vb);
        result.t_statistics[f] = w.t;
        result.p_values[f] = w.p;
    }

    std::vector<std::size_t> order(features.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
        return result.p_values[lhs] < result.p_values[rhs];
    });
    order.resize(std::min(k, order.size()));
    result.selected_indices = std::move(order);
    return result;
}

} // namespace hio
