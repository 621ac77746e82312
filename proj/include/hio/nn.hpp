#pragma once

// Minimal deterministic feedforward network engine: dense layers, softmax
// cross-entropy, exact gradients, plain SGD and bit-exact parameter snapshots.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hio/errors.hpp"
#include "hio/matrix.hpp"
#include "hio/rng.hpp"

namespace hio {

enum class Activation { ReLU, Softmax, Identity };

inline std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Softmax: return "softmax";
    case Activation::Identity: return "identity";
    }
    return "?";
}

inline Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "softmax") return Activation::Softmax;
    if (name == "identity") return Activation::Identity;
    throw ArchitectureError("unknown activation '" + std::string(name) + "'");
}

/// Affine map x * W + b followed by an activation. W is fan_in x fan_out.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    std::size_t fan_in() const { return weights.rows(); }
    std::size_t fan_out() const { return weights.cols(); }

    bool operator==(const DenseLayer&) const = default;
};

class Mlp {
public:
    Mlp() = default;

    explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
        if (layers_.empty())
            throw ArchitectureError("an Mlp needs at least one layer");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.fan_in() == 0 || l.fan_out() == 0 || l.bias.size() != l.fan_out())
                throw ArchitectureError("layer " + std::to_string(i) + " has inconsistent dimensions");
            if (i > 0 && layers_[i - 1].fan_out() != l.fan_in())
                throw ArchitectureError("layer " + std::to_string(i) + " fan_in does not match previous fan_out");
        }
    }

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::span<DenseLayer> layers() { return layers_; }

    std::size_t depth() const { return layers_.size(); }
    std::size_t input_width() const { return layers_.empty() ? 0 : layers_.front().fan_in(); }
    std::size_t output_width() const { return layers_.empty() ? 0 : layers_.back().fan_out(); }
    Activation output_activation() const { return layers_.back().activation; }

    std::vector<std::size_t> layer_sizes() const {
        std::vector<std::size_t> sizes;
        if (layers_.empty())
            return sizes;
        sizes.push_back(input_width());
        for (const auto& l : layers_)
            sizes.push_back(l.fan_out());
        return sizes;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_)
            n += l.weights.size() + l.bias.size();
        return n;
    }

    bool operator==(const Mlp&) const = default;

private:
    std::vector<DenseLayer> layers_;
};

struct LayerGradient {
    Matrix d_weights;
    std::vector<double> d_bias;

    bool operator==(const LayerGradient&) const = default;
};

/// Per-layer parameter gradients mirroring the owning Mlp.
struct Gradients {
    std::vector<LayerGradient> layers;

    static Gradients zeros_like(const Mlp& mlp) {
        Gradients g;
        for (const auto& l : mlp.layers())
            g.layers.push_back({Matrix(l.fan_in(), l.fan_out()), std::vector<double>(l.fan_out(), 0.0)});
        return g;
    }

    bool congruent_with(const Mlp& mlp) const {
        if (layers.size() != mlp.depth())
            return false;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = mlp.layers()[i];
            if (layers[i].d_weights.rows() != l.fan_in() || layers[i].d_weights.cols() != l.fan_out() ||
                layers[i].d_bias.size() != l.fan_out())
                return false;
        }
        return true;
    }

    bool all_finite() const {
        for (const auto& l : layers) {
            for (double v : l.d_weights.data())
                if (!std::isfinite(v)) return false;
            for (double v : l.d_bias)
                if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Gradients&) const = default;
};

/// Deep copy of one network's parameters, tagged with the step it was taken at.
struct Snapshot {
    Mlp params;
    std::uint64_t step = 0;
};

inline constexpr std::size_t kFullBatch = 0;

struct TrainConfig {
    double learning_rate = 5e-4;
    std::size_t epochs = 200;
    std::size_t batch_size = kFullBatch;
    std::size_t checkpoint_interval_epochs = 10;
    std::uint64_t rng_seed = 42;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ConfigError("learning_rate must be a positive finite number");
        if (checkpoint_interval_epochs < 1)
            throw ConfigError("checkpoint_interval_epochs must be >= 1");
    }
};

inline constexpr double kLogClamp = 1e-12;

// ---------------------------------------------------------------------------
// construction

/// Glorot-uniform weights, zero biases, all drawn from Rng(seed).
inline Mlp init_mlp(std::span<const std::size_t> layer_sizes, Activation hidden_activation,
                    Activation output_activation, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw ArchitectureError("layer_sizes needs at least an input and an output size");
    for (auto s : layer_sizes)
        if (s == 0)
            throw ArchitectureError("layer sizes must be positive");

    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
        const std::size_t fan_in = layer_sizes[i];
        const std::size_t fan_out = layer_sizes[i + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer;
        layer.weights = Matrix(fan_in, fan_out);
        for (double& w : layer.weights.data())
            w = rng.uniform(-limit, limit);
        layer.bias.assign(fan_out, 0.0);
        layer.activation = (i + 2 == layer_sizes.size()) ? output_activation : hidden_activation;
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

inline Mlp init_mlp(std::initializer_list<std::size_t> layer_sizes, Activation hidden_activation,
                    Activation output_activation, std::uint64_t seed) {
    const std::vector<std::size_t> sizes(layer_sizes);
    return init_mlp(std::span<const std::size_t>(sizes), hidden_activation, output_activation, seed);
}

// ---------------------------------------------------------------------------
// forward

namespace detail {

inline void softmax_inplace(std::span<double> z) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : z)
        peak = std::max(peak, v);
    double total = 0.0;
    for (double& v : z) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : z)
        v /= total;
}

inline void activate_rows(Matrix& z, Activation act) {
    switch (act) {
    case Activation::ReLU:
        for (double& v : z.data())
            v = v > 0.0 ? v : 0.0;
        break;
    case Activation::Softmax:
        for (std::size_t r = 0; r < z.rows(); ++r)
            softmax_inplace(z.row(r));
        break;
    case Activation::Identity:
        break;
    }
}

inline Matrix affine(const Matrix& x, const DenseLayer& layer) {
    Matrix z(x.rows(), layer.fan_out());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto out = z.row(r);
        for (std::size_t o = 0; o < layer.fan_out(); ++o)
            out[o] = layer.bias[o];
        const auto in = x.row(r);
        for (std::size_t i = 0; i < layer.fan_in(); ++i) {
            const double xi = in[i];
            const auto w = layer.weights.row(i);
            for (std::size_t o = 0; o < layer.fan_out(); ++o)
                out[o] += xi * w[o];
        }
    }
    return z;
}

} // namespace detail

/// Layer outputs for a batch; activations[0] is the input, activations[i] the
/// output of layer i-1.
struct ForwardCache {
    std::vector<Matrix> activations;

    const Matrix& output() const { return activations.back(); }
};

inline ForwardCache forward_cached(const Mlp& mlp, const Matrix& x) {
    if (x.cols() != mlp.input_width())
        throw ShapeError("input width " + std::to_string(x.cols()) + " does not match network fan_in " +
                         std::to_string(mlp.input_width()));
    ForwardCache cache;
    cache.activations.reserve(mlp.depth() + 1);
    cache.activations.push_back(x);
    for (const auto& layer : mlp.layers()) {
        Matrix z = detail::affine(cache.activations.back(), layer);
        detail::activate_rows(z, layer.activation);
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

inline Matrix forward_batch(const Mlp& mlp, const Matrix& x) {
    if (x.cols() != mlp.input_width())
        throw ShapeError("input width " + std::to_string(x.cols()) + " does not match network fan_in " +
                         std::to_string(mlp.input_width()));
    Matrix a = x;
    for (const auto& layer : mlp.layers()) {
        a = detail::affine(a, layer);
        detail::activate_rows(a, layer.activation);
    }
    return a;
}

inline std::vector<double> forward(const Mlp& mlp, std::span<const double> x) {
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.data().begin());
    return forward_batch(mlp, m).data();
}

inline std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

inline std::vector<int> predict_classes(const Matrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r)
        out[r] = static_cast<int>(argmax(probs.row(r)));
    return out;
}

// ---------------------------------------------------------------------------
// loss

namespace detail {

inline void check_labels(const Matrix& probs, std::span<const int> labels) {
    if (probs.rows() != labels.size())
        throw ShapeError("probability rows (" + std::to_string(probs.rows()) + ") and labels (" +
                         std::to_string(labels.size()) + ") differ");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
            throw ShapeError("label " + std::to_string(y) + " out of range for " + std::to_string(probs.cols()) +
                             " classes");
}

} // namespace detail

/// Summed negative log-likelihood of the true class; true-class probabilities
/// are clamped to kLogClamp before the log.
inline double cross_entropy_loss(const Matrix& probs, std::span<const int> labels) {
    detail::check_labels(probs, labels);
    double loss = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double total = 0.0;
        for (double p : probs.row(r))
            total += p;
        if (std::abs(total - 1.0) > 1e-6)
            throw NumericError("row " + std::to_string(r) + " is not a probability vector");
        const double p = std::max(probs(r, static_cast<std::size_t>(labels[r])), kLogClamp);
        loss -= std::log(p);
    }
    return loss;
}

inline double accuracy(const Matrix& probs, std::span<const int> labels) {
    detail::check_labels(probs, labels);
    if (labels.empty())
        return 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < probs.rows(); ++r)
        hits += static_cast<int>(argmax(probs.row(r))) == labels[r];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// backward

struct BackwardResult {
    Gradients grads;
    Matrix input_grad;
};

namespace detail {

/// Converts dL/dA into dL/dZ in place, given the activated outputs A.
inline void activation_backward(Matrix& grad, const Matrix& out, Activation act) {
    switch (act) {
    case Activation::ReLU:
        for (std::size_t k = 0; k < grad.size(); ++k)
            if (!(out.data()[k] > 0.0))
                grad.data()[k] = 0.0;
        break;
    case Activation::Softmax:
        for (std::size_t r = 0; r < grad.rows(); ++r) {
            auto g = grad.row(r);
            const auto s = out.row(r);
            double dot = 0.0;
            for (std::size_t k = 0; k < s.size(); ++k)
                dot += g[k] * s[k];
            for (std::size_t k = 0; k < s.size(); ++k)
                g[k] = s[k] * (g[k] - dot);
        }
        break;
    case Activation::Identity:
        break;
    }
}

/// Backpropagates dL/dZ of the last layer down to the input.
inline BackwardResult backprop_from_preactivation(const Mlp& mlp, const ForwardCache& cache, Matrix dz) {
    const std::size_t depth = mlp.depth();
    BackwardResult result;
    result.grads.layers.resize(depth);
    for (std::size_t li = depth; li-- > 0;) {
        const auto& layer = mlp.layers()[li];
        const Matrix& a_prev = cache.activations[li];
        LayerGradient& g = result.grads.layers[li];
        g.d_weights = Matrix(layer.fan_in(), layer.fan_out());
        g.d_bias.assign(layer.fan_out(), 0.0);
        for (std::size_t r = 0; r < dz.rows(); ++r) {
            const auto dzr = dz.row(r);
            const auto ar = a_prev.row(r);
            for (std::size_t i = 0; i < layer.fan_in(); ++i) {
                auto gw = g.d_weights.row(i);
                const double ai = ar[i];
                for (std::size_t o = 0; o < layer.fan_out(); ++o)
                    gw[o] += ai * dzr[o];
            }
            for (std::size_t o = 0; o < layer.fan_out(); ++o)
                g.d_bias[o] += dzr[o];
        }

        Matrix da(dz.rows(), layer.fan_in());
        for (std::size_t r = 0; r < dz.rows(); ++r) {
            const auto dzr = dz.row(r);
            auto dar = da.row(r);
            for (std::size_t i = 0; i < layer.fan_in(); ++i) {
                const auto w = layer.weights.row(i);
                double acc = 0.0;
                for (std::size_t o = 0; o < layer.fan_out(); ++o)
                    acc += w[o] * dzr[o];
                dar[i] = acc;
            }
        }

        if (li == 0) {
            result.input_grad = std::move(da);
            break;
        }
        activation_backward(da, cache.activations[li], mlp.layers()[li - 1].activation);
        dz = std::move(da);
    }
    return result;
}

inline Matrix output_grad_to_preactivation(const Mlp& mlp, const ForwardCache& cache, Matrix d_out) {
    activation_backward(d_out, cache.output(), mlp.output_activation());
    return d_out;
}

} // namespace detail

/// Gradients given an upstream gradient on the network output.
inline BackwardResult backward_from_output(const Mlp& mlp, const ForwardCache& cache, const Matrix& d_output) {
    if (d_output.rows() != cache.output().rows() || d_output.cols() != mlp.output_width())
        throw ShapeError("upstream gradient has shape " + shape_string(d_output) + ", expected " +
                         shape_string(cache.output()));
    return detail::backprop_from_preactivation(mlp, cache, detail::output_grad_to_preactivation(mlp, cache, d_output));
}

/// Gradients of the summed cross-entropy for a Softmax-headed network whose
/// forward pass is already cached. Uses dL/dz = softmax - onehot.
inline BackwardResult backward_cross_entropy(const Mlp& mlp, const ForwardCache& cache, std::span<const int> labels) {
    if (mlp.output_activation() != Activation::Softmax)
        throw ArchitectureError("cross-entropy backward needs a Softmax output layer");
    detail::check_labels(cache.output(), labels);
    Matrix dz = cache.output();
    for (std::size_t r = 0; r < dz.rows(); ++r)
        dz(r, static_cast<std::size_t>(labels[r])) -= 1.0;
    return detail::backprop_from_preactivation(mlp, cache, std::move(dz));
}

/// Exact gradients of cross_entropy_loss(forward(x), y) w.r.t. every parameter.
inline Gradients backward(const Mlp& mlp, const Matrix& x, std::span<const int> labels) {
    if (x.rows() == 0)
        throw ShapeError("backward needs a nonempty batch");
    if (x.rows() != labels.size())
        throw ShapeError("batch has " + std::to_string(x.rows()) + " rows but " + std::to_string(labels.size()) +
                         " labels");
    return backward_cross_entropy(mlp, forward_cached(mlp, x), labels).grads;
}

// ---------------------------------------------------------------------------
// update, snapshot, surgery

/// In-place descent step: w <- w - learning_rate * dL/dw.
inline void sgd_step(Mlp& mlp, const Gradients& grads, double learning_rate) {
    if (!grads.congruent_with(mlp))
        throw ShapeError("gradients are not shape-congruent with the network");
    if (!grads.all_finite())
        throw NumericError("non-finite gradient; update rejected");
    if (!(learning_rate >= 0.0))
        throw ConfigError("learning rate must be nonnegative");
    auto layers = mlp.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        auto& w = layers[li].weights.data();
        const auto& gw = grads.layers[li].d_weights.data();
        for (std::size_t k = 0; k < w.size(); ++k)
            w[k] -= learning_rate * gw[k];
        auto& b = layers[li].bias;
        const auto& gb = grads.layers[li].d_bias;
        for (std::size_t k = 0; k < b.size(); ++k)
            b[k] -= learning_rate * gb[k];
    }
}

inline Snapshot snapshot(const Mlp& mlp, std::uint64_t step = 0) { return Snapshot{mlp, step}; }

inline bool same_shape(const Mlp& a, const Mlp& b) { return a.layer_sizes() == b.layer_sizes(); }

inline void restore(Mlp& mlp, const Snapshot& snap) {
    if (!same_shape(mlp, snap.params))
        throw ShapeError("snapshot shape does not match the network");
    mlp = snap.params;
}

/// Drops the output layer; the trunk keeps the penultimate activation.
inline Mlp pop_last_layer(const Mlp& mlp) {
    if (mlp.depth() < 2)
        throw ArchitectureError("cannot pop the only layer of a network");
    std::vector<DenseLayer> layers(mlp.layers().begin(), mlp.layers().end() - 1);
    return Mlp(std::move(layers));
}

// ---------------------------------------------------------------------------
// serialization
//
// Text format, one token stream:
//   hio-mlp 1
//   layers <n>
//   dense <fan_in> <fan_out> <activation>
//   <fan_in*fan_out weights, row-major>
//   <fan_out biases>
// Numbers use the shortest round-trip decimal form, so reading back is exact.

inline std::string format_double(double v) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    if (text == "inf" || text == "+inf" || text == "infinity")
        return std::numeric_limits<double>::infinity();
    if (text == "-inf")
        return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto* first = text.data();
    if (!text.empty() && text.front() == '+')
        ++first;
    const auto res = std::from_chars(first, text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw LoadError("not a number: '" + std::string(text) + "'");
    return v;
}

inline void write_mlp(std::ostream& out, const Mlp& mlp) {
    out << "hio-mlp 1\nlayers " << mlp.depth() << '\n';
    for (const auto& l : mlp.layers()) {
        out << "dense " << l.fan_in() << ' ' << l.fan_out() << ' ' << to_string(l.activation) << '\n';
        for (std::size_t k = 0; k < l.weights.size(); ++k)
            out << (k ? " " : "") << format_double(l.weights.data()[k]);
        out << '\n';
        for (std::size_t k = 0; k < l.bias.size(); ++k)
            out << (k ? " " : "") << format_double(l.bias[k]);
        out << '\n';
    }
}

inline Mlp read_mlp(std::istream& in) {
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "hio-mlp" || version != 1)
        throw LoadError("missing 'hio-mlp 1' header");
    std::size_t depth = 0;
    if (!(in >> tag >> depth) || tag != "layers" || depth == 0)
        throw LoadError("missing layer count");
    std::vector<DenseLayer> layers;
    for (std::size_t li = 0; li < depth; ++li) {
        std::size_t fan_in = 0, fan_out = 0;
        std::string act;
        if (!(in >> tag >> fan_in >> fan_out >> act) || tag != "dense")
            throw LoadError("bad layer header at layer " + std::to_string(li));
        DenseLayer l;
        l.activation = parse_activation(act);
        l.weights = Matrix(fan_in, fan_out);
        std::string token;
        for (double& w : l.weights.data()) {
            if (!(in >> token))
                throw LoadError("truncated weights at layer " + std::to_string(li));
            w = parse_double(token);
        }
        l.bias.resize(fan_out);
        for (double& b : l.bias) {
            if (!(in >> token))
                throw LoadError("truncated bias at layer " + std::to_string(li));
            b = parse_double(token);
        }
        layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers));
}

} // namespace hio
