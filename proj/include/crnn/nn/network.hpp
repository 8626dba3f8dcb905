// Small sequence-to-one regressor: stacked LSTM layers over a fixed-length
// scalar window, followed by dense layers applied to the last hidden state.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crnn/dataset.hpp"

namespace crnn::nn {

enum class Activation { linear, tanh, sigmoid };
enum class LayerKind { lstm, dense };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);
std::string_view to_string(LayerKind k);
LayerKind parse_layer_kind(std::string_view s);

/// LSTM: output_dim is the hidden size; gate rows ordered (i, f, g, o);
/// parameters stored as W_x (4h x d), W_h (4h x h), b (4h), row-major.
/// Dense: W (out x in), b (out).
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    Activation activation = Activation::linear;  // dense only

    std::size_t param_count() const;
    bool operator==(const LayerSpec&) const = default;
};

/// Convenience description: LSTM stack then dense stack; the last dense
/// unit count must be 1 and that layer is linear.
struct NetworkShape {
    std::vector<std::size_t> lstm_units;
    std::vector<std::size_t> dense_units{1};
    Activation hidden_activation = Activation::tanh;

    std::vector<LayerSpec> layers() const;
};

/// A named contiguous block of parameters, e.g. "layer0.lstm.W_h".
struct TensorView {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

class Network {
public:
    Network() = default;
    /// Validates the layer chain (LSTMs first, dims agree, scalar output)
    /// and zero-initializes all parameters.
    Network(std::vector<LayerSpec> layers, std::size_t window);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::size_t window() const { return window_; }
    std::size_t param_count() const { return params_.size(); }
    std::size_t layer_offset(std::size_t i) const { return offsets_.at(i); }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    const NormStats& norm() const { return norm_; }
    void set_norm(const NormStats& n) { norm_ = n; }

    std::vector<TensorView> tensors() const;

    /// Hash of architecture, parameters and normalization.
    std::uint64_t fingerprint() const;

    bool operator==(const Network&) const = default;

private:
    std::vector<LayerSpec> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t window_ = 0;
    std::vector<double> params_;
    NormStats norm_;
};

/// Sum of per-layer counts: 4(h·d + h·h + h) per LSTM, out·in + out per dense.
std::size_t param_count(const Network& net);
std::size_t param_count(std::span<const LayerSpec> layers);

/// Uniform(±1/sqrt(fan_in)) weights, zero biases except forget gates at 1.
void init_params(Network& net, std::uint64_t seed);
Network make_network(const NetworkShape& shape, std::size_t window, std::uint64_t seed);

struct LstmCache {
    std::size_t input_dim = 0, hidden = 0;
    // Indexed [t][unit][batch].
    std::vector<double> x, h_prev, c_prev, gates, c, tanh_c, h;
};

struct DenseCache {
    std::vector<double> input, output;  // [unit][batch]
};

/// Activations retained by forward() for backward().
struct ForwardCache {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::uint64_t fingerprint = 0;
    std::vector<LstmCache> lstm;
    std::vector<DenseCache> dense;
    std::vector<double> last_input;  // [batch], feeds the first dense layer when there is no LSTM
};

struct Gradients {
    std::vector<double> params;  // same layout as Network::params()
    std::vector<double> inputs;  // [batch][t], matching the window layout
};

/// Batched forward over `batch` windows stored row-major (batch x window).
/// Inputs are in the network's normalized units. Each prediction is
/// bit-identical to the one a single-window call would produce.
std::vector<double> forward(const Network& net, std::span<const double> windows, std::size_t batch,
                            ForwardCache* cache = nullptr);

struct Prediction {
    double value = 0.0;
    ForwardCache cache;
};
Prediction forward(const Network& net, std::span<const double> window);

/// Backpropagation through time. `dloss_dpred` holds one entry per batch
/// element; parameter gradients are summed over the batch.
Gradients backward(const Network& net, const ForwardCache& cache, std::span<const double> dloss_dpred);

/// Mean squared difference; throws on empty or mismatched input.
double mse(std::span<const double> pred, std::span<const double> target);

}  // namespace crnn::nn
