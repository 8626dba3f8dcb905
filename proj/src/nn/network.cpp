#include "crnn/nn/network.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "crnn/checksum.hpp"

namespace crnn::nn {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

Activation parse_activation(std::string_view s) {
    if (s == "linear") return Activation::linear;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(LayerKind k) { return k == LayerKind::lstm ? "lstm" : "dense"; }

LayerKind parse_layer_kind(std::string_view s) {
    if (s == "lstm") return LayerKind::lstm;
    if (s == "dense") return LayerKind::dense;
    throw std::invalid_argument("unknown layer kind '" + std::string(s) + "'");
}

std::size_t LayerSpec::param_count() const {
    if (kind == LayerKind::lstm) {
        const std::size_t h = output_dim, d = input_dim;
        return 4 * (h * d + h * h + h);
    }
    return output_dim * input_dim + output_dim;
}

std::vector<LayerSpec> NetworkShape::layers() const {
    std::vector<LayerSpec> out;
    std::size_t in = 1;
    for (std::size_t h : lstm_units) {
        out.push_back({LayerKind::lstm, in, h, Activation::linear});
        in = h;
    }
    for (std::size_t i = 0; i < dense_units.size(); ++i) {
        const bool last = i + 1 == dense_units.size();
        out.push_back({LayerKind::dense, in, dense_units[i], last ? Activation::linear : hidden_activation});
        in = dense_units[i];
    }
    return out;
}

namespace {

std::string layer_name(std::size_t i, const LayerSpec& l) {
    return "layer" + std::to_string(i) + "." + std::string(to_string(l.kind));
}

}  // namespace

Network::Network(std::vector<LayerSpec> layers, std::size_t window) : layers_(std::move(layers)), window_(window) {
    if (window_ < 1) throw std::invalid_argument("Network: window must be >= 1");
    if (layers_.empty()) throw std::invalid_argument("Network: at least one layer is required");
    std::size_t expected_in = 1;
    bool seen_dense = false;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        if (l.input_dim == 0 || l.output_dim == 0)
            throw std::invalid_argument("Network: " + layer_name(i, l) + " has a zero dimension");
        if (l.input_dim != expected_in)
            throw std::invalid_argument("Network: " + layer_name(i, l) + " expects input_dim " +
                                        std::to_string(l.input_dim) + " but receives " + std::to_string(expected_in));
        if (l.kind == LayerKind::lstm && seen_dense)
            throw std::invalid_argument("Network: " + layer_name(i, l) + " follows a dense layer");
        seen_dense = seen_dense || l.kind == LayerKind::dense;
        offsets_.push_back(offset);
        offset += l.param_count();
        expected_in = l.output_dim;
    }
    if (expected_in != 1)
        throw std::invalid_argument("Network: " + layer_name(layers_.size() - 1, layers_.back()) +
                                    " must produce a scalar output, got " + std::to_string(expected_in));
    params_.assign(offset, 0.0);
}

std::vector<TensorView> Network::tensors() const {
    std::vector<TensorView> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const std::string base = layer_name(i, l);
        std::size_t off = offsets_[i];
        if (l.kind == LayerKind::lstm) {
            const std::size_t g = 4 * l.output_dim;
            out.push_back({base + ".W_x", off, g, l.input_dim});
            off += g * l.input_dim;
            out.push_back({base + ".W_h", off, g, l.output_dim});
            off += g * l.output_dim;
            out.push_back({base + ".b", off, g, 1});
        } else {
            out.push_back({base + ".W", off, l.output_dim, l.input_dim});
            off += l.output_dim * l.input_dim;
            out.push_back({base + ".b", off, l.output_dim, 1});
        }
    }
    return out;
}

std::uint64_t Network::fingerprint() const {
    Fnv1a h;
    h.add(window_);
    for (const LayerSpec& l : layers_) {
        h.add(static_cast<int>(l.kind));
        h.add(l.input_dim);
        h.add(l.output_dim);
        h.add(static_cast<int>(l.activation));
    }
    h.add_bytes(params_.data(), params_.size() * sizeof(double));
    h.add(norm_.input.offset);
    h.add(norm_.input.scale);
    h.add(norm_.target.offset);
    h.add(norm_.target.scale);
    return h.value();
}

std::size_t param_count(std::span<const LayerSpec> layers) {
    std::size_t n = 0;
    for (const LayerSpec& l : layers) n += l.param_count();
    return n;
}

std::size_t param_count(const Network& net) { return param_count(net.layers()); }

void init_params(Network& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto p = net.params();
    for (const TensorView& t : net.tensors()) {
        const bool bias = t.cols == 1 && t.name.ends_with(".b");
        if (bias) {
            for (std::size_t k = 0; k < t.size(); ++k) p[t.offset + k] = 0.0;
            continue;
        }
        const double limit = 1.0 / std::sqrt(static_cast<double>(t.cols));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t k = 0; k < t.size(); ++k) p[t.offset + k] = dist(rng);
    }
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const LayerSpec& l = net.layers()[i];
        if (l.kind != LayerKind::lstm) continue;
        const std::size_t h = l.output_dim;
        const std::size_t bias_off = net.layer_offset(i) + 4 * h * (l.input_dim + h);
        for (std::size_t r = h; r < 2 * h; ++r) p[bias_off + r] = 1.0;
    }
}

Network make_network(const NetworkShape& shape, std::size_t window, std::uint64_t seed) {
    Network net(shape.layers(), window);
    init_params(net, seed);
    return net;
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double activate(Activation a, double z) {
    switch (a) {
        case Activation::linear: return z;
        case Activation::tanh: return std::tanh(z);
        case Activation::sigmoid: return sigmoid(z);
    }
    return z;
}

// d activation / dz expressed through the activation's output y.
double activate_grad(Activation a, double y) {
    switch (a) {
        case Activation::linear: return 1.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::sigmoid: return y * (1.0 - y);
    }
    return 1.0;
}

// out[r][b] += sum_k W[r][k] * in[k][b], k ascending for every element.
void matmul_acc(const double* w, std::size_t rows, std::size_t cols, const double* in, double* out,
                std::size_t batch) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* o = out + r * batch;
        for (std::size_t k = 0; k < cols; ++k) {
            const double wk = w[r * cols + k];
            const double* x = in + k * batch;
            for (std::size_t b = 0; b < batch; ++b) o[b] += wk * x[b];
        }
    }
}

// out[k][b] += sum_r W[r][k] * d[r][b]
void matmul_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* d, double* out,
                  std::size_t batch) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* dr = d + r * batch;
        for (std::size_t k = 0; k < cols; ++k) {
            const double wk = w[r * cols + k];
            double* o = out + k * batch;
            for (std::size_t b = 0; b < batch; ++b) o[b] += wk * dr[b];
        }
    }
}

// gW[r][k] += sum_b d[r][b] * in[k][b]
void outer_acc(const double* d, std::size_t rows, const double* in, std::size_t cols, double* gw,
               std::size_t batch) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* dr = d + r * batch;
        for (std::size_t k = 0; k < cols; ++k) {
            const double* x = in + k * batch;
            double s = 0.0;
            for (std::size_t b = 0; b < batch; ++b) s += dr[b] * x[b];
            gw[r * cols + k] += s;
        }
    }
}

void bias_acc(const double* d, std::size_t rows, double* gb, std::size_t batch) {
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) s += d[r * batch + b];
        gb[r] += s;
    }
}

void check_finite_inputs(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("forward: non-finite input");
}

}  // namespace

std::vector<double> forward(const Network& net, std::span<const double> windows, std::size_t batch,
                            ForwardCache* cache) {
    const std::size_t steps = net.window();
    if (net.layers().empty()) throw std::invalid_argument("forward: network has no layers");
    if (windows.size() != batch * steps)
        throw std::invalid_argument("forward: expected " + std::to_string(batch) + " windows of length " +
                                    std::to_string(steps) + ", got " + std::to_string(windows.size()) + " values");
    check_finite_inputs(windows);

    const auto p = net.params();
    const auto& layers = net.layers();

    // Sequence in [t][unit][batch] layout, starting as the scalar input channel.
    std::vector<double> seq(steps * batch);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t) seq[t * batch + b] = windows[b * steps + t];

    ForwardCache local;
    ForwardCache& fc = cache ? *cache : local;
    fc = ForwardCache{};
    fc.batch = batch;
    fc.steps = steps;
    fc.fingerprint = cache ? net.fingerprint() : 0;

    std::size_t li = 0;
    std::size_t dim = 1;
    for (; li < layers.size() && layers[li].kind == LayerKind::lstm; ++li) {
        const LayerSpec& l = layers[li];
        const std::size_t d = l.input_dim, h = l.output_dim, g = 4 * h;
        const double* wx = p.data() + net.layer_offset(li);
        const double* wh = wx + g * d;
        const double* bias = wh + g * h;

        LstmCache lc;
        lc.input_dim = d;
        lc.hidden = h;
        lc.x = seq;
        lc.h_prev.assign(steps * h * batch, 0.0);
        lc.c_prev.assign(steps * h * batch, 0.0);
        lc.gates.assign(steps * g * batch, 0.0);
        lc.c.assign(steps * h * batch, 0.0);
        lc.tanh_c.assign(steps * h * batch, 0.0);
        lc.h.assign(steps * h * batch, 0.0);

        std::vector<double> z(g * batch);
        for (std::size_t t = 0; t < steps; ++t) {
            const double* xt = lc.x.data() + t * d * batch;
            double* hp = lc.h_prev.data() + t * h * batch;
            double* cp = lc.c_prev.data() + t * h * batch;
            if (t > 0) {
                std::memcpy(hp, lc.h.data() + (t - 1) * h * batch, h * batch * sizeof(double));
                std::memcpy(cp, lc.c.data() + (t - 1) * h * batch, h * batch * sizeof(double));
            }
            for (std::size_t r = 0; r < g; ++r)
                for (std::size_t b = 0; b < batch; ++b) z[r * batch + b] = bias[r];
            matmul_acc(wx, g, d, xt, z.data(), batch);
            matmul_acc(wh, g, h, hp, z.data(), batch);

            double* gt = lc.gates.data() + t * g * batch;
            double* ct = lc.c.data() + t * h * batch;
            double* tct = lc.tanh_c.data() + t * h * batch;
            double* ht = lc.h.data() + t * h * batch;
            for (std::size_t u = 0; u < h; ++u) {
                for (std::size_t b = 0; b < batch; ++b) {
                    const std::size_t k = u * batch + b;
                    const double ig = sigmoid(z[k]);
                    const double fg = sigmoid(z[h * batch + k]);
                    const double gg = std::tanh(z[2 * h * batch + k]);
                    const double og = sigmoid(z[3 * h * batch + k]);
                    gt[k] = ig;
                    gt[h * batch + k] = fg;
                    gt[2 * h * batch + k] = gg;
                    gt[3 * h * batch + k] = og;
                    ct[k] = fg * cp[k] + ig * gg;
                    tct[k] = std::tanh(ct[k]);
                    ht[k] = og * tct[k];
                }
            }
        }
        seq = lc.h;
        dim = h;
        fc.lstm.push_back(std::move(lc));
    }

    // Dense stack acts on the final time step.
    std::vector<double> act(seq.end() - static_cast<std::ptrdiff_t>(dim * batch), seq.end());
    if (fc.lstm.empty()) fc.last_input = act;
    for (; li < layers.size(); ++li) {
        const LayerSpec& l = layers[li];
        const double* w = p.data() + net.layer_offset(li);
        const double* bias = w + l.output_dim * l.input_dim;
        DenseCache dc;
        dc.input = act;
        dc.output.assign(l.output_dim * batch, 0.0);
        for (std::size_t r = 0; r < l.output_dim; ++r)
            for (std::size_t b = 0; b < batch; ++b) dc.output[r * batch + b] = bias[r];
        matmul_acc(w, l.output_dim, l.input_dim, act.data(), dc.output.data(), batch);
        for (double& v : dc.output) v = activate(l.activation, v);
        act = dc.output;
        fc.dense.push_back(std::move(dc));
    }
    return act;
}

Prediction forward(const Network& net, std::span<const double> window) {
    Prediction out;
    out.value = forward(net, window, 1, &out.cache).front();
    return out;
}

Gradients backward(const Network& net, const ForwardCache& cache, std::span<const double> dloss_dpred) {
    if (cache.fingerprint != net.fingerprint() || cache.steps != net.window())
        throw std::invalid_argument("backward: cache was not produced by this network state");
    const std::size_t batch = cache.batch, steps = cache.steps;
    if (dloss_dpred.size() != batch) throw std::invalid_argument("backward: gradient size does not match batch");

    const auto p = net.params();
    const auto& layers = net.layers();
    Gradients g;
    g.params.assign(p.size(), 0.0);
    g.inputs.assign(batch * steps, 0.0);

    const std::size_t n_lstm = cache.lstm.size();
    std::vector<double> delta(dloss_dpred.begin(), dloss_dpred.end());

    for (std::size_t di = cache.dense.size(); di-- > 0;) {
        const std::size_t li = n_lstm + di;
        const LayerSpec& l = layers[li];
        const DenseCache& dc = cache.dense[di];
        const double* w = p.data() + net.layer_offset(li);
        double* gw = g.params.data() + net.layer_offset(li);
        double* gb = gw + l.output_dim * l.input_dim;

        std::vector<double> dz(l.output_dim * batch);
        for (std::size_t k = 0; k < dz.size(); ++k) dz[k] = delta[k] * activate_grad(l.activation, dc.output[k]);
        outer_acc(dz.data(), l.output_dim, dc.input.data(), l.input_dim, gw, batch);
        bias_acc(dz.data(), l.output_dim, gb, batch);
        std::vector<double> din(l.input_dim * batch, 0.0);
        matmul_t_acc(w, l.output_dim, l.input_dim, dz.data(), din.data(), batch);
        delta = std::move(din);
    }

    if (n_lstm == 0) {
        for (std::size_t b = 0; b < batch; ++b) g.inputs[b * steps + steps - 1] = delta[b];
        return g;
    }

    // Gradient w.r.t. each LSTM layer's output sequence, [t][unit][batch].
    const std::size_t top_h = cache.lstm.back().hidden;
    std::vector<double> dseq(steps * top_h * batch, 0.0);
    std::copy(delta.begin(), delta.end(), dseq.begin() + static_cast<std::ptrdiff_t>((steps - 1) * top_h * batch));

    for (std::size_t li = n_lstm; li-- > 0;) {
        const LstmCache& lc = cache.lstm[li];
        const std::size_t d = lc.input_dim, h = lc.hidden, gsz = 4 * h;
        const double* wx = p.data() + net.layer_offset(li);
        const double* wh = wx + gsz * d;
        double* gwx = g.params.data() + net.layer_offset(li);
        double* gwh = gwx + gsz * d;
        double* gb = gwh + gsz * h;

        std::vector<double> dx(steps * d * batch, 0.0);
        std::vector<double> dh_next(h * batch, 0.0), dc_next(h * batch, 0.0);
        std::vector<double> dz(gsz * batch);

        for (std::size_t t = steps; t-- > 0;) {
            const double* gt = lc.gates.data() + t * gsz * batch;
            const double* cp = lc.c_prev.data() + t * h * batch;
            const double* tct = lc.tanh_c.data() + t * h * batch;
            const double* dh_out = dseq.data() + t * h * batch;
            for (std::size_t u = 0; u < h; ++u) {
                for (std::size_t b = 0; b < batch; ++b) {
                    const std::size_t k = u * batch + b;
                    const double ig = gt[k], fg = gt[h * batch + k], gg = gt[2 * h * batch + k],
                                 og = gt[3 * h * batch + k];
                    const double dh = dh_out[k] + dh_next[k];
                    const double dc = dh * og * (1.0 - tct[k] * tct[k]) + dc_next[k];
                    dz[k] = dc * gg * ig * (1.0 - ig);
                    dz[h * batch + k] = dc * cp[k] * fg * (1.0 - fg);
                    dz[2 * h * batch + k] = dc * ig * (1.0 - gg * gg);
                    dz[3 * h * batch + k] = dh * tct[k] * og * (1.0 - og);
                    dc_next[k] = dc * fg;
                }
            }
            outer_acc(dz.data(), gsz, lc.x.data() + t * d * batch, d, gwx, batch);
            outer_acc(dz.data(), gsz, lc.h_prev.data() + t * h * batch, h, gwh, batch);
            bias_acc(dz.data(), gsz, gb, batch);
            matmul_t_acc(wx, gsz, d, dz.data(), dx.data() + t * d * batch, batch);
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            matmul_t_acc(wh, gsz, h, dz.data(), dh_next.data(), batch);
        }
        dseq = std::move(dx);
    }

    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t) g.inputs[b * steps + t] = dseq[t * batch + b];
    return g;
}

double mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw std::invalid_argument("mse: length mismatch");
    if (pred.empty()) throw std::invalid_argument("mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

}  // namespace crnn::nn
