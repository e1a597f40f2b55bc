#include "clbench/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "clbench/errors.hpp"
#include "clbench/rng.hpp"

namespace clbench {

std::size_t mlp_model::param_count() const {
    std::size_t p = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        p += (static_cast<std::size_t>(layer_sizes[l]) + 1) * layer_sizes[l + 1];
    }
    return p;
}

mlp_model init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw config_error("init_mlp: need at least input and output layer sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw config_error("init_mlp: layer sizes must be positive");

    mlp_model m;
    m.layer_sizes = layer_sizes;
    rng64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        std::size_t fan_in = layer_sizes[l];
        std::size_t fan_out = layer_sizes[l + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::vector<double> w(fan_out * fan_in);
        for (double& x : w) x = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

param_vector flatten(const mlp_model& model) {
    param_vector theta;
    theta.reserve(model.param_count());
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        theta.insert(theta.end(), model.weights[l].begin(), model.weights[l].end());
        theta.insert(theta.end(), model.biases[l].begin(), model.biases[l].end());
    }
    return theta;
}

void assign(mlp_model& model, const param_vector& theta) {
    if (theta.size() != model.param_count())
        throw config_error("assign: parameter vector length mismatch");
    std::size_t off = 0;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        std::memcpy(model.weights[l].data(), theta.data() + off,
                    model.weights[l].size() * sizeof(double));
        off += model.weights[l].size();
        std::memcpy(model.biases[l].data(), theta.data() + off,
                    model.biases[l].size() * sizeof(double));
        off += model.biases[l].size();
    }
}

namespace {

constexpr double kMaskedLogit = -1e30;

// forward pass for one sample, keeping post-activation values per layer
void forward_sample(const mlp_model& m, const double* x,
                    std::vector<std::vector<double>>& acts) {
    std::size_t L = m.weights.size();
    acts.resize(L + 1);
    acts[0].assign(x, x + m.layer_sizes[0]);
    for (std::size_t l = 0; l < L; ++l) {
        std::size_t in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        acts[l + 1].assign(out, 0.0);
        const double* W = m.weights[l].data();
        const double* a = acts[l].data();
        double* z = acts[l + 1].data();
        for (std::size_t o = 0; o < out; ++o) {
            const double* row = W + o * in;
            double s = m.biases[l][o];
            for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
            z[o] = s;
        }
        if (l + 1 < L) { // ReLU on hidden layers only
            for (std::size_t o = 0; o < out; ++o)
                if (z[o] < 0.0) z[o] = 0.0;
        }
    }
}

std::vector<char> build_allowed(int num_classes,
                                const std::optional<std::vector<int>>& head_mask) {
    std::vector<char> allowed(num_classes, 1);
    if (head_mask) {
        std::fill(allowed.begin(), allowed.end(), 0);
        for (int c : *head_mask) {
            if (c < 0 || c >= num_classes)
                throw config_error("head_mask class index out of range");
            allowed[c] = 1;
        }
    }
    return allowed;
}

} // namespace

std::vector<double> forward(const mlp_model& model, const double* inputs, std::size_t n,
                            std::size_t dim,
                            const std::optional<std::vector<int>>& head_mask) {
    if (static_cast<int>(dim) != model.input_dim())
        throw config_error("forward: input width does not match model input dim");
    int C = model.output_dim();
    std::vector<char> allowed = build_allowed(C, head_mask);
    std::vector<double> logits(n * C);
    std::vector<std::vector<double>> acts;
    for (std::size_t s = 0; s < n; ++s) {
        forward_sample(model, inputs + s * dim, acts);
        double* out = logits.data() + s * C;
        for (int c = 0; c < C; ++c)
            out[c] = allowed[c] ? acts.back()[c] : kMaskedLogit;
    }
    return logits;
}

std::vector<double> forward(const mlp_model& model, const batch& b) {
    return forward(model, b.inputs.data(), b.n, b.dim, b.head_mask);
}

namespace {

void validate_batch(const mlp_model& model, const batch& b) {
    if (b.n == 0) throw numeric_error("loss: empty batch");
    if (static_cast<int>(b.dim) != model.input_dim())
        throw config_error("loss: batch width does not match model input dim");
    for (double x : b.inputs)
        if (!std::isfinite(x)) throw numeric_error("loss: non-finite input value");
    int C = model.output_dim();
    for (int y : b.labels)
        if (y < 0 || y >= C) throw config_error("loss: label out of range");
}

// softmax CE on one sample's logits; returns loss, writes probabilities
double ce_sample(const double* logits, int C, int label, double* probs) {
    double m = logits[0];
    for (int c = 1; c < C; ++c) m = std::max(m, logits[c]);
    double z = 0.0;
    for (int c = 0; c < C; ++c) {
        probs[c] = std::exp(logits[c] - m);
        z += probs[c];
    }
    for (int c = 0; c < C; ++c) probs[c] /= z;
    double p = std::max(probs[label], 1e-300);
    return -std::log(p);
}

} // namespace

double loss_only(const mlp_model& model, const batch& b) {
    validate_batch(model, b);
    int C = model.output_dim();
    std::vector<double> logits = forward(model, b);
    std::vector<double> probs(C);
    double total = 0.0;
    for (std::size_t s = 0; s < b.n; ++s)
        total += ce_sample(logits.data() + s * C, C, b.labels[s], probs.data());
    return total / static_cast<double>(b.n);
}

loss_grad_result loss_and_grad(const mlp_model& model, const batch& b) {
    validate_batch(model, b);
    std::size_t L = model.weights.size();
    int C = model.output_dim();
    std::vector<char> allowed = build_allowed(C, b.head_mask);

    loss_grad_result res;
    res.grad.assign(model.param_count(), 0.0);

    // per-layer offsets into the flat gradient
    std::vector<std::size_t> w_off(L), b_off(L);
    {
        std::size_t off = 0;
        for (std::size_t l = 0; l < L; ++l) {
            w_off[l] = off;
            off += model.weights[l].size();
            b_off[l] = off;
            off += model.biases[l].size();
        }
    }

    std::vector<std::vector<double>> acts;
    std::vector<double> probs(C);
    std::vector<double> delta, delta_prev;
    double inv_n = 1.0 / static_cast<double>(b.n);

    for (std::size_t s = 0; s < b.n; ++s) {
        forward_sample(model, b.inputs.data() + s * b.dim, acts);
        // mask, then softmax CE on the final pre-activations
        std::vector<double>& out = acts.back();
        for (int c = 0; c < C; ++c)
            if (!allowed[c]) out[c] = kMaskedLogit;
        res.loss += ce_sample(out.data(), C, b.labels[s], probs.data()) * inv_n;

        // dL/dlogit = (softmax - onehot) / n; masked classes get exactly 0
        // (their probability is 0 and the label is never masked)
        delta.assign(C, 0.0);
        for (int c = 0; c < C; ++c) delta[c] = probs[c] * inv_n;
        delta[b.labels[s]] -= inv_n;

        for (std::size_t l = L; l-- > 0;) {
            std::size_t in = model.layer_sizes[l], out_sz = model.layer_sizes[l + 1];
            const double* a = acts[l].data();
            double* gw = res.grad.data() + w_off[l];
            double* gb = res.grad.data() + b_off[l];
            for (std::size_t o = 0; o < out_sz; ++o) {
                double d = delta[o];
                if (d != 0.0) {
                    double* row = gw + o * in;
                    for (std::size_t i = 0; i < in; ++i) row[i] += d * a[i];
                }
                gb[o] += d;
            }
            if (l == 0) break;
            delta_prev.assign(in, 0.0);
            const double* W = model.weights[l].data();
            for (std::size_t o = 0; o < out_sz; ++o) {
                double d = delta[o];
                if (d == 0.0) continue;
                const double* row = W + o * in;
                for (std::size_t i = 0; i < in; ++i) delta_prev[i] += d * row[i];
            }
            // ReLU backward: derivative is 0 where the activation was clamped
            // (including exactly at 0)
            for (std::size_t i = 0; i < in; ++i)
                if (acts[l][i] <= 0.0) delta_prev[i] = 0.0;
            delta.swap(delta_prev);
        }
    }
    return res;
}

void clip_grad_norm(grad_vector& g, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (double x : g) sq += x * x;
    double norm = std::sqrt(sq);
    if (norm > max_norm) {
        double scale = max_norm / norm;
        for (double& x : g) x *= scale;
    }
}

} // namespace clbench
