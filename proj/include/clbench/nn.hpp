#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace clbench {

// Flat view of all trainable parameters. Layout is layer-major and stable:
// for each layer transition l (0-based): weights W[l] row-major (out x in),
// then biases b[l]. Total length P = sum over l of (fan_in + 1) * fan_out.
using param_vector = std::vector<double>;
using grad_vector = std::vector<double>;

struct batch {
    std::vector<double> inputs; // n * dim, row-major
    std::vector<int> labels;    // class indices in [0, num_classes)
    std::size_t n = 0;
    std::size_t dim = 0;
    int task_id = 0;
    // permitted class indices (multi-head); absent means all classes allowed
    std::optional<std::vector<int>> head_mask;
};

// Dense MLP, ReLU on hidden layers, identity on the output layer.
struct mlp_model {
    std::vector<int> layer_sizes;               // input, hidden..., output
    std::vector<std::vector<double>> weights;   // [l]: out x in, row-major
    std::vector<std::vector<double>> biases;    // [l]: out

    std::size_t param_count() const;
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
};

// Weights ~ U(-b, b) with b = sqrt(6 / fan_in); biases zero. Same seed gives
// bit-identical parameters.
mlp_model init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

param_vector flatten(const mlp_model& model);
void assign(mlp_model& model, const param_vector& theta);

// Logits, n x output_dim. Classes outside head_mask are forced to a large
// negative value so they get zero probability under softmax.
std::vector<double> forward(const mlp_model& model, const double* inputs, std::size_t n,
                            std::size_t dim,
                            const std::optional<std::vector<int>>& head_mask);
std::vector<double> forward(const mlp_model& model, const batch& b);

// Mean softmax cross-entropy over the batch (masked classes excluded).
double loss_only(const mlp_model& model, const batch& b);

struct loss_grad_result {
    double loss = 0.0;
    grad_vector grad; // same layout as param_vector
};

// Exact reverse-mode gradient of the mean cross-entropy w.r.t. the flat
// parameters. ReLU derivative at exactly 0 is taken as 0.
loss_grad_result loss_and_grad(const mlp_model& model, const batch& b);

// Scales g to euclidean norm max_norm when it exceeds it; max_norm <= 0 is a no-op.
void clip_grad_norm(grad_vector& g, double max_norm);

} // namespace clbench
