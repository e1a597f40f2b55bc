#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "clbench/data.hpp"
#include "clbench/metrics.hpp"
#include "clbench/nn.hpp"

namespace clbench {

enum class importance_mode { taylor, si_variant };
enum class meta_lr_mode { recursive, stateless };

struct emcl_config {
    double alpha0 = 0.3;  // initial meta learning rate
    double beta = 0.15;   // inner gradient step size
    double lambda = 10.0; // inner regularization strength
    double gamma = 0.3;   // proximal scaling
    double eta = 0.9985;  // importance moving-average decay
    double r = 1.8e-4;    // meta-LR scale factor
    double lr_min = 1e-4; // meta-LR clamp bounds
    double lr_max = 800.0;
    importance_mode imode = importance_mode::taylor;
    meta_lr_mode lmode = meta_lr_mode::recursive;
    bool use_pgd = true;       // prox step in the inner loop (vs explicit penalty gradient)
    bool use_inner_reg = true; // regularized inner loop at all (off = plain SGD inner steps)
    double grad_clip = 3.0;    // norm cap on data gradients; <= 0 disables
    double h_init = 1e-4;      // initial importance moving average (elementwise)

    void validate() const; // throws config_error on a bad combination
};

struct importance_state {
    std::vector<double> h;          // moving average, >= 0 elementwise
    std::vector<double> last_omega; // most recent raw importance
    long step = 0;
};

struct meta_lr_state {
    std::vector<double> alpha; // per-parameter meta LR, clamped to [lr_min, lr_max]
};

struct emcl_state {
    param_vector theta0;
    importance_state importance;
    meta_lr_state meta_lr;
    emcl_config config;
    long step = 0;
};

emcl_state make_emcl_state(const param_vector& theta0, const emcl_config& cfg);

// L(theta) + (lambda/2) sum_m h_m (theta_m - theta0_m)^2, with L the mean
// cross-entropy on the batch. `scratch` provides the architecture.
double inner_loss(mlp_model& scratch, const param_vector& theta, const param_vector& theta0,
                  const std::vector<double>& h, double lambda, const batch& b);

// hat_theta = theta - beta * grad L(theta; sample). The regularizer is not
// part of this step; it is applied by the following prox. grad_clip <= 0
// disables clipping.
param_vector inner_grad_step(mlp_model& scratch, const param_vector& theta, const batch& sample,
                             double beta, double grad_clip);

// Closed-form prox of f(x) = c (x - x0)^2: (v + 2 gamma c x0) / (2 gamma c + 1).
double prox_operator(double v, double x0, double c, double gamma);

// Elementwise theta_m = (hat_m + gamma lambda h_m theta0_m) / (gamma lambda h_m + 1);
// identical to prox_operator with c_m = lambda h_m / 2.
param_vector prox_step(const param_vector& hat, const param_vector& theta0,
                       const std::vector<double>& h, double gamma, double lambda);

// One pass over the batch, one sample per step (k = batch size). Dispatches on
// use_pgd / use_inner_reg: prox-based PGD, explicit penalty gradient, or plain
// SGD.
param_vector inner_loop(mlp_model& scratch, const param_vector& theta0, const batch& b,
                        const std::vector<double>& h, const emcl_config& cfg);

// Omega_m = | grad_m * theta0_m |
std::vector<double> importance_taylor(const grad_vector& grad_at_theta0,
                                      const param_vector& theta0);

// Omega_m = | grad_m * delta_theta_m |
std::vector<double> importance_si_variant(const grad_vector& grad,
                                          const param_vector& delta_theta);

// h'_m = eta h_m + (1 - eta) omega_m
std::vector<double> update_importance_ma(const std::vector<double>& h,
                                         const std::vector<double>& omega, double eta);

// recursive: alpha'_m = clamp(alpha_m * r / max(h_m, eps));
// stateless: alpha'_m = clamp(alpha0 * r / max(h_m, eps)); eps = 1e-8.
std::vector<double> update_meta_lr(const std::vector<double>& alpha,
                                   const std::vector<double>& h, const emcl_config& cfg);

// g_m = lambda h_m (theta0_m - theta_k_m)
grad_vector meta_gradient(const param_vector& theta0, const param_vector& theta_k,
                          const std::vector<double>& h, double lambda);

struct step_log {
    double batch_loss = 0.0; // full-batch loss at the pre-update theta0
    double mean_h = 0.0;
    double mean_alpha = 0.0;
};

// One meta-step, in order: inner loop with previous h; meta-update of theta0
// with previous alpha and the same h; importance from the full-batch gradient
// at the pre-update theta0 (or from theta_k - theta0 in si mode); then the
// h and alpha updates; then the step counter.
step_log emcl_train_step(emcl_state& st, mlp_model& scratch, const batch& b);

struct train_log {
    std::vector<double> step_loss;
    std::vector<double> step_mean_h;
    std::vector<double> step_mean_alpha;
    std::vector<double> per_task_seconds;
    double total_seconds = 0.0;
};

using eval_hook = std::function<void(int task_index, const mlp_model& model)>;

struct train_result {
    mlp_model model;
    accuracy_matrix matrix;
    train_log log;
};

// Full single-pass run over the task sequence; fills matrix column t at each
// task boundary. `seed` drives model init and batch shuffles.
train_result emcl_train(const task_sequence& seq, const emcl_config& cfg,
                        const std::vector<int>& layer_sizes, int batch_size, std::uint64_t seed,
                        const eval_hook& hook = nullptr);

} // namespace clbench
