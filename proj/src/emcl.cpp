#include "clbench/emcl.hpp"

#include <chrono>
#include <cmath>

#include "clbench/errors.hpp"
#include "clbench/rng.hpp"

namespace clbench {

void emcl_config::validate() const {
    if (alpha0 <= 0.0) throw config_error("emcl: alpha0 must be positive");
    if (beta <= 0.0) throw config_error("emcl: beta must be positive");
    if (gamma <= 0.0) throw config_error("emcl: gamma must be positive");
    if (lambda < 0.0) throw config_error("emcl: lambda must be nonnegative");
    if (lambda == 0.0)
        throw config_error("emcl: lambda = 0 makes the meta-gradient vanish; use the sgd baseline instead");
    if (eta < 0.0 || eta > 1.0) throw config_error("emcl: eta must lie in [0, 1]");
    if (r <= 0.0) throw config_error("emcl: r must be positive");
    if (lr_min <= 0.0 || lr_max < lr_min)
        throw config_error("emcl: need 0 < lr_min <= lr_max");
    if (alpha0 < lr_min || alpha0 > lr_max)
        throw config_error("emcl: alpha0 must lie within [lr_min, lr_max]");
    if (h_init < 0.0) throw config_error("emcl: h_init must be nonnegative");
}

emcl_state make_emcl_state(const param_vector& theta0, const emcl_config& cfg) {
    emcl_state st;
    st.theta0 = theta0;
    st.config = cfg;
    st.importance.h.assign(theta0.size(), cfg.h_init);
    st.importance.last_omega.assign(theta0.size(), 0.0);
    st.meta_lr.alpha.assign(theta0.size(), cfg.alpha0);
    return st;
}

double inner_loss(mlp_model& scratch, const param_vector& theta, const param_vector& theta0,
                  const std::vector<double>& h, double lambda, const batch& b) {
    if (theta.size() != theta0.size() || theta.size() != h.size())
        throw config_error("inner_loss: vector length mismatch");
    assign(scratch, theta);
    double loss = loss_only(scratch, b);
    double reg = 0.0;
    for (std::size_t m = 0; m < theta.size(); ++m) {
        double d = theta[m] - theta0[m];
        reg += h[m] * d * d;
    }
    return loss + 0.5 * lambda * reg;
}

param_vector inner_grad_step(mlp_model& scratch, const param_vector& theta, const batch& sample,
                             double beta, double grad_clip) {
    assign(scratch, theta);
    loss_grad_result lg = loss_and_grad(scratch, sample);
    clip_grad_norm(lg.grad, grad_clip);
    param_vector hat = theta;
    for (std::size_t m = 0; m < hat.size(); ++m) hat[m] -= beta * lg.grad[m];
    return hat;
}

double prox_operator(double v, double x0, double c, double gamma) {
    if (gamma <= 0.0) throw config_error("prox_operator: gamma must be positive");
    if (c < 0.0) throw config_error("prox_operator: c must be nonnegative");
    return (v + 2.0 * gamma * c * x0) / (2.0 * gamma * c + 1.0);
}

param_vector prox_step(const param_vector& hat, const param_vector& theta0,
                       const std::vector<double>& h, double gamma, double lambda) {
    param_vector theta(hat.size());
    for (std::size_t m = 0; m < hat.size(); ++m) {
        double glh = gamma * lambda * h[m];
        theta[m] = (hat[m] + glh * theta0[m]) / (glh + 1.0);
    }
    return theta;
}

param_vector inner_loop(mlp_model& scratch, const param_vector& theta0, const batch& b,
                        const std::vector<double>& h, const emcl_config& cfg) {
    if (b.n == 0) throw numeric_error("inner_loop: empty batch");
    param_vector theta = theta0;
    batch sample;
    sample.n = 1;
    sample.dim = b.dim;
    sample.task_id = b.task_id;
    sample.head_mask = b.head_mask;
    sample.inputs.resize(b.dim);
    sample.labels.resize(1);
    for (std::size_t kappa = 0; kappa < b.n; ++kappa) {
        std::copy(b.inputs.begin() + kappa * b.dim, b.inputs.begin() + (kappa + 1) * b.dim,
                  sample.inputs.begin());
        sample.labels[0] = b.labels[kappa];
        if (cfg.use_inner_reg && cfg.use_pgd) {
            param_vector hat = inner_grad_step(scratch, theta, sample, cfg.beta, cfg.grad_clip);
            theta = prox_step(hat, theta0, h, cfg.gamma, cfg.lambda);
        } else if (cfg.use_inner_reg) {
            // vanilla gradient descent on the full regularized objective:
            // clip applies to the data gradient only, the penalty gradient is exact
            assign(scratch, theta);
            loss_grad_result lg = loss_and_grad(scratch, sample);
            clip_grad_norm(lg.grad, cfg.grad_clip);
            for (std::size_t m = 0; m < theta.size(); ++m)
                theta[m] -= cfg.beta * (lg.grad[m] + cfg.lambda * h[m] * (theta[m] - theta0[m]));
        } else {
            theta = inner_grad_step(scratch, theta, sample, cfg.beta, cfg.grad_clip);
        }
    }
    return theta;
}

std::vector<double> importance_taylor(const grad_vector& grad_at_theta0,
                                      const param_vector& theta0) {
    if (grad_at_theta0.size() != theta0.size())
        throw config_error("importance_taylor: vector length mismatch");
    std::vector<double> omega(theta0.size());
    for (std::size_t m = 0; m < theta0.size(); ++m)
        omega[m] = std::fabs(grad_at_theta0[m] * theta0[m]);
    return omega;
}

std::vector<double> importance_si_variant(const grad_vector& grad,
                                          const param_vector& delta_theta) {
    if (grad.size() != delta_theta.size())
        throw config_error("importance_si_variant: vector length mismatch");
    std::vector<double> omega(grad.size());
    for (std::size_t m = 0; m < grad.size(); ++m)
        omega[m] = std::fabs(grad[m] * delta_theta[m]);
    return omega;
}

std::vector<double> update_importance_ma(const std::vector<double>& h,
                                         const std::vector<double>& omega, double eta) {
    if (h.size() != omega.size())
        throw config_error("update_importance_ma: vector length mismatch");
    if (eta < 0.0 || eta > 1.0) throw config_error("update_importance_ma: eta outside [0, 1]");
    std::vector<double> out(h.size());
    for (std::size_t m = 0; m < h.size(); ++m) out[m] = eta * h[m] + (1.0 - eta) * omega[m];
    return out;
}

std::vector<double> update_meta_lr(const std::vector<double>& alpha,
                                   const std::vector<double>& h, const emcl_config& cfg) {
    if (alpha.size() != h.size()) throw config_error("update_meta_lr: vector length mismatch");
    constexpr double eps = 1e-8;
    std::vector<double> out(alpha.size());
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        double base = (cfg.lmode == meta_lr_mode::recursive) ? alpha[m] : cfg.alpha0;
        double a = base * cfg.r / std::max(h[m], eps);
        if (a < cfg.lr_min) a = cfg.lr_min;
        if (a > cfg.lr_max) a = cfg.lr_max;
        out[m] = a;
    }
    return out;
}

grad_vector meta_gradient(const param_vector& theta0, const param_vector& theta_k,
                          const std::vector<double>& h, double lambda) {
    if (theta0.size() != theta_k.size() || theta0.size() != h.size())
        throw config_error("meta_gradient: vector length mismatch");
    grad_vector g(theta0.size());
    for (std::size_t m = 0; m < theta0.size(); ++m)
        g[m] = lambda * h[m] * (theta0[m] - theta_k[m]);
    return g;
}

step_log emcl_train_step(emcl_state& st, mlp_model& scratch, const batch& b) {
    const emcl_config& cfg = st.config;

    // (1) inner adaptation under the previous importance state
    param_vector theta_k = inner_loop(scratch, st.theta0, b, st.importance.h, cfg);

    // (2) meta-update with the previous alpha and the same h; the meta-gradient
    // is closed-form, so no backward pass through the inner trajectory
    grad_vector mg = meta_gradient(st.theta0, theta_k, st.importance.h, cfg.lambda);

    // full-batch gradient at the pre-update theta0, reused for the importance
    // estimate and the loss log
    assign(scratch, st.theta0);
    loss_grad_result lg = loss_and_grad(scratch, b);
    if (!std::isfinite(lg.loss)) throw numeric_error("emcl_train_step: non-finite batch loss");
    clip_grad_norm(lg.grad, cfg.grad_clip);

    param_vector theta0_pre = st.theta0;
    for (std::size_t m = 0; m < st.theta0.size(); ++m)
        st.theta0[m] -= st.meta_lr.alpha[m] * mg[m];

    // (3)-(5) importance and meta-LR bookkeeping for the next step
    std::vector<double> omega;
    if (cfg.imode == importance_mode::taylor) {
        omega = importance_taylor(lg.grad, theta0_pre);
    } else {
        param_vector delta(theta_k.size());
        for (std::size_t m = 0; m < delta.size(); ++m) delta[m] = theta_k[m] - theta0_pre[m];
        omega = importance_si_variant(lg.grad, delta);
    }
    st.importance.h = update_importance_ma(st.importance.h, omega, cfg.eta);
    st.importance.last_omega = std::move(omega);
    st.meta_lr.alpha = update_meta_lr(st.meta_lr.alpha, st.importance.h, cfg);
    st.importance.step += 1;
    st.step += 1;

    step_log out;
    out.batch_loss = lg.loss;
    double sh = 0.0, sa = 0.0;
    for (std::size_t m = 0; m < st.importance.h.size(); ++m) {
        sh += st.importance.h[m];
        sa += st.meta_lr.alpha[m];
    }
    out.mean_h = sh / st.importance.h.size();
    out.mean_alpha = sa / st.meta_lr.alpha.size();
    return out;
}

train_result emcl_train(const task_sequence& seq, const emcl_config& cfg,
                        const std::vector<int>& layer_sizes, int batch_size, std::uint64_t seed,
                        const eval_hook& hook) {
    cfg.validate();
    int T = static_cast<int>(seq.tasks.size());
    train_result res;
    res.model = init_mlp(layer_sizes, mix_seed(seed, 0x0DE1));
    res.matrix = accuracy_matrix(T);

    emcl_state st = make_emcl_state(flatten(res.model), cfg);
    mlp_model scratch = res.model;

    using clock = std::chrono::steady_clock;
    auto run_start = clock::now();
    for (int t = 0; t < T; ++t) {
        auto task_start = clock::now();
        std::vector<batch> batches = stream_batches(seq.tasks[t], batch_size, mix_seed(seed, t));
        for (const batch& b : batches) {
            step_log sl = emcl_train_step(st, scratch, b);
            res.log.step_loss.push_back(sl.batch_loss);
            res.log.step_mean_h.push_back(sl.mean_h);
            res.log.step_mean_alpha.push_back(sl.mean_alpha);
        }
        res.log.per_task_seconds.push_back(
            std::chrono::duration<double>(clock::now() - task_start).count());

        assign(res.model, st.theta0);
        for (int tt = 0; tt <= t; ++tt)
            res.matrix.set(tt, t,
                           evaluate_accuracy(res.model, seq.tasks[tt].test,
                                             seq.tasks[tt].head_mask));
        if (hook) hook(t, res.model);
    }
    res.log.total_seconds = std::chrono::duration<double>(clock::now() - run_start).count();
    return res;
}

} // namespace clbench
