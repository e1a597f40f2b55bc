#include "clbench/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <set>

#include "clbench/errors.hpp"

namespace clbench {

void replay_buffer::insert(const double* x, std::size_t d, int label, int task_id, rng64& rng) {
    if (capacity == 0) return;
    if (dim == 0) dim = d;
    seen += 1;
    if (size() < capacity) {
        inputs.insert(inputs.end(), x, x + d);
        labels.push_back(label);
        task_ids.push_back(task_id);
        return;
    }
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(seen)));
    if (j < capacity) {
        std::memcpy(inputs.data() + j * dim, x, dim * sizeof(double));
        labels[j] = label;
        task_ids[j] = task_id;
    }
}

batch replay_buffer::sample(std::size_t k, rng64& rng, std::vector<int>* picked_tasks) const {
    if (size() == 0) throw config_error("replay_buffer: cannot sample from empty buffer");
    std::vector<std::size_t> pick;
    if (size() >= k) {
        std::vector<std::size_t> idx(size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        pick.assign(idx.begin(), idx.begin() + k);
    } else {
        pick.resize(k);
        for (std::size_t i = 0; i < k; ++i)
            pick[i] = static_cast<std::size_t>(rng.uniform_int(size()));
    }
    batch b;
    b.n = k;
    b.dim = dim;
    b.inputs.resize(k * dim);
    b.labels.resize(k);
    b.task_id = task_ids[pick[0]];
    if (picked_tasks) picked_tasks->clear();
    for (std::size_t i = 0; i < k; ++i) {
        std::memcpy(b.inputs.data() + i * dim, inputs.data() + pick[i] * dim,
                    dim * sizeof(double));
        b.labels[i] = labels[pick[i]];
        if (picked_tasks) picked_tasks->push_back(task_ids[pick[i]]);
    }
    return b;
}

namespace {

// Permitted classes for a batch that mixes samples from several tasks: the
// union of the tasks' head masks. Absent masks mean all classes, which wins.
std::optional<std::vector<int>> union_mask(const std::optional<std::vector<int>>& a,
                                           const std::optional<std::vector<int>>& b) {
    if (!a || !b) return std::nullopt;
    std::set<int> u(a->begin(), a->end());
    u.insert(b->begin(), b->end());
    return std::vector<int>(u.begin(), u.end());
}

std::optional<std::vector<int>> tasks_mask(const task_sequence& seq, const std::vector<int>& ids) {
    if (seq.regime == head_regime::single_head) return std::nullopt;
    std::set<int> u;
    for (int id : ids) {
        const auto& m = seq.tasks[id].head_mask;
        if (!m) return std::nullopt;
        u.insert(m->begin(), m->end());
    }
    return std::vector<int>(u.begin(), u.end());
}

batch concat_batches(const batch& a, const batch& b,
                     const std::optional<std::vector<int>>& mask) {
    batch out;
    out.n = a.n + b.n;
    out.dim = a.dim;
    out.task_id = a.task_id;
    out.head_mask = mask;
    out.inputs = a.inputs;
    out.inputs.insert(out.inputs.end(), b.inputs.begin(), b.inputs.end());
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

using step_fn = std::function<double(mlp_model&, param_vector&, const batch&)>;
using boundary_fn = std::function<void(mlp_model&, param_vector&, int)>;

// Shared single-pass loop: `step` consumes one batch and returns its loss,
// mutating theta and keeping the model assigned; `boundary` runs after each
// task, before evaluation.
train_result run_online(const task_sequence& seq, const std::vector<int>& layer_sizes,
                        int batch_size, std::uint64_t seed, const step_fn& step,
                        const boundary_fn& boundary, const eval_hook& hook) {
    int T = static_cast<int>(seq.tasks.size());
    train_result res;
    res.model = init_mlp(layer_sizes, mix_seed(seed, 0x0DE1));
    res.matrix = accuracy_matrix(T);
    param_vector theta = flatten(res.model);

    using clock = std::chrono::steady_clock;
    auto run_start = clock::now();
    for (int t = 0; t < T; ++t) {
        auto task_start = clock::now();
        std::vector<batch> batches = stream_batches(seq.tasks[t], batch_size, mix_seed(seed, t));
        for (const batch& b : batches) {
            double loss = step(res.model, theta, b);
            if (!std::isfinite(loss)) throw numeric_error("baseline: non-finite batch loss");
            res.log.step_loss.push_back(loss);
        }
        if (boundary) boundary(res.model, theta, t);
        res.log.per_task_seconds.push_back(
            std::chrono::duration<double>(clock::now() - task_start).count());
        for (int tt = 0; tt <= t; ++tt)
            res.matrix.set(tt, t,
                           evaluate_accuracy(res.model, seq.tasks[tt].test,
                                             seq.tasks[tt].head_mask));
        if (hook) hook(t, res.model);
    }
    res.log.total_seconds = std::chrono::duration<double>(clock::now() - run_start).count();
    return res;
}

void sgd_apply(mlp_model& model, param_vector& theta, const grad_vector& g, double lr) {
    for (std::size_t m = 0; m < theta.size(); ++m) theta[m] -= lr * g[m];
    assign(model, theta);
}

} // namespace

train_result sgd_online_train(const task_sequence& seq, const baseline_options& opt,
                              const std::vector<int>& layer_sizes, int batch_size,
                              std::uint64_t seed, const eval_hook& hook) {
    auto step = [&](mlp_model& model, param_vector& theta, const batch& b) {
        loss_grad_result lg = loss_and_grad(model, b);
        clip_grad_norm(lg.grad, opt.grad_clip);
        sgd_apply(model, theta, lg.grad, opt.lr);
        return lg.loss;
    };
    return run_online(seq, layer_sizes, batch_size, seed, step, nullptr, hook);
}

train_result er_train(const task_sequence& seq, const baseline_options& opt,
                      const std::vector<int>& layer_sizes, int batch_size, std::uint64_t seed,
                      const eval_hook& hook) {
    if (opt.buffer_capacity == 0)
        return sgd_online_train(seq, opt, layer_sizes, batch_size, seed, hook);
    replay_buffer buf(opt.buffer_capacity);
    rng64 rng(mix_seed(seed, 0xE9));
    auto step = [&](mlp_model& model, param_vector& theta, const batch& b) {
        batch train_b = b;
        if (buf.size() > 0) {
            std::vector<int> picked;
            batch mem = buf.sample(b.n, rng, &picked);
            train_b = concat_batches(b, mem, union_mask(b.head_mask, tasks_mask(seq, picked)));
        }
        loss_grad_result lg = loss_and_grad(model, train_b);
        clip_grad_norm(lg.grad, opt.grad_clip);
        sgd_apply(model, theta, lg.grad, opt.lr);
        for (std::size_t i = 0; i < b.n; ++i)
            buf.insert(b.inputs.data() + i * b.dim, b.dim, b.labels[i], b.task_id, rng);
        return lg.loss;
    };
    return run_online(seq, layer_sizes, batch_size, seed, step, nullptr, hook);
}

void agem_project(grad_vector& g, const grad_vector& g_ref) {
    if (g.size() != g_ref.size()) throw config_error("agem_project: vector length mismatch");
    double dot = 0.0, ref_sq = 0.0;
    for (std::size_t m = 0; m < g.size(); ++m) {
        dot += g[m] * g_ref[m];
        ref_sq += g_ref[m] * g_ref[m];
    }
    // skip projection when there is no conflict or the reference vanishes
    if (dot >= 0.0 || ref_sq == 0.0) return;
    double scale = dot / ref_sq;
    for (std::size_t m = 0; m < g.size(); ++m) g[m] -= scale * g_ref[m];
}

train_result agem_train(const task_sequence& seq, const baseline_options& opt,
                        const std::vector<int>& layer_sizes, int batch_size, std::uint64_t seed,
                        const eval_hook& hook) {
    replay_buffer buf(opt.buffer_capacity);
    rng64 rng(mix_seed(seed, 0xA6E));
    auto step = [&](mlp_model& model, param_vector& theta, const batch& b) {
        loss_grad_result lg = loss_and_grad(model, b);
        clip_grad_norm(lg.grad, opt.grad_clip);
        if (buf.size() > 0) {
            std::vector<int> picked;
            batch mem = buf.sample(b.n, rng, &picked);
            mem.head_mask = tasks_mask(seq, picked);
            loss_grad_result ref = loss_and_grad(model, mem);
            clip_grad_norm(ref.grad, opt.grad_clip);
            agem_project(lg.grad, ref.grad);
        }
        sgd_apply(model, theta, lg.grad, opt.lr);
        for (std::size_t i = 0; i < b.n; ++i)
            buf.insert(b.inputs.data() + i * b.dim, b.dim, b.labels[i], b.task_id, rng);
        return lg.loss;
    };
    return run_online(seq, layer_sizes, batch_size, seed, step, nullptr, hook);
}

train_result ewc_lite_train(const task_sequence& seq, const baseline_options& opt,
                            const std::vector<int>& layer_sizes, int batch_size,
                            std::uint64_t seed, const eval_hook& hook) {
    if (opt.reg_strength < 0.0) throw config_error("ewc: reg_strength must be nonnegative");
    std::vector<double> fisher; // accumulated diagonal
    param_vector anchor;        // theta* at the latest consolidated boundary
    bool have_anchor = false;
    constexpr std::size_t kWindow = 100; // trailing samples used for the estimate
    std::vector<double> win_inputs;
    std::vector<int> win_labels;
    std::size_t dim = 0;

    auto step = [&](mlp_model& model, param_vector& theta, const batch& b) {
        if (fisher.empty()) fisher.assign(theta.size(), 0.0);
        dim = b.dim;
        loss_grad_result lg = loss_and_grad(model, b);
        clip_grad_norm(lg.grad, opt.grad_clip);
        if (have_anchor && opt.reg_strength > 0.0)
            for (std::size_t m = 0; m < theta.size(); ++m)
                lg.grad[m] += opt.reg_strength * fisher[m] * (theta[m] - anchor[m]);
        sgd_apply(model, theta, lg.grad, opt.lr);
        for (std::size_t i = 0; i < b.n; ++i) {
            if (win_labels.size() == kWindow) {
                win_inputs.erase(win_inputs.begin(), win_inputs.begin() + dim);
                win_labels.erase(win_labels.begin());
            }
            win_inputs.insert(win_inputs.end(), b.inputs.begin() + i * dim,
                              b.inputs.begin() + (i + 1) * dim);
            win_labels.push_back(b.labels[i]);
        }
        return lg.loss;
    };
    auto boundary = [&](mlp_model& model, param_vector& theta, int t) {
        if (win_labels.empty()) return;
        std::vector<double> acc(theta.size(), 0.0);
        batch one;
        one.n = 1;
        one.dim = dim;
        one.head_mask = seq.tasks[t].head_mask;
        one.inputs.resize(dim);
        one.labels.resize(1);
        for (std::size_t i = 0; i < win_labels.size(); ++i) {
            std::copy(win_inputs.begin() + i * dim, win_inputs.begin() + (i + 1) * dim,
                      one.inputs.begin());
            one.labels[0] = win_labels[i];
            loss_grad_result lg = loss_and_grad(model, one);
            for (std::size_t m = 0; m < acc.size(); ++m) acc[m] += lg.grad[m] * lg.grad[m];
        }
        for (std::size_t m = 0; m < acc.size(); ++m)
            acc[m] /= static_cast<double>(win_labels.size());
        for (std::size_t m = 0; m < fisher.size(); ++m) fisher[m] += acc[m];
        anchor = theta;
        have_anchor = true;
        win_inputs.clear();
        win_labels.clear();
    };
    return run_online(seq, layer_sizes, batch_size, seed, step, boundary, hook);
}

} // namespace clbench
