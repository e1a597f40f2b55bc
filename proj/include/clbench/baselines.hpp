#pragma once

#include <cstdint>
#include <vector>

#include "clbench/emcl.hpp" // eval_hook, train_log, train_result
#include "clbench/rng.hpp"

namespace clbench {

// Reservoir buffer (algorithm R): after N >= capacity insertions each seen
// example is retained with probability capacity / N.
struct replay_buffer {
    std::size_t capacity = 0;
    long seen = 0;
    std::size_t dim = 0;
    std::vector<double> inputs; // size() * dim
    std::vector<int> labels;
    std::vector<int> task_ids;

    explicit replay_buffer(std::size_t cap) : capacity(cap) {}

    std::size_t size() const { return labels.size(); }
    void insert(const double* x, std::size_t d, int label, int task_id, rng64& rng);
    // k items, without replacement when size() >= k, with replacement otherwise;
    // requires size() > 0; picked_tasks (optional) receives the source task of
    // each sampled item
    batch sample(std::size_t k, rng64& rng, std::vector<int>* picked_tasks = nullptr) const;
};

struct baseline_options {
    double lr = 0.03;
    std::size_t buffer_capacity = 200; // er / agem
    double reg_strength = 1.0;         // ewc
    double grad_clip = 0.0;            // <= 0 disables; kept off for the naive control
};

// Plain single-pass SGD over the stream; the lower-bound control.
train_result sgd_online_train(const task_sequence& seq, const baseline_options& opt,
                              const std::vector<int>& layer_sizes, int batch_size,
                              std::uint64_t seed, const eval_hook& hook = nullptr);

// Each step trains on the current batch concatenated with an equal-size
// reservoir sample; the buffer is updated after the step.
train_result er_train(const task_sequence& seq, const baseline_options& opt,
                      const std::vector<int>& layer_sizes, int batch_size, std::uint64_t seed,
                      const eval_hook& hook = nullptr);

// In-place gradient projection: when <g, g_ref> < 0 and g_ref is nonzero,
// g <- g - (<g, g_ref> / <g_ref, g_ref>) g_ref, which puts <g, g_ref> at
// exactly zero; otherwise g is left alone.
void agem_project(grad_vector& g, const grad_vector& g_ref);

// Projects the current gradient when it conflicts with the gradient on a
// replayed batch (agem_project against a buffer sample); plain step otherwise
// or when the buffer is empty.
train_result agem_train(const task_sequence& seq, const baseline_options& opt,
                        const std::vector<int>& layer_sizes, int batch_size, std::uint64_t seed,
                        const eval_hook& hook = nullptr);

// Diagonal-Fisher regularization: at each task boundary the Fisher diagonal is
// estimated as the mean squared per-sample gradient over the task's final 100
// training samples and accumulated with anchor theta*; later steps add the
// penalty gradient reg * F (theta - theta*).
train_result ewc_lite_train(const task_sequence& seq, const baseline_options& opt,
                            const std::vector<int>& layer_sizes, int batch_size,
                            std::uint64_t seed, const eval_hook& hook = nullptr);

} // namespace clbench
