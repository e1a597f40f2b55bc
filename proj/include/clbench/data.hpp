#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clbench/nn.hpp"

namespace clbench {

struct dataset {
    std::vector<double> inputs; // n * dim, row-major, values in [0, 1]
    std::vector<int> labels;
    std::size_t n = 0;
    std::size_t dim = 0;
    int num_classes = 0;
};

// Reads an IDX image/label pair (big-endian, magic 2051 / 2049). Pixels are
// scaled by 1/255 and flattened row-major. Gzip-compressed files are accepted
// transparently. Throws bad_magic_error / truncated_error /
// count_mismatch_error as appropriate.
dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian class blobs around unit-norm random directions, clipped to [0,1].
// Separation is chosen so a linear classifier exceeds 90% held-out accuracy.
dataset make_synthetic(int num_classes, int dim, int n_per_class, std::uint64_t seed);

struct cl_task {
    int id = 0; // position in the sequence
    dataset train;
    dataset test;
    std::optional<std::vector<int>> head_mask; // absent in single-head regime
    std::vector<int> pixel_perm;               // permuted tasks; empty = identity
    std::vector<int> class_subset;             // split tasks
};

enum class head_regime { single_head, multi_head };

struct task_sequence {
    std::vector<cl_task> tasks;
    head_regime regime = head_regime::single_head;
    int num_classes = 0;
};

// Pixel-permutation tasks: task t applies one fixed random permutation to its
// train and test samples; task 0 uses the identity permutation. Single-head.
// This form draws train and test sets from `source` with disjoint indices.
task_sequence make_permuted_tasks(const dataset& source, int num_tasks, int samples_per_task,
                                  int test_per_task, std::uint64_t seed);

// Same construction, but test sets are drawn from a separate held-out pool
// (e.g. the MNIST test split) instead of from the training source.
task_sequence make_permuted_tasks(const dataset& train_pool, const dataset& test_pool,
                                  int num_tasks, int samples_per_task, int test_per_task,
                                  std::uint64_t seed);

// Disjoint class subsets per task, multi-head, head_mask = the task's classes.
// A fixed 20% of each task's samples (at least one) is held out as its test set.
task_sequence make_split_tasks(const dataset& source, int num_tasks, int classes_per_task,
                               std::uint64_t seed);

// Single-pass batch stream: every training example appears exactly once, order
// is a seeded shuffle, the final batch may be short.
std::vector<batch> stream_batches(const cl_task& task, int batch_size, std::uint64_t seed);

} // namespace clbench
