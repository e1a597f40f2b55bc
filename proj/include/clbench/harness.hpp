#pragma once

#include <string>
#include <vector>

#include "clbench/config.hpp"
#include "clbench/data.hpp"

namespace clbench {

// Builds the task sequence described by a dataset_config. For idx data the
// test pools are the held-out files when given, otherwise a disjoint slice
// of the training pool.
task_sequence build_tasks(const dataset_config& d, std::uint64_t seed);

// Runs one experiment end to end: build tasks, train the configured
// algorithm single-pass, evaluate at every task boundary. Does not touch
// the filesystem.
results_record run_experiment(const run_config& cfg);

// run_experiment + persist results.json and accuracy_matrix.csv under
// cfg.output_dir (created if missing).
results_record run_and_save(const run_config& cfg);

struct grid_axis {
    std::string key; // dotted path into the config json, e.g. "algo.eta"
    std::vector<double> values;
};

struct grid_entry {
    run_config config;
    double acc = 0.0;
    double bwt = 0.0;
};

// Cartesian product over the axes applied to a base config; each cell is a
// full run. Returns entries sorted by descending ACC. Worker count comes
// from CLBENCH_THREADS when set, else hardware_concurrency, and is capped
// by the number of cells.
std::vector<grid_entry> grid_search(const run_config& base, const std::vector<grid_axis>& axes);

// Average-accuracy-so-far curves for plotting: one row per tasks-seen count
// s, one column per input record, value = mean over t <= s of the accuracy
// on task t after training s tasks. All records must share the same T.
std::string plot_data_csv(const std::vector<results_record>& records,
                          const std::vector<std::string>& names);

} // namespace clbench
