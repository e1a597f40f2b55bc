#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "clbench/baselines.hpp"
#include "clbench/emcl.hpp"
#include "clbench/metrics.hpp"

namespace clbench {

inline constexpr const char* kCodeVersion = "clbench 0.1.0";
inline constexpr int kConfigVersion = 1;

struct dataset_config {
    std::string kind = "idx"; // "idx" | "synthetic"
    // idx paths (gzip accepted)
    std::string train_images, train_labels, test_images, test_labels;
    // synthetic generator
    int num_classes = 10;
    int dim = 784;
    int n_per_class = 0; // 0 = derive from tasks * (samples + test) budget
    // task construction
    std::string regime = "permuted"; // "permuted" | "split"
    int tasks = 20;
    int samples_per_task = 1000;
    int test_per_task = 1000;
    int classes_per_task = 0; // split regime
    int batch_size = 10;
};

struct model_config {
    std::vector<int> hidden_sizes{100, 100};
};

struct algo_config {
    std::string name = "emcl"; // emcl | sgd | er | agem | ewc
    baseline_options baseline;
    emcl_config emcl;
};

struct run_config {
    int version = kConfigVersion;
    dataset_config dataset;
    model_config model;
    algo_config algo;
    std::uint64_t seed = 1;
    bool eval_every_task = true;
    std::string output_dir = "out";

    void validate() const; // throws config_error
};

// Strict parse: unknown keys anywhere are rejected, then validate() runs.
run_config parse_run_config(const nlohmann::json& j);
run_config load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const run_config& c);

struct results_record {
    run_config config;
    accuracy_matrix matrix;
    double acc = 0.0;
    double bwt = 0.0;
    bool bwt_defined = false;
    std::vector<double> per_task_seconds;
    double total_seconds = 0.0;
    std::vector<double> step_loss;
    std::string code_version = kCodeVersion;
};

nlohmann::json results_to_json(const results_record& r);
// Parses and re-derives ACC/BWT from the stored matrix; throws numeric_error
// if they disagree with the stored scalars (self-consistency contract).
results_record results_from_json(const nlohmann::json& j);
results_record load_results(const std::string& path);

} // namespace clbench
