#include "clbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "clbench/baselines.hpp"
#include "clbench/emcl.hpp"
#include "clbench/errors.hpp"
#include "clbench/rng.hpp"

namespace clbench {

task_sequence build_tasks(const dataset_config& d, std::uint64_t seed) {
    dataset train_pool;
    dataset test_pool;
    bool have_test_pool = false;

    if (d.kind == "idx") {
        train_pool = load_idx(d.train_images, d.train_labels);
        if (!d.test_images.empty()) {
            test_pool = load_idx(d.test_images, d.test_labels);
            have_test_pool = true;
        }
    } else {
        int npc = d.n_per_class;
        if (npc <= 0) {
            // enough examples that train and test slices never overlap,
            // plus some slack for uneven class draws
            long need = static_cast<long>(d.samples_per_task + d.test_per_task) * d.tasks;
            npc = static_cast<int>(need / std::max(d.num_classes, 1)) + 16;
        }
        train_pool = make_synthetic(d.num_classes, d.dim, npc, mix_seed(seed, 0x5F37));
    }

    if (d.regime == "split")
        return make_split_tasks(train_pool, d.tasks, d.classes_per_task, seed);
    if (have_test_pool)
        return make_permuted_tasks(train_pool, test_pool, d.tasks, d.samples_per_task,
                                   d.test_per_task, seed);
    return make_permuted_tasks(train_pool, d.tasks, d.samples_per_task, d.test_per_task, seed);
}

results_record run_experiment(const run_config& cfg) {
    cfg.validate();
    task_sequence seq = build_tasks(cfg.dataset, cfg.seed);
    if (seq.tasks.empty()) throw config_error("run: task sequence is empty");

    std::vector<int> layers;
    layers.push_back(static_cast<int>(seq.tasks.front().train.dim));
    for (int hs : cfg.model.hidden_sizes) layers.push_back(hs);
    layers.push_back(seq.num_classes);

    train_result tr;
    const std::string& name = cfg.algo.name;
    if (name == "emcl")
        tr = emcl_train(seq, cfg.algo.emcl, layers, cfg.dataset.batch_size, cfg.seed);
    else if (name == "sgd")
        tr = sgd_online_train(seq, cfg.algo.baseline, layers, cfg.dataset.batch_size, cfg.seed);
    else if (name == "er")
        tr = er_train(seq, cfg.algo.baseline, layers, cfg.dataset.batch_size, cfg.seed);
    else if (name == "agem")
        tr = agem_train(seq, cfg.algo.baseline, layers, cfg.dataset.batch_size, cfg.seed);
    else if (name == "ewc")
        tr = ewc_lite_train(seq, cfg.algo.baseline, layers, cfg.dataset.batch_size, cfg.seed);
    else
        throw config_error("run: unknown algorithm \"" + name + "\"");

    results_record r;
    r.config = cfg;
    r.matrix = tr.matrix;
    r.acc = compute_acc(tr.matrix);
    bwt_result bwt = compute_bwt(tr.matrix);
    r.bwt = bwt.value;
    r.bwt_defined = bwt.defined;
    r.per_task_seconds = tr.log.per_task_seconds;
    r.total_seconds = tr.log.total_seconds;
    r.step_loss = tr.log.step_loss;
    r.code_version = kCodeVersion;
    return r;
}

results_record run_and_save(const run_config& cfg) {
    results_record r = run_experiment(cfg);
    std::filesystem::path dir(cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw config_error("run: cannot create output dir " + cfg.output_dir);

    std::ofstream jf(dir / "results.json");
    if (!jf) throw config_error("run: cannot write results.json in " + cfg.output_dir);
    jf << results_to_json(r).dump(2) << "\n";

    std::ofstream cf(dir / "accuracy_matrix.csv");
    if (!cf) throw config_error("run: cannot write accuracy_matrix.csv in " + cfg.output_dir);
    cf << matrix_to_csv(r.matrix);
    return r;
}

namespace {

// Applies one numeric override at a dotted path by round-tripping through the
// json form, so type mapping and strict validation stay in one place.
void apply_override(nlohmann::json& j, const std::string& key, double value) {
    std::string ptr = "/";
    for (char ch : key) ptr += (ch == '.') ? '/' : ch;
    nlohmann::json::json_pointer p(ptr);
    if (value == std::floor(value) && std::fabs(value) < 9.0e15)
        j[p] = static_cast<long long>(value);
    else
        j[p] = value;
}

unsigned worker_count(std::size_t cells) {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("CLBENCH_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end == env || v < 1) throw config_error("CLBENCH_THREADS must be a positive integer");
        n = static_cast<unsigned>(v);
    }
    if (cells < n) n = static_cast<unsigned>(cells);
    return n;
}

} // namespace

std::vector<grid_entry> grid_search(const run_config& base, const std::vector<grid_axis>& axes) {
    if (axes.empty()) throw config_error("grid: no axes given");
    std::size_t cells = 1;
    for (const grid_axis& ax : axes) {
        if (ax.values.empty()) throw config_error("grid: axis " + ax.key + " has no values");
        cells *= ax.values.size();
    }

    nlohmann::json base_json = run_config_to_json(base);
    std::vector<run_config> configs;
    configs.reserve(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        nlohmann::json j = base_json;
        std::size_t rem = cell;
        for (const grid_axis& ax : axes) {
            apply_override(j, ax.key, ax.values[rem % ax.values.size()]);
            rem /= ax.values.size();
        }
        configs.push_back(parse_run_config(j)); // re-validates every cell
    }

    std::vector<grid_entry> out(cells);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mu;

    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells || failed.load()) return;
            try {
                results_record r = run_experiment(configs[i]);
                out[i].config = configs[i];
                out[i].acc = r.acc;
                out[i].bwt = r.bwt;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!failed.exchange(true)) first_error = e.what();
                return;
            }
        }
    };

    unsigned n = worker_count(cells);
    if (n <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
    }
    if (failed.load()) throw numeric_error("grid: a cell failed: " + first_error);

    std::stable_sort(out.begin(), out.end(),
                     [](const grid_entry& a, const grid_entry& b) { return a.acc > b.acc; });
    return out;
}

std::string plot_data_csv(const std::vector<results_record>& records,
                          const std::vector<std::string>& names) {
    if (records.empty()) throw config_error("plotdata: no results given");
    if (names.size() != records.size())
        throw config_error("plotdata: one name per results record required");
    int T = records.front().matrix.T;
    for (const results_record& r : records)
        if (r.matrix.T != T)
            throw config_error("plotdata: results have different task counts");

    std::string csv = "tasks_seen";
    for (const std::string& nm : names) {
        csv += ',';
        csv += nm;
    }
    csv += '\n';
    char buf[64];
    for (int s = 0; s < T; ++s) {
        std::snprintf(buf, sizeof(buf), "%d", s + 1);
        csv += buf;
        for (const results_record& r : records) {
            double sum = 0.0;
            for (int t = 0; t <= s; ++t) {
                if (!r.matrix.is_defined(t, s))
                    throw numeric_error("plotdata: matrix cell undefined at evaluated boundary");
                sum += r.matrix.at(t, s);
            }
            std::snprintf(buf, sizeof(buf), ",%.17g", sum / (s + 1));
            csv += buf;
        }
        csv += '\n';
    }
    return csv;
}

} // namespace clbench
