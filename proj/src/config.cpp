#include "clbench/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "clbench/errors.hpp"

namespace clbench {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw config_error("config: expected an object at " + where);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw config_error("config: unknown key \"" + it.key() + "\" in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(std::string("config: bad value type for \"") + key + "\"");
    }
}

std::string get_str(const json& j, const char* key, const std::string& fallback) {
    return get_or<std::string>(j, key, fallback);
}

} // namespace

void run_config::validate() const {
    if (version != kConfigVersion)
        throw config_error("config: unsupported version " + std::to_string(version));
    if (dataset.kind != "idx" && dataset.kind != "synthetic")
        throw config_error("config: dataset.kind must be \"idx\" or \"synthetic\"");
    if (dataset.kind == "idx") {
        if (dataset.train_images.empty() || dataset.train_labels.empty())
            throw config_error("config: idx dataset needs train_images and train_labels");
    } else {
        if (dataset.num_classes <= 0 || dataset.dim <= 0)
            throw config_error("config: synthetic dataset needs positive num_classes and dim");
    }
    if (dataset.regime != "permuted" && dataset.regime != "split")
        throw config_error("config: dataset.regime must be \"permuted\" or \"split\"");
    if (dataset.regime == "split" && dataset.classes_per_task <= 0)
        throw config_error("config: split regime needs classes_per_task > 0");
    if (dataset.tasks <= 0 || dataset.samples_per_task <= 0 || dataset.test_per_task <= 0)
        throw config_error("config: task counts must be positive");
    if (dataset.batch_size <= 0) throw config_error("config: batch_size must be positive");
    for (int hs : model.hidden_sizes)
        if (hs <= 0) throw config_error("config: hidden sizes must be positive");
    const std::string& a = algo.name;
    if (a != "emcl" && a != "sgd" && a != "er" && a != "agem" && a != "ewc")
        throw config_error("config: unknown algorithm \"" + a + "\"");
    if (a == "emcl") algo.emcl.validate();
    if (a != "emcl" && algo.baseline.lr <= 0.0)
        throw config_error("config: baseline lr must be positive");
    if (output_dir.empty()) throw config_error("config: output_dir must not be empty");
}

run_config parse_run_config(const json& j) {
    require_object(j, "top level");
    reject_unknown(j, {"version", "dataset", "model", "algo", "seed", "eval", "output_dir"},
                   "top level");
    run_config c;
    c.version = get_or<int>(j, "version", kConfigVersion);
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.output_dir = get_str(j, "output_dir", "out");

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        require_object(d, "dataset");
        reject_unknown(d,
                       {"kind", "train_images", "train_labels", "test_images", "test_labels",
                        "num_classes", "dim", "n_per_class", "regime", "tasks",
                        "samples_per_task", "test_per_task", "classes_per_task", "batch_size"},
                       "dataset");
        c.dataset.kind = get_str(d, "kind", "idx");
        c.dataset.train_images = get_str(d, "train_images", "");
        c.dataset.train_labels = get_str(d, "train_labels", "");
        c.dataset.test_images = get_str(d, "test_images", "");
        c.dataset.test_labels = get_str(d, "test_labels", "");
        c.dataset.num_classes = get_or<int>(d, "num_classes", 10);
        c.dataset.dim = get_or<int>(d, "dim", 784);
        c.dataset.n_per_class = get_or<int>(d, "n_per_class", 0);
        c.dataset.regime = get_str(d, "regime", "permuted");
        c.dataset.tasks = get_or<int>(d, "tasks", 20);
        c.dataset.samples_per_task = get_or<int>(d, "samples_per_task", 1000);
        c.dataset.test_per_task = get_or<int>(d, "test_per_task", 1000);
        c.dataset.classes_per_task = get_or<int>(d, "classes_per_task", 0);
        c.dataset.batch_size = get_or<int>(d, "batch_size", 10);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        require_object(m, "model");
        reject_unknown(m, {"hidden_sizes"}, "model");
        c.model.hidden_sizes = get_or<std::vector<int>>(m, "hidden_sizes", {100, 100});
    }
    if (j.contains("algo")) {
        const json& a = j.at("algo");
        require_object(a, "algo");
        reject_unknown(a,
                       {"name", "lr", "buffer_capacity", "reg_strength", "grad_clip", "alpha0",
                        "beta", "lambda", "gamma", "eta", "r", "lr_min", "lr_max",
                        "importance_mode", "meta_lr_mode", "use_pgd", "use_inner_reg", "h_init"},
                       "algo");
        c.algo.name = get_str(a, "name", "emcl");
        c.algo.baseline.lr = get_or<double>(a, "lr", 0.03);
        c.algo.baseline.buffer_capacity = get_or<std::size_t>(a, "buffer_capacity", 200);
        c.algo.baseline.reg_strength = get_or<double>(a, "reg_strength", 1.0);
        c.algo.baseline.grad_clip = get_or<double>(a, "grad_clip", 0.0);
        emcl_config& e = c.algo.emcl;
        e.alpha0 = get_or<double>(a, "alpha0", e.alpha0);
        e.beta = get_or<double>(a, "beta", e.beta);
        e.lambda = get_or<double>(a, "lambda", e.lambda);
        e.gamma = get_or<double>(a, "gamma", e.gamma);
        e.eta = get_or<double>(a, "eta", e.eta);
        e.r = get_or<double>(a, "r", e.r);
        e.lr_min = get_or<double>(a, "lr_min", e.lr_min);
        e.lr_max = get_or<double>(a, "lr_max", e.lr_max);
        if (c.algo.name == "emcl")
            e.grad_clip = get_or<double>(a, "grad_clip", e.grad_clip);
        e.h_init = get_or<double>(a, "h_init", e.h_init);
        std::string im = get_str(a, "importance_mode", "taylor");
        if (im == "taylor")
            e.imode = importance_mode::taylor;
        else if (im == "si_variant")
            e.imode = importance_mode::si_variant;
        else
            throw config_error("config: importance_mode must be taylor or si_variant");
        std::string lm = get_str(a, "meta_lr_mode", "recursive");
        if (lm == "recursive")
            e.lmode = meta_lr_mode::recursive;
        else if (lm == "stateless")
            e.lmode = meta_lr_mode::stateless;
        else
            throw config_error("config: meta_lr_mode must be recursive or stateless");
        e.use_pgd = get_or<bool>(a, "use_pgd", true);
        e.use_inner_reg = get_or<bool>(a, "use_inner_reg", true);
    }
    if (j.contains("eval")) {
        const json& ev = j.at("eval");
        require_object(ev, "eval");
        reject_unknown(ev, {"eval_every_task"}, "eval");
        c.eval_every_task = get_or<bool>(ev, "eval_every_task", true);
    }
    c.validate();
    return c;
}

run_config load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw config_error("config parse error in " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json run_config_to_json(const run_config& c) {
    json a{{"name", c.algo.name}};
    if (c.algo.name == "emcl") {
        const emcl_config& e = c.algo.emcl;
        a["alpha0"] = e.alpha0;
        a["beta"] = e.beta;
        a["lambda"] = e.lambda;
        a["gamma"] = e.gamma;
        a["eta"] = e.eta;
        a["r"] = e.r;
        a["lr_min"] = e.lr_min;
        a["lr_max"] = e.lr_max;
        a["importance_mode"] = e.imode == importance_mode::taylor ? "taylor" : "si_variant";
        a["meta_lr_mode"] = e.lmode == meta_lr_mode::recursive ? "recursive" : "stateless";
        a["use_pgd"] = e.use_pgd;
        a["use_inner_reg"] = e.use_inner_reg;
        a["grad_clip"] = e.grad_clip;
        a["h_init"] = e.h_init;
    } else {
        a["lr"] = c.algo.baseline.lr;
        a["grad_clip"] = c.algo.baseline.grad_clip;
        if (c.algo.name == "er" || c.algo.name == "agem")
            a["buffer_capacity"] = c.algo.baseline.buffer_capacity;
        if (c.algo.name == "ewc") a["reg_strength"] = c.algo.baseline.reg_strength;
    }
    json d{{"kind", c.dataset.kind},
           {"regime", c.dataset.regime},
           {"tasks", c.dataset.tasks},
           {"samples_per_task", c.dataset.samples_per_task},
           {"test_per_task", c.dataset.test_per_task},
           {"batch_size", c.dataset.batch_size}};
    if (c.dataset.kind == "idx") {
        d["train_images"] = c.dataset.train_images;
        d["train_labels"] = c.dataset.train_labels;
        if (!c.dataset.test_images.empty()) {
            d["test_images"] = c.dataset.test_images;
            d["test_labels"] = c.dataset.test_labels;
        }
    } else {
        d["num_classes"] = c.dataset.num_classes;
        d["dim"] = c.dataset.dim;
        if (c.dataset.n_per_class > 0) d["n_per_class"] = c.dataset.n_per_class;
    }
    if (c.dataset.regime == "split") d["classes_per_task"] = c.dataset.classes_per_task;
    return json{{"version", c.version},
                {"dataset", d},
                {"model", json{{"hidden_sizes", c.model.hidden_sizes}}},
                {"algo", a},
                {"seed", c.seed},
                {"eval", json{{"eval_every_task", c.eval_every_task}}},
                {"output_dir", c.output_dir}};
}

namespace {

json matrix_to_json(const accuracy_matrix& m) {
    json rows = json::array();
    for (int t = 0; t < m.T; ++t) {
        json row = json::array();
        for (int s = 0; s < m.T; ++s) {
            if (m.is_defined(t, s))
                row.push_back(m.at(t, s));
            else
                row.push_back(nullptr);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

accuracy_matrix matrix_from_json(const json& j) {
    if (!j.is_array()) throw config_error("results: accuracy_matrix must be an array");
    int T = static_cast<int>(j.size());
    accuracy_matrix m(T);
    for (int t = 0; t < T; ++t) {
        const json& row = j.at(t);
        if (!row.is_array() || static_cast<int>(row.size()) != T)
            throw config_error("results: accuracy_matrix must be square");
        for (int s = 0; s < T; ++s)
            if (!row.at(s).is_null()) m.set(t, s, row.at(s).get<double>());
    }
    return m;
}

} // namespace

nlohmann::json results_to_json(const results_record& r) {
    return json{{"version", kConfigVersion},
                {"config", run_config_to_json(r.config)},
                {"accuracy_matrix", matrix_to_json(r.matrix)},
                {"acc", r.acc},
                {"bwt", r.bwt},
                {"bwt_defined", r.bwt_defined},
                {"per_task_seconds", r.per_task_seconds},
                {"total_seconds", r.total_seconds},
                {"step_loss", r.step_loss},
                {"code_version", r.code_version}};
}

results_record results_from_json(const nlohmann::json& j) {
    require_object(j, "results");
    results_record r;
    r.config = parse_run_config(j.at("config"));
    r.matrix = matrix_from_json(j.at("accuracy_matrix"));
    r.acc = j.at("acc").get<double>();
    r.bwt = j.at("bwt").get<double>();
    r.bwt_defined = j.at("bwt_defined").get<bool>();
    r.per_task_seconds = j.at("per_task_seconds").get<std::vector<double>>();
    r.total_seconds = j.at("total_seconds").get<double>();
    r.step_loss = j.at("step_loss").get<std::vector<double>>();
    r.code_version = j.at("code_version").get<std::string>();

    // self-consistency: the stored scalars must match the matrix exactly
    double acc = compute_acc(r.matrix);
    bwt_result bwt = compute_bwt(r.matrix);
    if (acc != r.acc || bwt.defined != r.bwt_defined || (bwt.defined && bwt.value != r.bwt))
        throw numeric_error("results: stored ACC/BWT do not match the accuracy matrix");
    return r;
}

results_record load_results(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw data_error("cannot open results file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw data_error("results parse error in " + path + ": " + e.what());
    }
    return results_from_json(j);
}

} // namespace clbench
