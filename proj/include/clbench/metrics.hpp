#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clbench/data.hpp"
#include "clbench/nn.hpp"

namespace clbench {

// Entry (t, s) = accuracy on task t's test set after finishing training on
// task s; defined only for t <= s. Cells outside that region stay undefined.
struct accuracy_matrix {
    int T = 0;
    std::vector<double> entries;   // T*T, row-major
    std::vector<unsigned char> defined;

    accuracy_matrix() = default;
    explicit accuracy_matrix(int tasks)
        : T(tasks), entries(std::size_t(tasks) * tasks, 0.0),
          defined(std::size_t(tasks) * tasks, 0) {}

    void set(int t, int s, double v) {
        entries[std::size_t(t) * T + s] = v;
        defined[std::size_t(t) * T + s] = 1;
    }
    double at(int t, int s) const { return entries[std::size_t(t) * T + s]; }
    bool is_defined(int t, int s) const { return defined[std::size_t(t) * T + s] != 0; }
};

// Fraction of examples whose argmax logit (restricted to head_mask when
// present) equals the label. Argmax ties break toward the lowest class index.
double evaluate_accuracy(const mlp_model& model, const dataset& test,
                         const std::optional<std::vector<int>>& head_mask);

// ACC = mean of the final column. Throws numeric_error if that column has
// undefined cells.
double compute_acc(const accuracy_matrix& m);

struct bwt_result {
    double value = 0.0;
    bool defined = false; // false when T < 2
};

// BWT = mean over the first T-1 tasks of (ACC_{t,T} - ACC_{t,t}); undefined
// for T = 1 (reported as 0 with defined = false).
bwt_result compute_bwt(const accuracy_matrix& m);

// CSV: header "task,1..T"; row per evaluated task; empty cell where undefined.
std::string matrix_to_csv(const accuracy_matrix& m);

} // namespace clbench
