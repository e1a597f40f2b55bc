#include "clbench/metrics.hpp"

#include <cstdio>

#include "clbench/errors.hpp"

namespace clbench {

double evaluate_accuracy(const mlp_model& model, const dataset& test,
                         const std::optional<std::vector<int>>& head_mask) {
    if (test.n == 0) throw data_error("evaluate_accuracy: empty test set");
    int C = model.output_dim();
    std::vector<double> logits = forward(model, test.inputs.data(), test.n, test.dim, head_mask);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < test.n; ++s) {
        const double* row = logits.data() + s * C;
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (row[c] > row[best]) best = c; // strict > keeps the lowest index on ties
        if (best == test.labels[s]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.n);
}

double compute_acc(const accuracy_matrix& m) {
    if (m.T <= 0) throw numeric_error("compute_acc: empty matrix");
    double sum = 0.0;
    for (int t = 0; t < m.T; ++t) {
        if (!m.is_defined(t, m.T - 1))
            throw numeric_error("compute_acc: final column has undefined cells");
        sum += m.at(t, m.T - 1);
    }
    return sum / m.T;
}

bwt_result compute_bwt(const accuracy_matrix& m) {
    bwt_result r;
    if (m.T < 2) return r; // value 0, defined false
    double sum = 0.0;
    for (int t = 0; t < m.T - 1; ++t) {
        if (!m.is_defined(t, m.T - 1) || !m.is_defined(t, t))
            throw numeric_error("compute_bwt: required cells undefined");
        sum += m.at(t, m.T - 1) - m.at(t, t);
    }
    r.value = sum / (m.T - 1);
    r.defined = true;
    return r;
}

std::string matrix_to_csv(const accuracy_matrix& m) {
    std::string out = "task";
    char buf[64];
    for (int s = 1; s <= m.T; ++s) {
        std::snprintf(buf, sizeof(buf), ",%d", s);
        out += buf;
    }
    out += "\n";
    for (int t = 0; t < m.T; ++t) {
        std::snprintf(buf, sizeof(buf), "%d", t + 1);
        out += buf;
        for (int s = 0; s < m.T; ++s) {
            out += ",";
            if (m.is_defined(t, s)) {
                std::snprintf(buf, sizeof(buf), "%.17g", m.at(t, s));
                out += buf;
            }
        }
        out += "\n";
    }
    return out;
}

} // namespace clbench
