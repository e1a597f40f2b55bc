#pragma once

#include <functional>

#include "clbench/nn.hpp"

namespace clbench {

// Independent brute-force checks used by tests and the CLI audit commands.
// These deliberately avoid sharing code paths with the implementations they
// validate.

// Central differences (f(x + s e_m) - f(x - s e_m)) / 2s per coordinate.
grad_vector finite_diff_grad(const std::function<double(const param_vector&)>& f,
                             const param_vector& theta, double step);

// Minimizes l(x) = c (x - x0)^2 + (1/2 gamma) (x - v)^2 by ternary search on
// [min(v,x0)-1, max(v,x0)+1] to width 1e-10. The objective is strictly convex
// so the bracket always contains the unique minimizer.
double numeric_prox(double v, double x0, double c, double gamma);

// Exact leave-one-out importance: |f(theta) - f(theta with theta_m = 0)| per
// coordinate, by direct re-evaluation. Enforces theta.size() <= 10000.
std::vector<double> zero_out_importance(const std::function<double(const param_vector&)>& f,
                                        const param_vector& theta);

// Convenience form for a model on a fixed batch (mean cross-entropy loss).
std::vector<double> zero_out_importance(const mlp_model& model, const batch& b);

// Spearman rank correlation with midranks for ties. Used by the importance
// audit; lives here so tests and the CLI share one definition.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

} // namespace clbench
