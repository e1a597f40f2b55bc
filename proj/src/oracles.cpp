#include "clbench/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clbench/errors.hpp"

namespace clbench {

grad_vector finite_diff_grad(const std::function<double(const param_vector&)>& f,
                             const param_vector& theta, double step) {
    if (step <= 0.0) throw config_error("finite_diff_grad: step must be positive");
    grad_vector g(theta.size());
    param_vector x = theta;
    for (std::size_t m = 0; m < theta.size(); ++m) {
        double keep = x[m];
        x[m] = keep + step;
        double hi = f(x);
        x[m] = keep - step;
        double lo = f(x);
        x[m] = keep;
        if (!std::isfinite(hi) || !std::isfinite(lo))
            throw numeric_error("finite_diff_grad: non-finite loss");
        g[m] = (hi - lo) / (2.0 * step);
    }
    return g;
}

double numeric_prox(double v, double x0, double c, double gamma) {
    if (gamma <= 0.0) throw config_error("numeric_prox: gamma must be positive");
    if (c < 0.0) throw config_error("numeric_prox: c must be nonnegative");
    // l(m1) - l(m2) in factored form: evaluating l at both points and
    // subtracting loses to cancellation once the bracket is below ~sqrt(eps),
    // which would stall the search around 1e-8 instead of 1e-10
    auto l_diff = [&](double m1, double m2) {
        return (m1 - m2) * (c * (m1 + m2 - 2.0 * x0) + (m1 + m2 - 2.0 * v) / (2.0 * gamma));
    };
    double lo = std::min(v, x0) - 1.0;
    double hi = std::max(v, x0) + 1.0;
    while (hi - lo > 1e-10) {
        double m1 = lo + (hi - lo) / 3.0;
        double m2 = hi - (hi - lo) / 3.0;
        if (l_diff(m1, m2) < 0.0)
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> zero_out_importance(const std::function<double(const param_vector&)>& f,
                                        const param_vector& theta) {
    if (theta.size() > 10000)
        throw config_error("zero_out_importance: too many parameters (limit 10000)");
    double base = f(theta);
    std::vector<double> omega(theta.size());
    param_vector x = theta;
    for (std::size_t m = 0; m < theta.size(); ++m) {
        double keep = x[m];
        x[m] = 0.0;
        omega[m] = std::fabs(base - f(x));
        x[m] = keep;
    }
    return omega;
}

std::vector<double> zero_out_importance(const mlp_model& model, const batch& b) {
    mlp_model scratch = model;
    auto f = [&](const param_vector& th) {
        assign(scratch, th);
        return loss_only(scratch, b);
    };
    return zero_out_importance(f, flatten(model));
}

namespace {

std::vector<double> midranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return v[a] < v[b];
    });
    std::vector<double> rank(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double r = 0.5 * (i + j) + 1.0; // average rank of the tie group, 1-based
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    return rank;
}

} // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw config_error("spearman: need two equal nonempty vectors");
    std::vector<double> ra = midranks(a), rb = midranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= ra.size();
    mb /= rb.size();
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        double xa = ra[i] - ma, xb = rb[i] - mb;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

} // namespace clbench
