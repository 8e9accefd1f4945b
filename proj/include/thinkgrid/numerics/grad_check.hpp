#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "thinkgrid/numerics/autodiff.hpp"

namespace thinkgrid {

struct GradCheckReport {
    double max_relative_error = 0.0;
    bool deterministic = true;
    std::size_t worst_param = 0;
    std::int64_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central-difference verification of the reverse-mode gradients of a scalar
// function. Meant to run in double precision: eps around 1e-5 puts the
// truncation and rounding errors both near 1e-10 for O(1) values.
template <typename T>
GradCheckReport grad_check(const std::function<Var<T>()>& fn, const std::vector<Var<T>>& params,
                           T eps = T(1e-5)) {
    GradCheckReport report;

    auto eval = [&]() -> T {
        NoGradGuard guard;
        auto out = fn();
        if (out->value.numel() != 1) throw ShapeError("grad_check: function is not scalar-valued");
        return out->value[0];
    };

    const T v0 = eval();
    const T v1 = eval();
    if (v0 != v1) {
        report.deterministic = false;
        return report;
    }

    zero_grads(params);
    auto loss = fn();
    backward(loss);
    std::vector<Tensor<T>> analytic;
    for (const auto& p : params)
        analytic.push_back(p->grad.empty() ? Tensor<T>(p->value.shape()) : p->grad);

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->value;
        for (std::int64_t i = 0; i < value.numel(); ++i) {
            const T saved = value[i];
            value[i] = saved + eps;
            const T plus = eval();
            value[i] = saved - eps;
            const T minus = eval();
            value[i] = saved;
            const double numeric = (static_cast<double>(plus) - static_cast<double>(minus)) /
                                   (2.0 * static_cast<double>(eps));
            const double a = static_cast<double>(analytic[k][i]);
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_param = k;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    zero_grads(params);
    return report;
}

} // namespace thinkgrid
