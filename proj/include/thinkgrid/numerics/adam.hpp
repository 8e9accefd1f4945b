#pragma once

#include <cmath>
#include <cstdio>
#include <vector>

#include "thinkgrid/numerics/autodiff.hpp"

namespace thinkgrid {

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::int64_t step = 0;
    T learning_rate = T(1e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);

    static AdamState create(const std::vector<Var<T>>& params, T learning_rate = T(1e-4)) {
        AdamState st;
        st.learning_rate = learning_rate;
        for (const auto& p : params) {
            st.m.emplace_back(p->value.shape());
            st.v.emplace_back(p->value.shape());
        }
        return st;
    }
};

// Bias-corrected Adam update. If any gradient element is non-finite the whole
// step is rejected: parameters, moments and the step counter stay untouched.
// Returns false on a rejected step.
template <typename T>
bool adam_step(const std::vector<Var<T>>& params, AdamState<T>& st) {
    if (params.size() != st.m.size())
        throw ShapeError("adam_step: state holds " + std::to_string(st.m.size()) +
                         " moments for " + std::to_string(params.size()) + " params");
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto& g = params[k]->grad;
        if (!g.empty() && !g.same_shape(params[k]->value))
            throw ShapeError("adam_step: gradient shape mismatch at param " + std::to_string(k));
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            if (!std::isfinite(static_cast<double>(g[i]))) {
                std::fprintf(stderr,
                             "[adam] non-finite gradient in param %zu, step %lld rejected\n", k,
                             static_cast<long long>(st.step + 1));
                return false;
            }
        }
    }
    st.step += 1;
    const T bc1 = T(1) - std::pow(st.beta1, static_cast<T>(st.step));
    const T bc2 = T(1) - std::pow(st.beta2, static_cast<T>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k]->value;
        auto& m = st.m[k];
        auto& v = st.v[k];
        const auto& g = params[k]->grad;
        for (std::int64_t i = 0; i < p.numel(); ++i) {
            const T gi = g.empty() ? T(0) : g[i];
            m[i] = st.beta1 * m[i] + (T(1) - st.beta1) * gi;
            v[i] = st.beta2 * v[i] + (T(1) - st.beta2) * gi * gi;
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
        }
    }
    return true;
}

} // namespace thinkgrid
