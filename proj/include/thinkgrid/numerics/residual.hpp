#pragma once

#include <string>

#include "thinkgrid/numerics/autodiff.hpp"
#include "thinkgrid/rng.hpp"

namespace thinkgrid {

// Residual block: out = x + W2 relu(W1 x + b1) + b2. Input and output width
// are equal so the skip addition is always well-formed.
template <typename T>
struct ResidualBlockParams {
    std::int64_t width = 0;
    Var<T> w1, b1, w2, b2;

    static ResidualBlockParams create(std::int64_t width, RngStream& rng) {
        ResidualBlockParams p;
        p.width = width;
        const T sd = T(1) / std::sqrt(static_cast<T>(width));
        auto w = [&] {
            Tensor<T> t(Shape{width, width});
            for (std::int64_t i = 0; i < t.numel(); ++i)
                t[i] = static_cast<T>(rng.next_gaussian()) * sd;
            return make_param(std::move(t));
        };
        p.w1 = w();
        p.b1 = make_param(Tensor<T>(Shape{width}));
        p.w2 = w();
        p.b2 = make_param(Tensor<T>(Shape{width}));
        return p;
    }

    std::vector<Var<T>> parameters() const { return {w1, b1, w2, b2}; }

    std::vector<std::pair<std::string, Var<T>>> named_parameters(const std::string& prefix) const {
        return {{prefix + "/w1", w1}, {prefix + "/b1", b1}, {prefix + "/w2", w2},
                {prefix + "/b2", b2}};
    }
};

template <typename T>
Var<T> residual_block_forward(const ResidualBlockParams<T>& p, const Var<T>& x) {
    if (x->value.cols() != p.width)
        throw ShapeError("residual_block_forward: input width " +
                         std::to_string(x->value.cols()) + " != " + std::to_string(p.width));
    return add(x, affine(relu(affine(x, p.w1, p.b1)), p.w2, p.b2));
}

} // namespace thinkgrid
