#pragma once

#include <string>

#include "thinkgrid/numerics/autodiff.hpp"
#include "thinkgrid/rng.hpp"

namespace thinkgrid {

// One LSTM cell. Gate weights act on the concatenated (input, h) vector, so
// each weight is (hidden, input + hidden) and each bias is (hidden).
template <typename T>
struct LstmParams {
    std::int64_t input_size = 0;
    std::int64_t hidden_size = 0;
    Var<T> w_input, w_forget, w_cell, w_output;
    Var<T> b_input, b_forget, b_cell, b_output;

    static LstmParams create(std::int64_t input_size, std::int64_t hidden_size, RngStream& rng) {
        LstmParams p;
        p.input_size = input_size;
        p.hidden_size = hidden_size;
        const std::int64_t fan_in = input_size + hidden_size;
        const T sd = T(1) / std::sqrt(static_cast<T>(fan_in));
        auto w = [&] {
            Tensor<T> t(Shape{hidden_size, fan_in});
            for (std::int64_t i = 0; i < t.numel(); ++i)
                t[i] = static_cast<T>(rng.next_gaussian()) * sd;
            return make_param(std::move(t));
        };
        auto b = [&] { return make_param(Tensor<T>(Shape{hidden_size})); };
        p.w_input = w();
        p.w_forget = w();
        p.w_cell = w();
        p.w_output = w();
        p.b_input = b();
        p.b_forget = b();
        p.b_cell = b();
        p.b_output = b();
        return p;
    }

    std::vector<Var<T>> parameters() const {
        return {w_input, w_forget, w_cell, w_output, b_input, b_forget, b_cell, b_output};
    }

    std::vector<std::pair<std::string, Var<T>>> named_parameters(const std::string& prefix) const {
        return {{prefix + "/w_input", w_input},   {prefix + "/w_forget", w_forget},
                {prefix + "/w_cell", w_cell},     {prefix + "/w_output", w_output},
                {prefix + "/b_input", b_input},   {prefix + "/b_forget", b_forget},
                {prefix + "/b_cell", b_cell},     {prefix + "/b_output", b_output}};
    }
};

template <typename T>
struct LstmState {
    Var<T> h, c;
};

template <typename T>
LstmState<T> lstm_zero_state(const LstmParams<T>& p, std::int64_t batch) {
    return {make_constant(Tensor<T>(Shape{batch, p.hidden_size})),
            make_constant(Tensor<T>(Shape{batch, p.hidden_size}))};
}

// Standard gate equations:
//   i = sig(Wi [x,h] + bi)   f = sig(Wf [x,h] + bf)
//   g = tanh(Wg [x,h] + bg)  o = sig(Wo [x,h] + bo)
//   c' = f*c + i*g           h' = o * tanh(c')
template <typename T>
LstmState<T> lstm_cell_forward(const LstmParams<T>& p, const Var<T>& input,
                               const LstmState<T>& state) {
    if (input->value.cols() != p.input_size)
        throw ShapeError("lstm_cell_forward: input width " + std::to_string(input->value.cols()) +
                         " != " + std::to_string(p.input_size));
    if (state.h->value.cols() != p.hidden_size || state.c->value.cols() != p.hidden_size)
        throw ShapeError("lstm_cell_forward: state width != hidden size " +
                         std::to_string(p.hidden_size));
    auto xh = concat_cols<T>({input, state.h});
    auto i = sigmoid(affine(xh, p.w_input, p.b_input));
    auto f = sigmoid(affine(xh, p.w_forget, p.b_forget));
    auto g = tanh_op(affine(xh, p.w_cell, p.b_cell));
    auto o = sigmoid(affine(xh, p.w_output, p.b_output));
    auto c_next = add(mul(f, state.c), mul(i, g));
    auto h_next = mul(o, tanh_op(c_next));
    return {h_next, c_next};
}

} // namespace thinkgrid
