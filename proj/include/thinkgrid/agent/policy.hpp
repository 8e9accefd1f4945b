#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "thinkgrid/gridworld/types.hpp"
#include "thinkgrid/numerics/checkpoint.hpp"
#include "thinkgrid/numerics/lstm.hpp"
#include "thinkgrid/rng.hpp"

namespace thinkgrid {

// Recurrent actor-critic: one LSTM core over the 837-value observation, a
// 9-way policy head and a scalar value head. Heads start at zero so the
// initial policy is uniform.
template <typename T>
struct AgentParams {
    LstmParams<T> lstm;
    Var<T> policy_w, policy_b;
    Var<T> value_w, value_b;

    std::int64_t hidden_size() const { return lstm.hidden_size; }

    static AgentParams create(std::int64_t hidden, RngStream& rng) {
        AgentParams p;
        p.lstm = LstmParams<T>::create(kObsSize, hidden, rng);
        p.policy_w = make_param(Tensor<T>(Shape{kNumActions, hidden}));
        p.policy_b = make_param(Tensor<T>(Shape{kNumActions}));
        p.value_w = make_param(Tensor<T>(Shape{1, hidden}));
        p.value_b = make_param(Tensor<T>(Shape{1}));
        return p;
    }

    std::vector<Var<T>> parameters() const {
        auto out = lstm.parameters();
        out.insert(out.end(), {policy_w, policy_b, value_w, value_b});
        return out;
    }

    std::vector<std::pair<std::string, Var<T>>> named_parameters() const {
        auto out = lstm.named_parameters("agent/lstm");
        out.emplace_back("agent/policy/w", policy_w);
        out.emplace_back("agent/policy/b", policy_b);
        out.emplace_back("agent/value/w", value_w);
        out.emplace_back("agent/value/b", value_b);
        return out;
    }

    void save(Checkpoint& ck) const {
        for (const auto& [name, var] : named_parameters()) ck.add(name, var->value);
        ck.set_meta("agent/hidden_size", static_cast<std::uint64_t>(hidden_size()));
    }

    static AgentParams load(const Checkpoint& ck) {
        const auto hidden = static_cast<std::int64_t>(ck.meta("agent/hidden_size"));
        RngStream unused(0);
        AgentParams p = create(hidden, unused);
        for (const auto& [name, var] : p.named_parameters()) {
            auto t = ck.tensor<T>(name);
            check_same_shape(var->value, t, "agent checkpoint");
            t.set_requires_grad(true);
            var->value = std::move(t);
        }
        return p;
    }
};

template <typename T>
struct ActResult {
    Var<T> log_probs; // (B, 9) row-wise log-softmax over actions
    Var<T> value;     // (B, 1)
    LstmState<T> state;
};

template <typename T>
ActResult<T> act(const AgentParams<T>& params, const Var<T>& obs, const LstmState<T>& state) {
    if (obs->value.cols() != kObsSize)
        throw ShapeError("act: observation width " + std::to_string(obs->value.cols()) +
                         " != " + std::to_string(kObsSize));
    auto next = lstm_cell_forward(params.lstm, obs, state);
    auto logits = affine(next.h, params.policy_w, params.policy_b);
    for (std::int64_t i = 0; i < logits->value.numel(); ++i)
        if (!std::isfinite(static_cast<double>(logits->value[i])))
            throw std::runtime_error("act: non-finite policy logits");
    auto value = affine(next.h, params.value_w, params.value_b);
    return {log_softmax_rows(logits), value, next};
}

// Draws one action per row from exp(log_probs).
template <typename T>
Action sample_action_row(const Tensor<T>& log_probs, std::int64_t row, RngStream& stream) {
    const double u = stream.next_double();
    double acc = 0.0;
    const std::int64_t C = log_probs.cols();
    for (std::int64_t c = 0; c < C; ++c) {
        acc += std::exp(static_cast<double>(log_probs.at(row, c)));
        if (u < acc) return static_cast<Action>(c);
    }
    return static_cast<Action>(C - 1);
}

} // namespace thinkgrid
