#pragma once

#include <vector>

#include "thinkgrid/agent/episode.hpp"
#include "thinkgrid/numerics/adam.hpp"

namespace thinkgrid {

template <typename T>
struct A2cHyper {
    T value_coef = T(0.5);
    T entropy_coef = T(0.01);
    T max_grad_norm = T(1);
};

struct A2cStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double total_loss = 0.0;
    double grad_norm = 0.0;
    double mean_return = 0.0;
    bool applied = false;
};

// Returns-to-go within the real trial, undiscounted. Steps before the real
// trial have no return by construction: thinking rewards never enter the
// objective, they reach the agent only through its observations.
template <typename T>
std::vector<float> real_trial_returns(const RolloutRecord<T>& r) {
    std::vector<float> returns(static_cast<std::size_t>(r.steps) * r.batch, 0.0f);
    for (int row = 0; row < r.batch; ++row) {
        float acc = 0.0f;
        for (int t = r.steps - 1; t >= r.real_trial_start; --t) {
            acc += r.rewards[static_cast<std::size_t>(t) * r.batch + row];
            returns[static_cast<std::size_t>(t) * r.batch + row] = acc;
        }
    }
    return returns;
}

// Assembles the A2C loss over one rollout:
//   policy  = -mean over real steps and rows of logpi(a) * (R - V), V detached
//   value   =  mean over real steps of mean squared (R - V)
//   entropy =  mean policy entropy over all steps (thinking included)
//   total   = policy + value_coef * value - entropy_coef * entropy
// Gradients flow through the recurrent core across the full episode.
// advantage_override (step-major, real steps only starting at
// real_trial_start) substitutes the detached advantages; finite-difference
// checks use it to hold the advantage constant while the network moves.
template <typename T>
std::pair<Var<T>, A2cStats> a2c_loss(const RolloutRecord<T>& rollout, const A2cHyper<T>& hyper,
                                     const std::vector<T>* advantage_override = nullptr) {
    const int B = rollout.batch;
    const int real_steps = rollout.steps - rollout.real_trial_start;
    const auto returns = real_trial_returns(rollout);

    A2cStats stats;
    Var<T> policy_acc, value_acc, entropy_acc;
    for (int t = 0; t < rollout.steps; ++t) {
        auto ent = mean_entropy_rows(rollout.log_probs[t]);
        entropy_acc = entropy_acc ? add(entropy_acc, ent) : ent;
        if (t < rollout.real_trial_start) continue;

        std::vector<std::int32_t> idx(B);
        std::vector<T> adv(B);
        Tensor<T> target(Shape{B, 1});
        for (int r = 0; r < B; ++r) {
            const std::size_t i = static_cast<std::size_t>(t) * B + r;
            idx[r] = rollout.actions[i];
            target[r] = static_cast<T>(returns[i]);
            adv[r] = advantage_override
                         ? (*advantage_override)[static_cast<std::size_t>(
                               t - rollout.real_trial_start) * B + r]
                         : static_cast<T>(returns[i]) - rollout.values[t]->value.at(r, 0);
        }
        auto pg = weighted_gather_sum(rollout.log_probs[t], std::move(idx), std::move(adv));
        policy_acc = policy_acc ? add(policy_acc, pg) : pg;
        auto vl = mse_against(rollout.values[t], target);
        value_acc = value_acc ? add(value_acc, vl) : vl;
    }

    auto policy_loss = scale(policy_acc, T(-1) / static_cast<T>(B * real_steps));
    auto value_loss = scale(value_acc, T(1) / static_cast<T>(real_steps));
    auto entropy = scale(entropy_acc, T(1) / static_cast<T>(rollout.steps));
    auto total = add(policy_loss, sub(scale(value_loss, hyper.value_coef),
                                      scale(entropy, hyper.entropy_coef)));

    stats.policy_loss = static_cast<double>(policy_loss->value[0]);
    stats.value_loss = static_cast<double>(value_loss->value[0]);
    stats.entropy = static_cast<double>(entropy->value[0]);
    stats.total_loss = static_cast<double>(total->value[0]);
    double ret = 0.0;
    for (int r = 0; r < B; ++r)
        ret += returns[static_cast<std::size_t>(rollout.real_trial_start) * B + r];
    stats.mean_return = ret / B;
    return {total, stats};
}

// One training update: loss, backward through all 120 steps, global norm clip,
// Adam. A non-finite loss skips the update and reports it.
template <typename T>
A2cStats a2c_update(const AgentParams<T>& params, const RolloutRecord<T>& rollout,
                    AdamState<T>& opt, const A2cHyper<T>& hyper) {
    auto [total, stats] = a2c_loss(rollout, hyper);
    if (!std::isfinite(stats.total_loss)) {
        std::fprintf(stderr, "[a2c] non-finite loss %.6f, update skipped\n", stats.total_loss);
        stats.applied = false;
        return stats;
    }
    auto vars = params.parameters();
    zero_grads(vars);
    backward(total);
    stats.grad_norm = static_cast<double>(clip_global_grad_norm(vars, hyper.max_grad_norm));
    stats.applied = adam_step(vars, opt);
    zero_grads(vars);
    return stats;
}

} // namespace thinkgrid
