#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "thinkgrid/agent/policy.hpp"
#include "thinkgrid/gridworld/batch.hpp"

namespace thinkgrid {

// Episode protocol: 3 thinking trials then one real trial, 30 steps each.
// Thinking trials run against a pluggable backend that produces perceived
// observations and rewards with no effect on the real environment; the real
// trial always runs in the simulator. The agent's recurrent state is carried
// across all 120 steps unless the memoryless-thinking ablation is enabled.
struct EpisodeConfig {
    int trials_per_episode = kTrialsPerEpisode;
    int steps_per_trial = kStepsPerTrial;
    int thinking_trials = kTrialsPerEpisode - 1;
    bool reset_state_between_trials = false; // memoryless-thinking ablation
    bool record_observations = false;

    int total_steps() const { return trials_per_episode * steps_per_trial; }
    int real_trial_start() const { return thinking_trials * steps_per_trial; }
};

// Per-step perception source for one trial. fill_obs writes the full agent
// observation for every row from the backend's current (true or imagined)
// state; step advances that state under the given actions and reports the
// perceived rewards.
class EpisodeBackend {
public:
    virtual ~EpisodeBackend() = default;
    virtual void begin_trial(int trial) = 0;
    virtual void step(std::span<const Action> actions, std::span<float> rewards) = 0;
    virtual void fill_obs(std::span<const float> prev_reward,
                          std::span<const std::int32_t> prev_action, float timer_fraction,
                          bool is_real_trial, bool end_of_trial, float* out) = 0;
    virtual int batch() const = 0;
};

// Thinking in the actual simulator: a fresh copy of every row's environment,
// reset per trial with a per-(row, trial) stream, stepped with a reward table
// that experiments may override (the AKZ manipulation).
class SimulatorThinkingBackend : public EpisodeBackend {
public:
    SimulatorThinkingBackend(std::vector<const TaskSpec*> tasks, std::uint64_t episode_key,
                             RewardTable table)
        : tasks_(std::move(tasks)), episode_key_(episode_key), table_(table) {}

    void begin_trial(int trial) override {
        std::vector<std::uint64_t> keys(tasks_.size());
        const std::uint64_t trial_key =
            derive_stream(derive_stream(episode_key_, "think"), static_cast<std::uint64_t>(trial));
        for (std::size_t r = 0; r < tasks_.size(); ++r)
            keys[r] = derive_stream(trial_key, static_cast<std::uint64_t>(r));
        state_ = batch_reset(tasks_, keys);
        events_.resize(tasks_.size());
    }

    void step(std::span<const Action> actions, std::span<float> rewards) override {
        batch_step(state_, actions, table_, rewards, events_);
    }

    void fill_obs(std::span<const float> prev_reward, std::span<const std::int32_t> prev_action,
                  float timer_fraction, bool is_real_trial, bool end_of_trial,
                  float* out) override {
        batch_fill_agent_obs(state_, prev_reward, prev_action, timer_fraction, is_real_trial,
                             end_of_trial, out);
    }

    int batch() const override { return state_.size; }

    const BatchedWorldState& state() const { return state_; }
    std::span<const StepEvents> last_events() const { return events_; }

private:
    std::vector<const TaskSpec*> tasks_;
    std::uint64_t episode_key_;
    RewardTable table_;
    BatchedWorldState state_;
    std::vector<StepEvents> events_;
};

// The real environment: owns the persistent batch that only the real trial may
// advance.
class RealEnvBackend : public EpisodeBackend {
public:
    RealEnvBackend(const std::vector<const TaskSpec*>& tasks, std::uint64_t episode_key,
                   RewardTable table)
        : table_(table) {
        std::vector<std::uint64_t> keys(tasks.size());
        const std::uint64_t env_key = derive_stream(episode_key, "env");
        for (std::size_t r = 0; r < tasks.size(); ++r)
            keys[r] = derive_stream(env_key, static_cast<std::uint64_t>(r));
        state_ = batch_reset(tasks, keys);
        events_.resize(tasks.size());
    }

    void begin_trial(int) override {}

    void step(std::span<const Action> actions, std::span<float> rewards) override {
        batch_step(state_, actions, table_, rewards, events_);
    }

    void fill_obs(std::span<const float> prev_reward, std::span<const std::int32_t> prev_action,
                  float timer_fraction, bool is_real_trial, bool end_of_trial,
                  float* out) override {
        batch_fill_agent_obs(state_, prev_reward, prev_action, timer_fraction, is_real_trial,
                             end_of_trial, out);
    }

    int batch() const override { return state_.size; }

    BatchedWorldState& state() { return state_; }
    const BatchedWorldState& state() const { return state_; }
    std::span<const StepEvents> last_events() const { return events_; }

private:
    RewardTable table_;
    BatchedWorldState state_;
    std::vector<StepEvents> events_;
};

// Batched rollout record. Step-major storage: actions[t*B + r].
template <typename T>
struct RolloutRecord {
    int batch = 0;
    int steps = 0;
    int steps_per_trial = 0;
    int real_trial_start = 0;
    std::vector<Var<T>> log_probs; // per step, (B,9)
    std::vector<Var<T>> values;    // per step, (B,1)
    std::vector<std::int32_t> actions;
    std::vector<float> rewards;
    std::vector<std::uint8_t> trial_index;
    std::vector<std::uint8_t> thinking;
    std::vector<float> trial_totals;     // (B, trials)
    std::vector<float> observations;     // (steps, B, 837) when recorded
    std::vector<StepEvents> real_events; // (steps_per_trial, B) for the real trial

    float trial_total(int row, int trial, int trials) const {
        return trial_totals[static_cast<std::size_t>(row) * trials + trial];
    }
};

// One row's view of the rollout, in the shape the evaluation and persistence
// code expects.
struct EpisodeTrace {
    struct Step {
        std::int32_t action;
        float log_prob;
        float value;
        float reward;
        std::uint8_t trial;
        bool thinking;
    };
    std::vector<Step> steps;
    std::vector<float> trial_totals;
    std::vector<float> observations; // optional, (steps, 837)

    std::string to_bytes() const {
        std::string out;
        auto put = [&out](const void* p, std::size_t n) {
            out.append(static_cast<const char*>(p), n);
        };
        const std::uint64_t n = steps.size();
        put(&n, 8);
        for (const auto& s : steps) {
            put(&s.action, 4);
            put(&s.log_prob, 4);
            put(&s.value, 4);
            put(&s.reward, 4);
            put(&s.trial, 1);
            const std::uint8_t th = s.thinking;
            put(&th, 1);
        }
        for (float v : trial_totals) put(&v, 4);
        for (float v : observations) put(&v, 4);
        return out;
    }
};

template <typename T>
EpisodeTrace extract_trace(const RolloutRecord<T>& r, int row) {
    EpisodeTrace trace;
    for (int t = 0; t < r.steps; ++t) {
        const std::size_t i = static_cast<std::size_t>(t) * r.batch + row;
        EpisodeTrace::Step s;
        s.action = r.actions[i];
        s.log_prob = static_cast<float>(r.log_probs[t]->value.at(row, r.actions[i]));
        s.value = static_cast<float>(r.values[t]->value.at(row, 0));
        s.reward = r.rewards[i];
        s.trial = r.trial_index[static_cast<std::size_t>(t)];
        s.thinking = r.thinking[static_cast<std::size_t>(t)] != 0;
        trace.steps.push_back(s);
    }
    const int trials = static_cast<int>(r.trial_totals.size()) / std::max(1, r.batch);
    for (int k = 0; k < trials; ++k) trace.trial_totals.push_back(r.trial_total(row, k, trials));
    if (!r.observations.empty()) {
        trace.observations.reserve(static_cast<std::size_t>(r.steps) * kObsSize);
        for (int t = 0; t < r.steps; ++t) {
            const float* src =
                r.observations.data() +
                (static_cast<std::size_t>(t) * r.batch + row) * kObsSize;
            trace.observations.insert(trace.observations.end(), src, src + kObsSize);
        }
    }
    return trace;
}

struct EpisodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs one batched episode. The thinking backend perceives trials 0..2; the
// real backend runs trial 3. Forced actions (step-major, steps*B) replace
// sampling when provided, which keeps the loss a smooth deterministic function
// of the parameters for gradient checking.
template <typename T>
RolloutRecord<T> run_episode_batch(const AgentParams<T>& params,
                                   const std::vector<const TaskSpec*>& tasks,
                                   const EpisodeConfig& config, EpisodeBackend& thinking,
                                   RealEnvBackend& real, std::uint64_t episode_key,
                                   const std::int32_t* forced_actions = nullptr) {
    const int B = static_cast<int>(tasks.size());
    if (B == 0) throw EpisodeError("run_episode_batch: empty task batch");
    const int steps = config.total_steps();
    const std::uint64_t sample_key = derive_stream(episode_key, "sample");

    RolloutRecord<T> record;
    record.batch = B;
    record.steps = steps;
    record.steps_per_trial = config.steps_per_trial;
    record.real_trial_start = config.real_trial_start();
    record.actions.resize(static_cast<std::size_t>(steps) * B);
    record.rewards.resize(static_cast<std::size_t>(steps) * B);
    record.trial_index.resize(steps);
    record.thinking.resize(steps);
    record.trial_totals.assign(static_cast<std::size_t>(B) * config.trials_per_episode, 0.0f);
    record.real_events.resize(static_cast<std::size_t>(config.steps_per_trial) * B);
    if (config.record_observations)
        record.observations.resize(static_cast<std::size_t>(steps) * B * kObsSize);

    auto state = lstm_zero_state(params.lstm, B);
    std::vector<float> obs_buffer(static_cast<std::size_t>(B) * kObsSize);
    std::vector<float> prev_reward(B, 0.0f);
    std::vector<std::int32_t> prev_action(B, -1);
    std::vector<Action> actions(B);
    std::vector<float> rewards(B);

    int g = 0;
    for (int trial = 0; trial < config.trials_per_episode; ++trial) {
        const bool is_real = trial >= config.thinking_trials;
        EpisodeBackend& backend = is_real ? static_cast<EpisodeBackend&>(real) : thinking;
        backend.begin_trial(trial);
        if (backend.batch() != B) throw EpisodeError("backend batch size mismatch");
        if (config.reset_state_between_trials) state = lstm_zero_state(params.lstm, B);
        std::fill(prev_reward.begin(), prev_reward.end(), 0.0f);
        std::fill(prev_action.begin(), prev_action.end(), -1);

        for (int i = 0; i < config.steps_per_trial; ++i, ++g) {
            const float timer = static_cast<float>(g) / static_cast<float>(steps);
            const bool end_of_trial = (i == config.steps_per_trial - 1);
            backend.fill_obs(prev_reward, prev_action, timer, is_real, end_of_trial,
                             obs_buffer.data());
            if (config.record_observations)
                std::copy(obs_buffer.begin(), obs_buffer.end(),
                          record.observations.begin() +
                              static_cast<std::size_t>(g) * B * kObsSize);

            Tensor<T> obs_t(Shape{B, kObsSize});
            for (std::size_t k = 0; k < obs_buffer.size(); ++k)
                obs_t[static_cast<std::int64_t>(k)] = static_cast<T>(obs_buffer[k]);
            auto result = act(params, make_constant(std::move(obs_t)), state);
            state = result.state;

            if (forced_actions) {
                for (int r = 0; r < B; ++r)
                    actions[r] = static_cast<Action>(
                        forced_actions[static_cast<std::size_t>(g) * B + r]);
            } else {
                const std::uint64_t step_key =
                    derive_stream(sample_key, static_cast<std::uint64_t>(g));
                for (int r = 0; r < B; ++r) {
                    RngStream stream(derive_stream(step_key, static_cast<std::uint64_t>(r)));
                    actions[r] = sample_action_row(result.log_probs->value, r, stream);
                }
            }

            backend.step(actions, rewards);
            if (is_real) {
                auto ev = real.last_events();
                std::copy(ev.begin(), ev.end(),
                          record.real_events.begin() + static_cast<std::size_t>(i) * B);
            }

            record.log_probs.push_back(result.log_probs);
            record.values.push_back(result.value);
            record.trial_index[g] = static_cast<std::uint8_t>(trial);
            record.thinking[g] = is_real ? 0 : 1;
            for (int r = 0; r < B; ++r) {
                record.actions[static_cast<std::size_t>(g) * B + r] =
                    static_cast<std::int32_t>(actions[r]);
                record.rewards[static_cast<std::size_t>(g) * B + r] = rewards[r];
                record.trial_totals[static_cast<std::size_t>(r) * config.trials_per_episode +
                                    trial] += rewards[r];
                prev_reward[r] = rewards[r];
                prev_action[r] = static_cast<std::int32_t>(actions[r]);
            }
        }
    }
    return record;
}

} // namespace thinkgrid
