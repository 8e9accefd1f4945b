#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thinkgrid/agent/a2c.hpp"
#include "thinkgrid/agent/episode.hpp"
#include "thinkgrid/agent/policy.hpp"
#include "thinkgrid/io/csv.hpp"
#include "thinkgrid/tasks/generate.hpp"
#include "thinkgrid/tasks/score.hpp"
#include "thinkgrid/tasks/starters.hpp"
#include "thinkgrid/tasks/training_set.hpp"

namespace thinkgrid {

template <typename T>
struct TrainSchedule {
    std::uint64_t master_seed = 1;
    int tasks_per_batch = 100;
    int replicates = 50;
    int pretrain_episodes = 1000; // phase 1, starter tasks only
    int main_episodes = 5000;     // phase 2, evolving set
    int generation_interval = 50;
    int probe_interval = 100;
    int checkpoint_interval = 1000;
    std::int64_t hidden_size = 256;
    T learning_rate = T(1e-4);
    A2cHyper<T> hyper;
    RewardTable reward_table;
    DensityParams density;
    WithheldCombination withheld;
    EpisodeConfig episode;
    std::optional<TaskSpec> probe_task;
    std::filesystem::path output_dir;
    bool verbose = false;

    int batch() const { return tasks_per_batch * replicates; }
    int total_episodes() const { return pretrain_episodes + main_episodes; }
};

// Groups a rollout's per-row trial totals by task slot for curriculum scoring.
template <typename T>
std::vector<TaskTrialRewards> group_trial_rewards(const RolloutRecord<T>& rollout,
                                                  int tasks_per_batch, int replicates,
                                                  int trials) {
    std::vector<TaskTrialRewards> grouped(tasks_per_batch);
    for (int k = 0; k < tasks_per_batch; ++k) {
        grouped[k].resize(replicates);
        for (int rep = 0; rep < replicates; ++rep) {
            const int row = k * replicates + rep;
            for (int trial = 0; trial < trials; ++trial)
                grouped[k][rep][trial] = rollout.trial_total(row, trial, trials);
        }
    }
    return grouped;
}

template <typename T>
class Trainer {
public:
    explicit Trainer(TrainSchedule<T> schedule) : schedule_(std::move(schedule)) {
        RngStream init(derive_stream(schedule_.master_seed, "agent-init"));
        params_ = AgentParams<T>::create(schedule_.hidden_size, init);
        opt_ = AdamState<T>::create(params_.parameters(), schedule_.learning_rate);
        auto starters = handcrafted_starter_set();
        for (int i = 0; i < schedule_.tasks_per_batch; ++i) {
            TaskSpec t = starters[static_cast<std::size_t>(i) % starters.size()];
            t.id += "/slot" + std::to_string(i);
            set_.tasks.push_back(std::move(t));
        }
        open_logs();
    }

    Trainer(TrainSchedule<T> schedule, const std::string& checkpoint_path)
        : schedule_(std::move(schedule)) {
        auto ck = Checkpoint::load(checkpoint_path);
        params_ = AgentParams<T>::load(ck);
        opt_ = AdamState<T>::create(params_.parameters(), schedule_.learning_rate);
        auto named = params_.named_parameters();
        for (std::size_t i = 0; i < named.size(); ++i) {
            opt_.m[i] = ck.tensor<T>("adam/m/" + named[i].first);
            opt_.v[i] = ck.tensor<T>("adam/v/" + named[i].first);
        }
        opt_.step = static_cast<std::int64_t>(ck.meta("adam/step"));
        episode_ = static_cast<int>(ck.meta("train/episode"));
        const auto set_dir = std::filesystem::path(checkpoint_path + ".tasks");
        if (std::filesystem::exists(set_dir)) set_ = load_training_set(set_dir);
        if (static_cast<int>(set_.tasks.size()) != schedule_.tasks_per_batch)
            throw CheckpointError("trainer resume: training set at " + set_dir.string() +
                                  " holds " + std::to_string(set_.tasks.size()) + " tasks, want " +
                                  std::to_string(schedule_.tasks_per_batch));
        open_logs();
    }

    const AgentParams<T>& params() const { return params_; }
    const TrainingSet& training_set() const { return set_; }
    int episode() const { return episode_; }
    const std::vector<TaskSpec>& admitted_tasks() const { return admitted_; }
    const std::vector<int>& generation_episodes() const { return generation_episodes_; }

    // Runs episodes until the schedule is exhausted. Returns the number run.
    int run(int max_episodes = -1) {
        int ran = 0;
        while (episode_ < schedule_.total_episodes() &&
               (max_episodes < 0 || ran < max_episodes)) {
            run_one_episode();
            ++ran;
        }
        if (schedule_.checkpoint_interval > 0 && !schedule_.output_dir.empty())
            save_checkpoint("agent_final");
        return ran;
    }

    A2cStats run_one_episode() {
        const std::uint64_t episode_key =
            derive_stream(derive_stream(schedule_.master_seed, "episode"),
                          static_cast<std::uint64_t>(episode_));
        auto tasks = current_task_rows();
        SimulatorThinkingBackend thinking(tasks, episode_key, schedule_.reward_table);
        RealEnvBackend real(tasks, episode_key, schedule_.reward_table);
        auto rollout = run_episode_batch(params_, tasks, schedule_.episode, thinking, real,
                                         episode_key);
        auto stats = a2c_update(params_, rollout, opt_, schedule_.hyper);
        last_grouped_ = group_trial_rewards(rollout, schedule_.tasks_per_batch,
                                            schedule_.replicates,
                                            schedule_.episode.trials_per_episode);
        log_episode(rollout, stats);
        episode_ += 1;

        const bool in_phase2 = episode_ > schedule_.pretrain_episodes;
        if (in_phase2 && schedule_.generation_interval > 0 &&
            (episode_ - schedule_.pretrain_episodes) % schedule_.generation_interval == 0)
            run_generation_event();
        if (schedule_.probe_interval > 0 && schedule_.probe_task &&
            episode_ % schedule_.probe_interval == 0)
            run_probe();
        if (schedule_.checkpoint_interval > 0 && !schedule_.output_dir.empty() &&
            episode_ % schedule_.checkpoint_interval == 0)
            save_checkpoint("agent_ep" + std::to_string(episode_));
        return stats;
    }

    std::filesystem::path save_checkpoint(const std::string& stem) {
        std::filesystem::create_directories(schedule_.output_dir / "checkpoints");
        const auto path = schedule_.output_dir / "checkpoints" / (stem + ".ckpt");
        Checkpoint ck;
        params_.save(ck);
        auto named = params_.named_parameters();
        for (std::size_t i = 0; i < named.size(); ++i) {
            ck.add("adam/m/" + named[i].first, opt_.m[i]);
            ck.add("adam/v/" + named[i].first, opt_.v[i]);
        }
        ck.set_meta("adam/step", static_cast<std::uint64_t>(opt_.step));
        ck.set_meta("train/episode", static_cast<std::uint64_t>(episode_));
        ck.set_meta("rng/master_seed", schedule_.master_seed);
        ck.save(path.string());
        save_training_set(set_, last_scores_, path.string() + ".tasks");
        return path;
    }

    // Evaluation rollout (no graph, no update) of one task replicated across
    // the full batch. Thinking runs in the simulator.
    RolloutRecord<T> evaluate_task(const TaskSpec& task, std::uint64_t key, int batch) const {
        NoGradGuard guard;
        std::vector<const TaskSpec*> rows(batch, &task);
        SimulatorThinkingBackend thinking(rows, key, schedule_.reward_table);
        RealEnvBackend real(rows, key, schedule_.reward_table);
        return run_episode_batch(params_, rows, schedule_.episode, thinking, real, key);
    }

private:
    std::vector<const TaskSpec*> current_task_rows() const {
        std::vector<const TaskSpec*> rows;
        rows.reserve(schedule_.batch());
        for (int k = 0; k < schedule_.tasks_per_batch; ++k)
            for (int rep = 0; rep < schedule_.replicates; ++rep)
                rows.push_back(&set_.tasks[static_cast<std::size_t>(k)]);
        return rows;
    }

    void run_generation_event() {
        generation_episodes_.push_back(episode_);
        RngStream gen(derive_stream(derive_stream(schedule_.master_seed, "task-gen"),
                                    static_cast<std::uint64_t>(episode_)));
        std::vector<TaskSpec> candidates;
        for (int k = 0; k < schedule_.tasks_per_batch; ++k)
            candidates.push_back(generate_random_task(
                gen, schedule_.density, schedule_.withheld,
                "gen-" + std::to_string(episode_) + "-" + std::to_string(k)));

        // One full evaluation episode on the candidate batch; no gradients.
        const std::uint64_t eval_key =
            derive_stream(derive_stream(schedule_.master_seed, "candidate-eval"),
                          static_cast<std::uint64_t>(episode_));
        std::vector<const TaskSpec*> rows;
        for (const auto& c : candidates)
            for (int rep = 0; rep < schedule_.replicates; ++rep) rows.push_back(&c);
        RolloutRecord<T> rollout;
        {
            NoGradGuard guard;
            SimulatorThinkingBackend thinking(rows, eval_key, schedule_.reward_table);
            RealEnvBackend real(rows, eval_key, schedule_.reward_table);
            rollout = run_episode_batch(params_, rows, schedule_.episode, thinking, real,
                                        eval_key);
        }
        auto cand_grouped = group_trial_rewards(rollout, schedule_.tasks_per_batch,
                                                schedule_.replicates,
                                                schedule_.episode.trials_per_episode);
        auto cand_report = score_tasks(cand_grouped);
        auto cur_report = score_tasks(last_grouped_);

        std::vector<double> cur_scores, cand_scores;
        for (const auto& s : cur_report.per_task) cur_scores.push_back(s.score);
        for (const auto& s : cand_report.per_task) cand_scores.push_back(s.score);
        auto result =
            evolve_task_set(set_, cur_scores, candidates, cand_scores, schedule_.withheld);
        last_scores_ = cur_scores;

        for (std::size_t k = 0; k < candidates.size(); ++k) {
            const bool kept =
                std::find(result.inserted_ids.begin(), result.inserted_ids.end(),
                          candidates[k].id) != result.inserted_ids.end();
            if (kept) admitted_.push_back(candidates[k]);
            if (score_log_.open())
                score_log_.row(set_.generation, candidates[k].id,
                               cand_report.per_task[k].mean_diff,
                               cand_report.per_task[k].replicate_std,
                               cand_report.per_task[k].score, kept ? "kept" : "dropped");
        }
    }

    void run_probe() {
        const std::uint64_t key = derive_stream(derive_stream(schedule_.master_seed, "probe"),
                                                static_cast<std::uint64_t>(episode_));
        auto rollout = evaluate_task(*schedule_.probe_task, key, schedule_.batch());
        const int trials = schedule_.episode.trials_per_episode;
        std::vector<double> means(trials, 0.0);
        for (int r = 0; r < rollout.batch; ++r)
            for (int k = 0; k < trials; ++k) means[k] += rollout.trial_total(r, k, trials);
        for (auto& m : means) m /= rollout.batch;
        if (probe_log_.open())
            probe_log_.row(episode_, means[0], means[1], means[2], means[trials - 1]);
        if (schedule_.verbose)
            std::fprintf(stderr, "[probe] ep %d trial1 %.3f trial4 %.3f\n", episode_, means[0],
                         means[trials - 1]);
    }

    void open_logs() {
        if (schedule_.output_dir.empty()) return;
        std::filesystem::create_directories(schedule_.output_dir);
        train_log_ = CsvWriter(schedule_.output_dir / "train_log.csv",
                               {"episode", "phase", "mean_trial1_reward", "mean_trial4_reward",
                                "policy_loss", "value_loss", "entropy", "grad_norm"});
        probe_log_ = CsvWriter(schedule_.output_dir / "probe_log.csv",
                               {"episode", "trial1", "trial2", "trial3", "trial4"});
        score_log_ = CsvWriter(schedule_.output_dir / "task_scores.csv",
                               {"generation", "task_id", "mean_diff", "std", "score", "kept"});
    }

    void log_episode(const RolloutRecord<T>& rollout, const A2cStats& stats) {
        const int trials = schedule_.episode.trials_per_episode;
        double t1 = 0.0, t4 = 0.0;
        for (int r = 0; r < rollout.batch; ++r) {
            t1 += rollout.trial_total(r, 0, trials);
            t4 += rollout.trial_total(r, trials - 1, trials);
        }
        t1 /= rollout.batch;
        t4 /= rollout.batch;
        if (train_log_.open())
            train_log_.row(episode_, episode_ < schedule_.pretrain_episodes ? 1 : 2, t1, t4,
                           stats.policy_loss, stats.value_loss, stats.entropy, stats.grad_norm);
        if (schedule_.verbose && episode_ % 10 == 0)
            std::fprintf(stderr, "[train] ep %d trial1 %.3f trial4 %.3f loss %.4f ent %.3f\n",
                         episode_, t1, t4, stats.total_loss, stats.entropy);
    }

    TrainSchedule<T> schedule_;
    AgentParams<T> params_;
    AdamState<T> opt_;
    TrainingSet set_;
    std::vector<TaskTrialRewards> last_grouped_;
    std::vector<double> last_scores_;
    std::vector<TaskSpec> admitted_;
    std::vector<int> generation_episodes_;
    int episode_ = 0;
    CsvWriter train_log_, probe_log_, score_log_;
};

} // namespace thinkgrid
