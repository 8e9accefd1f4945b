#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "thinkgrid/gridworld/types.hpp"
#include "thinkgrid/numerics/tensor.hpp"

namespace thinkgrid {

// Per-trial reward totals for one task: [replicate][trial].
using TaskTrialRewards = std::vector<std::array<double, kTrialsPerEpisode>>;

struct TaskScore {
    double mean_diff = 0.0;      // mean over replicates of (last - first trial reward)
    double replicate_std = 0.0;  // population std of those diffs
    double score = 0.0;          // (mean_diff - batch mean) / (1 + replicate_std)
};

struct TaskScoreReport {
    std::vector<TaskScore> per_task;
    double batch_mean_diff = 0.0;
};

// The task-selection score: the pre/post-thinking performance difference,
// mean-centered across the evaluated batch of tasks and divided by one plus
// the per-task replicate standard deviation. Used only to select tasks, never
// as a training signal.
inline TaskScoreReport score_tasks(const std::vector<TaskTrialRewards>& rewards) {
    TaskScoreReport report;
    if (rewards.empty()) return report;
    const std::size_t replicates = rewards.front().size();
    double sum = 0.0;
    for (const auto& task : rewards) {
        if (task.size() != replicates)
            throw ShapeError("score_tasks: replicate count mismatch (" +
                             std::to_string(task.size()) + " vs " + std::to_string(replicates) +
                             ")");
        TaskScore ts;
        for (const auto& trials : task)
            ts.mean_diff += trials[kTrialsPerEpisode - 1] - trials[0];
        ts.mean_diff /= static_cast<double>(task.size());
        double var = 0.0;
        for (const auto& trials : task) {
            const double d = (trials[kTrialsPerEpisode - 1] - trials[0]) - ts.mean_diff;
            var += d * d;
        }
        ts.replicate_std = std::sqrt(var / static_cast<double>(task.size()));
        sum += ts.mean_diff;
        report.per_task.push_back(ts);
    }
    report.batch_mean_diff = sum / static_cast<double>(rewards.size());
    for (auto& ts : report.per_task)
        ts.score = (ts.mean_diff - report.batch_mean_diff) / (1.0 + ts.replicate_std);
    return report;
}

} // namespace thinkgrid
