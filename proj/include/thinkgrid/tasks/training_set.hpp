#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinkgrid/gridworld/task.hpp"
#include "thinkgrid/tasks/withheld.hpp"

namespace thinkgrid {

struct TrainingSet {
    std::vector<TaskSpec> tasks;
    std::int64_t generation = 0;
};

struct EvolveResult {
    std::vector<std::string> removed_ids;
    std::vector<std::string> inserted_ids;
};

// Unconditional bottom-10% swap: the lowest-scoring tenth of the current set
// is replaced by the best-scoring candidates, even when every candidate
// scores worse than every incumbent. Ties break on stable task id order.
inline EvolveResult evolve_task_set(TrainingSet& current, const std::vector<double>& current_scores,
                                    const std::vector<TaskSpec>& candidates,
                                    const std::vector<double>& candidate_scores,
                                    const WithheldCombination& withheld) {
    if (current.tasks.size() != current_scores.size())
        throw std::invalid_argument("evolve_task_set: current scores length mismatch");
    if (candidates.size() != candidate_scores.size())
        throw std::invalid_argument("evolve_task_set: candidate scores length mismatch");
    const std::size_t n_replace = current.tasks.size() / 10;
    if (candidates.size() < n_replace)
        throw std::invalid_argument("evolve_task_set: need at least " +
                                    std::to_string(n_replace) + " candidates, got " +
                                    std::to_string(candidates.size()));

    std::vector<std::size_t> worst(current.tasks.size());
    std::iota(worst.begin(), worst.end(), 0);
    std::sort(worst.begin(), worst.end(), [&](std::size_t a, std::size_t b) {
        if (current_scores[a] != current_scores[b]) return current_scores[a] < current_scores[b];
        return current.tasks[a].id < current.tasks[b].id;
    });
    worst.resize(n_replace);

    std::vector<std::size_t> best(candidates.size());
    std::iota(best.begin(), best.end(), 0);
    std::sort(best.begin(), best.end(), [&](std::size_t a, std::size_t b) {
        if (candidate_scores[a] != candidate_scores[b])
            return candidate_scores[a] > candidate_scores[b];
        return candidates[a].id < candidates[b].id;
    });
    best.resize(n_replace);

    EvolveResult result;
    for (std::size_t k = 0; k < n_replace; ++k) {
        const TaskSpec& incoming = candidates[best[k]];
        const auto check = validate_task(incoming, withheld);
        if (!check.ok)
            throw std::invalid_argument("evolve_task_set: candidate rejected: " + check.violation);
        result.removed_ids.push_back(current.tasks[worst[k]].id);
        result.inserted_ids.push_back(incoming.id);
        current.tasks[worst[k]] = incoming;
    }
    current.generation += 1;
    return result;
}

// Snapshot: one .task file per slot plus a manifest listing ids, origins and
// the latest scores.
inline void save_training_set(const TrainingSet& set, const std::vector<double>& scores,
                              const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv");
    manifest << "slot,id,origin,score\n";
    for (std::size_t i = 0; i < set.tasks.size(); ++i) {
        const auto& task = set.tasks[i];
        const std::string file = "slot_" + std::to_string(i) + ".task";
        std::ofstream out(dir / file);
        out << serialize_task(task);
        manifest << i << ',' << task.id << ','
                 << (task.origin == TaskOrigin::Generated ? "generated" : "handcrafted") << ','
                 << (i < scores.size() ? scores[i] : 0.0) << '\n';
    }
    std::ofstream gen(dir / "generation.txt");
    gen << set.generation << '\n';
}

inline TrainingSet load_training_set(const std::filesystem::path& dir) {
    TrainingSet set;
    for (std::size_t i = 0;; ++i) {
        const auto file = dir / ("slot_" + std::to_string(i) + ".task");
        if (!std::filesystem::exists(file)) break;
        std::ifstream in(file);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        set.tasks.push_back(parse_task(text));
    }
    std::ifstream gen(dir / "generation.txt");
    if (gen) gen >> set.generation;
    return set;
}

} // namespace thinkgrid
