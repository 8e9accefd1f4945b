#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "thinkgrid/gridworld/task.hpp"
#include "thinkgrid/rng.hpp"
#include "thinkgrid/tasks/withheld.hpp"

namespace thinkgrid {

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-cell placement probabilities for random task boards.
struct DensityParams {
    double stone = 0.10;
    double diggable = 0.05;
    double pickable = 0.04;
    double killer = 0.03;
    double fruit_tree = 0.05;
    double cow = 0.02;
    double zombie = 0.02;
    double angel = 0.02;

    std::array<std::pair<Entity, double>, 8> entries() const {
        return {{{Entity::Stone, stone},
                 {Entity::Diggable, diggable},
                 {Entity::Pickable, pickable},
                 {Entity::Killer, killer},
                 {Entity::FruitTree, fruit_tree},
                 {Entity::Cow, cow},
                 {Entity::Zombie, zombie},
                 {Entity::Angel, angel}}};
    }
};

// Rejection sampling: boards violating the withheld combination are redrawn.
inline TaskSpec generate_random_task(RngStream& rng, const DensityParams& density,
                                     const WithheldCombination& withheld,
                                     const std::string& id = "generated",
                                     int max_attempts = 200) {
    const auto entries = density.entries();
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        TaskSpec task;
        task.id = id;
        task.origin = TaskOrigin::Generated;
        int empty_cells = 0;
        for (int i = 0; i < kGridCells; ++i) {
            const double u = rng.next_double();
            double acc = 0.0;
            Entity placed = Entity::Empty;
            for (const auto& [kind, p] : entries) {
                acc += p;
                if (u < acc) {
                    placed = kind;
                    break;
                }
            }
            task.grid[static_cast<std::size_t>(i)] = placed;
            empty_cells += (placed == Entity::Empty);
        }
        if (empty_cells == 0) continue;
        int slot = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(empty_cells)));
        for (int i = 0; i < kGridCells; ++i) {
            if (task.grid[static_cast<std::size_t>(i)] == Entity::Empty && slot-- == 0) {
                task.grid[static_cast<std::size_t>(i)] = Entity::AgentStart;
                break;
            }
        }
        if (validate_task(task, withheld).ok) return task;
    }
    throw GenerationError("generate_random_task: no valid board after " +
                          std::to_string(max_attempts) + " attempts for id " + id);
}

} // namespace thinkgrid
