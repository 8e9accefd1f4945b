#pragma once

#include <string>
#include <vector>

#include "thinkgrid/gridworld/batch.hpp"
#include "thinkgrid/gridworld/world.hpp"
#include "thinkgrid/rng.hpp"

namespace thinkgrid::testutil {

// A random but reachable-looking world state: block XOR mob XOR nothing per
// cell, exactly one agent, timers only on empty trees, random carried block.
inline WorldState random_world_state(RngStream& rng) {
    WorldState s;
    const int agent = static_cast<int>(rng.next_below(kGridCells));
    for (int i = 0; i < kGridCells; ++i) {
        if (i == agent) {
            s.mobs[i] = MobKind::Agent;
            s.agent_row = static_cast<std::uint8_t>(i / kGridSide);
            s.agent_col = static_cast<std::uint8_t>(i % kGridSide);
            continue;
        }
        const double u = rng.next_double();
        if (u < 0.08) {
            s.mobs[i] = static_cast<MobKind>(2 + rng.next_below(3)); // zombie/cow/angel
        } else if (u < 0.35) {
            s.blocks[i] = static_cast<BlockKind>(1 + rng.next_below(6));
            if (s.blocks[i] == BlockKind::EmptyTree)
                s.tree_timers[i] = static_cast<std::uint8_t>(1 + rng.next_below(kFruitRegrowthPeriod));
        }
    }
    const auto pick = rng.next_below(3);
    s.carried = pick == 0 ? BlockKind::Empty : (pick == 1 ? BlockKind::Pickable : BlockKind::Killer);
    s.stream_key = rng.next_u64();
    s.step_counter = rng.next_below(1000);
    return s;
}

inline TaskSpec task_from_lines(const std::vector<std::string>& rows, const std::string& id = "t") {
    std::string text;
    for (const auto& r : rows) text += r + "\n";
    return parse_task(text, id);
}

} // namespace thinkgrid::testutil
