#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <string>

#include "thinkgrid/gridworld/task.hpp"
#include "thinkgrid/gridworld/types.hpp"
#include "thinkgrid/rng.hpp"

namespace thinkgrid {

// Scalar reference engine. This is the permanent oracle for the batched
// engine: every mechanic lives here in its most readable form, and the
// batched implementation must match it bit for bit.

struct WorldState {
    std::array<BlockKind, kGridCells> blocks{};
    std::array<MobKind, kGridCells> mobs{};
    std::uint8_t agent_row = 0;
    std::uint8_t agent_col = 0;
    BlockKind carried = BlockKind::Empty; // Empty means unburdened
    std::array<std::uint8_t, kGridCells> tree_timers{};
    std::int32_t step_in_trial = 0;
    std::int32_t trial_index = 0;
    std::uint64_t stream_key = 0;
    std::uint64_t step_counter = 0;

    int agent_cell() const { return agent_row * kGridSide + agent_col; }

    bool operator==(const WorldState&) const = default;
};

inline WorldState reset_from_task(const TaskSpec& task, std::uint64_t stream_key) {
    WorldState s;
    s.stream_key = stream_key;
    int agents = 0;
    for (int r = 0; r < kGridSide; ++r) {
        for (int c = 0; c < kGridSide; ++c) {
            const int i = r * kGridSide + c;
            switch (task.at(r, c)) {
                case Entity::Empty: break;
                case Entity::Stone: s.blocks[i] = BlockKind::Stone; break;
                case Entity::Pickable: s.blocks[i] = BlockKind::Pickable; break;
                case Entity::Killer: s.blocks[i] = BlockKind::Killer; break;
                case Entity::Diggable: s.blocks[i] = BlockKind::Diggable; break;
                case Entity::FruitTree: s.blocks[i] = BlockKind::FruitTree; break;
                case Entity::EmptyTree: s.blocks[i] = BlockKind::EmptyTree; break;
                case Entity::AgentStart:
                    if (++agents > 1)
                        throw TaskError("duplicate agent at cell (" + std::to_string(r) + "," +
                                        std::to_string(c) + ")");
                    s.mobs[i] = MobKind::Agent;
                    s.agent_row = static_cast<std::uint8_t>(r);
                    s.agent_col = static_cast<std::uint8_t>(c);
                    break;
                case Entity::Zombie: s.mobs[i] = MobKind::Zombie; break;
                case Entity::Cow: s.mobs[i] = MobKind::Cow; break;
                case Entity::Angel: s.mobs[i] = MobKind::Angel; break;
            }
        }
    }
    if (agents == 0) throw TaskError("task has no agent");
    return s;
}

struct StepResult {
    float reward = 0.0f;
    StepEvents events;
};

namespace engine_detail {

inline bool in_bounds(int r, int c) {
    return r >= 0 && r < kGridSide && c >= 0 && c < kGridSide;
}

// Chase step: the axis move that most reduces Chebyshev distance to the
// agent; ties broken in fixed order N,S,E,W.
inline int zombie_chase_dir(int zr, int zc, int ar, int ac) {
    int best_dir = 0;
    int best = 1 << 20;
    for (int d = 0; d < 4; ++d) {
        const int nr = zr + kDirDr[d], nc = zc + kDirDc[d];
        const int cheb = std::max(std::abs(nr - ar), std::abs(nc - ac));
        if (cheb < best) {
            best = cheb;
            best_dir = d;
        }
    }
    return best_dir;
}

} // namespace engine_detail

// Advances the world by one step. Fixed phase order:
//   1. agent action (move / pick / touch / drop / dig-kill)
//   2. fruit-tree regrowth timers
//   3. mob moves in row-major scan order: zombies, then cows, then angels
//   4. reward assembled from the step's events
// Every action is total; illegal actions are no-ops. Contact means attempting
// to move onto the other entity's cell, and the mover stays in place whenever
// the contact kills or penalizes.
inline StepResult step(WorldState& s, Action action, const RewardTable& table) {
    using engine_detail::in_bounds;
    StepEvents ev;
    RngStream draws(derive_stream(s.stream_key, s.step_counter));
    s.step_counter += 1;

    // -- phase 1: agent action ------------------------------------------------
    const int a = static_cast<int>(action);
    if (a >= 1 && a <= 4) { // move
        const int d = a - 1;
        const int tr = s.agent_row + kDirDr[d], tc = s.agent_col + kDirDc[d];
        if (in_bounds(tr, tc)) {
            const int t = tr * kGridSide + tc;
            if (s.mobs[t] == MobKind::Zombie) {
                ev.zombie_touches += 1;
            } else if (s.mobs[t] == MobKind::NoMob) {
                switch (s.blocks[t]) {
                    case BlockKind::Empty:
                        s.mobs[s.agent_cell()] = MobKind::NoMob;
                        s.mobs[t] = MobKind::Agent;
                        s.agent_row = static_cast<std::uint8_t>(tr);
                        s.agent_col = static_cast<std::uint8_t>(tc);
                        break;
                    case BlockKind::FruitTree:
                        ev.fruit_eaten += 1;
                        s.blocks[t] = BlockKind::EmptyTree;
                        // +1 because the timer already ticks this same step
                        s.tree_timers[t] = kFruitRegrowthPeriod + 1;
                        break;
                    case BlockKind::Pickable:
                    case BlockKind::Killer:
                        if (s.carried == BlockKind::Empty) {
                            s.carried = s.blocks[t];
                            s.blocks[t] = BlockKind::Empty;
                            s.mobs[s.agent_cell()] = MobKind::NoMob;
                            s.mobs[t] = MobKind::Agent;
                            s.agent_row = static_cast<std::uint8_t>(tr);
                            s.agent_col = static_cast<std::uint8_t>(tc);
                            ev.blocks_picked += 1;
                        }
                        break;
                    default: break; // Stone, Diggable, EmptyTree: blocked
                }
            }
            // cow or angel in the way: blocked, nothing happens
        }
    } else if (a >= 5 && a <= 8) { // drop
        const int d = a - 5;
        const int tr = s.agent_row + kDirDr[d], tc = s.agent_col + kDirDc[d];
        if (s.carried != BlockKind::Empty && in_bounds(tr, tc)) {
            const int t = tr * kGridSide + tc;
            if (s.mobs[t] != MobKind::NoMob) {
                if (s.carried == BlockKind::Killer) {
                    switch (s.mobs[t]) {
                        case MobKind::Zombie:
                            s.mobs[t] = MobKind::NoMob;
                            s.carried = BlockKind::Empty;
                            ev.zombies_killed_by_agent += 1;
                            break;
                        case MobKind::Cow:
                            s.mobs[t] = MobKind::NoMob;
                            s.carried = BlockKind::Empty;
                            ev.cows_killed += 1;
                            break;
                        case MobKind::Angel:
                            s.mobs[t] = MobKind::NoMob;
                            s.carried = BlockKind::Empty;
                            ev.angels_killed += 1;
                            break;
                        default: break; // the agent itself cannot be a target
                    }
                }
            } else {
                switch (s.blocks[t]) {
                    case BlockKind::Empty:
                        s.blocks[t] = s.carried;
                        s.carried = BlockKind::Empty;
                        ev.blocks_dropped += 1;
                        break;
                    case BlockKind::Diggable:
                    case BlockKind::FruitTree:
                    case BlockKind::EmptyTree:
                    case BlockKind::Pickable:
                        if (s.carried == BlockKind::Killer) {
                            s.blocks[t] = BlockKind::Empty;
                            s.tree_timers[t] = 0;
                            s.carried = BlockKind::Empty;
                            ev.blocks_dug += 1;
                        }
                        break;
                    default: break; // Stone immune; Killer-on-ground not a valid target
                }
            }
        }
    }

    // -- phase 2: tree regrowth timers ----------------------------------------
    for (int i = 0; i < kGridCells; ++i) {
        if (s.blocks[i] == BlockKind::EmptyTree && s.tree_timers[i] > 0) {
            s.tree_timers[i] -= 1;
            if (s.tree_timers[i] == 0) s.blocks[i] = BlockKind::FruitTree;
        }
    }

    // -- phase 3: mob moves ----------------------------------------------------
    // Snapshot positions per kind so each mob acts exactly once per step even
    // when it moves into a cell the scan has not reached yet.
    std::array<std::uint8_t, kGridCells> snapshot{};
    auto collect = [&](MobKind kind) {
        int n = 0;
        for (int i = 0; i < kGridCells; ++i)
            if (s.mobs[i] == kind) snapshot[n++] = static_cast<std::uint8_t>(i);
        return n;
    };

    const int zombie_count = collect(MobKind::Zombie);
    for (int k = 0; k < zombie_count; ++k) {
        const int i = snapshot[k];
        const int zr = i / kGridSide, zc = i % kGridSide;
        int dir; // 0..3 move, -1 stay
        if (draws.next_double() < kZombieNoise) {
            const int pick = static_cast<int>(draws.next_below(5));
            dir = pick == 0 ? -1 : pick - 1;
        } else {
            dir = engine_detail::zombie_chase_dir(zr, zc, s.agent_row, s.agent_col);
        }
        if (dir < 0) continue;
        const int nr = zr + kDirDr[dir], nc = zc + kDirDc[dir];
        if (!in_bounds(nr, nc)) continue;
        const int t = nr * kGridSide + nc;
        if (s.mobs[t] == MobKind::Agent) {
            ev.zombie_touches += 1;
        } else if (s.mobs[t] == MobKind::Angel) {
            s.mobs[i] = MobKind::NoMob; // walked into an angel
            ev.zombies_killed_by_angel += 1;
        } else if (s.mobs[t] == MobKind::NoMob && s.blocks[t] == BlockKind::Empty) {
            s.mobs[t] = MobKind::Zombie;
            s.mobs[i] = MobKind::NoMob;
        }
    }

    const int cow_count = collect(MobKind::Cow);
    for (int k = 0; k < cow_count; ++k) {
        const int i = snapshot[k];
        const int pick = static_cast<int>(draws.next_below(5));
        if (pick == 0) continue;
        const int d = pick - 1;
        const int nr = i / kGridSide + kDirDr[d], nc = i % kGridSide + kDirDc[d];
        if (!in_bounds(nr, nc)) continue;
        const int t = nr * kGridSide + nc;
        if (s.mobs[t] == MobKind::NoMob && s.blocks[t] == BlockKind::Empty) {
            s.mobs[t] = MobKind::Cow;
            s.mobs[i] = MobKind::NoMob;
        }
    }

    const int angel_count = collect(MobKind::Angel);
    for (int k = 0; k < angel_count; ++k) {
        const int i = snapshot[k];
        const int pick = static_cast<int>(draws.next_below(5));
        if (pick == 0) continue;
        const int d = pick - 1;
        const int nr = i / kGridSide + kDirDr[d], nc = i % kGridSide + kDirDc[d];
        if (!in_bounds(nr, nc)) continue;
        const int t = nr * kGridSide + nc;
        if (s.mobs[t] == MobKind::Zombie) {
            s.mobs[t] = MobKind::NoMob; // angel kills on contact, stays put
            ev.zombies_killed_by_angel += 1;
        } else if (s.mobs[t] == MobKind::NoMob && s.blocks[t] == BlockKind::Empty) {
            s.mobs[t] = MobKind::Angel;
            s.mobs[i] = MobKind::NoMob;
        }
    }

    s.step_in_trial += 1;

    return {reward_from_events(ev, table), ev};
}

} // namespace thinkgrid
