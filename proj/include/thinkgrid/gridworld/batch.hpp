#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "thinkgrid/gridworld/obs.hpp"
#include "thinkgrid/gridworld/world.hpp"
#include "thinkgrid/numerics/tensor.hpp"

namespace thinkgrid {

// Batch-vectorized engine: structure-of-arrays state with an independently
// written per-row kernel. Rows never interact, so stepping parallelizes over
// the batch; the result is required (and tested) to be bit-identical to the
// scalar reference engine driven with the same per-row RNG streams.

struct BatchedWorldState {
    int size = 0;
    std::vector<std::uint8_t> blocks;      // size * 81
    std::vector<std::uint8_t> mobs;        // size * 81
    std::vector<std::uint8_t> tree_timers; // size * 81
    std::vector<std::uint8_t> agent_row, agent_col, carried;
    std::vector<std::int32_t> step_in_trial, trial_index;
    std::vector<std::uint64_t> stream_key, step_counter;

    void resize(int n) {
        size = n;
        blocks.assign(static_cast<std::size_t>(n) * kGridCells, 0);
        mobs.assign(static_cast<std::size_t>(n) * kGridCells, 0);
        tree_timers.assign(static_cast<std::size_t>(n) * kGridCells, 0);
        agent_row.assign(n, 0);
        agent_col.assign(n, 0);
        carried.assign(n, 0);
        step_in_trial.assign(n, 0);
        trial_index.assign(n, 0);
        stream_key.assign(n, 0);
        step_counter.assign(n, 0);
    }

    void set_row(int r, const WorldState& s) {
        for (int i = 0; i < kGridCells; ++i) {
            blocks[static_cast<std::size_t>(r) * kGridCells + i] =
                static_cast<std::uint8_t>(s.blocks[i]);
            mobs[static_cast<std::size_t>(r) * kGridCells + i] =
                static_cast<std::uint8_t>(s.mobs[i]);
            tree_timers[static_cast<std::size_t>(r) * kGridCells + i] = s.tree_timers[i];
        }
        agent_row[r] = s.agent_row;
        agent_col[r] = s.agent_col;
        carried[r] = static_cast<std::uint8_t>(s.carried);
        step_in_trial[r] = s.step_in_trial;
        trial_index[r] = s.trial_index;
        stream_key[r] = s.stream_key;
        step_counter[r] = s.step_counter;
    }

    WorldState row(int r) const {
        WorldState s;
        for (int i = 0; i < kGridCells; ++i) {
            s.blocks[i] = static_cast<BlockKind>(blocks[static_cast<std::size_t>(r) * kGridCells + i]);
            s.mobs[i] = static_cast<MobKind>(mobs[static_cast<std::size_t>(r) * kGridCells + i]);
            s.tree_timers[i] = tree_timers[static_cast<std::size_t>(r) * kGridCells + i];
        }
        s.agent_row = agent_row[r];
        s.agent_col = agent_col[r];
        s.carried = static_cast<BlockKind>(carried[r]);
        s.step_in_trial = step_in_trial[r];
        s.trial_index = trial_index[r];
        s.stream_key = stream_key[r];
        s.step_counter = step_counter[r];
        return s;
    }
};

inline BatchedWorldState batch_reset(const std::vector<const TaskSpec*>& tasks,
                                     const std::vector<std::uint64_t>& keys) {
    if (tasks.size() != keys.size()) throw ShapeError("batch_reset: tasks vs keys length");
    BatchedWorldState b;
    b.resize(static_cast<int>(tasks.size()));
    for (int r = 0; r < b.size; ++r) b.set_row(r, reset_from_task(*tasks[r], keys[r]));
    return b;
}

namespace batch_detail {

// Entity property tables indexed by raw kind bytes.
inline constexpr std::uint8_t B_EMPTY = 0, B_STONE = 1, B_PICK = 2, B_KILL = 3, B_DIG = 4,
                              B_FRUIT = 5, B_EMPTYTREE = 6;
inline constexpr std::uint8_t M_NONE = 0, M_AGENT = 1, M_ZOMBIE = 2, M_COW = 3, M_ANGEL = 4;

// blocks the agent can pick up
inline constexpr std::array<std::uint8_t, 7> kCarryable = {0, 0, 1, 1, 0, 0, 0};
// blocks a killer block destroys when dropped on them
inline constexpr std::array<std::uint8_t, 7> kKillerDigs = {0, 0, 1, 0, 1, 1, 1};
// mobs a killer block kills when dropped on them
inline constexpr std::array<std::uint8_t, 5> kKillerKills = {0, 0, 1, 1, 1};

struct RowRefs {
    std::uint8_t* blocks;
    std::uint8_t* mobs;
    std::uint8_t* timers;
    std::uint8_t* agent_row;
    std::uint8_t* agent_col;
    std::uint8_t* carried;
    std::int32_t* step_in_trial;
    std::uint64_t stream_key;
    std::uint64_t* step_counter;
};

inline StepResult step_row(RowRefs w, std::uint8_t action, const RewardTable& table) {
    StepEvents ev;
    RngStream draws(derive_stream(w.stream_key, *w.step_counter));
    *w.step_counter += 1;

    const int ar = *w.agent_row, ac = *w.agent_col;
    const int acell = ar * kGridSide + ac;

    if (action >= 1 && action <= 8) {
        const int d = (action - 1) & 3;
        const int tr = ar + kDirDr[d], tc = ac + kDirDc[d];
        const bool inb = static_cast<unsigned>(tr) < kGridSide && static_cast<unsigned>(tc) < kGridSide;
        if (inb) {
            const int t = tr * kGridSide + tc;
            const std::uint8_t tm = w.mobs[t];
            const std::uint8_t tb = w.blocks[t];
            if (action <= 4) { // move
                if (tm == M_ZOMBIE) {
                    ev.zombie_touches += 1;
                } else if (tm == M_NONE) {
                    if (tb == B_EMPTY) {
                        w.mobs[acell] = M_NONE;
                        w.mobs[t] = M_AGENT;
                        *w.agent_row = static_cast<std::uint8_t>(tr);
                        *w.agent_col = static_cast<std::uint8_t>(tc);
                    } else if (tb == B_FRUIT) {
                        ev.fruit_eaten += 1;
                        w.blocks[t] = B_EMPTYTREE;
                        w.timers[t] = kFruitRegrowthPeriod + 1;
                    } else if (kCarryable[tb] && *w.carried == B_EMPTY) {
                        *w.carried = tb;
                        w.blocks[t] = B_EMPTY;
                        w.mobs[acell] = M_NONE;
                        w.mobs[t] = M_AGENT;
                        *w.agent_row = static_cast<std::uint8_t>(tr);
                        *w.agent_col = static_cast<std::uint8_t>(tc);
                        ev.blocks_picked += 1;
                    }
                }
            } else if (*w.carried != B_EMPTY) { // drop
                if (tm != M_NONE) {
                    if (*w.carried == B_KILL && kKillerKills[tm]) {
                        ev.zombies_killed_by_agent += (tm == M_ZOMBIE);
                        ev.cows_killed += (tm == M_COW);
                        ev.angels_killed += (tm == M_ANGEL);
                        w.mobs[t] = M_NONE;
                        *w.carried = B_EMPTY;
                    }
                } else if (tb == B_EMPTY) {
                    w.blocks[t] = *w.carried;
                    *w.carried = B_EMPTY;
                    ev.blocks_dropped += 1;
                } else if (*w.carried == B_KILL && kKillerDigs[tb]) {
                    w.blocks[t] = B_EMPTY;
                    w.timers[t] = 0;
                    *w.carried = B_EMPTY;
                    ev.blocks_dug += 1;
                }
            }
        }
    }

    for (int i = 0; i < kGridCells; ++i) {
        if (w.blocks[i] == B_EMPTYTREE && w.timers[i] > 0) {
            if (--w.timers[i] == 0) w.blocks[i] = B_FRUIT;
        }
    }

    std::array<std::uint8_t, kGridCells> list{};
    const int agent_r = *w.agent_row, agent_c = *w.agent_col;

    auto gather = [&](std::uint8_t kind) {
        int n = 0;
        for (int i = 0; i < kGridCells; ++i)
            if (w.mobs[i] == kind) list[n++] = static_cast<std::uint8_t>(i);
        return n;
    };

    const int nz = gather(M_ZOMBIE);
    for (int k = 0; k < nz; ++k) {
        const int i = list[k];
        const int zr = i / kGridSide, zc = i % kGridSide;
        int dir;
        if (draws.next_double() < kZombieNoise) {
            const int pick = static_cast<int>(draws.next_below(5));
            if (pick == 0) continue;
            dir = pick - 1;
        } else {
            int best = 1 << 20;
            dir = 0;
            for (int d = 0; d < 4; ++d) {
                const int nr = zr + kDirDr[d], nc = zc + kDirDc[d];
                const int dr = nr > agent_r ? nr - agent_r : agent_r - nr;
                const int dc = nc > agent_c ? nc - agent_c : agent_c - nc;
                const int cheb = dr > dc ? dr : dc;
                if (cheb < best) {
                    best = cheb;
                    dir = d;
                }
            }
        }
        const int nr = zr + kDirDr[dir], nc = zc + kDirDc[dir];
        if (static_cast<unsigned>(nr) >= kGridSide || static_cast<unsigned>(nc) >= kGridSide)
            continue;
        const int t = nr * kGridSide + nc;
        if (w.mobs[t] == M_AGENT) {
            ev.zombie_touches += 1;
        } else if (w.mobs[t] == M_ANGEL) {
            w.mobs[i] = M_NONE;
            ev.zombies_killed_by_angel += 1;
        } else if (w.mobs[t] == M_NONE && w.blocks[t] == B_EMPTY) {
            w.mobs[t] = M_ZOMBIE;
            w.mobs[i] = M_NONE;
        }
    }

    const int ncow = gather(M_COW);
    for (int k = 0; k < ncow; ++k) {
        const int i = list[k];
        const int pick = static_cast<int>(draws.next_below(5));
        if (pick == 0) continue;
        const int d = pick - 1;
        const int nr = i / kGridSide + kDirDr[d], nc = i % kGridSide + kDirDc[d];
        if (static_cast<unsigned>(nr) >= kGridSide || static_cast<unsigned>(nc) >= kGridSide)
            continue;
        const int t = nr * kGridSide + nc;
        if (w.mobs[t] == M_NONE && w.blocks[t] == B_EMPTY) {
            w.mobs[t] = M_COW;
            w.mobs[i] = M_NONE;
        }
    }

    const int na = gather(M_ANGEL);
    for (int k = 0; k < na; ++k) {
        const int i = list[k];
        const int pick = static_cast<int>(draws.next_below(5));
        if (pick == 0) continue;
        const int d = pick - 1;
        const int nr = i / kGridSide + kDirDr[d], nc = i % kGridSide + kDirDc[d];
        if (static_cast<unsigned>(nr) >= kGridSide || static_cast<unsigned>(nc) >= kGridSide)
            continue;
        const int t = nr * kGridSide + nc;
        if (w.mobs[t] == M_ZOMBIE) {
            w.mobs[t] = M_NONE;
            ev.zombies_killed_by_angel += 1;
        } else if (w.mobs[t] == M_NONE && w.blocks[t] == B_EMPTY) {
            w.mobs[t] = M_ANGEL;
            w.mobs[i] = M_NONE;
        }
    }

    *w.step_in_trial += 1;
    return {reward_from_events(ev, table), ev};
}

inline RowRefs row_refs(BatchedWorldState& b, int r) {
    const std::size_t off = static_cast<std::size_t>(r) * kGridCells;
    return {b.blocks.data() + off,    b.mobs.data() + off,   b.tree_timers.data() + off,
            b.agent_row.data() + r,   b.agent_col.data() + r, b.carried.data() + r,
            b.step_in_trial.data() + r, b.stream_key[r],      b.step_counter.data() + r};
}

} // namespace batch_detail

inline void batch_step(BatchedWorldState& b, std::span<const Action> actions,
                       const RewardTable& table, std::span<float> rewards,
                       std::span<StepEvents> events) {
    if (static_cast<int>(actions.size()) != b.size)
        throw ShapeError("batch_step: " + std::to_string(actions.size()) + " actions for batch " +
                         std::to_string(b.size));
    if (static_cast<int>(rewards.size()) != b.size || static_cast<int>(events.size()) != b.size)
        throw ShapeError("batch_step: output spans must match batch size");
#pragma omp parallel for schedule(static)
    for (int r = 0; r < b.size; ++r) {
        auto res = batch_detail::step_row(batch_detail::row_refs(b, r),
                                          static_cast<std::uint8_t>(actions[r]), table);
        rewards[r] = res.reward;
        events[r] = res.events;
    }
}

// Observation rows for the whole batch; out must hold size*837 values.
template <typename T>
void batch_fill_agent_obs(const BatchedWorldState& b, std::span<const float> prev_reward,
                          std::span<const std::int32_t> prev_action, float timer_fraction,
                          bool is_real_trial, bool end_of_trial, T* out) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < b.size; ++r) {
        T* row = out + static_cast<std::size_t>(r) * kObsSize;
        std::fill_n(row, kObsSize, T(0));
        const std::uint8_t* mobs = b.mobs.data() + static_cast<std::size_t>(r) * kGridCells;
        const std::uint8_t* blocks = b.blocks.data() + static_cast<std::size_t>(r) * kGridCells;
        for (int i = 0; i < kGridCells; ++i) {
            if (mobs[i] != 0) row[kObsMobOffset + (mobs[i] - 1) * kGridCells + i] = T(1);
            if (blocks[i] != 0) row[kObsBlockOffset + (blocks[i] - 1) * kGridCells + i] = T(1);
        }
        row[kObsPrevReward] = static_cast<T>(prev_reward[r]);
        if (prev_action[r] >= 0 && prev_action[r] < kNumActions)
            row[kObsPrevAction + prev_action[r]] = T(1);
        row[kObsTimer] = static_cast<T>(timer_fraction);
        row[kObsRealTrial] = is_real_trial ? T(1) : T(0);
        if (b.carried[r] != 0) row[kObsCarried + b.carried[r] - 1] = T(1);
        row[kObsEndOfTrial] = end_of_trial ? T(1) : T(0);
    }
}

} // namespace thinkgrid
