#pragma once

#include <algorithm>

#include "thinkgrid/gridworld/types.hpp"
#include "thinkgrid/gridworld/world.hpp"

namespace thinkgrid {

// Agent observation, 837 values. Layout (see types.hpp for offsets):
//   [0,324)    mob planes, kind order Agent,Zombie,Cow,Angel, row-major cells
//   [324,810)  block planes, order Stone,Pickable,Killer,Diggable,FruitTree,EmptyTree
//   810        previous reward (real-valued)
//   [811,820)  previous action one-hot
//   820        timer: fraction of total episode time spent
//   821        real-trial flag
//   [822,828)  carried-block one-hot (same order as block planes)
//   828        end-of-trial flag
//   [829,837)  zero padding
template <typename T>
void fill_agent_obs(const WorldState& s, float prev_reward, int prev_action,
                    float timer_fraction, bool is_real_trial, bool end_of_trial, T* out) {
    std::fill_n(out, kObsSize, T(0));
    for (int i = 0; i < kGridCells; ++i) {
        const int mob = static_cast<int>(s.mobs[i]);
        if (mob != 0) out[kObsMobOffset + (mob - 1) * kGridCells + i] = T(1);
        const int block = static_cast<int>(s.blocks[i]);
        if (block != 0) out[kObsBlockOffset + (block - 1) * kGridCells + i] = T(1);
    }
    out[kObsPrevReward] = static_cast<T>(prev_reward);
    if (prev_action >= 0 && prev_action < kNumActions) out[kObsPrevAction + prev_action] = T(1);
    out[kObsTimer] = static_cast<T>(timer_fraction);
    out[kObsRealTrial] = is_real_trial ? T(1) : T(0);
    if (s.carried != BlockKind::Empty)
        out[kObsCarried + static_cast<int>(s.carried) - 1] = T(1);
    out[kObsEndOfTrial] = end_of_trial ? T(1) : T(0);
}

// World-model observation, 820 values: the binary planes, the carried one-hot,
// and 4 zero pads. No reward, action, timer or trial channels.
template <typename T>
void fill_wm_obs(const WorldState& s, T* out) {
    std::fill_n(out, kWmObsSize, T(0));
    for (int i = 0; i < kGridCells; ++i) {
        const int mob = static_cast<int>(s.mobs[i]);
        if (mob != 0) out[kObsMobOffset + (mob - 1) * kGridCells + i] = T(1);
        const int block = static_cast<int>(s.blocks[i]);
        if (block != 0) out[kObsBlockOffset + (block - 1) * kGridCells + i] = T(1);
    }
    if (s.carried != BlockKind::Empty)
        out[kWmCarriedOffset + static_cast<int>(s.carried) - 1] = T(1);
}

// The 820-value world-model view of an 837-value agent observation.
template <typename T>
void wm_obs_from_agent_obs(const T* agent_obs, T* out) {
    std::copy_n(agent_obs, kObsPrevReward, out);
    std::copy_n(agent_obs + kObsCarried, kObsBlockPlanes, out + kWmCarriedOffset);
    std::fill_n(out + kWmCarriedOffset + kObsBlockPlanes, 4, T(0));
}

// Wraps a (possibly imagined) 820-value observation back into the 837-value
// agent input, attaching the scalar episode channels.
template <typename T>
void agent_obs_from_wm_obs(const T* wm_obs, float prev_reward, int prev_action,
                           float timer_fraction, bool is_real_trial, bool end_of_trial, T* out) {
    std::fill_n(out, kObsSize, T(0));
    std::copy_n(wm_obs, kObsPrevReward, out);
    std::copy_n(wm_obs + kWmCarriedOffset, kObsBlockPlanes, out + kObsCarried);
    out[kObsPrevReward] = static_cast<T>(prev_reward);
    if (prev_action >= 0 && prev_action < kNumActions) out[kObsPrevAction + prev_action] = T(1);
    out[kObsTimer] = static_cast<T>(timer_fraction);
    out[kObsRealTrial] = is_real_trial ? T(1) : T(0);
    out[kObsEndOfTrial] = end_of_trial ? T(1) : T(0);
}

} // namespace thinkgrid
