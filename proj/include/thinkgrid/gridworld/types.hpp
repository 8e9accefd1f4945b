#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace thinkgrid {

inline constexpr int kGridSide = 9;
inline constexpr int kGridCells = kGridSide * kGridSide;

inline constexpr int kNumActions = 9;
inline constexpr int kStepsPerTrial = 30;
inline constexpr int kTrialsPerEpisode = 4;
inline constexpr int kEpisodeSteps = kStepsPerTrial * kTrialsPerEpisode;

inline constexpr int kFruitRegrowthPeriod = 10;
inline constexpr double kZombieNoise = 0.2;

enum class BlockKind : std::uint8_t {
    Empty = 0,
    Stone,
    Pickable,
    Killer,
    Diggable,
    FruitTree,
    EmptyTree,
};
inline constexpr int kNumBlockKinds = 7;

enum class MobKind : std::uint8_t {
    NoMob = 0,
    Agent,
    Zombie,
    Cow,
    Angel,
};
inline constexpr int kNumMobKinds = 5;

enum class Action : std::uint8_t {
    NoOp = 0,
    MoveN,
    MoveS,
    MoveE,
    MoveW,
    DropN,
    DropS,
    DropE,
    DropW,
};

// Row/col deltas for direction index 0..3 = N,S,E,W.
inline constexpr std::array<int, 4> kDirDr = {-1, 1, 0, 0};
inline constexpr std::array<int, 4> kDirDc = {0, 0, 1, -1};

struct RewardTable {
    float fruit_touch = 1.0f;
    float cow_kill = 1.0f;
    float zombie_death = 2.0f;       // zombie killed by the agent's block
    float angel_zombie_kill = 2.0f;  // zombie killed by an angel (the AKZ reward)
    float zombie_touch_penalty = -1.0f;
};

struct StepEvents {
    std::uint8_t fruit_eaten = 0;
    std::uint8_t cows_killed = 0;
    std::uint8_t zombies_killed_by_agent = 0;
    std::uint8_t zombies_killed_by_angel = 0;
    std::uint8_t angels_killed = 0;
    std::uint8_t zombie_touches = 0;
    std::uint8_t blocks_dug = 0;
    std::uint8_t blocks_picked = 0;
    std::uint8_t blocks_dropped = 0;

    bool operator==(const StepEvents&) const = default;
};

inline float reward_from_events(const StepEvents& e, const RewardTable& t) {
    return t.fruit_touch * e.fruit_eaten + t.cow_kill * e.cows_killed +
           t.zombie_death * e.zombies_killed_by_agent +
           t.angel_zombie_kill * e.zombies_killed_by_angel +
           t.zombie_touch_penalty * e.zombie_touches;
}

// ---------------------------------------------------------------------------
// Observation layout. Fixed and shared between the agent input (837) and the
// world-model observation (820); see obs.hpp for the builders.
// ---------------------------------------------------------------------------
inline constexpr int kObsMobPlanes = 4;   // Agent, Zombie, Cow, Angel
inline constexpr int kObsBlockPlanes = 6; // Stone, Pickable, Killer, Diggable, FruitTree, EmptyTree
inline constexpr int kObsMobOffset = 0;
inline constexpr int kObsBlockOffset = kObsMobPlanes * kGridCells;               // 324
inline constexpr int kObsPrevReward = kObsBlockOffset + kObsBlockPlanes * kGridCells; // 810
inline constexpr int kObsPrevAction = kObsPrevReward + 1;                        // 811
inline constexpr int kObsTimer = kObsPrevAction + kNumActions;                   // 820
inline constexpr int kObsRealTrial = kObsTimer + 1;                              // 821
inline constexpr int kObsCarried = kObsRealTrial + 1;                            // 822
inline constexpr int kObsEndOfTrial = kObsCarried + kObsBlockPlanes;             // 828
inline constexpr int kObsPadding = kObsEndOfTrial + 1;                           // 829
inline constexpr int kObsSize = kObsPadding + 8;                                 // 837

// World-model observation: binary planes plus carried one-hot plus 4 pads.
inline constexpr int kWmCarriedOffset = kObsPrevReward;                          // 810
inline constexpr int kWmObsSize = kWmCarriedOffset + kObsBlockPlanes + 4;        // 820

static_assert(kObsSize == 837);
static_assert(kWmObsSize == 820);

} // namespace thinkgrid
