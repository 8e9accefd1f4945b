#pragma once

#include <array>
#include <vector>

#include "thinkgrid/gridworld/task.hpp"

namespace thinkgrid {

// The ten hand-defined starting tasks for the pretraining phase. Each board
// features one basic skill; none contains the full withheld combination.
inline std::vector<TaskSpec> handcrafted_starter_set() {
    struct Layout {
        const char* id;
        const char* rows[kGridSide];
    };
    static constexpr std::array<Layout, 10> layouts = {{
        {"starter-00-nav-fruit",
         {".........",
          "..T...T..",
          ".........",
          "....T....",
          "..T.@.T..",
          "....T....",
          ".........",
          "..T...T..",
          "........."}},
        {"starter-01-pick-drop",
         {".T.....T.",
          ".........",
          "...PPP...",
          "...P@P...",
          "...PPP...",
          ".........",
          "....T....",
          ".........",
          "........."}},
        {"starter-02-cow-hunt",
         {".........",
          "..C......",
          "....C....",
          "...X.....",
          "....@....",
          ".....C...",
          "..C......",
          ".........",
          "........."}},
        {"starter-03-zombie-hunt",
         {"Z........",
          ".........",
          "....Z....",
          "...X.....",
          "....@....",
          ".....X...",
          ".........",
          ".........",
          "........Z"}},
        {"starter-04-dig-through",
         {".TTT.TTT.",
          ".........",
          "####D####",
          ".........",
          ".T..X..T.",
          "....@....",
          ".........",
          ".........",
          "........."}},
        {"starter-05-evasion",
         {"Z.......Z",
          ".........",
          ".........",
          ".........",
          "....@....",
          ".........",
          ".........",
          ".........",
          "Z.......Z"}},
        {"starter-06-angel-watch",
         {"....Z....",
          ".........",
          "..A...A..",
          ".........",
          "....@....",
          ".........",
          "..A......",
          ".........",
          "....Z...."}},
        {"starter-07-orchard",
         {"T...T...T",
          ".........",
          "..T...T..",
          ".........",
          "T...@...T",
          ".........",
          "..T...T..",
          ".........",
          "T...T...T"}},
        {"starter-08-cow-stones",
         {"..#...#..",
          ".#.C.#...",
          "...#...#.",
          ".#...C...",
          "..#.@.#..",
          "...X.....",
          ".#...#.#.",
          "...C.....",
          "..#...#.."}},
        {"starter-09-mixed",
         {".T.#.P.t.",
          ".........",
          ".D...X...",
          "....Z....",
          ".#..@..#.",
          "....C....",
          ".P...D...",
          ".........",
          ".t.#.T.Z."}},
    }};

    std::vector<TaskSpec> out;
    out.reserve(layouts.size());
    for (const auto& layout : layouts) {
        std::string text;
        for (const auto* row : layout.rows) {
            text += row;
            text += '\n';
        }
        auto task = parse_task(text, layout.id);
        task.origin = TaskOrigin::Handcrafted;
        out.push_back(std::move(task));
    }
    return out;
}

} // namespace thinkgrid
