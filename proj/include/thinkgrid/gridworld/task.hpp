#pragma once

#include <array>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinkgrid/gridworld/types.hpp"

namespace thinkgrid {

struct TaskError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One entity per cell at time zero; a task is nothing but this layout.
enum class Entity : std::uint8_t {
    Empty = 0,
    Stone,
    Pickable,
    Killer,
    Diggable,
    FruitTree,
    EmptyTree,
    AgentStart,
    Zombie,
    Cow,
    Angel,
};

inline char entity_glyph(Entity e) {
    switch (e) {
        case Entity::Empty: return '.';
        case Entity::Stone: return '#';
        case Entity::Pickable: return 'P';
        case Entity::Killer: return 'X';
        case Entity::Diggable: return 'D';
        case Entity::FruitTree: return 'T';
        case Entity::EmptyTree: return 't';
        case Entity::AgentStart: return '@';
        case Entity::Zombie: return 'Z';
        case Entity::Cow: return 'C';
        case Entity::Angel: return 'A';
    }
    return '?';
}

inline bool glyph_entity(char c, Entity& out) {
    switch (c) {
        case '.': out = Entity::Empty; return true;
        case '#': out = Entity::Stone; return true;
        case 'P': out = Entity::Pickable; return true;
        case 'X': out = Entity::Killer; return true;
        case 'D': out = Entity::Diggable; return true;
        case 'T': out = Entity::FruitTree; return true;
        case 't': out = Entity::EmptyTree; return true;
        case '@': out = Entity::AgentStart; return true;
        case 'Z': out = Entity::Zombie; return true;
        case 'C': out = Entity::Cow; return true;
        case 'A': out = Entity::Angel; return true;
    }
    return false;
}

enum class TaskOrigin : std::uint8_t { Handcrafted = 0, Generated = 1 };

struct TaskSpec {
    std::array<Entity, kGridCells> grid{};
    std::string id;
    TaskOrigin origin = TaskOrigin::Handcrafted;
    std::map<std::string, std::string> metadata;

    Entity at(int r, int c) const { return grid[static_cast<std::size_t>(r * kGridSide + c)]; }
    Entity& at(int r, int c) { return grid[static_cast<std::size_t>(r * kGridSide + c)]; }

    bool contains(Entity e) const {
        for (auto g : grid)
            if (g == e) return true;
        return false;
    }

    int count(Entity e) const {
        int n = 0;
        for (auto g : grid) n += (g == e);
        return n;
    }

    // Horizontal mirror (columns reversed). Used by the test task's random
    // left/right flip.
    TaskSpec mirrored() const {
        TaskSpec out = *this;
        for (int r = 0; r < kGridSide; ++r)
            for (int c = 0; c < kGridSide; ++c) out.at(r, c) = at(r, kGridSide - 1 - c);
        return out;
    }
};

// Text format: optional `key: value` header lines, then exactly 9 lines of 9
// glyphs. Blank lines before the grid are ignored.
inline TaskSpec parse_task(const std::string& text, const std::string& id = "") {
    TaskSpec task;
    task.id = id;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> grid_lines;
    bool in_grid = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!in_grid) {
            if (line.empty()) continue;
            const auto colon = line.find(':');
            Entity tmp;
            const bool looks_like_row = line.size() == kGridSide && glyph_entity(line[0], tmp);
            if (colon != std::string::npos && !looks_like_row) {
                std::string key = line.substr(0, colon);
                std::string value = line.substr(colon + 1);
                while (!value.empty() && value.front() == ' ') value.erase(value.begin());
                task.metadata[key] = value;
                if (key == "id" && task.id.empty()) task.id = value;
                if (key == "origin") task.origin = value == "generated" ? TaskOrigin::Generated
                                                                        : TaskOrigin::Handcrafted;
                continue;
            }
            in_grid = true;
        }
        if (in_grid) {
            if (line.empty()) break;
            grid_lines.push_back(line);
        }
    }
    if (grid_lines.size() != kGridSide)
        throw TaskError("task grid has " + std::to_string(grid_lines.size()) +
                        " rows, expected " + std::to_string(kGridSide));
    for (int r = 0; r < kGridSide; ++r) {
        if (grid_lines[r].size() != kGridSide)
            throw TaskError("task row " + std::to_string(r) + " has " +
                            std::to_string(grid_lines[r].size()) + " glyphs, expected " +
                            std::to_string(kGridSide));
        for (int c = 0; c < kGridSide; ++c) {
            Entity e;
            if (!glyph_entity(grid_lines[r][c], e))
                throw TaskError(std::string("unknown glyph '") + grid_lines[r][c] +
                                "' at cell (" + std::to_string(r) + "," + std::to_string(c) + ")");
            task.at(r, c) = e;
        }
    }
    return task;
}

inline std::string serialize_task(const TaskSpec& task) {
    std::ostringstream out;
    if (!task.id.empty()) out << "id: " << task.id << '\n';
    out << "origin: " << (task.origin == TaskOrigin::Generated ? "generated" : "handcrafted")
        << '\n';
    for (const auto& [k, v] : task.metadata)
        if (k != "id" && k != "origin") out << k << ": " << v << '\n';
    for (int r = 0; r < kGridSide; ++r) {
        for (int c = 0; c < kGridSide; ++c) out << entity_glyph(task.at(r, c));
        out << '\n';
    }
    return out.str();
}

} // namespace thinkgrid
