#pragma once

#include <string>
#include <vector>

#include "thinkgrid/gridworld/task.hpp"

namespace thinkgrid {

// The withheld combination: a set of element kinds that may never all appear
// together in one training task. Any partial combination is allowed; the test
// task contains the full set, which is what makes it qualitatively novel.
struct WithheldCombination {
    std::vector<Entity> elements = {Entity::Zombie, Entity::Angel, Entity::Killer};

    bool empty() const { return elements.empty(); }
};

struct TaskValidation {
    bool ok = true;
    std::string violation;
};

inline TaskValidation validate_task(const TaskSpec& task, const WithheldCombination& withheld) {
    if (withheld.empty()) return {false, "withheld combination must be nonempty"};
    for (Entity e : withheld.elements) {
        if (!task.contains(e)) return {true, ""};
    }
    std::string names;
    for (Entity e : withheld.elements) {
        if (!names.empty()) names += "+";
        names += entity_glyph(e);
    }
    return {false, "task '" + task.id + "' contains the full withheld combination {" + names + "}"};
}

} // namespace thinkgrid
