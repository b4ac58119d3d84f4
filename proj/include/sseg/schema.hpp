#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sseg {

// Ordered class lists per hierarchy level. Ids are dense from 0 and every
// level reserves 0 for background and 1 for the border ring that separates
// adjacent structures.
struct ClassSchema {
    struct Level {
        std::string name;
        std::vector<std::string> classes;
    };

    std::string id;
    std::vector<Level> levels;

    static constexpr int kBackground = 0;
    static constexpr int kBorder = 1;

    int level_count() const { return static_cast<int>(levels.size()); }

    int class_count(int level_index) const {
        return static_cast<int>(levels[static_cast<std::size_t>(level_index)].classes.size());
    }

    // One prior channel per class across all levels.
    int total_classes() const {
        int n = 0;
        for (const auto& l : levels) n += static_cast<int>(l.classes.size());
        return n;
    }

    int class_id(int level_index, const std::string& cls) const {
        const auto& classes = levels[static_cast<std::size_t>(level_index)].classes;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (classes[i] == cls) return static_cast<int>(i);
        }
        throw std::invalid_argument("schema '" + id + "' level " + std::to_string(level_index + 1) +
                                    " has no class '" + cls + "'");
    }

    const std::string& class_name(int level_index, int cls) const {
        return levels[static_cast<std::size_t>(level_index)].classes[static_cast<std::size_t>(cls)];
    }

    void validate() const {
        if (levels.empty()) throw std::invalid_argument("schema has no levels");
        for (const auto& l : levels) {
            if (l.classes.size() < 2 || l.classes[0] != "background" || l.classes[1] != "border") {
                throw std::invalid_argument("schema level '" + l.name +
                                            "' must start with background, border");
            }
        }
    }

    // Form document hierarchy: elements, blocks/titles, fields, groups.
    static ClassSchema document() {
        ClassSchema s;
        s.id = "default";
        s.levels = {
            {"elements", {"background", "border", "textrun", "widget"}},
            {"blocks", {"background", "border", "textblock", "choicegroup_title"}},
            {"fields", {"background", "border", "textfield", "choicefield"}},
            {"groups", {"background", "border", "choicegroup"}},
        };
        return s;
    }

    // Table/list detection plus row/column decomposition heads.
    static ClassSchema table_list() {
        ClassSchema s;
        s.id = "tl";
        s.levels = {
            {"detection", {"background", "border", "table", "list"}},
            {"rows", {"background", "border", "table_row"}},
            {"columns", {"background", "border", "table_column"}},
        };
        return s;
    }

    static ClassSchema by_id(const std::string& id) {
        if (id == "default") return document();
        if (id == "tl") return table_list();
        throw std::invalid_argument("unknown schema id '" + id + "'");
    }
};

}  // namespace sseg
