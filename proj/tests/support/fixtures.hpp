#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ruleopt/rules.hpp"

namespace testfix {

using namespace ruleopt;

struct RuleSpec {
    std::string id;
    Action action = Action::accept;
    int priority = 0;
    bool mandatory = false;
    bool frozen = false;
    std::vector<std::string> updates = {};
    std::vector<std::string> checks = {};
};

struct RowSpec {
    std::int64_t ts = 0;
    int label = 0;
    std::vector<std::size_t> fired = {};  // column indices
    std::vector<std::pair<std::string, std::string>> fields = {};
};

inline Dataset make_dataset(const std::vector<RuleSpec>& rule_specs,
                            const std::map<int, Action>& actions,
                            const std::vector<RowSpec>& rows) {
    std::vector<Rule> rules;
    for (const RuleSpec& rs : rule_specs) {
        Rule r;
        r.id = rs.id;
        r.action = rs.action;
        r.original_priority = rs.priority;
        r.mandatory = rs.mandatory;
        r.frozen = rs.frozen;
        r.updates_fields = rs.updates;
        r.checks_fields = rs.checks;
        rules.push_back(std::move(r));
    }
    TriggerMatrixBuilder builder(rows.size(), rules.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        builder.set_timestamp(i, rows[i].ts);
        builder.set_label(i, rows[i].label);
        for (std::size_t col : rows[i].fired) builder.set_fired(i, col);
        for (const auto& [field, value] : rows[i].fields) builder.add_field(i, field, value);
    }
    return Dataset::validate(std::move(rules), ActionMap(actions), builder.build());
}

/// Three-action map over priorities 1..3 for quick fixtures.
inline std::map<int, Action> basic_actions() {
    return {{1, Action::accept}, {2, Action::alert}, {3, Action::decline}};
}

}  // namespace testfix
