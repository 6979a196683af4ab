#include <algorithm>

#include "doctest.h"
#include "ruleopt/rng.hpp"
#include "ruleopt/rules.hpp"
#include "support/fixtures.hpp"

using namespace ruleopt;
using testfix::make_dataset;
using testfix::RowSpec;
using testfix::RuleSpec;

namespace {

std::vector<std::string> check_of(const std::vector<RuleSpec>& specs,
                                  const std::map<int, Action>& actions,
                                  const std::vector<RowSpec>& rows) {
    try {
        make_dataset(specs, actions, rows);
        return {};
    } catch (const ValidationError& e) {
        return e.violations();
    }
}

bool mentions(const std::vector<std::string>& violations, std::string_view needle) {
    return std::any_of(violations.begin(), violations.end(), [&](const std::string& v) {
        return v.find(needle) != std::string::npos;
    });
}

}  // namespace

TEST_CASE("action map alphabets and lookups") {
    ActionMap amap({{0, Action::accept}, {1, Action::accept}, {5, Action::accept},
                    {2, Action::alert}, {4, Action::alert}, {3, Action::decline}});
    CHECK(amap.action_for(4) == Action::alert);
    CHECK(!amap.action_for(7).has_value());
    CHECK(amap.alphabet(Action::accept) == std::vector<int>{0, 1, 5});
    CHECK(amap.alphabet(Action::decline) == std::vector<int>{3});
}

TEST_CASE("validation flags an unmapped priority") {
    auto violations = check_of({{"r1", Action::accept, 5}}, testfix::basic_actions(),
                               {{1000, 0, {0}}});
    CHECK(mentions(violations, "unmapped priority 5"));
}

TEST_CASE("well-formed two-rule bundle validates") {
    auto violations = check_of({{"r1", Action::accept, 1}, {"r2", Action::decline, 3}},
                               testfix::basic_actions(),
                               {{1000, 0, {0}}, {2000, 1, {1}}, {3000, 0, {}}});
    CHECK(violations.empty());
}

TEST_CASE("validation flags unsorted timestamps") {
    auto violations = check_of({{"r1", Action::accept, 1}}, testfix::basic_actions(),
                               {{3, 0, {}}, {1, 0, {}}, {2, 0, {}}});
    CHECK(mentions(violations, "unsorted"));
}

TEST_CASE("validation flags an action/priority mismatch and duplicate ids") {
    auto violations = check_of({{"r1", Action::accept, 3}, {"r1", Action::decline, 3}},
                               testfix::basic_actions(), {{1, 0, {}}, {2, 0, {}}});
    CHECK(mentions(violations, "action/priority mismatch"));
    CHECK(mentions(violations, "duplicate rule id"));
}

TEST_CASE("validation flags column count mismatch") {
    std::vector<Rule> rules(2);
    rules[0].id = "a";
    rules[0].action = Action::accept;
    rules[0].original_priority = 1;
    rules[1].id = "b";
    rules[1].action = Action::accept;
    rules[1].original_priority = 1;
    TriggerMatrixBuilder builder(1, 1);  // one column for two rules
    auto violations = Dataset::check(rules, ActionMap(testfix::basic_actions()), builder.build());
    CHECK(mentions(violations, "column count mismatch"));
}

TEST_CASE("candidate checks catch mandatory and frozen violations") {
    Dataset d = make_dataset({{"m", Action::decline, 3, true, false},
                              {"f", Action::alert, 2, false, true},
                              {"r", Action::accept, 1}},
                             testfix::basic_actions(), {{1, 0, {}}});
    CHECK(!d.check_candidate(d.initial_priorities).has_value());
    PriorityVector off_mandatory = d.initial_priorities;
    off_mandatory[0] = kInactive;
    CHECK(d.check_candidate(off_mandatory).value().find("mandatory-and-inactive") !=
          std::string::npos);
    PriorityVector moved_frozen = d.initial_priorities;
    moved_frozen[1] = 3;
    CHECK(d.check_candidate(moved_frozen).has_value());
    PriorityVector wrong_action = d.initial_priorities;
    wrong_action[2] = 3;  // decline priority on an accept rule
    CHECK(d.check_candidate(wrong_action).value().find("mismatch") != std::string::npos);
}

TEST_CASE("mask follows the firing/priority definition") {
    CHECK(mask(std::vector<std::uint8_t>{1, 0, 1}, std::vector<int>{3, 2, -1}) ==
          std::vector<int>{3, -1, -1});
    CHECK(mask(std::vector<std::uint8_t>{0, 0, 0}, std::vector<int>{9, 9, 9}) ==
          std::vector<int>{-1, -1, -1});
    CHECK(mask(std::vector<std::uint8_t>{1, 1}, std::vector<int>{-1, 7}) ==
          std::vector<int>{-1, 7});
}

TEST_CASE("re-masking a masked row is a fixpoint") {
    Rng rng(11, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng.next_below(12);
        std::vector<std::uint8_t> fired(k);
        std::vector<int> p(k);
        for (std::size_t j = 0; j < k; ++j) {
            fired[j] = static_cast<std::uint8_t>(rng.next_below(2));
            p[j] = static_cast<int>(rng.next_below(6)) - 1;
        }
        const std::vector<int> once = mask(fired, p);
        std::vector<std::uint8_t> refired(k);
        for (std::size_t j = 0; j < k; ++j) refired[j] = once[j] > kInactive;
        CHECK(mask(refired, p) == once);
        // An all-inactive vector masks every row to -1.
        const std::vector<int> all_off(k, kInactive);
        const auto dead = mask(fired, all_off);
        CHECK(*std::max_element(dead.begin(), dead.end()) == kInactive);
    }
}

TEST_CASE("trigger matrix stores firings, fields, and cloned columns") {
    TriggerMatrixBuilder builder(70, 2);
    builder.set_fired(0, 0);
    builder.set_fired(65, 1);
    builder.set_timestamp(0, 10);
    builder.set_label(65, 1);
    builder.add_field(65, "email", "a@b");
    builder.add_field(0, "email", "c@d");
    builder.add_field(0, "card", "1111");
    TriggerMatrix tm = builder.build();

    CHECK(tm.fired(0, 0));
    CHECK(!tm.fired(1, 0));
    CHECK(tm.fired(65, 1));
    CHECK(tm.fraud_count() == 1);
    CHECK(tm.fields_of(0).size() == 2);
    CHECK(tm.value_of(65, *tm.field_id("email")).has_value());
    CHECK(!tm.value_of(65, *tm.field_id("card")).has_value());
    CHECK(tm.field_values()[*tm.value_of(0, *tm.field_id("card"))] == "1111");

    const std::vector<std::uint32_t> sources{1, 0};
    TriggerMatrix wider = tm.with_cloned_columns(sources);
    CHECK(wider.cols() == 4);
    CHECK(std::equal(wider.column(2).begin(), wider.column(2).end(), tm.column(1).begin()));
    CHECK(std::equal(wider.column(3).begin(), wider.column(3).end(), tm.column(0).begin()));
}

TEST_CASE("deactivated_rules works at the parent level") {
    Dataset d = make_dataset({{"a", Action::accept, 1}, {"b", Action::decline, 3}},
                             testfix::basic_actions(), {{1, 0, {}}});
    PriorityVector p = d.initial_priorities;
    p[0] = kInactive;
    CHECK(deactivated_rules(d, p) == std::vector<std::string>{"a"});
}
