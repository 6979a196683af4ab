#include "ruleopt/blacklist.hpp"

#include <algorithm>
#include <cassert>

namespace ruleopt {

void BlacklistStore::open(const BlacklistKey& key, std::int64_t start) {
    auto& list = store_[key];
    if (!list.empty() && list.back().open()) return;  // already blacklisted
    assert(list.empty() || start >= list.back().end);
    list.push_back(Interval{start, Interval::kOpenEnd});
}

void BlacklistStore::close_last(const BlacklistKey& key, std::int64_t end) {
    auto it = store_.find(key);
    if (it == store_.end() || it->second.empty()) return;
    it->second.back().end = end;
}

bool BlacklistStore::contains(const BlacklistKey& key, std::int64_t t) const {
    auto it = store_.find(key);
    if (it == store_.end()) return false;
    for (const Interval& iv : it->second) {
        if (iv.contains(t)) return true;
        if (iv.start > t) break;
    }
    return false;
}

const std::vector<Interval>* BlacklistStore::intervals(const BlacklistKey& key) const {
    auto it = store_.find(key);
    return it == store_.end() ? nullptr : &it->second;
}

std::vector<std::uint32_t> BlacklistStore::updaters_covering(std::uint32_t field,
                                                             std::uint32_t value,
                                                             std::int64_t t) const {
    std::vector<std::uint32_t> out;
    auto it = store_.lower_bound(BlacklistKey{field, value, 0});
    for (; it != store_.end() && it->first.field == field && it->first.value == value; ++it) {
        for (const Interval& iv : it->second) {
            if (iv.contains(t)) {
                out.push_back(it->first.updater_col);
                break;
            }
        }
    }
    return out;
}

std::span<const DependencyPair> DependencyIndex::pairs_for(std::uint32_t row) const {
    auto it = by_row_.find(row);
    if (it == by_row_.end()) return {};
    return it->second;
}

DependencyIndex compute_blacklist_dependencies(const Dataset& data) {
    DependencyIndex index;
    const auto& updaters = data.updater_columns;
    const auto& checkers = data.checker_columns;
    if (updaters.empty() && checkers.empty()) return index;

    const TriggerMatrix& tm = data.triggers;
    const PriorityVector& deployed = data.initial_priorities;

    // Checker columns per field, in column order.
    std::vector<std::vector<std::uint32_t>> checkers_of_field(tm.field_names().size());
    for (std::uint32_t q : checkers) {
        for (const std::string& f : data.rules[q].checks_fields) {
            checkers_of_field[*tm.field_id(f)].push_back(q);
        }
    }
    // Updater field ids, resolved once.
    std::vector<std::vector<std::uint32_t>> updater_fields(data.rules.size());
    for (std::uint32_t j : updaters) {
        for (const std::string& f : data.rules[j].updates_fields) {
            updater_fields[j].push_back(*tm.field_id(f));
        }
    }
    const bool any_active_checker = std::any_of(checkers.begin(), checkers.end(),
                                                [&](std::uint32_t q) { return deployed.active(q); });

    BlacklistStore store;
    std::vector<DependencyPair> row_pairs;
    for (std::size_t row = 0; row < tm.rows(); ++row) {
        const std::int64_t t = tm.timestamp_ms(row);
        row_pairs.clear();

        auto pair_with_fired_checkers = [&](std::uint32_t updater, std::uint32_t field) {
            for (std::uint32_t q : checkers_of_field[field]) {
                if (tm.fired(row, q)) row_pairs.push_back(DependencyPair{updater, q});
            }
        };

        for (std::uint32_t j : updaters) {
            if (tm.fired(row, j)) {
                for (std::uint32_t f : updater_fields[j]) {
                    auto value = tm.value_of(row, f);
                    if (!value) continue;  // nothing to blacklist
                    store.open(BlacklistKey{f, *value, j}, t);
                    pair_with_fired_checkers(j, f);
                }
            } else {
                // A non-fired updater whose own blacklist covers this value is
                // treated as fired for dependency purposes: its earlier entry
                // is what enables checkers of that field here.
                for (std::uint32_t f : updater_fields[j]) {
                    auto value = tm.value_of(row, f);
                    if (!value) continue;
                    if (store.contains(BlacklistKey{f, *value, j}, t)) {
                        pair_with_fired_checkers(j, f);
                    }
                }
            }
        }

        // Closing step: a value inside an active blacklist while no checker
        // is active under the deployed configuration closes the most recent
        // interval of each responsible key.
        if (!any_active_checker) {
            for (const FieldValue& fv : tm.fields_of(row)) {
                for (std::uint32_t j : store.updaters_covering(fv.field, fv.value, t)) {
                    store.close_last(BlacklistKey{fv.field, fv.value, j}, t);
                }
            }
        }

        // Fired checkers with no responsible updater were enabled by an
        // analyst-made entry; a self pair keeps them on while they are active.
        for (std::uint32_t q : checkers) {
            if (!tm.fired(row, q)) continue;
            bool has_enabler = std::any_of(
                row_pairs.begin(), row_pairs.end(),
                [&](const DependencyPair& p) { return p.checker == q; });
            if (!has_enabler) {
                row_pairs.push_back(DependencyPair{q, q});
                bool any_value = std::any_of(
                    data.rules[q].checks_fields.begin(), data.rules[q].checks_fields.end(),
                    [&](const std::string& f) { return tm.value_of(row, *tm.field_id(f)).has_value(); });
                if (!any_value) {
                    index.diagnostics_.push_back("row " + std::to_string(row) + ": checker '" +
                                                 data.rules[q].id +
                                                 "' fired without a field value (no-match)");
                }
            }
        }

        if (!row_pairs.empty()) {
            std::sort(row_pairs.begin(), row_pairs.end());
            row_pairs.erase(std::unique(row_pairs.begin(), row_pairs.end()), row_pairs.end());
            index.by_row_[static_cast<std::uint32_t>(row)] = row_pairs;
        }
    }
    return index;
}

std::vector<int> handle_bd(std::span<const int> masked, std::span<const DependencyPair> pairs,
                           std::span<const int> priorities) {
    std::vector<int> out(masked.begin(), masked.end());
    if (pairs.empty()) return out;
    // Per checker with recorded pairs: keep the trigger iff any enabler is
    // active. Checkers without pairs pass through.
    std::vector<std::pair<std::uint32_t, bool>> survival;
    for (const DependencyPair& p : pairs) {
        auto it = std::find_if(survival.begin(), survival.end(),
                               [&](const auto& e) { return e.first == p.checker; });
        if (it == survival.end()) {
            survival.emplace_back(p.checker, false);
            it = std::prev(survival.end());
        }
        if (p.enabler < priorities.size() && priorities[p.enabler] > kInactive) it->second = true;
    }
    for (const auto& [checker, keep] : survival) {
        if (!keep && checker < out.size() && out[checker] > kInactive) out[checker] = kInactive;
    }
    return out;
}

}  // namespace ruleopt
