#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ruleopt/rules.hpp"

namespace ruleopt {

/// Half-open time interval [start, end); end == kOpenEnd marks a still-open
/// entry. A transaction at exactly the opening timestamp is blacklisted;
/// at exactly the closing timestamp it is not.
struct Interval {
    static constexpr std::int64_t kOpenEnd = std::numeric_limits<std::int64_t>::max();
    std::int64_t start = 0;
    std::int64_t end = kOpenEnd;

    bool contains(std::int64_t t) const { return t >= start && t < end; }
    bool open() const { return end == kOpenEnd; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Key of one blacklist entry list: which updater blacklisted which value of
/// which field. Ordered field-first so all updaters holding a given
/// (field, value) can be range-scanned.
struct BlacklistKey {
    std::uint32_t field = 0;
    std::uint32_t value = 0;
    std::uint32_t updater_col = 0;
    auto operator<=>(const BlacklistKey&) const = default;
};

/// Time-interval store for blacklist entries. Per key, intervals are
/// non-overlapping, sorted by start, and only the last may be open.
class BlacklistStore {
public:
    /// Opens [start, kOpenEnd) for the key; no-op if the last interval is
    /// still open (the value is already blacklisted).
    void open(const BlacklistKey& key, std::int64_t start);
    /// Closes the most recent interval at `end`.
    void close_last(const BlacklistKey& key, std::int64_t end);
    bool contains(const BlacklistKey& key, std::int64_t t) const;
    const std::vector<Interval>* intervals(const BlacklistKey& key) const;

    /// Updater columns holding an interval over (field, value) that covers t.
    std::vector<std::uint32_t> updaters_covering(std::uint32_t field, std::uint32_t value,
                                                 std::int64_t t) const;

private:
    std::map<BlacklistKey, std::vector<Interval>> store_;
};

/// Precedence relation enabler -> checker on one transaction: the checker's
/// trigger was enabled by the enabler's blacklist entry. A self pair
/// (checker == enabler) marks an analyst-made entry with no responsible rule.
struct DependencyPair {
    std::uint32_t enabler = 0;
    std::uint32_t checker = 0;
    auto operator<=>(const DependencyPair&) const = default;
};

/// Per-transaction blacklist dependency relations, precomputed once under the
/// deployed configuration and shared read-only by concurrent evaluators.
class DependencyIndex {
public:
    std::span<const DependencyPair> pairs_for(std::uint32_t row) const;
    const std::map<std::uint32_t, std::vector<DependencyPair>>& by_row() const { return by_row_; }
    bool empty() const { return by_row_.empty(); }

    /// Rows where a checker fired without a recorded field value, reported
    /// and treated as no-match.
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }

private:
    friend DependencyIndex compute_blacklist_dependencies(const Dataset& data);
    std::map<std::uint32_t, std::vector<DependencyPair>> by_row_;
    std::vector<std::string> diagnostics_;
};

/// Single forward pass over the time-sorted transactions maintaining a
/// BlacklistStore under the deployed configuration (`data.initial_priorities`).
/// Deterministic and independent of candidate configurations.
DependencyIndex compute_blacklist_dependencies(const Dataset& data);

/// Switches off checker triggers whose recorded enablers are all inactive
/// under `priorities`. Entries without recorded pairs pass through; triggers
/// are only ever turned off, never on.
std::vector<int> handle_bd(std::span<const int> masked, std::span<const DependencyPair> pairs,
                           std::span<const int> priorities);

}  // namespace ruleopt
