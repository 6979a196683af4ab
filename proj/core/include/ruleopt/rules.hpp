#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ruleopt {

enum class Action : std::uint8_t { accept = 0, alert = 1, decline = 2 };
inline constexpr std::size_t kActionCount = 3;

std::string_view to_string(Action action);
std::optional<Action> action_from_string(std::string_view name);

/// Priority value marking a rule as inactive. Active rules have priority >= 0.
inline constexpr int kInactive = -1;

/// One decision rule. Triggers arrive precomputed; a rule here is only the
/// metadata needed to resolve decisions and blacklist side effects.
struct Rule {
    std::string id;
    Action action = Action::accept;
    int original_priority = 0;
    bool mandatory = false;  // cannot be deactivated
    bool frozen = false;     // excluded from optimization, keeps original priority
    std::vector<std::string> updates_fields;  // non-empty => blacklist updater
    std::vector<std::string> checks_fields;   // non-empty => blacklist checker

    bool is_updater() const { return !updates_fields.empty(); }
    bool is_checker() const { return !checks_fields.empty(); }
};

/// Total map from priority level to action, plus the per-action ordered set
/// of priority levels (the shuffle alphabet).
class ActionMap {
public:
    ActionMap() = default;
    explicit ActionMap(std::map<int, Action> entries);

    std::optional<Action> action_for(int priority) const;
    /// Ascending priorities carrying the given action.
    const std::vector<int>& alphabet(Action action) const;
    const std::map<int, Action>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

private:
    std::map<int, Action> entries_;
    std::array<std::vector<int>, kActionCount> alphabets_;
};

/// Candidate configuration: one priority per pool column, -1 meaning inactive.
struct PriorityVector {
    std::vector<int> values;

    PriorityVector() = default;
    explicit PriorityVector(std::vector<int> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    int operator[](std::size_t i) const { return values[i]; }
    int& operator[](std::size_t i) { return values[i]; }
    bool active(std::size_t i) const { return values[i] > kInactive; }
    std::size_t active_count() const;
    std::span<const int> span() const { return values; }

    friend bool operator==(const PriorityVector&, const PriorityVector&) = default;
};

/// Interned (field, value) pair attached to a transaction row.
struct FieldValue {
    std::uint32_t field = 0;
    std::uint32_t value = 0;
    friend bool operator==(const FieldValue&, const FieldValue&) = default;
};

class TriggerMatrixBuilder;

/// Immutable n x k boolean firing matrix stored as per-column bitmaps,
/// with row-aligned timestamps, labels, and sparse blacklist field values.
class TriggerMatrix {
public:
    TriggerMatrix() = default;

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t words_per_col() const { return words_per_col_; }

    bool fired(std::size_t row, std::size_t col) const {
        return (bits_[col * words_per_col_ + row / 64] >> (row % 64)) & 1u;
    }
    std::span<const std::uint64_t> column(std::size_t col) const {
        return {bits_.data() + col * words_per_col_, words_per_col_};
    }
    std::span<const std::uint64_t> label_words() const { return label_words_; }

    std::int64_t timestamp_ms(std::size_t row) const { return timestamps_ms_[row]; }
    const std::vector<std::int64_t>& timestamps_ms() const { return timestamps_ms_; }
    int label(std::size_t row) const { return labels_[row]; }
    const std::vector<std::uint8_t>& labels() const { return labels_; }
    std::size_t fraud_count() const { return fraud_count_; }

    bool has_field_data() const { return !field_names_.empty(); }
    const std::vector<std::string>& field_names() const { return field_names_; }
    const std::vector<std::string>& field_values() const { return field_values_; }
    std::optional<std::uint32_t> field_id(std::string_view name) const;
    std::span<const FieldValue> fields_of(std::size_t row) const;
    /// Value carried by the row for the given field, if any.
    std::optional<std::uint32_t> value_of(std::size_t row, std::uint32_t field) const;

    /// New matrix with extra columns appended, each mirroring the firing
    /// bits of an existing source column. Rows, labels, timestamps, and
    /// field data are shared unchanged.
    TriggerMatrix with_cloned_columns(std::span<const std::uint32_t> sources) const;

    friend bool operator==(const TriggerMatrix&, const TriggerMatrix&) = default;

private:
    friend class TriggerMatrixBuilder;

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t words_per_col_ = 0;
    std::vector<std::uint64_t> bits_;           // column-major bitmaps
    std::vector<std::uint64_t> label_words_;    // fraud rows as a bitmap
    std::vector<std::int64_t> timestamps_ms_;
    std::vector<std::uint8_t> labels_;
    std::size_t fraud_count_ = 0;

    std::vector<std::string> field_names_;
    std::vector<std::string> field_values_;
    std::vector<std::uint32_t> row_field_offsets_;  // rows + 1 entries when field data present
    std::vector<FieldValue> row_fields_;
};

class TriggerMatrixBuilder {
public:
    TriggerMatrixBuilder(std::size_t rows, std::size_t cols);

    void set_fired(std::size_t row, std::size_t col);
    void set_timestamp(std::size_t row, std::int64_t ts_ms);
    void set_label(std::size_t row, int label);
    void add_field(std::size_t row, std::string_view field, std::string_view value);

    // Bulk loaders (binary cache path).
    void set_timestamps(std::vector<std::int64_t> ts_ms);
    void set_labels(std::vector<std::uint8_t> labels);
    void load_column_words(std::size_t col, std::span<const std::uint64_t> words);

    TriggerMatrix build();

private:
    TriggerMatrix m_;
    struct PendingField {
        std::uint32_t row;
        std::uint32_t order;
        std::uint32_t field;
        std::uint32_t value;
    };
    std::vector<PendingField> pending_fields_;
    std::map<std::string, std::uint32_t, std::less<>> field_ids_;
    std::map<std::string, std::uint32_t, std::less<>> value_ids_;
};

/// Decision-by-label counts plus the derived metrics and loss for one
/// candidate configuration.
struct EvaluationReport {
    // counts[action][label], label 0 = legit, 1 = fraud
    std::array<std::array<std::int64_t, 2>, kActionCount> counts{};
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double recall = 0.0;
    double fpr = 0.0;
    double alert_rate = 0.0;
    double rules_active_fraction = 0.0;
    bool recall_defined = true;  // false when no fraud labels in the window
    bool fpr_defined = true;     // false when no legit labels in the window
    double loss = 0.0;

    std::int64_t total() const;
    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Validated bundle of rules, action map, and triggers. Immutable once
/// constructed; safe to share across concurrent evaluators.
///
/// `parent` maps each pool column to the original rule it derives from
/// (identity for non-augmented pools). `initial_priorities` is the search
/// starting point: original priorities for original columns, inactive for
/// clone columns added by pool augmentation.
struct Dataset {
    std::vector<Rule> rules;
    ActionMap actions;
    TriggerMatrix triggers;
    std::vector<std::uint32_t> parent;
    std::size_t parent_count = 0;
    PriorityVector initial_priorities;
    std::vector<std::uint32_t> updater_columns;
    std::vector<std::uint32_t> checker_columns;

    /// Every invariant violation found, or empty when the bundle is sound.
    static std::vector<std::string> check(const std::vector<Rule>& rules,
                                          const ActionMap& actions,
                                          const TriggerMatrix& triggers);
    /// Validating constructor; throws ValidationError listing all violations.
    static Dataset validate(std::vector<Rule> rules, ActionMap actions, TriggerMatrix triggers);

    bool augmented() const { return rules.size() != parent_count; }
    /// First problem with a candidate vector for this pool, if any.
    std::optional<std::string> check_candidate(const PriorityVector& p) const;
    std::size_t column_of(std::string_view rule_id) const;  // npos when unknown
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Original rule ids with no active column under `p` (clone columns count
/// toward their parent).
std::vector<std::string> deactivated_rules(const Dataset& data, const PriorityVector& p);

/// Priority-valued trigger row: p[j] where rule j fired and is active,
/// -1 everywhere else.
std::vector<int> mask(std::span<const std::uint8_t> fired, std::span<const int> priorities);

}  // namespace ruleopt
