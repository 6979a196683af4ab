#include "ruleopt/rules.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ruleopt {

std::string_view to_string(Action action) {
    switch (action) {
        case Action::accept: return "accept";
        case Action::alert: return "alert";
        case Action::decline: return "decline";
    }
    return "?";
}

std::optional<Action> action_from_string(std::string_view name) {
    if (name == "accept") return Action::accept;
    if (name == "alert") return Action::alert;
    if (name == "decline") return Action::decline;
    return std::nullopt;
}

ActionMap::ActionMap(std::map<int, Action> entries) : entries_(std::move(entries)) {
    for (const auto& [priority, action] : entries_) {
        alphabets_[static_cast<std::size_t>(action)].push_back(priority);
    }
}

std::optional<Action> ActionMap::action_for(int priority) const {
    auto it = entries_.find(priority);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

const std::vector<int>& ActionMap::alphabet(Action action) const {
    return alphabets_[static_cast<std::size_t>(action)];
}

std::size_t PriorityVector::active_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](int p) { return p > kInactive; }));
}

std::optional<std::uint32_t> TriggerMatrix::field_id(std::string_view name) const {
    for (std::uint32_t i = 0; i < field_names_.size(); ++i) {
        if (field_names_[i] == name) return i;
    }
    return std::nullopt;
}

std::span<const FieldValue> TriggerMatrix::fields_of(std::size_t row) const {
    if (row_field_offsets_.empty()) return {};
    return {row_fields_.data() + row_field_offsets_[row],
            row_fields_.data() + row_field_offsets_[row + 1]};
}

std::optional<std::uint32_t> TriggerMatrix::value_of(std::size_t row, std::uint32_t field) const {
    for (const FieldValue& fv : fields_of(row)) {
        if (fv.field == field) return fv.value;
    }
    return std::nullopt;
}

TriggerMatrix TriggerMatrix::with_cloned_columns(std::span<const std::uint32_t> sources) const {
    TriggerMatrix out = *this;
    out.cols_ = cols_ + sources.size();
    out.bits_.resize(out.cols_ * words_per_col_);
    for (std::size_t j = 0; j < sources.size(); ++j) {
        std::copy_n(bits_.data() + sources[j] * words_per_col_, words_per_col_,
                    out.bits_.data() + (cols_ + j) * words_per_col_);
    }
    return out;
}

TriggerMatrixBuilder::TriggerMatrixBuilder(std::size_t rows, std::size_t cols) {
    m_.rows_ = rows;
    m_.cols_ = cols;
    m_.words_per_col_ = (rows + 63) / 64;
    m_.bits_.assign(m_.words_per_col_ * cols, 0);
    m_.timestamps_ms_.assign(rows, 0);
    m_.labels_.assign(rows, 0);
}

void TriggerMatrixBuilder::set_fired(std::size_t row, std::size_t col) {
    assert(row < m_.rows_ && col < m_.cols_);
    m_.bits_[col * m_.words_per_col_ + row / 64] |= std::uint64_t{1} << (row % 64);
}

void TriggerMatrixBuilder::set_timestamp(std::size_t row, std::int64_t ts_ms) {
    m_.timestamps_ms_[row] = ts_ms;
}

void TriggerMatrixBuilder::set_label(std::size_t row, int label) {
    assert(label == 0 || label == 1);
    m_.labels_[row] = static_cast<std::uint8_t>(label);
}

void TriggerMatrixBuilder::add_field(std::size_t row, std::string_view field,
                                     std::string_view value) {
    auto intern = [](auto& ids, auto& pool, std::string_view s) -> std::uint32_t {
        auto it = ids.find(s);
        if (it != ids.end()) return it->second;
        auto id = static_cast<std::uint32_t>(pool.size());
        pool.emplace_back(s);
        ids.emplace(std::string(s), id);
        return id;
    };
    PendingField pf;
    pf.row = static_cast<std::uint32_t>(row);
    pf.order = static_cast<std::uint32_t>(pending_fields_.size());
    pf.field = intern(field_ids_, m_.field_names_, field);
    pf.value = intern(value_ids_, m_.field_values_, value);
    pending_fields_.push_back(pf);
}

void TriggerMatrixBuilder::set_timestamps(std::vector<std::int64_t> ts_ms) {
    assert(ts_ms.size() == m_.rows_);
    m_.timestamps_ms_ = std::move(ts_ms);
}

void TriggerMatrixBuilder::set_labels(std::vector<std::uint8_t> labels) {
    assert(labels.size() == m_.rows_);
    m_.labels_ = std::move(labels);
}

void TriggerMatrixBuilder::load_column_words(std::size_t col, std::span<const std::uint64_t> words) {
    assert(col < m_.cols_ && words.size() == m_.words_per_col_);
    std::copy(words.begin(), words.end(), m_.bits_.data() + col * m_.words_per_col_);
}

TriggerMatrix TriggerMatrixBuilder::build() {
    m_.fraud_count_ = static_cast<std::size_t>(
        std::count(m_.labels_.begin(), m_.labels_.end(), std::uint8_t{1}));
    m_.label_words_.assign(m_.words_per_col_, 0);
    for (std::size_t row = 0; row < m_.rows_; ++row) {
        if (m_.labels_[row]) m_.label_words_[row / 64] |= std::uint64_t{1} << (row % 64);
    }
    if (!pending_fields_.empty()) {
        std::sort(pending_fields_.begin(), pending_fields_.end(),
                  [](const PendingField& a, const PendingField& b) {
                      return a.row != b.row ? a.row < b.row : a.order < b.order;
                  });
        m_.row_field_offsets_.assign(m_.rows_ + 1, 0);
        for (const PendingField& pf : pending_fields_) m_.row_field_offsets_[pf.row + 1]++;
        for (std::size_t i = 1; i <= m_.rows_; ++i) {
            m_.row_field_offsets_[i] += m_.row_field_offsets_[i - 1];
        }
        m_.row_fields_.reserve(pending_fields_.size());
        for (const PendingField& pf : pending_fields_) {
            m_.row_fields_.push_back(FieldValue{pf.field, pf.value});
        }
    }
    return std::move(m_);
}

std::int64_t EvaluationReport::total() const {
    std::int64_t sum = 0;
    for (const auto& row : counts) sum += row[0] + row[1];
    return sum;
}

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
    std::ostringstream os;
    os << violations.size() << " validation error(s)";
    for (const std::string& v : violations) os << "\n  - " << v;
    return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

std::vector<std::string> Dataset::check(const std::vector<Rule>& rules, const ActionMap& actions,
                                        const TriggerMatrix& triggers) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen_ids;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const Rule& r = rules[i];
        if (r.id.empty()) out.push_back("rule #" + std::to_string(i) + ": empty id");
        if (!seen_ids.insert(r.id).second) out.push_back("duplicate rule id '" + r.id + "'");
        if (r.original_priority < 0) {
            out.push_back("rule '" + r.id + "': negative original priority");
            continue;
        }
        auto mapped = actions.action_for(r.original_priority);
        if (!mapped) {
            out.push_back("rule '" + r.id + "': unmapped priority " +
                          std::to_string(r.original_priority));
        } else if (*mapped != r.action) {
            out.push_back("rule '" + r.id + "': action/priority mismatch (priority " +
                          std::to_string(r.original_priority) + " maps to " +
                          std::string(to_string(*mapped)) + ", rule says " +
                          std::string(to_string(r.action)) + ")");
        }
        const bool blacklist_rule = r.is_updater() || r.is_checker();
        if (blacklist_rule && !triggers.has_field_data()) {
            out.push_back("rule '" + r.id + "': blacklist rule but no field data present");
        } else if (blacklist_rule) {
            for (const auto& f : r.updates_fields) {
                if (!triggers.field_id(f)) {
                    out.push_back("rule '" + r.id + "': unknown blacklist field '" + f + "'");
                }
            }
            for (const auto& f : r.checks_fields) {
                if (!triggers.field_id(f)) {
                    out.push_back("rule '" + r.id + "': unknown blacklist field '" + f + "'");
                }
            }
        }
    }
    if (triggers.cols() != rules.size()) {
        out.push_back("column count mismatch: triggers have " + std::to_string(triggers.cols()) +
                      " columns for " + std::to_string(rules.size()) + " rules");
    }
    const auto& ts = triggers.timestamps_ms();
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] < ts[i - 1]) {
            out.push_back("unsorted timestamps at row " + std::to_string(i));
            break;
        }
    }
    return out;
}

Dataset Dataset::validate(std::vector<Rule> rules, ActionMap actions, TriggerMatrix triggers) {
    auto violations = check(rules, actions, triggers);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    Dataset d;
    d.parent.resize(rules.size());
    std::iota(d.parent.begin(), d.parent.end(), 0u);
    d.parent_count = rules.size();
    std::vector<int> initial(rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        initial[i] = rules[i].original_priority;
        if (rules[i].is_updater()) d.updater_columns.push_back(static_cast<std::uint32_t>(i));
        if (rules[i].is_checker()) d.checker_columns.push_back(static_cast<std::uint32_t>(i));
    }
    d.initial_priorities = PriorityVector(std::move(initial));
    d.rules = std::move(rules);
    d.actions = std::move(actions);
    d.triggers = std::move(triggers);
    return d;
}

std::optional<std::string> Dataset::check_candidate(const PriorityVector& p) const {
    if (p.size() != rules.size()) {
        return "candidate length " + std::to_string(p.size()) + " != pool size " +
               std::to_string(rules.size());
    }
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const Rule& r = rules[i];
        if (p[i] < kInactive) return "rule '" + r.id + "': priority below -1";
        if (r.mandatory && p[i] == kInactive) {
            return "rule '" + r.id + "': mandatory-and-inactive conflict";
        }
        if (r.frozen && p[i] != r.original_priority) {
            return "rule '" + r.id + "': frozen rule reprioritized";
        }
        if (p[i] > kInactive) {
            auto mapped = actions.action_for(p[i]);
            if (!mapped) return "rule '" + r.id + "': unmapped priority " + std::to_string(p[i]);
            if (*mapped != r.action) {
                return "rule '" + r.id + "': action/priority mismatch at priority " +
                       std::to_string(p[i]);
            }
        }
    }
    return std::nullopt;
}

std::size_t Dataset::column_of(std::string_view rule_id) const {
    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (rules[i].id == rule_id) return i;
    }
    return npos;
}

std::vector<std::string> deactivated_rules(const Dataset& data, const PriorityVector& p) {
    std::vector<std::uint8_t> parent_active(data.parent_count, 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.active(i)) parent_active[data.parent[i]] = 1;
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < data.parent_count; ++i) {
        if (!parent_active[i]) out.push_back(data.rules[i].id);
    }
    return out;
}

std::vector<int> mask(std::span<const std::uint8_t> fired, std::span<const int> priorities) {
    assert(fired.size() == priorities.size());
    std::vector<int> out(fired.size(), kInactive);
    for (std::size_t j = 0; j < fired.size(); ++j) {
        if (fired[j] && priorities[j] > kInactive) out[j] = priorities[j];
    }
    return out;
}

}  // namespace ruleopt
