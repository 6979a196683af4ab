#include "ruleopt/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ruleopt/blacklist.hpp"

namespace ruleopt {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw IoError("cannot read " + file.string());
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& file, const std::string& content) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + file.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("cannot write " + file.string());
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            std::string_view line = text.substr(start, i - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (!(i == text.size() && line.empty())) out.push_back(line);
            start = i + 1;
        }
    }
    return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

std::optional<bool> parse_bool(std::string_view s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    return std::nullopt;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

// --- rules.csv ------------------------------------------------------------

constexpr std::string_view kRulesHeader = "id,action,priority,mandatory,frozen,updates_fields,checks_fields";

std::vector<Rule> parse_rules_csv(const std::string& text, std::vector<std::string>& violations) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != kRulesHeader) {
        throw IoError(std::string("rules.csv: expected header '") + std::string(kRulesHeader) + "'");
    }
    std::vector<Rule> rules;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        if (cells.size() != 7) {
            violations.push_back("rules.csv line " + std::to_string(i + 1) + ": expected 7 cells");
            continue;
        }
        Rule r;
        r.id = std::string(cells[0]);
        if (auto action = action_from_string(cells[1])) {
            r.action = *action;
        } else {
            violations.push_back("rules.csv line " + std::to_string(i + 1) + ": unknown action '" +
                                 std::string(cells[1]) + "'");
        }
        if (auto p = parse_number<int>(cells[2])) {
            r.original_priority = *p;
        } else {
            violations.push_back("rules.csv line " + std::to_string(i + 1) + ": bad priority");
        }
        if (auto b = parse_bool(cells[3])) {
            r.mandatory = *b;
        } else {
            violations.push_back("rules.csv line " + std::to_string(i + 1) + ": bad mandatory flag");
        }
        if (auto b = parse_bool(cells[4])) {
            r.frozen = *b;
        } else {
            violations.push_back("rules.csv line " + std::to_string(i + 1) + ": bad frozen flag");
        }
        auto parse_fields = [](std::string_view cell) {
            std::vector<std::string> out;
            if (cell.empty()) return out;
            for (auto f : split(cell, ';')) {
                if (!f.empty()) out.emplace_back(f);
            }
            return out;
        };
        r.updates_fields = parse_fields(cells[5]);
        r.checks_fields = parse_fields(cells[6]);
        rules.push_back(std::move(r));
    }
    return rules;
}

std::string render_rules_csv(const std::vector<Rule>& rules, std::size_t count) {
    std::string out(kRulesHeader);
    out += '\n';
    auto join = [](const std::vector<std::string>& fields) {
        std::string s;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) s += ';';
            s += fields[i];
        }
        return s;
    };
    for (std::size_t i = 0; i < count; ++i) {
        const Rule& r = rules[i];
        out += r.id;
        out += ',';
        out += to_string(r.action);
        out += ',';
        out += std::to_string(r.original_priority);
        out += r.mandatory ? ",true" : ",false";
        out += r.frozen ? ",true" : ",false";
        out += ',';
        out += join(r.updates_fields);
        out += ',';
        out += join(r.checks_fields);
        out += '\n';
    }
    return out;
}

// --- triggers.csv and its binary sidecar ----------------------------------

constexpr char kCacheMagic[8] = {'R', 'L', 'O', 'T', 'R', 'G', '0', '1'};

struct TriggerData {
    std::vector<std::string> rule_ids;  // header order
    std::size_t rows = 0;
    std::vector<std::int64_t> timestamps;
    std::vector<std::uint8_t> labels;
    std::vector<std::uint64_t> bits;  // column-major, words_per_col = (rows+63)/64
};

template <typename T>
void put_pod(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get_pod(std::string_view in, std::size_t& off, T& v) {
    if (off + sizeof(T) > in.size()) return false;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return true;
}

std::optional<TriggerData> read_trigger_cache(const std::filesystem::path& file) {
    std::error_code ec;
    if (!std::filesystem::exists(file, ec)) return std::nullopt;
    std::string raw;
    try {
        raw = read_file(file);
    } catch (const IoError&) {
        return std::nullopt;
    }
    std::size_t off = 0;
    if (raw.size() < sizeof(kCacheMagic) ||
        std::memcmp(raw.data(), kCacheMagic, sizeof(kCacheMagic)) != 0) {
        return std::nullopt;
    }
    off = sizeof(kCacheMagic);
    std::uint64_t rows = 0, cols = 0;
    if (!get_pod(raw, off, rows) || !get_pod(raw, off, cols)) return std::nullopt;
    TriggerData data;
    data.rows = rows;
    data.rule_ids.reserve(cols);
    for (std::uint64_t c = 0; c < cols; ++c) {
        std::uint32_t len = 0;
        if (!get_pod(raw, off, len) || off + len > raw.size()) return std::nullopt;
        data.rule_ids.emplace_back(raw.data() + off, len);
        off += len;
    }
    const std::size_t words = (rows + 63) / 64;
    data.timestamps.resize(rows);
    data.labels.resize(rows);
    data.bits.resize(words * cols);
    const std::size_t need = rows * sizeof(std::int64_t) + rows + data.bits.size() * 8;
    if (off + need != raw.size()) return std::nullopt;
    std::memcpy(data.timestamps.data(), raw.data() + off, rows * sizeof(std::int64_t));
    off += rows * sizeof(std::int64_t);
    std::memcpy(data.labels.data(), raw.data() + off, rows);
    off += rows;
    std::memcpy(data.bits.data(), raw.data() + off, data.bits.size() * 8);
    return data;
}

void write_trigger_cache(const std::filesystem::path& file, const TriggerData& data) {
    std::string out;
    const std::size_t words = (data.rows + 63) / 64;
    out.reserve(64 + data.rows * 9 + data.bits.size() * 8);
    out.append(kCacheMagic, sizeof(kCacheMagic));
    put_pod(out, static_cast<std::uint64_t>(data.rows));
    put_pod(out, static_cast<std::uint64_t>(data.rule_ids.size()));
    for (const auto& id : data.rule_ids) {
        put_pod(out, static_cast<std::uint32_t>(id.size()));
        out += id;
    }
    out.append(reinterpret_cast<const char*>(data.timestamps.data()),
               data.rows * sizeof(std::int64_t));
    out.append(reinterpret_cast<const char*>(data.labels.data()), data.rows);
    out.append(reinterpret_cast<const char*>(data.bits.data()), words * data.rule_ids.size() * 8);
    try {
        write_file(file, out);
    } catch (const IoError&) {
        // best effort; the CSV remains authoritative
    }
}

TriggerData parse_triggers_csv(const std::string& text, std::vector<std::string>& violations) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw IoError("triggers.csv: empty file");
    const auto header = split(lines[0], ',');
    if (header.size() < 2 || header[0] != "timestamp_ms" || header[1] != "label") {
        throw IoError("triggers.csv: header must start with 'timestamp_ms,label'");
    }
    TriggerData data;
    for (std::size_t c = 2; c < header.size(); ++c) data.rule_ids.emplace_back(header[c]);
    const std::size_t cols = data.rule_ids.size();
    data.rows = lines.size() - 1;
    const std::size_t words = (data.rows + 63) / 64;
    data.timestamps.assign(data.rows, 0);
    data.labels.assign(data.rows, 0);
    data.bits.assign(words * cols, 0);

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t row = i - 1;
        const auto cells = split(lines[i], ',');
        if (cells.size() != cols + 2) {
            violations.push_back("triggers.csv line " + std::to_string(i + 1) + ": expected " +
                                 std::to_string(cols + 2) + " cells, got " +
                                 std::to_string(cells.size()));
            continue;
        }
        if (auto ts = parse_number<std::int64_t>(cells[0])) {
            data.timestamps[row] = *ts;
        } else {
            violations.push_back("triggers.csv line " + std::to_string(i + 1) +
                                 ": unparseable timestamp '" + std::string(cells[0]) + "'");
        }
        if (cells[1] == "0" || cells[1] == "1") {
            data.labels[row] = cells[1][0] == '1';
        } else {
            violations.push_back("triggers.csv line " + std::to_string(i + 1) +
                                 ": non-binary label '" + std::string(cells[1]) + "'");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const auto cell = cells[c + 2];
            if (cell == "1") {
                data.bits[c * words + row / 64] |= std::uint64_t{1} << (row % 64);
            } else if (cell != "0") {
                violations.push_back("triggers.csv line " + std::to_string(i + 1) +
                                     ": non-binary trigger cell '" + std::string(cell) +
                                     "' in column '" + data.rule_ids[c] + "'");
            }
        }
    }
    return data;
}

TriggerData load_triggers(const std::filesystem::path& dir, std::vector<std::string>& violations) {
    const auto csv_path = dir / kTriggersFile;
    const std::string raw = read_file(csv_path);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a(raw)));
    const auto cache_path = dir / ("triggers." + std::string(hex) + ".bin");
    if (auto cached = read_trigger_cache(cache_path)) return std::move(*cached);
    TriggerData data = parse_triggers_csv(raw, violations);
    if (violations.empty()) write_trigger_cache(cache_path, data);
    return data;
}

std::string render_triggers_csv(const Dataset& data) {
    const TriggerMatrix& tm = data.triggers;
    std::string out = "timestamp_ms,label";
    for (const Rule& r : data.rules) {
        out += ',';
        out += r.id;
    }
    out += '\n';
    std::string line;
    for (std::size_t row = 0; row < tm.rows(); ++row) {
        line.clear();
        line += std::to_string(tm.timestamp_ms(row));
        line += tm.label(row) ? ",1" : ",0";
        for (std::size_t c = 0; c < tm.cols(); ++c) {
            line += tm.fired(row, c) ? ",1" : ",0";
        }
        line += '\n';
        out += line;
    }
    return out;
}

// --- fields.csv -------------------------------------------------------------

constexpr std::string_view kFieldsHeader = "timestamp_ms,fields";

void parse_fields_csv(const std::string& text, TriggerMatrixBuilder& builder,
                      const std::vector<std::int64_t>& timestamps,
                      std::vector<std::string>& violations) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != kFieldsHeader) {
        throw IoError(std::string("fields.csv: expected header '") + std::string(kFieldsHeader) + "'");
    }
    if (lines.size() - 1 != timestamps.size()) {
        violations.push_back("fields.csv: row count " + std::to_string(lines.size() - 1) +
                             " does not match triggers (" + std::to_string(timestamps.size()) + ")");
        return;
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t row = i - 1;
        const auto cells = split(lines[i], ',');
        if (cells.size() != 2) {
            violations.push_back("fields.csv line " + std::to_string(i + 1) + ": expected 2 cells");
            continue;
        }
        auto ts = parse_number<std::int64_t>(cells[0]);
        if (!ts || *ts != timestamps[row]) {
            violations.push_back("fields.csv line " + std::to_string(i + 1) +
                                 ": timestamp does not match triggers row");
        }
        if (cells[1].empty()) continue;
        for (auto pair : split(cells[1], ';')) {
            const auto eq = pair.find('=');
            if (eq == std::string_view::npos || eq == 0) {
                violations.push_back("fields.csv line " + std::to_string(i + 1) +
                                     ": malformed field=value pair '" + std::string(pair) + "'");
                continue;
            }
            builder.add_field(row, pair.substr(0, eq), pair.substr(eq + 1));
        }
    }
}

std::string render_fields_csv(const TriggerMatrix& tm) {
    std::string out(kFieldsHeader);
    out += '\n';
    for (std::size_t row = 0; row < tm.rows(); ++row) {
        out += std::to_string(tm.timestamp_ms(row));
        out += ',';
        bool first = true;
        for (const FieldValue& fv : tm.fields_of(row)) {
            if (!first) out += ';';
            first = false;
            out += tm.field_names()[fv.field];
            out += '=';
            out += tm.field_values()[fv.value];
        }
        out += '\n';
    }
    return out;
}

// --- actionmap.json ---------------------------------------------------------

ActionMap parse_actionmap(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("actionmap.json: ") + e.what());
    }
    if (!doc.is_object()) throw IoError("actionmap.json: expected an object");
    std::map<int, Action> entries;
    for (const auto& [key, value] : doc.items()) {
        auto priority = parse_number<int>(key);
        if (!priority) throw IoError("actionmap.json: non-integer priority key '" + key + "'");
        if (!value.is_string()) throw IoError("actionmap.json: action must be a string");
        auto action = action_from_string(value.get<std::string>());
        if (!action) {
            throw IoError("actionmap.json: unknown action '" + value.get<std::string>() + "'");
        }
        entries[*priority] = *action;
    }
    return ActionMap(std::move(entries));
}

std::string render_actionmap(const ActionMap& actions) {
    json doc = json::object();
    for (const auto& [priority, action] : actions.entries()) {
        doc[std::to_string(priority)] = std::string(to_string(action));
    }
    return doc.dump(2) + "\n";
}

// --- reports ----------------------------------------------------------------

json report_to_json(const EvaluationReport& r) {
    json counts = json::object();
    for (std::size_t a = 0; a < kActionCount; ++a) {
        counts[std::string(to_string(static_cast<Action>(a)))] = {
            {"legit", r.counts[a][0]}, {"fraud", r.counts[a][1]}};
    }
    return json{{"counts", std::move(counts)},
                {"tp", r.tp},
                {"fp", r.fp},
                {"tn", r.tn},
                {"fn", r.fn},
                {"recall", r.recall},
                {"recall_defined", r.recall_defined},
                {"fpr", r.fpr},
                {"fpr_defined", r.fpr_defined},
                {"alert_rate", r.alert_rate},
                {"rules_active_fraction", r.rules_active_fraction},
                {"loss", r.loss}};
}

json priorities_to_json(const Dataset& pool, const PriorityVector& p) {
    json out = json::object();
    for (std::size_t i = 0; i < pool.rules.size(); ++i) out[pool.rules[i].id] = p[i];
    return out;
}

json range_to_json(std::string_view label, RowRange range) {
    return json{{"label", std::string(label)},
                {"rows", json::array({range.begin, range.end})}};
}

// --- run configuration -------------------------------------------------------

LinearExpr parse_linear_expr(const json& doc) {
    if (!doc.is_object()) throw ConfigError("loss expression must be an object");
    LinearExpr expr;
    for (const auto& [key, value] : doc.items()) {
        if (key == "constant") {
            expr.constant = value.get<double>();
        } else if (key == "terms") {
            for (const auto& term : value) {
                MetricTerm mt;
                const auto name = term.at("metric").get<std::string>();
                auto metric = metric_from_string(name);
                if (!metric) throw ConfigError("unknown metric '" + name + "'");
                mt.metric = *metric;
                mt.weight = term.at("weight").get<double>();
                mt.baseline = term.value("baseline", false);
                expr.terms.push_back(mt);
            }
        } else {
            throw ConfigError("unknown loss expression key '" + key + "'");
        }
    }
    return expr;
}

LossSpec parse_loss_spec(const json& doc) {
    if (doc.is_string()) {
        const auto name = doc.get<std::string>();
        if (auto spec = LossSpec::builtin(name)) return *spec;
        throw ConfigError("unknown loss '" + name + "'");
    }
    if (!doc.is_object()) throw ConfigError("loss must be a builtin name or an inline spec");
    LinearExpr objective;
    LinearExpr penalty;
    std::vector<LossConstraint> constraints;
    for (const auto& [key, value] : doc.items()) {
        if (key == "objective") {
            objective = parse_linear_expr(value);
        } else if (key == "penalty") {
            penalty = parse_linear_expr(value);
        } else if (key == "constraints") {
            for (const auto& c : value) {
                LossConstraint lc;
                const auto name = c.at("metric").get<std::string>();
                auto metric = metric_from_string(name);
                if (!metric) throw ConfigError("unknown metric '" + name + "'");
                lc.metric = *metric;
                const auto op = c.at("op").get<std::string>();
                if (op == ">=") {
                    lc.cmp = Comparator::ge;
                } else if (op == "<=") {
                    lc.cmp = Comparator::le;
                } else {
                    throw ConfigError("unknown comparator '" + op + "'");
                }
                lc.bound = parse_linear_expr(c.at("bound"));
                constraints.push_back(std::move(lc));
            }
        } else {
            throw ConfigError("unknown loss key '" + key + "'");
        }
    }
    return LossSpec(std::move(objective), std::move(constraints), std::move(penalty));
}

MethodParams parse_theta(const std::string& method, const json& doc) {
    if (!doc.is_object()) throw ConfigError("theta must be an object");
    auto reject_unknown = [&doc](std::initializer_list<const char*> known) {
        for (const auto& [key, value] : doc.items()) {
            (void)value;
            if (std::find_if(known.begin(), known.end(),
                             [&](const char* k) { return key == k; }) == known.end()) {
                throw ConfigError("unknown theta key '" + key + "'");
            }
        }
    };
    if (method == "random") {
        reject_unknown({"rho", "gamma"});
        RandomSearchParams p;
        p.shutoff_prob = doc.value("rho", p.shutoff_prob);
        p.shuffle_prob = doc.value("gamma", p.shuffle_prob);
        return p;
    }
    if (method == "greedy") {
        reject_unknown({"backtracking", "contraction_count", "contraction_period"});
        GreedyParams p;
        p.backtracking = doc.value("backtracking", p.backtracking);
        p.contraction_count = doc.value("contraction_count", p.contraction_count);
        p.contraction_period = doc.value("contraction_period", p.contraction_period);
        return p;
    }
    if (method == "genetic") {
        reject_unknown({"population", "survivors_fraction", "mutation_prob", "generations", "mutation"});
        GeneticParams p;
        p.population = doc.value("population", p.population);
        p.survivors_fraction = doc.value("survivors_fraction", p.survivors_fraction);
        p.mutation_prob = doc.value("mutation_prob", p.mutation_prob);
        if (doc.contains("generations")) p.generations = doc["generations"].get<std::uint64_t>();
        const auto mutation = doc.value("mutation", std::string("flip"));
        if (mutation == "flip") {
            p.mutation = MutationKind::activation_flip;
        } else if (mutation == "shuffle") {
            p.mutation = MutationKind::priority_shuffle;
        } else {
            throw ConfigError("unknown mutation kind '" + mutation + "'");
        }
        return p;
    }
    throw ConfigError("unknown method '" + method + "'");
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
    std::vector<std::string> violations;
    std::vector<Rule> rules = parse_rules_csv(read_file(dir / kRulesFile), violations);
    ActionMap actions = parse_actionmap(read_file(dir / kActionMapFile));
    TriggerData td = load_triggers(dir, violations);

    // Header/rule-id alignment: canonical column order is rules.csv order.
    if (td.rule_ids.size() != rules.size()) {
        violations.push_back("triggers.csv header has " + std::to_string(td.rule_ids.size()) +
                             " rule columns for " + std::to_string(rules.size()) + " rules");
        for (const Rule& r : rules) {
            if (std::find(td.rule_ids.begin(), td.rule_ids.end(), r.id) == td.rule_ids.end()) {
                violations.push_back("triggers.csv is missing a column for rule '" + r.id + "'");
            }
        }
        for (const std::string& id : td.rule_ids) {
            if (std::none_of(rules.begin(), rules.end(),
                             [&](const Rule& r) { return r.id == id; })) {
                violations.push_back("triggers.csv column '" + id + "' has no rule");
            }
        }
    } else {
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (td.rule_ids[i] != rules[i].id) {
                violations.push_back("triggers.csv column " + std::to_string(i) + " is '" +
                                     td.rule_ids[i] + "', rules.csv says '" + rules[i].id + "'");
            }
        }
    }

    TriggerMatrixBuilder builder(td.rows, td.rule_ids.size());
    const auto fields_path = dir / kFieldsFile;
    if (std::filesystem::exists(fields_path)) {
        parse_fields_csv(read_file(fields_path), builder, td.timestamps, violations);
    }
    builder.set_timestamps(std::move(td.timestamps));
    builder.set_labels(std::move(td.labels));
    const std::size_t words = (td.rows + 63) / 64;
    for (std::size_t c = 0; c < td.rule_ids.size(); ++c) {
        builder.load_column_words(c, {td.bits.data() + c * words, words});
    }
    TriggerMatrix tm = builder.build();

    auto structural = Dataset::check(rules, actions, tm);
    violations.insert(violations.end(), structural.begin(), structural.end());
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return Dataset::validate(std::move(rules), std::move(actions), std::move(tm));
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
    if (data.augmented()) throw IoError("refusing to save an augmented pool as a dataset");
    std::filesystem::create_directories(dir);
    write_file(dir / kRulesFile, render_rules_csv(data.rules, data.rules.size()));
    write_file(dir / kTriggersFile, render_triggers_csv(data));
    write_file(dir / kActionMapFile, render_actionmap(data.actions));
    if (data.triggers.has_field_data()) {
        write_file(dir / kFieldsFile, render_fields_csv(data.triggers));
    }
}

void save_splits(const std::filesystem::path& dir, const Splits& splits) {
    json doc{{"train", json::array({splits.train.begin, splits.train.end})},
             {"validation", json::array({splits.validation.begin, splits.validation.end})},
             {"test", json::array({splits.test.begin, splits.test.end})}};
    write_file(dir / kSplitsFile, doc.dump(2) + "\n");
}

std::optional<Splits> load_splits(const std::filesystem::path& dir) {
    const auto file = dir / kSplitsFile;
    if (!std::filesystem::exists(file)) return std::nullopt;
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::exception& e) {
        throw IoError(std::string("splits.json: ") + e.what());
    }
    auto range = [&doc](const char* key) {
        const auto& arr = doc.at(key);
        return RowRange{arr.at(0).get<std::size_t>(), arr.at(1).get<std::size_t>()};
    };
    return Splits{range("train"), range("validation"), range("test")};
}

RunConfig parse_run_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object");

    RunConfig config;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "method") {
                config.method = value.get<std::string>();
            } else if (key == "loss") {
                config.loss = parse_loss_spec(value);
                config.loss_name = value.is_string() ? value.get<std::string>() : "inline";
            } else if (key == "theta") {
                // handled after method is known
            } else if (key == "arp") {
                config.arp = value.get<bool>();
            } else if (key == "seed") {
                config.seed = value.get<std::uint64_t>();
            } else if (key == "threads") {
                config.threads = value.get<int>();
            } else if (key == "stopping") {
                for (const auto& [sk, sv] : value.items()) {
                    if (sk == "max_evaluations") {
                        config.stopping.max_evaluations = sv.get<std::uint64_t>();
                    } else if (sk == "max_seconds") {
                        config.stopping.max_seconds = sv.get<double>();
                    } else if (sk == "epsilon" || sk == "window") {
                        // paired below
                    } else {
                        throw ConfigError("unknown stopping key '" + sk + "'");
                    }
                }
                if (value.contains("epsilon") != value.contains("window")) {
                    throw ConfigError("stopping: epsilon and window must be given together");
                }
                if (value.contains("epsilon")) {
                    config.stopping.no_improvement = NoImprovementCriterion{
                        value["epsilon"].get<double>(), value["window"].get<std::uint64_t>()};
                }
            } else if (key == "folds") {
                FoldSpec spec;
                for (const auto& [fk, fv] : value.items()) {
                    if (fk == "period") {
                        // {"rows": n} or {"ms": n}
                        if (!fv.is_object() || fv.size() != 1) {
                            throw ConfigError("folds period must be {\"rows\": n} or {\"ms\": n}");
                        }
                        if (fv.contains("rows")) {
                            spec.period_rows = fv["rows"].get<std::size_t>();
                        } else if (fv.contains("ms")) {
                            spec.period_ms = fv["ms"].get<std::int64_t>();
                        } else {
                            throw ConfigError("folds period must be {\"rows\": n} or {\"ms\": n}");
                        }
                    } else if (fk == "period_ms") {
                        spec.period_ms = fv.get<std::int64_t>();
                    } else if (fk == "period_rows") {
                        spec.period_rows = fv.get<std::size_t>();
                    } else if (fk == "stride") {
                        spec.stride = fv.get<std::size_t>();
                    } else {
                        throw ConfigError("unknown folds key '" + fk + "'");
                    }
                }
                config.folds = spec;
            } else if (key == "split") {
                config.split = value.get<std::string>();
            } else if (key == "baselines") {
                for (const auto& [bk, bv] : value.items()) {
                    if (bk == "evaluations") {
                        config.baselines.evaluations_per_rho = bv.get<std::uint64_t>();
                    } else if (bk == "rho_grid") {
                        config.baselines.rho_grid = bv.get<std::vector<double>>();
                    } else {
                        throw ConfigError("unknown baselines key '" + bk + "'");
                    }
                }
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
        config.theta = parse_theta(config.method, doc.value("theta", json::object()));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (config.split && *config.split != "train" && *config.split != "validation" &&
        *config.split != "test") {
        throw ConfigError("unknown split '" + *config.split + "'");
    }
    if (config.threads < 1) throw ConfigError("threads must be positive");

    // Echo with the execution-only knob stripped so reports are byte-stable
    // across worker counts.
    json echo = doc;
    echo.erase("threads");
    config.canonical_json = echo.dump();
    return config;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    return parse_run_config(read_file(file));
}

PriorityVector priorities_from_json_file(const std::filesystem::path& file, const Dataset& pool,
                                         std::vector<std::string>* unknown) {
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::exception& e) {
        throw IoError(file.string() + ": " + e.what());
    }
    if (doc.is_object() && doc.contains("p_best")) doc = doc["p_best"];
    if (!doc.is_object()) throw IoError(file.string() + ": expected a rule-id to priority object");
    PriorityVector p(std::vector<int>(pool.rules.size(), kInactive));
    for (const auto& [id, value] : doc.items()) {
        const std::size_t col = pool.column_of(id);
        if (col == Dataset::npos) {
            if (unknown) unknown->push_back(id);
            continue;
        }
        p[col] = value.get<int>();
    }
    // Frozen rules keep their priority even when the file omits them.
    for (std::size_t i = 0; i < pool.rules.size(); ++i) {
        if (pool.rules[i].frozen) p[i] = pool.rules[i].original_priority;
    }
    return p;
}

namespace {

RowRange resolve_range(const Dataset& data, const std::optional<std::string>& split,
                       const std::optional<Splits>& splits) {
    if (!split) return RowRange{0, data.triggers.rows()};
    if (!splits) throw ConfigError("config selects split '" + *split + "' but no splits.json found");
    if (*split == "train") return splits->train;
    if (*split == "validation") return splits->validation;
    return splits->test;
}

json run_report_json(const RunConfig& config, const Dataset& pool,
                     const EvaluationReport& baseline, const SearchResult& result, RowRange range,
                     std::string_view split_label) {
    json doc{{"method", config.method},
             {"loss", config.loss_name},
             {"arp", config.arp},
             {"seed", config.seed},
             {"split", range_to_json(split_label, range)},
             {"pool_size", pool.rules.size()},
             {"original_rules", pool.parent_count},
             {"evaluations", result.evaluations},
             {"baseline", report_to_json(baseline)},
             {"best", report_to_json(result.best_report)},
             {"p_best", priorities_to_json(pool, result.best)},
             {"config", json::parse(config.canonical_json)}};
    if (!result.inclusion_order.empty()) {
        json order = json::array();
        for (std::uint32_t col : result.inclusion_order) order.push_back(pool.rules[col].id);
        doc["inclusion_order"] = std::move(order);
    }
    return doc;
}

}  // namespace

RunOutput run_optimization(const Dataset& data, const RunConfig& config,
                           const std::optional<Splits>& splits,
                           const std::filesystem::path& out_dir) {
    const RowRange range = resolve_range(data, config.split, splits);

    // Pipeline order: dependencies, baseline evaluation, optional pool
    // augmentation, then search.
    const DependencyIndex bd = compute_blacklist_dependencies(data);
    const Evaluator base_eval(data, &bd);
    EvaluationReport omega1 = base_eval.metrics(data.initial_priorities, range);
    omega1.loss = config.loss.value(omega1, &omega1);

    std::optional<Dataset> augmented;
    if (config.arp) augmented = augment_rules_pool(data);
    const Dataset& pool = augmented ? *augmented : data;
    const Evaluator search_eval(pool, &bd);

    OptimizeOptions opt;
    opt.stopping = config.stopping;
    opt.seed = config.seed;
    opt.threads = config.threads;
    opt.range = range;
    SearchResult result = optimize(search_eval, config.loss, omega1, config.theta, opt);

    std::filesystem::create_directories(out_dir);
    const std::string split_label = config.split.value_or("all");
    write_file(out_dir / "report.json",
               run_report_json(config, pool, omega1, result, range, split_label).dump(2) + "\n");
    write_trace_csv(out_dir / "trace.csv", result.trace);

    return RunOutput{std::move(omega1), std::move(result), pool.rules.size(), pool.parent_count,
                     range, split_label};
}

EvaluationReport run_evaluation(const Dataset& data, const RunConfig& config,
                                const std::optional<Splits>& splits,
                                const std::optional<PriorityVector>& priorities,
                                const std::optional<std::filesystem::path>& out_dir) {
    const RowRange range = resolve_range(data, config.split, splits);
    const DependencyIndex bd = compute_blacklist_dependencies(data);

    std::optional<Dataset> augmented;
    if (config.arp) augmented = augment_rules_pool(data);
    const Dataset& pool = augmented ? *augmented : data;
    const Evaluator evaluator(pool, &bd);

    EvaluationReport omega1 = evaluator.metrics(pool.initial_priorities, range);
    omega1.loss = config.loss.value(omega1, &omega1);

    EvaluationReport report = omega1;
    const PriorityVector& p = priorities ? *priorities : pool.initial_priorities;
    if (priorities) {
        report = evaluator.metrics(*priorities, range);
        report.loss = config.loss.value(report, &omega1);
    }

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        const std::string split_label = config.split.value_or("all");
        json doc{{"loss", config.loss_name},
                 {"arp", config.arp},
                 {"split", range_to_json(split_label, range)},
                 {"pool_size", pool.rules.size()},
                 {"original_rules", pool.parent_count},
                 {"baseline", report_to_json(omega1)},
                 {"report", report_to_json(report)},
                 {"priorities", priorities_to_json(pool, p)},
                 {"config", json::parse(config.canonical_json)}};
        write_file(*out_dir / "report.json", doc.dump(2) + "\n");
    }
    return report;
}

TcvOutput run_tcv(const Dataset& data, const RunConfig& config,
                  const std::filesystem::path& out_dir) {
    if (!config.folds) throw ConfigError("tcv requires a folds spec in the config");
    const std::vector<Fold> folds = make_folds(data.triggers, *config.folds);

    const DependencyIndex bd = compute_blacklist_dependencies(data);
    std::optional<Dataset> augmented;
    if (config.arp) augmented = augment_rules_pool(data);
    const Dataset& pool = augmented ? *augmented : data;
    const Evaluator evaluator(pool, &bd);

    std::filesystem::create_directories(out_dir);
    std::string baselines_csv = "fold,system,train_loss,validation_loss,delta_loss_validation\n";

    TcvOutput out;
    std::vector<PriorityVector> fold_best;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const Fold& fold = folds[f];
        BaselineOptions base_opts = config.baselines;
        base_opts.seed = config.seed + 10'000 * f;
        base_opts.threads = config.threads;
        const BaselineSet baselines = run_baselines(evaluator, config.loss, fold, base_opts);
        for (const BaselineRun& run : baselines.runs) {
            baselines_csv += std::to_string(f) + "," + run.name + "," +
                             std::to_string(run.train_report.loss) + "," +
                             std::to_string(run.validation_report.loss) + "," +
                             std::to_string(run.delta_loss_validation) + "\n";
        }

        const EvaluationReport& train_base = baselines.runs[0].train_report;
        OptimizeOptions opt;
        opt.stopping = config.stopping;
        opt.seed = config.seed + f;
        opt.threads = config.threads;
        opt.range = fold.train;
        SearchResult result = optimize(evaluator, config.loss, train_base, config.theta, opt);

        auto scored = [&](RowRange range) {
            EvaluationReport base = evaluator.metrics(pool.initial_priorities, range);
            base.loss = config.loss.value(base, &base);
            EvaluationReport r = evaluator.metrics(result.best, range);
            r.loss = config.loss.value(r, &base);
            return r;
        };
        TcvFoldResult fr;
        fr.fold = fold;
        fr.validation_report = scored(fold.validation);
        fr.test_report = scored(fold.test);
        fr.removed_rules = deactivated_rules(pool, result.best);
        for (std::uint32_t col : result.inclusion_order) {
            fr.inclusion_ids.push_back(pool.rules[col].id);
        }
        fr.selected_rho = baselines.selected_rho;

        const auto fold_dir = out_dir / ("fold_" + std::to_string(f));
        std::filesystem::create_directories(fold_dir);
        json fold_doc =
            run_report_json(config, pool, train_base, result, fold.train, "fold_train");
        fold_doc["validation"] = report_to_json(fr.validation_report);
        fold_doc["test"] = report_to_json(fr.test_report);
        fold_doc["selected_rho"] = fr.selected_rho;
        write_file(fold_dir / "report.json", fold_doc.dump(2) + "\n");
        write_trace_csv(fold_dir / "trace.csv", result.trace);

        fold_best.push_back(result.best);
        fr.result = std::move(result);
        out.folds.push_back(std::move(fr));
    }
    write_file(out_dir / "baselines.csv", baselines_csv);

    // Consistency matrices and the cross-fold loss triangle.
    const std::size_t n = folds.size();
    out.jaccard.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.jaccard[i][j] = jaccard_removed(out.folds[i].removed_rules, out.folds[j].removed_rules);
        }
    }
    const bool greedy = std::holds_alternative<GreedyParams>(config.theta);
    if (greedy) {
        out.ndcg.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                out.ndcg[i][j] = ndcg_consistency(out.folds[i].inclusion_ids,
                                                  out.folds[j].inclusion_ids);
            }
        }
    }
    out.cross_fold = cross_fold_losses(evaluator, config.loss, fold_best, folds);

    auto matrix_csv = [n](const std::vector<std::vector<double>>& m, bool triangular) {
        std::string csv = "fold";
        for (std::size_t j = 0; j < n; ++j) csv += "," + std::to_string(j);
        csv += '\n';
        for (std::size_t i = 0; i < m.size(); ++i) {
            csv += std::to_string(i);
            for (std::size_t j = 0; j < n; ++j) {
                csv += ',';
                if (triangular) {
                    if (j >= i) csv += std::to_string(m[i][j - i]);
                } else {
                    csv += std::to_string(m[i][j]);
                }
            }
            csv += '\n';
        }
        return csv;
    };
    write_file(out_dir / "jaccard.csv", matrix_csv(out.jaccard, false));
    if (greedy) write_file(out_dir / "ndcg.csv", matrix_csv(out.ndcg, false));
    write_file(out_dir / "crossfold.csv", matrix_csv(out.cross_fold, true));

    json summary{{"config", json::parse(config.canonical_json)},
                 {"folds", json::array()},
                 {"jaccard", out.jaccard},
                 {"cross_fold", out.cross_fold}};
    if (greedy) summary["ndcg"] = out.ndcg;
    for (std::size_t f = 0; f < n; ++f) {
        const TcvFoldResult& fr = out.folds[f];
        summary["folds"].push_back(
            json{{"train", json::array({fr.fold.train.begin, fr.fold.train.end})},
                 {"validation", json::array({fr.fold.validation.begin, fr.fold.validation.end})},
                 {"test", json::array({fr.fold.test.begin, fr.fold.test.end})},
                 {"selected_rho", fr.selected_rho},
                 {"validation_loss", fr.validation_report.loss},
                 {"test_loss", fr.test_report.loss},
                 {"removed_rules", fr.removed_rules}});
    }
    write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    return out;
}

void write_trace_csv(const std::filesystem::path& file, std::span<const TracePoint> trace) {
    std::string out = "eval_index,candidate_loss,best_loss\n";
    char line[96];
    for (const TracePoint& t : trace) {
        std::snprintf(line, sizeof(line), "%llu,%.17g,%.17g\n",
                      static_cast<unsigned long long>(t.eval_index), t.candidate_loss, t.best_loss);
        out += line;
    }
    write_file(file, out);
}

std::string format_report(const EvaluationReport& r) {
    std::ostringstream os;
    os << "            legit      fraud\n";
    for (std::size_t a = 0; a < kActionCount; ++a) {
        char line[64];
        std::snprintf(line, sizeof(line), "%-8s %10lld %10lld\n",
                      std::string(to_string(static_cast<Action>(a))).c_str(),
                      static_cast<long long>(r.counts[a][0]), static_cast<long long>(r.counts[a][1]));
        os << line;
    }
    char metrics[256];
    std::snprintf(metrics, sizeof(metrics),
                  "recall %.4f%s  fpr %.4f%s  alert_rate %.4f  rules_active %.4f  loss %.6f\n",
                  r.recall, r.recall_defined ? "" : " (no fraud labels)", r.fpr,
                  r.fpr_defined ? "" : " (no legit labels)", r.alert_rate, r.rules_active_fraction,
                  r.loss);
    os << metrics;
    return os.str();
}

}  // namespace ruleopt
