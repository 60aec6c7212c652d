#include "shotinf/blsr.hpp"

#include "shotinf/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace shotinf::blsr {

namespace {

constexpr std::array<std::string_view, kShotTypeCount> kShotTypeNames = {
    "net shot",   "return net",    "smash",         "wrist smash",     "lob",
    "defensive return lob",        "clear",         "drive",           "driven flight",
    "back-court drive",            "drop",          "passive drop",    "push",
    "rush",       "defensive return drive",         "cross-court net shot",
    "short service",               "long service",
};

constexpr std::array<std::string_view, kEndReasonCount> kEndReasonNames = {
    "in", "out", "touch net", "not pass over net", "misjudge",
};

constexpr std::array<std::string_view, 15> kColumns = {
    "rally_id",    "match_id",      "shot_index",   "player",       "timestamp",
    "type",        "back_hand",     "around_head",  "hit_area",     "player_area",
    "opponent_area", "roundscore_A", "roundscore_B", "getpoint_player", "end_reason",
};

enum Col : std::size_t {
    kRallyId, kMatchId, kShotIndex, kPlayer, kTimestamp, kType, kBackHand, kAroundHead,
    kHitArea, kPlayerArea, kOpponentArea, kScoreA, kScoreB, kGetpoint, kEndReason,
};

using Kind = ParseError::Kind;

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw std::logic_error("to_chars failed");
    return {buf.data(), ptr};
}

// Field-level decoders shared by the CSV and JSONL readers.
struct FieldReader {
    std::size_t row;

    long long integer(std::string_view s, std::string_view field) const {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw ParseError(Kind::InvalidValue, row, std::string(field), "not an integer: '" + std::string(s) + "'");
        return v;
    }

    double real(std::string_view s, std::string_view field) const {
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
            throw ParseError(Kind::InvalidValue, row, std::string(field), "not a finite number: '" + std::string(s) + "'");
        return v;
    }

    int non_negative(long long v, std::string_view field) const {
        if (v < 0 || v > 1'000'000)
            throw ParseError(Kind::InvalidValue, row, std::string(field), "expected a non-negative integer");
        return static_cast<int>(v);
    }

    Area area(long long v, std::string_view field) const {
        if (v < 1 || v > static_cast<long long>(kAreaCount))
            throw ParseError(Kind::AreaOutOfRange, row, std::string(field), std::to_string(v) + " not in 1..16");
        return Area(static_cast<int>(v));
    }

    long long shot_index(long long v) const {
        if (v < 1) throw ParseError(Kind::InvalidValue, row, "shot_index", "expected an index >= 1");
        return v;
    }

    bool flag(long long v, std::string_view field) const {
        if (v != 0 && v != 1) throw ParseError(Kind::InvalidValue, row, std::string(field), "expected 0 or 1");
        return v == 1;
    }

    Player player(std::string_view s, std::string_view field) const {
        auto p = parse_player(s);
        if (!p) throw ParseError(Kind::InvalidValue, row, std::string(field), "unknown player '" + std::string(s) + "'");
        return *p;
    }

    ShotType shot_type(std::string_view s) const {
        auto t = parse_shot_type(s);
        if (!t) throw ParseError(Kind::UnknownShotType, row, "type", "'" + std::string(s) + "'");
        return *t;
    }

    EndReason end_reason(std::string_view s) const {
        auto r = parse_end_reason(s);
        if (!r) throw ParseError(Kind::UnknownEndReason, row, "end_reason", "'" + std::string(s) + "'");
        return *r;
    }
};

struct PendingShot {
    long long index;
    std::size_t row;
    Shot shot;
};

struct PendingRally {
    Rally rally;
    std::size_t first_row;
    std::vector<PendingShot> shots;
};

// Accumulates rows into rallies and finalizes ordering.
class RallyCollector {
public:
    void add(std::size_t row, const std::string& rally_id, const std::string& match_id, const RallyInfo& info,
             long long shot_index, const Shot& shot) {
        auto [it, inserted] = index_.try_emplace(rally_id, pending_.size());
        if (inserted) {
            PendingRally p;
            p.rally.rally_id = rally_id;
            p.rally.match_id = match_id;
            p.rally.info = info;
            p.first_row = row;
            pending_.push_back(std::move(p));
        } else {
            const Rally& r = pending_[it->second].rally;
            if (r.match_id != match_id)
                throw ParseError(Kind::InconsistentRally, row, "match_id", "differs from earlier rows of rally " + rally_id);
            if (r.info.roundscore_a != info.roundscore_a)
                throw ParseError(Kind::InconsistentRally, row, "roundscore_A", "differs from earlier rows of rally " + rally_id);
            if (r.info.roundscore_b != info.roundscore_b)
                throw ParseError(Kind::InconsistentRally, row, "roundscore_B", "differs from earlier rows of rally " + rally_id);
            if (r.info.getpoint_player != info.getpoint_player)
                throw ParseError(Kind::InconsistentRally, row, "getpoint_player", "differs from earlier rows of rally " + rally_id);
            if (r.info.end_reason != info.end_reason)
                throw ParseError(Kind::InconsistentRally, row, "end_reason", "differs from earlier rows of rally " + rally_id);
        }
        pending_[it->second].shots.push_back({shot_index, row, shot});
    }

    void add_empty(std::size_t row, const std::string& rally_id, const std::string& match_id, const RallyInfo& info) {
        auto [it, inserted] = index_.try_emplace(rally_id, pending_.size());
        if (!inserted) throw ParseError(Kind::InconsistentRally, row, "rally_id", "rally " + rally_id + " appears twice");
        PendingRally p;
        p.rally = Rally{rally_id, match_id, {}, info};
        p.first_row = row;
        pending_.push_back(std::move(p));
    }

    Dataset finish() {
        Dataset d;
        std::unordered_map<std::string, std::size_t> match_order;
        for (auto& p : pending_) {
            if (match_order.try_emplace(p.rally.match_id, d.matches.size()).second) d.matches.push_back(p.rally.match_id);
            std::stable_sort(p.shots.begin(), p.shots.end(),
                             [](const PendingShot& a, const PendingShot& b) { return a.index < b.index; });
            for (std::size_t i = 1; i < p.shots.size(); ++i) {
                if (p.shots[i].index == p.shots[i - 1].index) {
                    const std::size_t row = std::max(p.shots[i].row, p.shots[i - 1].row);
                    throw ParseError(Kind::DuplicateShotIndex, row, "shot_index",
                                     std::to_string(p.shots[i].index) + " repeated in rally " + p.rally.rally_id);
                }
            }
            p.rally.shots.reserve(p.shots.size());
            for (auto& s : p.shots) p.rally.shots.push_back(s.shot);
        }
        auto first_time = [](const Rally& r) { return r.shots.empty() ? 0.0 : r.shots.front().timestamp; };
        std::stable_sort(pending_.begin(), pending_.end(), [&](const PendingRally& a, const PendingRally& b) {
            const auto ma = match_order.at(a.rally.match_id);
            const auto mb = match_order.at(b.rally.match_id);
            if (ma != mb) return ma < mb;
            return first_time(a.rally) < first_time(b.rally);
        });
        d.rallies.reserve(pending_.size());
        for (auto& p : pending_) d.rallies.push_back(std::move(p.rally));
        return d;
    }

private:
    std::vector<PendingRally> pending_;
    std::unordered_map<std::string, std::size_t> index_;
};

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (end == text.size()) break;
        start = end + 1;
    }
    return lines;
}

// Splits one CSV record. Fields may be double-quoted; "" inside quotes is a
// literal quote.
std::vector<std::string> split_csv(std::string_view line, std::size_t row) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && cur.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw ParseError(Kind::InvalidValue, row, "", "unterminated quoted field");
    cells.push_back(std::move(cur));
    return cells;
}

Dataset parse_csv(std::string_view text) {
    const auto lines = split_lines(text);
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    if (first == lines.size()) return {};

    const auto header = split_csv(lines[first], first + 1);
    std::array<std::size_t, kColumns.size()> pos{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
        auto it = std::find(header.begin(), header.end(), kColumns[c]);
        if (it == header.end()) throw ParseError(Kind::MissingField, first + 1, std::string(kColumns[c]), "column absent from header");
        pos[c] = static_cast<std::size_t>(it - header.begin());
    }

    RallyCollector collector;
    for (std::size_t li = first + 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const std::size_t row = li + 1;
        const auto cells = split_csv(lines[li], row);
        auto cell = [&](Col c) -> std::string_view {
            const std::size_t p = pos[c];
            if (p >= cells.size() || cells[p].empty())
                throw ParseError(Kind::MissingField, row, std::string(kColumns[c]), "empty or absent");
            return cells[p];
        };
        const FieldReader f{row};
        Shot s;
        s.player = f.player(cell(kPlayer), "player");
        s.timestamp = f.real(cell(kTimestamp), "timestamp");
        s.type = f.shot_type(cell(kType));
        s.back_hand = f.flag(f.integer(cell(kBackHand), "back_hand"), "back_hand");
        s.around_head = f.flag(f.integer(cell(kAroundHead), "around_head"), "around_head");
        s.hit_area = f.area(f.integer(cell(kHitArea), "hit_area"), "hit_area");
        s.player_area = f.area(f.integer(cell(kPlayerArea), "player_area"), "player_area");
        s.opponent_area = f.area(f.integer(cell(kOpponentArea), "opponent_area"), "opponent_area");
        RallyInfo info;
        info.roundscore_a = f.non_negative(f.integer(cell(kScoreA), "roundscore_A"), "roundscore_A");
        info.roundscore_b = f.non_negative(f.integer(cell(kScoreB), "roundscore_B"), "roundscore_B");
        info.getpoint_player = f.player(cell(kGetpoint), "getpoint_player");
        info.end_reason = f.end_reason(cell(kEndReason));
        const long long index = f.shot_index(f.integer(cell(kShotIndex), "shot_index"));
        collector.add(row, std::string(cell(kRallyId)), std::string(cell(kMatchId)), info, index, s);
    }
    return collector.finish();
}

using nlohmann::json;
using nlohmann::ordered_json;

const json& require(const json& obj, const char* key, std::size_t row) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw ParseError(Kind::MissingField, row, key, "key absent");
    return *it;
}

std::string_view json_string(const json& v, const char* key, std::size_t row) {
    if (!v.is_string()) throw ParseError(Kind::InvalidValue, row, key, "expected a string");
    return v.get_ref<const std::string&>();
}

long long json_integer(const json& v, const char* key, std::size_t row) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) == d && std::abs(d) < 1e15) return static_cast<long long>(d);
    }
    throw ParseError(Kind::InvalidValue, row, key, "expected an integer");
}

bool json_flag(const json& v, const char* key, std::size_t row) {
    if (v.is_boolean()) return v.get<bool>();
    return FieldReader{row}.flag(json_integer(v, key, row), key);
}

Dataset parse_jsonl(std::string_view text) {
    RallyCollector collector;
    const auto lines = split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (lines[li].find_first_not_of(" \t") == std::string_view::npos) continue;
        const std::size_t row = li + 1;
        json obj;
        try {
            obj = json::parse(lines[li]);
        } catch (const json::parse_error& e) {
            throw ParseError(Kind::InvalidValue, row, "", std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw ParseError(Kind::InvalidValue, row, "", "expected a JSON object");
        const FieldReader f{row};
        const std::string rally_id(json_string(require(obj, "rally_id", row), "rally_id", row));
        const std::string match_id(json_string(require(obj, "match_id", row), "match_id", row));
        RallyInfo info;
        info.roundscore_a = f.non_negative(json_integer(require(obj, "roundscore_A", row), "roundscore_A", row), "roundscore_A");
        info.roundscore_b = f.non_negative(json_integer(require(obj, "roundscore_B", row), "roundscore_B", row), "roundscore_B");
        info.getpoint_player = f.player(json_string(require(obj, "getpoint_player", row), "getpoint_player", row), "getpoint_player");
        info.end_reason = f.end_reason(json_string(require(obj, "end_reason", row), "end_reason", row));
        const json& shots = require(obj, "shots", row);
        if (!shots.is_array()) throw ParseError(Kind::InvalidValue, row, "shots", "expected an array");
        if (shots.empty()) collector.add_empty(row, rally_id, match_id, info);
        for (const json& js : shots) {
            if (!js.is_object()) throw ParseError(Kind::InvalidValue, row, "shots", "expected shot objects");
            Shot s;
            s.player = f.player(json_string(require(js, "player", row), "player", row), "player");
            const json& ts = require(js, "timestamp", row);
            if (!ts.is_number() || !std::isfinite(ts.get<double>()))
                throw ParseError(Kind::InvalidValue, row, "timestamp", "expected a finite number");
            s.timestamp = ts.get<double>();
            s.type = f.shot_type(json_string(require(js, "type", row), "type", row));
            s.back_hand = json_flag(require(js, "back_hand", row), "back_hand", row);
            s.around_head = json_flag(require(js, "around_head", row), "around_head", row);
            s.hit_area = f.area(json_integer(require(js, "hit_area", row), "hit_area", row), "hit_area");
            s.player_area = f.area(json_integer(require(js, "player_area", row), "player_area", row), "player_area");
            s.opponent_area = f.area(json_integer(require(js, "opponent_area", row), "opponent_area", row), "opponent_area");
            const long long index = f.shot_index(json_integer(require(js, "shot_index", row), "shot_index", row));
            collector.add(row, rally_id, match_id, info, index, s);
        }
    }
    return collector.finish();
}

// Quotes a field when it holds a separator, quote or line break.
std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string serialize_csv(const Dataset& d) {
    std::string out(kCsvHeader);
    out.push_back('\n');
    for (const Rally& r : d.rallies) {
        const std::string tail = std::to_string(r.info.roundscore_a) + "," + std::to_string(r.info.roundscore_b) + "," +
                                 std::string(to_string(r.info.getpoint_player)) + "," +
                                 std::string(to_string(r.info.end_reason)) + "\n";
        for (std::size_t i = 0; i < r.shots.size(); ++i) {
            const Shot& s = r.shots[i];
            out += csv_field(r.rally_id);
            out += ',';
            out += csv_field(r.match_id);
            out += ',';
            out += std::to_string(i + 1);
            out += ',';
            out += to_string(s.player);
            out += ',';
            out += format_double(s.timestamp);
            out += ',';
            out += to_string(s.type);
            out += s.back_hand ? ",1" : ",0";
            out += s.around_head ? ",1," : ",0,";
            out += std::to_string(s.hit_area.value());
            out += ',';
            out += std::to_string(s.player_area.value());
            out += ',';
            out += std::to_string(s.opponent_area.value());
            out += ',';
            out += tail;
        }
    }
    return out;
}

std::string serialize_jsonl(const Dataset& d) {
    std::string out;
    for (const Rally& r : d.rallies) {
        ordered_json obj;
        obj["rally_id"] = r.rally_id;
        obj["match_id"] = r.match_id;
        obj["roundscore_A"] = r.info.roundscore_a;
        obj["roundscore_B"] = r.info.roundscore_b;
        obj["getpoint_player"] = to_string(r.info.getpoint_player);
        obj["end_reason"] = to_string(r.info.end_reason);
        ordered_json shots = ordered_json::array();
        for (std::size_t i = 0; i < r.shots.size(); ++i) {
            const Shot& s = r.shots[i];
            ordered_json js;
            js["shot_index"] = i + 1;
            js["player"] = to_string(s.player);
            js["timestamp"] = s.timestamp;
            js["type"] = to_string(s.type);
            js["back_hand"] = s.back_hand ? 1 : 0;
            js["around_head"] = s.around_head ? 1 : 0;
            js["hit_area"] = s.hit_area.value();
            js["player_area"] = s.player_area.value();
            js["opponent_area"] = s.opponent_area.value();
            shots.push_back(std::move(js));
        }
        obj["shots"] = std::move(shots);
        out += obj.dump();
        out.push_back('\n');
    }
    return out;
}

} // namespace

Area::Area(int value) : value_(value) {
    if (value < 1 || value > static_cast<int>(kAreaCount)) throw std::out_of_range("area " + std::to_string(value) + " not in 1..16");
}

std::string_view to_string(Player p) noexcept { return p == Player::A ? "A" : "B"; }
std::string_view to_string(ShotType t) noexcept { return kShotTypeNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(EndReason r) noexcept { return kEndReasonNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(Format f) noexcept { return f == Format::Csv ? "csv" : "jsonl"; }

std::optional<Player> parse_player(std::string_view s) noexcept {
    if (s == "A") return Player::A;
    if (s == "B") return Player::B;
    return std::nullopt;
}

std::optional<ShotType> parse_shot_type(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kShotTypeNames.size(); ++i)
        if (kShotTypeNames[i] == s) return static_cast<ShotType>(i);
    return std::nullopt;
}

std::optional<EndReason> parse_end_reason(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kEndReasonNames.size(); ++i)
        if (kEndReasonNames[i] == s) return static_cast<EndReason>(i);
    return std::nullopt;
}

std::optional<Format> parse_format(std::string_view s) noexcept {
    if (s == "csv") return Format::Csv;
    if (s == "jsonl") return Format::Jsonl;
    return std::nullopt;
}

const std::array<ShotType, kShotTypeCount>& all_shot_types() noexcept {
    static const auto types = [] {
        std::array<ShotType, kShotTypeCount> a{};
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<ShotType>(i);
        return a;
    }();
    return types;
}

const std::array<EndReason, kEndReasonCount>& all_end_reasons() noexcept {
    static const auto reasons = [] {
        std::array<EndReason, kEndReasonCount> a{};
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<EndReason>(i);
        return a;
    }();
    return reasons;
}

Dataset parse_dataset(std::string_view text, Format format) {
    return format == Format::Csv ? parse_csv(text) : parse_jsonl(text);
}

std::string serialize_dataset(const Dataset& d, Format format) {
    return format == Format::Csv ? serialize_csv(d) : serialize_jsonl(d);
}

std::string_view to_string(Violation::Rule r) noexcept {
    switch (r) {
    case Violation::Rule::EmptyRally: return "EmptyRally";
    case Violation::Rule::NegativeTimestamp: return "NegativeTimestamp";
    case Violation::Rule::TimestampOrder: return "TimestampOrderViolation";
    case Violation::Rule::Alternation: return "AlternationViolation";
    case Violation::Rule::FirstShotNotService: return "FirstShotNotService";
    }
    return "Violation";
}

std::vector<Violation> validate_rally(const Rally& r) {
    using Rule = Violation::Rule;
    std::vector<Violation> out;
    if (r.shots.empty()) {
        out.push_back({Rule::EmptyRally, 0});
        return out;
    }
    if (!is_service(r.shots.front().type)) out.push_back({Rule::FirstShotNotService, 1});
    for (std::size_t i = 0; i < r.shots.size(); ++i) {
        if (r.shots[i].timestamp < 0.0) out.push_back({Rule::NegativeTimestamp, i + 1});
        if (i == 0) continue;
        if (r.shots[i].timestamp < r.shots[i - 1].timestamp) out.push_back({Rule::TimestampOrder, i + 1});
        if (r.shots[i].player == r.shots[i - 1].player) out.push_back({Rule::Alternation, i + 1});
    }
    return out;
}

Instance strip_outcome(const Rally& r, Player target) {
    Instance inst;
    inst.rally_id = r.rally_id;
    inst.match_id = r.match_id;
    inst.shots = r.shots;
    inst.roundscore_a = r.info.roundscore_a;
    inst.roundscore_b = r.info.roundscore_b;
    inst.target = target;
    inst.label = r.info.getpoint_player == target ? 1 : 0;
    return inst;
}

std::vector<Instance> make_instances(const Dataset& d, Player target) {
    std::vector<Instance> out;
    out.reserve(d.rallies.size());
    std::map<std::string, std::vector<Player>> set_history;
    for (const Rally& r : d.rallies) {
        auto& history = set_history[r.match_id];
        if (r.info.roundscore_a == 0 && r.info.roundscore_b == 0) history.clear();
        Instance inst = strip_outcome(r, target);
        inst.prior_winners = history;
        out.push_back(std::move(inst));
        history.push_back(r.info.getpoint_player);
    }
    return out;
}

Dataset select_matches(const Dataset& d, std::span<const std::string> match_ids) {
    Dataset out;
    for (const auto& m : d.matches)
        if (std::find(match_ids.begin(), match_ids.end(), m) != match_ids.end()) out.matches.push_back(m);
    for (const Rally& r : d.rallies)
        if (std::find(match_ids.begin(), match_ids.end(), r.match_id) != match_ids.end()) out.rallies.push_back(r);
    return out;
}

Dataset drop_invalid(const Dataset& d) {
    Dataset out;
    out.matches = d.matches;
    for (const Rally& r : d.rallies)
        if (validate_rally(r).empty()) out.rallies.push_back(r);
    return out;
}

} // namespace shotinf::blsr
