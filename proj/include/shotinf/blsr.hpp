#pragma once

// BLSR event language: shots, rallies, datasets, and the CSV/JSONL codecs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shotinf::blsr {

enum class Player : std::uint8_t { A, B };

inline constexpr Player opponent(Player p) noexcept { return p == Player::A ? Player::B : Player::A; }

enum class ShotType : std::uint8_t {
    NetShot,
    ReturnNet,
    Smash,
    WristSmash,
    Lob,
    DefensiveReturnLob,
    Clear,
    Drive,
    DrivenFlight,
    BackCourtDrive,
    Drop,
    PassiveDrop,
    Push,
    Rush,
    DefensiveReturnDrive,
    CrossCourtNetShot,
    ShortService,
    LongService,
};

inline constexpr std::size_t kShotTypeCount = 18;
inline constexpr std::size_t kAreaCount = 16;
inline constexpr std::size_t kEndReasonCount = 5;

enum class EndReason : std::uint8_t { In, Out, TouchNet, NotPassOverNet, Misjudge };

/// Court grid cell, 1..16. Row-major over a 4x4 half-court grid: row 1 is
/// nearest the net, column 1 is leftmost when facing the net. Column 1,
/// column 4 and row 4 form the outside ring.
class Area {
public:
    constexpr Area() = default;
    /// Throws std::out_of_range unless 1 <= value <= 16.
    explicit Area(int value);

    constexpr int value() const noexcept { return value_; }
    constexpr std::size_t index() const noexcept { return static_cast<std::size_t>(value_ - 1); }
    constexpr bool inside_court() const noexcept {
        const int row = (value_ - 1) / 4;
        const int col = (value_ - 1) % 4;
        return row < 3 && col > 0 && col < 3;
    }

    friend constexpr bool operator==(Area, Area) = default;

private:
    int value_ = 1;
};

struct Shot {
    Player player = Player::A;
    double timestamp = 0.0; // seconds from match start
    ShotType type = ShotType::ShortService;
    bool back_hand = false;
    bool around_head = false;
    Area hit_area;
    Area player_area;
    Area opponent_area;

    friend bool operator==(const Shot&, const Shot&) = default;
};

/// Scores are the state at the start of the rally.
struct RallyInfo {
    int roundscore_a = 0;
    int roundscore_b = 0;
    Player getpoint_player = Player::A;
    EndReason end_reason = EndReason::In;

    friend bool operator==(const RallyInfo&, const RallyInfo&) = default;
};

struct Rally {
    std::string rally_id;
    std::string match_id;
    std::vector<Shot> shots;
    RallyInfo info;

    friend bool operator==(const Rally&, const Rally&) = default;
};

struct Dataset {
    std::vector<Rally> rallies;
    std::vector<std::string> matches; // order of first appearance

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// A learning instance: the rally with its outcome removed. The label is
/// from `target`'s perspective. `prior_winners` holds the winners of the
/// preceding rallies of the same set (oldest first); it never contains
/// anything about this rally's own outcome.
struct Instance {
    std::string rally_id;
    std::string match_id;
    std::vector<Shot> shots;
    int roundscore_a = 0;
    int roundscore_b = 0;
    Player target = Player::B;
    int label = 0;
    std::vector<Player> prior_winners;
};

enum class Format { Csv, Jsonl };

// Names as they appear on disk.
std::string_view to_string(Player p) noexcept;
std::string_view to_string(ShotType t) noexcept;
std::string_view to_string(EndReason r) noexcept;
std::string_view to_string(Format f) noexcept;
std::optional<Player> parse_player(std::string_view s) noexcept;
std::optional<ShotType> parse_shot_type(std::string_view s) noexcept;
std::optional<EndReason> parse_end_reason(std::string_view s) noexcept;
std::optional<Format> parse_format(std::string_view s) noexcept;

const std::array<ShotType, kShotTypeCount>& all_shot_types() noexcept;
const std::array<EndReason, kEndReasonCount>& all_end_reasons() noexcept;

inline constexpr bool is_service(ShotType t) noexcept {
    return t == ShotType::ShortService || t == ShotType::LongService;
}

inline constexpr std::string_view kCsvHeader =
    "rally_id,match_id,shot_index,player,timestamp,type,back_hand,around_head,hit_area,"
    "player_area,opponent_area,roundscore_A,roundscore_B,getpoint_player,end_reason";

/// Throws ParseError. Rallies are grouped by rally_id and ordered by
/// (match first appearance, first timestamp).
Dataset parse_dataset(std::string_view text, Format format);

/// Canonical, deterministic text. Inverse of parse_dataset.
std::string serialize_dataset(const Dataset& d, Format format);

struct Violation {
    enum class Rule { EmptyRally, NegativeTimestamp, TimestampOrder, Alternation, FirstShotNotService };
    Rule rule;
    std::size_t shot_index; // 1-based; 0 for rally-level rules

    friend bool operator==(const Violation&, const Violation&) = default;
};

std::string_view to_string(Violation::Rule r) noexcept;

std::vector<Violation> validate_rally(const Rally& r);

Instance strip_outcome(const Rally& r, Player target);

/// One instance per rally, in dataset order, with `prior_winners` filled
/// from the preceding rallies of the same match and set. A set starts at a
/// rally whose scores are 0:0.
std::vector<Instance> make_instances(const Dataset& d, Player target);

/// Subset of `d` restricted to the given matches (keeps dataset order).
Dataset select_matches(const Dataset& d, std::span<const std::string> match_ids);

/// Drops rallies with validation violations.
Dataset drop_invalid(const Dataset& d);

} // namespace shotinf::blsr
