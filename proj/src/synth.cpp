#include "shotinf/synth.hpp"

#include "shotinf/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace shotinf::synth {

namespace {

using blsr::Area;
using blsr::EndReason;
using blsr::Player;
using blsr::ShotType;
using T = ShotType;

// Draws are made from raw mt19937_64 output so datasets are identical across
// standard libraries.
class Draw {
public:
    explicit Draw(std::seed_seq& seq) : rng_(seq) {}

    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    bool chance(double p) { return unit() < p; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(unit() * static_cast<double>(n)); }

    template <typename V>
    const V& weighted(std::span<const std::pair<V, double>> options) {
        double total = 0.0;
        for (const auto& o : options) total += o.second;
        double x = unit() * total;
        for (const auto& o : options) {
            if (x < o.second) return o.first;
            x -= o.second;
        }
        return options.back().first;
    }

private:
    std::mt19937_64 rng_;
};

using Next = std::pair<ShotType, double>;

// Hand-authored plausibility, not fit to data: what a player tends to play in
// reply to the incoming shot.
std::span<const Next> replies(ShotType incoming) {
    static const std::array<std::vector<Next>, blsr::kShotTypeCount> table = [] {
        std::array<std::vector<Next>, blsr::kShotTypeCount> t;
        auto set = [&](ShotType s, std::vector<Next> v) { t[static_cast<std::size_t>(s)] = std::move(v); };
        set(T::ShortService, {{T::NetShot, .35}, {T::Push, .25}, {T::Lob, .25}, {T::Rush, .15}});
        set(T::LongService, {{T::Clear, .35}, {T::Smash, .25}, {T::Drop, .25}, {T::Drive, .15}});
        set(T::NetShot, {{T::NetShot, .25}, {T::Lob, .35}, {T::ReturnNet, .2}, {T::CrossCourtNetShot, .1}, {T::Push, .1}});
        set(T::ReturnNet, {{T::Lob, .5}, {T::NetShot, .3}, {T::Push, .2}});
        set(T::Smash, {{T::DefensiveReturnDrive, .35}, {T::DefensiveReturnLob, .4}, {T::ReturnNet, .1}, {T::Drive, .15}});
        set(T::WristSmash, {{T::DefensiveReturnDrive, .4}, {T::DefensiveReturnLob, .4}, {T::Drive, .2}});
        set(T::Lob, {{T::Smash, .35}, {T::Clear, .25}, {T::Drop, .2}, {T::WristSmash, .1}, {T::PassiveDrop, .1}});
        set(T::DefensiveReturnLob, {{T::Smash, .4}, {T::Clear, .2}, {T::Drop, .2}, {T::WristSmash, .2}});
        set(T::Clear, {{T::Clear, .35}, {T::Drop, .3}, {T::Smash, .2}, {T::BackCourtDrive, .15}});
        set(T::Drive, {{T::Drive, .35}, {T::Push, .2}, {T::DrivenFlight, .2}, {T::Smash, .1}, {T::Rush, .15}});
        set(T::DrivenFlight, {{T::Drive, .4}, {T::Smash, .2}, {T::Lob, .2}, {T::Push, .2}});
        set(T::BackCourtDrive, {{T::Drive, .3}, {T::Smash, .2}, {T::Drop, .25}, {T::Clear, .25}});
        set(T::Drop, {{T::NetShot, .4}, {T::Lob, .4}, {T::Push, .2}});
        set(T::PassiveDrop, {{T::NetShot, .3}, {T::Lob, .3}, {T::Rush, .2}, {T::Push, .2}});
        set(T::Push, {{T::Drive, .3}, {T::Lob, .3}, {T::Smash, .2}, {T::DrivenFlight, .2}});
        set(T::Rush, {{T::DefensiveReturnDrive, .4}, {T::DefensiveReturnLob, .3}, {T::NetShot, .3}});
        set(T::DefensiveReturnDrive, {{T::Drive, .3}, {T::Push, .3}, {T::Rush, .2}, {T::Smash, .2}});
        set(T::CrossCourtNetShot, {{T::Lob, .4}, {T::NetShot, .3}, {T::ReturnNet, .3}});
        return t;
    }();
    return table[static_cast<std::size_t>(incoming)];
}

// Grid row (0 = net, 3 = back ring) a shot of this type is typically hit from.
std::span<const std::pair<int, double>> hit_rows(ShotType t) {
    static const std::vector<std::pair<int, double>> net = {{0, .7}, {1, .3}};
    static const std::vector<std::pair<int, double>> mid = {{1, .5}, {2, .4}, {0, .1}};
    static const std::vector<std::pair<int, double>> back = {{2, .55}, {3, .35}, {1, .1}};
    static const std::vector<std::pair<int, double>> service = {{1, 1.0}};
    switch (t) {
    case T::NetShot: case T::ReturnNet: case T::CrossCourtNetShot: case T::Rush: return net;
    case T::Smash: case T::WristSmash: case T::Clear: case T::Drop: case T::PassiveDrop: case T::BackCourtDrive:
        return back;
    case T::ShortService: case T::LongService: return service;
    default: return mid;
    }
}

Area cell(int row, int col) { return Area(row * 4 + col + 1); }

Area typical_hit_area(Draw& d, ShotType t) {
    const int row = d.weighted(hit_rows(t));
    const int col = d.chance(0.75) ? 1 + static_cast<int>(d.below(2)) : (d.chance(0.5) ? 0 : 3);
    return cell(row, col);
}

Area inside_cell(Draw& d) { return cell(static_cast<int>(d.below(3)), 1 + static_cast<int>(d.below(2))); }

Area ring_cell(Draw& d) {
    static constexpr std::array<int, 10> ring = {1, 4, 5, 8, 9, 12, 13, 14, 15, 16};
    return Area(ring[d.below(ring.size())]);
}

Area near(Draw& d, Area a) {
    if (d.chance(0.6)) return a;
    int row = static_cast<int>(a.index() / 4) + static_cast<int>(d.below(3)) - 1;
    int col = static_cast<int>(a.index() % 4) + static_cast<int>(d.below(3)) - 1;
    return cell(std::clamp(row, 0, 3), std::clamp(col, 0, 3));
}

bool is_smash(ShotType t) { return t == T::Smash || t == T::WristSmash; }

const std::array<std::pair<EndReason, double>, 4> kFaults = {{
    {EndReason::Out, .5}, {EndReason::TouchNet, .2}, {EndReason::NotPassOverNet, .15}, {EndReason::Misjudge, .15},
}};

std::size_t rally_length(Draw& d, double mean) {
    if (mean <= 1.0) return 1;
    const double p = 1.0 / mean;
    const double u = d.unit();
    const auto extra = static_cast<std::size_t>(std::floor(std::log1p(-u) / std::log1p(-p)));
    return std::min(kMaxRallyLength, 1 + extra);
}

double round_ms(double t) { return std::round(t * 1000.0) / 1000.0; }

bool set_over(int a, int b) {
    const int hi = std::max(a, b);
    return (hi >= 21 && std::abs(a - b) >= 2) || hi >= 30;
}

} // namespace

void SynthConfig::validate() const {
    if (n_matches == 0) throw InvalidConfig("synth: n_matches must be >= 1");
    if (rallies_per_match == 0) throw InvalidConfig("synth: rallies_per_match must be >= 1");
    if (!(mean_rally_length >= 1.0) || !std::isfinite(mean_rally_length))
        throw InvalidConfig("synth: mean_rally_length must be >= 1");
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) throw InvalidConfig("synth: signal_strength must be in [0, 1]");
}

blsr::Dataset generate(const SynthConfig& cfg) {
    cfg.validate();
    blsr::Dataset out;
    char id[48];
    for (std::size_t m = 0; m < cfg.n_matches; ++m) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(m)};
        Draw d(seq);
        std::snprintf(id, sizeof id, "m%02zu", m + 1);
        const std::string match_id = id;
        out.matches.push_back(match_id);

        int score_a = 0, score_b = 0;
        Player server = d.chance(0.5) ? Player::A : Player::B;
        double clock = d.uniform(5.0, 30.0);
        for (std::size_t r = 0; r < cfg.rallies_per_match; ++r) {
            if (set_over(score_a, score_b)) score_a = score_b = 0;
            blsr::Rally rally;
            std::snprintf(id, sizeof id, "%s-r%03zu", match_id.c_str(), r + 1);
            rally.rally_id = id;
            rally.match_id = match_id;
            rally.info.roundscore_a = score_a;
            rally.info.roundscore_b = score_b;

            const std::size_t n = rally_length(d, cfg.mean_rally_length);
            Player hitter = server;
            ShotType type = d.chance(0.7) ? T::ShortService : T::LongService;
            for (std::size_t i = 0; i < n; ++i) {
                if (i > 0) {
                    type = d.weighted(replies(type));
                    clock += d.uniform(0.5, 3.0);
                }
                blsr::Shot s;
                s.player = hitter;
                s.timestamp = round_ms(clock);
                s.type = type;
                s.hit_area = typical_hit_area(d, type);
                if (i + 1 == n) s.hit_area = d.chance(0.5) ? inside_cell(d) : ring_cell(d);
                s.player_area = near(d, s.hit_area);
                s.opponent_area = Area(1 + static_cast<int>(d.below(blsr::kAreaCount)));
                const bool defensive = type == T::NetShot || type == T::DefensiveReturnDrive ||
                                       type == T::DefensiveReturnLob || type == T::ReturnNet;
                s.back_hand = d.chance(defensive ? 0.25 : 0.1);
                s.around_head = d.chance(is_smash(type) || type == T::Clear || type == T::Drop ? 0.2 : 0.02);
                rally.shots.push_back(s);
                hitter = blsr::opponent(hitter);
            }

            const blsr::Shot& last = rally.shots.back();
            Player winner;
            if (d.chance(cfg.signal_strength)) {
                bool smash_a = false, smash_b = false;
                for (std::size_t i = n - std::min<std::size_t>(3, n); i < n; ++i)
                    if (is_smash(rally.shots[i].type)) (rally.shots[i].player == Player::A ? smash_a : smash_b) = true;
                if (smash_a != smash_b) winner = smash_a ? Player::A : Player::B;
                else winner = last.hit_area.inside_court() ? last.player : blsr::opponent(last.player);
            } else {
                winner = d.chance(0.5) ? Player::A : Player::B;
            }
            rally.info.getpoint_player = winner;
            rally.info.end_reason = winner == last.player ? EndReason::In : d.weighted<EndReason>(kFaults);

            (winner == Player::A ? score_a : score_b) += 1;
            server = winner;
            clock += d.uniform(15.0, 40.0);
            out.rallies.push_back(std::move(rally));
        }
    }
    return out;
}

void shuffle_labels(std::vector<blsr::Instance>& instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = instances.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(instances[i - 1].label, instances[j].label);
    }
}

} // namespace shotinf::synth
