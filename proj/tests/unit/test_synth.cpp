#include "doctest.h"

#include "oracles.hpp"
#include "shotinf/errors.hpp"
#include "shotinf/synth.hpp"

#include <numeric>
#include <set>

using namespace shotinf;
using namespace shotinf::synth;
using blsr::EndReason;

TEST_CASE("same seed gives byte-identical files") {
    SynthConfig c;
    c.n_matches = 3;
    c.seed = 11;
    const auto a = generate(c);
    const auto b = generate(c);
    CHECK(blsr::serialize_dataset(a, blsr::Format::Csv) == blsr::serialize_dataset(b, blsr::Format::Csv));
    CHECK(blsr::serialize_dataset(a, blsr::Format::Jsonl) == blsr::serialize_dataset(b, blsr::Format::Jsonl));
    c.seed = 12;
    CHECK(blsr::serialize_dataset(generate(c), blsr::Format::Csv) != blsr::serialize_dataset(a, blsr::Format::Csv));
}

TEST_CASE("default corpus shape") {
    const auto d = generate({});
    CHECK(d.matches.size() == 19);
    CHECK(static_cast<double>(d.rallies.size()) >= 1409 * 0.95);
    CHECK(static_cast<double>(d.rallies.size()) <= 1409 * 1.05);
    std::size_t shots = 0, wins_b = 0;
    std::set<std::string> ids;
    for (const auto& r : d.rallies) {
        CHECK(blsr::validate_rally(r).empty());
        CHECK(r.shots.size() <= kMaxRallyLength);
        shots += r.shots.size();
        wins_b += r.info.getpoint_player == blsr::Player::B;
        ids.insert(r.rally_id);
    }
    CHECK(ids.size() == d.rallies.size());
    const double mean_len = static_cast<double>(shots) / static_cast<double>(d.rallies.size());
    CHECK(mean_len > 8.0);
    CHECK(mean_len < 14.0);
    const double base = static_cast<double>(wins_b) / static_cast<double>(d.rallies.size());
    CHECK(base >= 0.4);
    CHECK(base <= 0.6);
}

TEST_CASE("full signal obeys the planted rule on every rally") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SynthConfig c;
        c.n_matches = 4;
        c.seed = seed;
        for (const auto& r : generate(c).rallies) {
            INFO(r.rally_id);
            CHECK(oracle::planted_winner(r) == r.info.getpoint_player);
            CHECK(oracle::visible_winner(r) == r.info.getpoint_player);
        }
    }
}

TEST_CASE("end reason agrees with the winner") {
    SynthConfig c;
    c.n_matches = 4;
    c.signal_strength = 0.3;
    std::size_t follows = 0, total = 0;
    for (const auto& r : generate(c).rallies) {
        const bool last_wins = r.shots.back().player == r.info.getpoint_player;
        CHECK(last_wins == (r.info.end_reason == EndReason::In));
        follows += oracle::visible_winner(r) == r.info.getpoint_player;
        ++total;
    }
    // Random winners still agree with the rule about half the time: 0.3 + 0.7 / 2.
    const double rate = static_cast<double>(follows) / static_cast<double>(total);
    CHECK(rate > 0.55);
    CHECK(rate < 0.75);
}

TEST_CASE("final hit area marks the ending when no smash decides") {
    SynthConfig c;
    c.n_matches = 4;
    for (const auto& r : generate(c).rallies) {
        const std::size_t n = r.shots.size();
        bool a = false, b = false;
        for (std::size_t i = n >= 3 ? n - 3 : 0; i < n; ++i) {
            const auto t = r.shots[i].type;
            if (t == blsr::ShotType::Smash || t == blsr::ShotType::WristSmash)
                (r.shots[i].player == blsr::Player::A ? a : b) = true;
        }
        if (a != b) continue;
        CHECK(r.shots.back().hit_area.inside_court() == (r.info.end_reason == EndReason::In));
    }
}

TEST_CASE("scores follow the set") {
    SynthConfig c;
    c.n_matches = 2;
    const auto d = generate(c);
    for (std::size_t i = 1; i < d.rallies.size(); ++i) {
        const auto& prev = d.rallies[i - 1];
        const auto& cur = d.rallies[i];
        if (prev.match_id != cur.match_id) continue;
        const int a = prev.info.roundscore_a + (prev.info.getpoint_player == blsr::Player::A);
        const int b = prev.info.roundscore_b + (prev.info.getpoint_player == blsr::Player::B);
        const bool set_over = (std::max(a, b) >= 21 && std::abs(a - b) >= 2) || std::max(a, b) == 30;
        if (set_over) {
            CHECK(cur.info.roundscore_a == 0);
            CHECK(cur.info.roundscore_b == 0);
        } else {
            CHECK(cur.info.roundscore_a == a);
            CHECK(cur.info.roundscore_b == b);
            CHECK(cur.shots.front().player == prev.info.getpoint_player);
        }
    }
}

TEST_CASE("invalid configs") {
    SynthConfig c;
    c.n_matches = 0;
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = {};
    c.rallies_per_match = 0;
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = {};
    c.mean_rally_length = 0.5;
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = {};
    c.signal_strength = 1.5;
    CHECK_THROWS_AS(generate(c), InvalidConfig);
    c = {};
    c.signal_strength = std::nan("");
    CHECK_THROWS_AS(generate(c), InvalidConfig);
}

TEST_CASE("shuffled labels keep the base rate") {
    SynthConfig c;
    c.n_matches = 3;
    auto inst = blsr::make_instances(generate(c), blsr::Player::B);
    const auto labels = [&] {
        std::vector<int> y;
        for (const auto& i : inst) y.push_back(i.label);
        return y;
    };
    const auto before = labels();
    shuffle_labels(inst, 5);
    const auto after = labels();
    CHECK(std::accumulate(before.begin(), before.end(), 0) == std::accumulate(after.begin(), after.end(), 0));
    CHECK(before != after);
    auto again = blsr::make_instances(generate(c), blsr::Player::B);
    shuffle_labels(again, 5);
    for (std::size_t i = 0; i < inst.size(); ++i) CHECK(again[i].label == inst[i].label);
}
