#include "doctest.h"

#include "oracles.hpp"
#include "shotinf/encoder.hpp"
#include "shotinf/errors.hpp"

#include <cmath>

using namespace shotinf;
using namespace shotinf::enc;
using blsr::Player;
using blsr::ShotType;

namespace {

EncoderParams seeded_params(std::uint64_t seed, std::size_t d_loc = 10, std::size_t d_type = 15) {
    std::mt19937_64 rng(seed);
    return {oracle::random_tensor(rng, {16, d_loc}), oracle::random_tensor(rng, {18, d_type}),
            oracle::random_tensor(rng, {18, 1}), oracle::random_tensor(rng, {18, 1})};
}

} // namespace

TEST_CASE("time proportions") {
    CHECK(time_proportions(std::vector<double>{0, 2, 4, 10}) == std::vector<double>{0, 0.2, 0.4, 1.0});
    CHECK(time_proportions(std::vector<double>{7}) == std::vector<double>{0});
    CHECK(time_proportions(std::vector<double>{3, 3, 3}) == std::vector<double>{0, 0, 0});
    CHECK_THROWS_AS(time_proportions(std::vector<double>{1, 0.5}), DecreasingTimestamps);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> step(0.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> t{step(rng) * 100};
        for (int k = 0; k < 1 + i % 20; ++k) t.push_back(t.back() + step(rng));
        const auto tau = time_proportions(t);
        CHECK(tau.front() == 0.0);
        CHECK(tau.back() == 1.0);
        for (std::size_t k = 1; k < tau.size(); ++k) CHECK(tau[k] >= tau[k - 1]);
        for (double v : tau) CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("temporal scores") {
    EncoderParams p{{}, {}, ad::Tensor::zeros({18, 1}), ad::Tensor::zeros({18, 1})};
    ad::Graph g(false);
    const std::vector<ShotType> types{ShotType::Smash, ShotType::Lob, ShotType::Clear};
    const std::vector<double> taus{0, 0.5, 1};
    auto d = temporal_scores(g, types, taus, p);
    for (double v : d.values()) CHECK(v == 0.5);

    p.theta.values()[static_cast<std::size_t>(ShotType::Smash)] = 1.0;
    p.mu.values()[static_cast<std::size_t>(ShotType::Smash)] = 1.0;
    auto one = temporal_scores(g, std::vector<ShotType>{ShotType::Smash}, std::vector<double>{1.0}, p);
    CHECK(one.values()[0] == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(one.values()[0] == doctest::Approx(oracle::sigmoid(2.0)).epsilon(1e-15));

    p.theta.values()[static_cast<std::size_t>(ShotType::Lob)] = -0.7;
    auto flat = temporal_scores(g, std::vector<ShotType>{ShotType::Lob, ShotType::Lob},
                                std::vector<double>{0.1, 0.9}, p);
    CHECK(flat.values()[0] == flat.values()[1]);
}

TEST_CASE("zero tables leave only the flag columns") {
    EncoderParams p{ad::Tensor::zeros({16, 10}), ad::Tensor::zeros({18, 15}), ad::Tensor::zeros({18, 1}),
                    ad::Tensor::zeros({18, 1})};
    std::mt19937_64 rng(4);
    const auto r = oracle::random_rally(rng, 5);
    ad::Graph g(false);
    const auto e = encode_rally(g, r.shots, Player::B, p);
    REQUIRE(e.features.shape() == ad::Shape{5, 48});
    for (std::size_t n = 0; n < 5; ++n) {
        for (std::size_t j = 0; j < 45; ++j) CHECK(e.features.at(n, j) == 0.0);
        CHECK(e.features.at(n, 45) == (r.shots[n].back_hand ? 1.0 : 0.0));
        CHECK(e.features.at(n, 46) == (r.shots[n].around_head ? 1.0 : 0.0));
        CHECK(e.features.at(n, 47) == (r.shots[n].player == Player::B ? 1.0 : 0.0));
    }
}

TEST_CASE("two-shot rally equals the hand-composed rows") {
    const auto p = seeded_params(8);
    std::vector<blsr::Shot> shots(2);
    shots[0] = {Player::A, 10.0, ShotType::ShortService, false, true, blsr::Area(6), blsr::Area(7), blsr::Area(11)};
    shots[1] = {Player::B, 12.5, ShotType::Lob, true, false, blsr::Area(2), blsr::Area(1), blsr::Area(16)};
    ad::Graph g(false);
    const auto e = encode_rally(g, shots, Player::B, p);
    CHECK(e.time_proportions == std::vector<double>{0.0, 1.0});
    for (std::size_t n = 0; n < 2; ++n) {
        const auto& s = shots[n];
        const std::size_t t = static_cast<std::size_t>(s.type);
        const double delta = oracle::sigmoid(p.theta.values()[t] + p.mu.values()[t] * e.time_proportions[n]);
        CHECK(e.temporal_scores.values()[n] == doctest::Approx(delta).epsilon(1e-15));
        std::vector<double> want;
        for (std::size_t j = 0; j < 15; ++j) want.push_back(delta * p.type_table.at(t, j));
        for (auto a : {s.hit_area, s.player_area, s.opponent_area})
            for (std::size_t j = 0; j < 10; ++j) want.push_back(p.location_table.at(a.index(), j));
        want.push_back(s.back_hand);
        want.push_back(s.around_head);
        want.push_back(s.player == Player::B);
        for (std::size_t j = 0; j < 48; ++j) CHECK(e.features.at(n, j) == doctest::Approx(want[j]).epsilon(1e-15));
    }
}

TEST_CASE("saturated theta passes the raw type embedding") {
    auto p = seeded_params(12);
    for (auto& v : p.theta.values()) v = 60.0;
    std::mt19937_64 rng(1);
    const auto r = oracle::random_rally(rng, 3);
    ad::Graph g(false);
    const auto e = encode_rally(g, r.shots, Player::A, p);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t j = 0; j < 15; ++j)
            CHECK(e.features.at(n, j) ==
                  doctest::Approx(p.type_table.at(static_cast<std::size_t>(r.shots[n].type), j)).epsilon(1e-12));
}

TEST_CASE("without temporal scores the embedding is unscaled") {
    const auto p = seeded_params(13);
    std::mt19937_64 rng(2);
    const auto r = oracle::random_rally(rng, 4);
    ad::Graph g(false);
    const auto e = encode_rally(g, r.shots, Player::A, p, false);
    CHECK_FALSE(e.temporal_scores.defined());
    for (std::size_t n = 0; n < 4; ++n)
        CHECK(e.features.at(n, 3) == p.type_table.at(static_cast<std::size_t>(r.shots[n].type), 3));
}

TEST_CASE("changing shot m alters only row m") {
    const auto p = seeded_params(14);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        auto r = oracle::random_rally(rng, 6);
        const std::size_t m = 1 + static_cast<std::size_t>(trial) % 5;
        ad::Graph g(false);
        const auto before = encode_rally(g, r.shots, Player::B, p);
        r.shots[m].hit_area = blsr::Area(1 + (r.shots[m].hit_area.value() % 16));
        r.shots[m].type = r.shots[m].type == ShotType::Drop ? ShotType::Push : ShotType::Drop;
        r.shots[m].back_hand = !r.shots[m].back_hand;
        const auto after = encode_rally(g, r.shots, Player::B, p);
        for (std::size_t n = 0; n < 6; ++n) {
            bool same = true;
            for (std::size_t j = 0; j < 48; ++j) same = same && before.features.at(n, j) == after.features.at(n, j);
            CHECK(same == (n != m));
        }
    }
}

TEST_CASE("rally context") {
    CHECK(rally_context(5, 3, {}, Player::B).score_diff == -2);
    CHECK(rally_context(5, 3, {}, Player::A).score_diff == 2);
    CHECK(rally_context(5, 3, {}, Player::B).consecutive_points == 0);
    const std::vector<Player> h{Player::B, Player::B, Player::A};
    CHECK(rally_context(1, 2, h, Player::B).consecutive_points == -1);
    CHECK(rally_context(1, 2, h, Player::A).consecutive_points == 1);
    const std::vector<Player> run{Player::A, Player::B, Player::B, Player::B};
    const auto c = rally_context(1, 3, run, Player::B);
    CHECK(c.consecutive_points == 3);
    CHECK(c.vector == std::vector<double>{2.0, 3.0});
}
