#include "doctest.h"

#include "oracles.hpp"
#include "shotinf/influence.hpp"
#include "shotinf/synth.hpp"

#include <json.hpp>

#include <sstream>

using namespace shotinf;
using namespace shotinf::influence;

namespace {

std::vector<blsr::Instance> instances(std::uint64_t seed = 7) {
    synth::SynthConfig c;
    c.n_matches = 2;
    c.rallies_per_match = 20;
    c.seed = seed;
    return blsr::make_instances(synth::generate(c), blsr::Player::B);
}

double total(const InfluenceReport& r) {
    double s = 0;
    for (const auto& x : r.shots) s += x.influence;
    return s;
}

} // namespace

TEST_CASE("influence is the attention weight of each pattern") {
    const model::ModelConfig cfg;
    const auto p = model::init_params(cfg, 3);
    for (const auto& inst : instances()) {
        const auto r = score_shots(inst, p, cfg);
        ad::Graph g(false);
        const auto alpha = model::forward(g, inst, p, cfg).attention();
        REQUIRE(r.shots.size() == inst.shots.size());
        CHECK(r.rally_id == inst.rally_id);
        CHECK(r.label == inst.label);
        for (std::size_t n = 0; n < alpha.size(); ++n) {
            CHECK(r.shots[n].influence == alpha[n]);
            CHECK(r.shots[n].shot_index == n + 1);
            CHECK(r.shots[n].player == inst.shots[n].player);
            CHECK(r.shots[n].shot_type == inst.shots[n].type);
            CHECK(r.shots[n].influence >= 0.0);
        }
        CHECK(std::abs(total(r) - 1.0) <= 1e-9);
    }
}

TEST_CASE("single-shot rally gets all the influence") {
    const model::ModelConfig cfg;
    const auto p = model::init_params(cfg, 4);
    auto inst = instances().front();
    inst.shots.resize(1);
    const auto r = score_shots(inst, p, cfg);
    REQUIRE(r.shots.size() == 1);
    CHECK(r.shots[0].influence == 1.0);
    CHECK(score_shots(inst, p, cfg, true).shots[0].influence == 1.0);
}

TEST_CASE("zero attention weights spread influence evenly") {
    const model::ModelConfig cfg;
    auto p = model::init_params(cfg, 5);
    for (auto& v : p.attention_weight.values()) v = 0.0;
    for (const auto& inst : instances()) {
        const auto r = score_shots(inst, p, cfg);
        for (const auto& s : r.shots)
            CHECK(s.influence == doctest::Approx(1.0 / static_cast<double>(inst.shots.size())).epsilon(1e-12));
    }
}

TEST_CASE("spread shares each weight over its window") {
    const model::ModelConfig cfg;
    REQUIRE(cfg.kernel_size == 3);
    const auto p = model::init_params(cfg, 6);
    for (const auto& inst : instances(9)) {
        const auto plain = score_shots(inst, p, cfg);
        const auto spread = score_shots(inst, p, cfg, true);
        const std::size_t n = plain.shots.size();
        std::vector<double> want(n, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            std::vector<std::size_t> window;
            for (std::size_t s = 0; s < n; ++s)
                if (s + 1 >= t && s <= t + 1) window.push_back(s);
            for (std::size_t s : window) want[s] += plain.shots[t].influence / static_cast<double>(window.size());
        }
        for (std::size_t s = 0; s < n; ++s) CHECK(spread.shots[s].influence == doctest::Approx(want[s]).epsilon(1e-12));
        CHECK(std::abs(total(spread) - 1.0) <= 1e-9);
        CHECK(spread.p_win == plain.p_win);
    }
}

TEST_CASE("scoring leaves the parameters untouched") {
    const model::ModelConfig cfg;
    const auto p = model::init_params(cfg, 8);
    const auto before = p.checksum();
    const auto inst = instances();
    (void)rank_rallies(inst, p, cfg, 5);
    for (const auto& i : inst) (void)score_shots(i, p, cfg, true);
    CHECK(p.checksum() == before);
}

TEST_CASE("rank_rallies") {
    const model::ModelConfig cfg;
    const auto p = model::init_params(cfg, 10);
    const auto inst = instances();
    CHECK(rank_rallies(inst, p, cfg, 0).empty());
    const auto all = rank_rallies(inst, p, cfg, 1000);
    CHECK(all.size() == inst.size());
    for (std::size_t i = 1; i < all.size(); ++i) {
        CHECK(all[i - 1].peak_influence >= all[i].peak_influence);
        if (all[i - 1].peak_influence == all[i].peak_influence) CHECK(all[i - 1].rally_id < all[i].rally_id);
    }
    const auto top = rank_rallies(inst, p, cfg, 3);
    REQUIRE(top.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(top[i].rally_id == all[i].rally_id);
    for (const auto& r : all) {
        const auto it = std::find_if(inst.begin(), inst.end(), [&](const auto& x) { return x.rally_id == r.rally_id; });
        const auto scored = score_shots(*it, p, cfg);
        CHECK(scored.shots[r.shot_index - 1].influence == r.peak_influence);
    }

    // Equal peaks fall back to rally id order.
    auto p0 = p;
    for (auto& v : p0.attention_weight.values()) v = 0.0;
    std::vector<blsr::Instance> same;
    for (const auto& i : inst)
        if (i.shots.size() == 4) same.push_back(i);
    if (same.size() >= 2) {
        std::reverse(same.begin(), same.end());
        const auto tied = rank_rallies(same, p0, cfg, same.size());
        for (std::size_t i = 1; i < tied.size(); ++i) CHECK(tied[i - 1].rally_id < tied[i].rally_id);
    }
}

TEST_CASE("report formats") {
    InfluenceReport r;
    r.rally_id = "m01-r002";
    r.p_win = 0.75;
    r.label = 1;
    r.shots = {{1, blsr::Player::A, blsr::ShotType::ShortService, 0.25},
               {2, blsr::Player::B, blsr::ShotType::Smash, 0.75}};

    const auto j = to_json(r);
    CHECK(j.at("rally_id") == "m01-r002");
    CHECK(j.at("p_win") == 0.75);
    CHECK(j.at("label") == 1);
    REQUIRE(j.at("shots").size() == 2);
    CHECK(j.at("shots")[1].at("shot_index") == 2);
    CHECK(j.at("shots")[1].at("player") == "B");
    CHECK(j.at("shots")[1].at("type") == std::string(blsr::to_string(blsr::ShotType::Smash)));
    CHECK(j.at("shots")[1].at("influence") == 0.75);
    r.label.reset();
    CHECK(to_json(r).at("label").is_null());

    const std::vector<InfluenceReport> both{r, r};
    CHECK(to_json(std::span<const InfluenceReport>(both)).size() == 2);

    const auto csv = to_csv(both);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "rally_id,shot_index,player,type,influence");
    std::getline(in, line);
    CHECK(line == "m01-r002,1,A," + std::string(blsr::to_string(blsr::ShotType::ShortService)) + ",0.25");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);

    const auto text = to_text(r);
    CHECK(text.rfind("rally m01-r002  p_win=0.7500", 0) == 0);
    CHECK(text.find("0.7500  ##############################") != std::string::npos);
}
