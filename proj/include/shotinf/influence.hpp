#pragma once

// Per-shot influence from a trained model's attention weights.

#include "shotinf/blsr.hpp"
#include "shotinf/model.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shotinf::influence {

struct ShotInfluence {
    std::size_t shot_index = 0; // 1-based
    blsr::Player player = blsr::Player::A;
    blsr::ShotType shot_type = blsr::ShotType::ShortService;
    double influence = 0.0;
};

struct InfluenceReport {
    std::string rally_id;
    std::vector<ShotInfluence> shots;
    double p_win = 0.5;
    std::optional<int> label;
};

/// Influence of shot n is the attention weight of pattern n. With `spread`,
/// each weight is shared equally among the in-range shots of its
/// convolution window instead.
InfluenceReport score_shots(const blsr::Instance& inst, const model::ModelParams& p, const model::ModelConfig& cfg,
                            bool spread = false);

struct RankedRally {
    std::string rally_id;
    double peak_influence = 0.0;
    std::size_t shot_index = 0; // 1-based, shot holding the peak
};

/// Rallies by peak influence, descending; ties broken by rally_id.
std::vector<RankedRally> rank_rallies(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                                      const model::ModelConfig& cfg, std::size_t top_k);

nlohmann::json to_json(const InfluenceReport& r);
nlohmann::json to_json(std::span<const InfluenceReport> reports);
/// Aligned columns for reading in a terminal.
std::string to_text(const InfluenceReport& r);
/// rally_id,shot_index,player,type,influence rows for plotting.
std::string to_csv(std::span<const InfluenceReport> reports);

} // namespace shotinf::influence
