#include "shotinf/influence.hpp"

#include <algorithm>
#include <cstdio>

namespace shotinf::influence {

InfluenceReport score_shots(const blsr::Instance& inst, const model::ModelParams& p, const model::ModelConfig& cfg,
                            bool spread) {
    ad::Graph g(false);
    const auto trace = model::forward(g, inst, p, cfg);
    const auto alpha = trace.attention();
    const std::size_t n = alpha.size();

    std::vector<double> weight(n, 0.0);
    if (spread) {
        const auto half = static_cast<std::ptrdiff_t>(cfg.kernel_size / 2);
        for (std::size_t t = 0; t < n; ++t) {
            const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(t) - half);
            const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, static_cast<std::ptrdiff_t>(t) + half);
            const double share = alpha[t] / static_cast<double>(hi - lo + 1);
            for (auto s = lo; s <= hi; ++s) weight[static_cast<std::size_t>(s)] += share;
        }
    } else {
        weight = alpha;
    }

    InfluenceReport r;
    r.rally_id = inst.rally_id;
    r.p_win = trace.win_probability();
    r.label = inst.label;
    r.shots.reserve(n);
    for (std::size_t t = 0; t < n; ++t) r.shots.push_back({t + 1, inst.shots[t].player, inst.shots[t].type, weight[t]});
    return r;
}

std::vector<RankedRally> rank_rallies(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                                      const model::ModelConfig& cfg, std::size_t top_k) {
    if (top_k == 0) return {};
    std::vector<RankedRally> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        const auto r = score_shots(inst, p, cfg);
        const auto it = std::max_element(r.shots.begin(), r.shots.end(),
                                         [](const ShotInfluence& a, const ShotInfluence& b) { return a.influence < b.influence; });
        out.push_back({inst.rally_id, it->influence, it->shot_index});
    }
    std::sort(out.begin(), out.end(), [](const RankedRally& a, const RankedRally& b) {
        if (a.peak_influence != b.peak_influence) return a.peak_influence > b.peak_influence;
        return a.rally_id < b.rally_id;
    });
    if (out.size() > top_k) out.resize(top_k);
    return out;
}

nlohmann::json to_json(const InfluenceReport& r) {
    using nlohmann::json;
    json shots = json::array();
    for (const auto& s : r.shots)
        shots.push_back(json{{"shot_index", s.shot_index},
                             {"player", std::string(blsr::to_string(s.player))},
                             {"type", std::string(blsr::to_string(s.shot_type))},
                             {"influence", s.influence}});
    return json{{"rally_id", r.rally_id},
                {"p_win", r.p_win},
                {"label", r.label ? json(*r.label) : json(nullptr)},
                {"shots", std::move(shots)}};
}

nlohmann::json to_json(std::span<const InfluenceReport> reports) {
    auto arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    return arr;
}

std::string to_text(const InfluenceReport& r) {
    char buf[160];
    std::string out = "rally " + r.rally_id;
    std::snprintf(buf, sizeof buf, "  p_win=%.4f", r.p_win);
    out += buf;
    if (r.label) out += *r.label ? "  (won)" : "  (lost)";
    out += "\n  shot  player  type                     influence\n";
    for (const auto& s : r.shots) {
        const int bar = static_cast<int>(s.influence * 40.0 + 0.5);
        std::snprintf(buf, sizeof buf, "  %4zu  %-6s  %-23s  %9.4f  %s\n", s.shot_index,
                      std::string(blsr::to_string(s.player)).c_str(), std::string(blsr::to_string(s.shot_type)).c_str(),
                      s.influence, std::string(static_cast<std::size_t>(std::max(bar, 0)), '#').c_str());
        out += buf;
    }
    return out;
}

std::string to_csv(std::span<const InfluenceReport> reports) {
    std::string out = "rally_id,shot_index,player,type,influence\n";
    char buf[64];
    for (const auto& r : reports) {
        for (const auto& s : r.shots) {
            std::snprintf(buf, sizeof buf, "%.17g", s.influence);
            out += r.rally_id + "," + std::to_string(s.shot_index) + "," + std::string(blsr::to_string(s.player)) + "," +
                   std::string(blsr::to_string(s.shot_type)) + "," + buf + "\n";
        }
    }
    return out;
}

} // namespace shotinf::influence
