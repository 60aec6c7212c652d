#include "shotinf/encoder.hpp"

#include "shotinf/errors.hpp"

#include <string>

namespace shotinf::enc {

std::vector<double> time_proportions(std::span<const double> timestamps) {
    const std::size_t n = timestamps.size();
    std::vector<double> tau(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        if (timestamps[i] < timestamps[i - 1])
            throw DecreasingTimestamps("timestamp of shot " + std::to_string(i + 1) + " precedes shot " + std::to_string(i));
    if (n == 0) return tau;
    const double span = timestamps.back() - timestamps.front();
    if (span <= 0.0) return tau;
    for (std::size_t i = 0; i < n; ++i) tau[i] = (timestamps[i] - timestamps.front()) / span;
    return tau;
}

ad::Tensor temporal_scores(ad::Graph& g, std::span<const blsr::ShotType> types, std::span<const double> taus,
                           const EncoderParams& p) {
    if (types.size() != taus.size()) throw ShapeMismatch("temporal_scores: types and taus differ in length");
    std::vector<std::size_t> idx(types.size());
    for (std::size_t i = 0; i < types.size(); ++i) idx[i] = static_cast<std::size_t>(types[i]);
    const auto theta = ad::gather_rows(g, p.theta, idx);
    const auto mu = ad::gather_rows(g, p.mu, idx);
    const auto tau = ad::Tensor::from({taus.size(), 1}, {taus.begin(), taus.end()});
    return ad::sigmoid(g, ad::add(g, theta, ad::mul(g, mu, tau)));
}

EncodedRally encode_rally(ad::Graph& g, std::span<const blsr::Shot> shots, blsr::Player target,
                          const EncoderParams& p, bool use_temporal_score) {
    const std::size_t n = shots.size();
    if (n == 0) throw ShapeMismatch("encode_rally: rally has no shots");
    std::vector<double> ts(n);
    std::vector<blsr::ShotType> types(n);
    std::vector<std::size_t> type_idx(n), hit(n), player(n), opp(n);
    std::vector<double> flags(n * kFlagCount);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = shots[i];
        ts[i] = s.timestamp;
        types[i] = s.type;
        type_idx[i] = static_cast<std::size_t>(s.type);
        hit[i] = s.hit_area.index();
        player[i] = s.player_area.index();
        opp[i] = s.opponent_area.index();
        flags[i * kFlagCount + 0] = s.back_hand ? 1.0 : 0.0;
        flags[i * kFlagCount + 1] = s.around_head ? 1.0 : 0.0;
        flags[i * kFlagCount + 2] = s.player == target ? 1.0 : 0.0;
    }

    EncodedRally out;
    out.time_proportions = time_proportions(ts);
    ad::Tensor type_emb = ad::gather_rows(g, p.type_table, type_idx);
    if (use_temporal_score) {
        out.temporal_scores = temporal_scores(g, types, out.time_proportions, p);
        type_emb = ad::scale_rows(g, type_emb, out.temporal_scores);
    }
    out.features = ad::concat_cols(g, {type_emb, ad::gather_rows(g, p.location_table, hit),
                                       ad::gather_rows(g, p.location_table, player),
                                       ad::gather_rows(g, p.location_table, opp),
                                       ad::Tensor::from({n, kFlagCount}, std::move(flags))});
    return out;
}

RallyContext rally_context(int roundscore_a, int roundscore_b, std::span<const blsr::Player> history,
                           blsr::Player target) {
    RallyContext ctx;
    const int mine = target == blsr::Player::A ? roundscore_a : roundscore_b;
    const int theirs = target == blsr::Player::A ? roundscore_b : roundscore_a;
    ctx.score_diff = mine - theirs;
    if (!history.empty()) {
        const blsr::Player last = history.back();
        int run = 0;
        for (auto it = history.rbegin(); it != history.rend() && *it == last; ++it) ++run;
        ctx.consecutive_points = last == target ? run : -run;
    }
    ctx.vector = {static_cast<double>(ctx.score_diff), static_cast<double>(ctx.consecutive_points)};
    return ctx;
}

} // namespace shotinf::enc
