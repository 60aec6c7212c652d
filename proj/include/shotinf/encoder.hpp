#pragma once

// Turns a rally into model inputs: per-shot feature rows (temporal-score
// scaled shot-type embedding, three location embeddings, three flags) and
// the rally-level context vector.

#include "shotinf/autodiff.hpp"
#include "shotinf/blsr.hpp"

#include <span>
#include <vector>

namespace shotinf::enc {

struct EncoderParams {
    ad::Tensor location_table; // 16 x d_loc, shared by hit/player/opponent areas
    ad::Tensor type_table;     // 18 x d_type
    ad::Tensor theta;          // 18 x 1, undefined when temporal scores are off
    ad::Tensor mu;             // 18 x 1, undefined when temporal scores are off
};

struct EncodedRally {
    ad::Tensor features;               // N x (d_type + 3 d_loc + 3)
    std::vector<double> time_proportions;
    ad::Tensor temporal_scores;        // N x 1; undefined when temporal scores are off
};

struct RallyContext {
    int score_diff = 0;         // target minus opponent at rally start
    int consecutive_points = 0; // current scoring run, positive if the target's
    std::vector<double> vector; // {score_diff, consecutive_points}
};

inline constexpr std::size_t kFlagCount = 3; // back_hand, around_head, is_target

/// tau_n = (t_n - t_1) / (t_N - t_1); all zeros when the span is zero.
/// Throws DecreasingTimestamps.
std::vector<double> time_proportions(std::span<const double> timestamps);

/// delta_n = sigmoid(theta[type_n] + mu[type_n] * tau_n), as an N x 1 tensor.
ad::Tensor temporal_scores(ad::Graph& g, std::span<const blsr::ShotType> types, std::span<const double> taus,
                           const EncoderParams& p);

EncodedRally encode_rally(ad::Graph& g, std::span<const blsr::Shot> shots, blsr::Player target,
                          const EncoderParams& p, bool use_temporal_score = true);

/// `history` lists winners of the preceding rallies of the set, oldest first.
RallyContext rally_context(int roundscore_a, int roundscore_b, std::span<const blsr::Player> history,
                           blsr::Player target);

} // namespace shotinf::enc
