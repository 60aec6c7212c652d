#pragma once

// Synthetic BLSR datasets with a planted, locally decodable outcome rule.
//
// With probability `signal_strength` a rally's winner follows the rule:
//   - if exactly one player hit a smash or wrist smash within the final three
//     shots, that player wins;
//   - otherwise the last hitter wins iff the rally ended "in".
// In the second case the ending is readable from the instance: the final
// shot is hit from inside the court (grid rows 1-3, columns 2-3) exactly
// when the rally ends "in". Remaining rallies get a uniformly random winner.
// getpoint_player and end_reason always agree: the last hitter wins iff the
// end reason is "in".

#include "shotinf/blsr.hpp"

#include <cstdint>
#include <vector>

namespace shotinf::synth {

struct SynthConfig {
    std::size_t n_matches = 19;
    std::size_t rallies_per_match = 74;
    double mean_rally_length = 11.2;
    double signal_strength = 1.0;
    std::uint64_t seed = 1;

    /// Throws InvalidConfig.
    void validate() const;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

inline constexpr std::size_t kMaxRallyLength = 40;

blsr::Dataset generate(const SynthConfig& cfg);

/// Randomly permutes labels across instances (keeps the base rate).
void shuffle_labels(std::vector<blsr::Instance>& instances, std::uint64_t seed);

} // namespace shotinf::synth
