#pragma once

// Single-document JSON checkpoints: model config, every parameter tensor
// (row-major), Adam state and training metadata.

#include "shotinf/autodiff.hpp"
#include "shotinf/blsr.hpp"
#include "shotinf/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shotinf::model {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMeta {
    int best_epoch = 0;
    int epochs_run = 0;
    std::optional<double> best_val_auc;
    std::optional<double> test_auc;
    std::optional<double> test_brier;
    std::uint64_t seed = 0;
    blsr::Player target = blsr::Player::B;
    std::vector<std::string> train_matches;
    std::vector<std::string> val_matches;
    std::vector<std::string> test_matches;
};

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    ad::AdamState adam;
    CheckpointMeta meta;
};

nlohmann::json config_to_json(const ModelConfig& cfg);
/// Applies the keys present in `j` on top of `base`. Throws InvalidConfig on
/// unknown keys or wrongly typed values.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

std::string save_checkpoint(const Checkpoint& ck);
/// Throws InvalidConfig on version, shape or name mismatches.
Checkpoint load_checkpoint(std::string_view text);

} // namespace shotinf::model
