#pragma once

// Command-line pipeline: run configuration, the shared train/evaluate path
// used by several subcommands, repeated evaluation and the entry point.

#include "shotinf/blsr.hpp"
#include "shotinf/checkpoint.hpp"
#include "shotinf/model.hpp"
#include "shotinf/synth.hpp"
#include "shotinf/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace shotinf::cli {

enum ExitCode : int { kOk = 0, kDataViolations = 1, kUsage = 2, kRuntime = 3 };

struct RunConfig {
    model::ModelConfig model;
    synth::SynthConfig synth;
    train::Fractions fractions;
    int epochs = 100;
    int patience = 10;
    double learning_rate = 0.001;
    std::uint64_t seed = 1;
    blsr::Player target = blsr::Player::B;
    blsr::Format format = blsr::Format::Csv;
    bool keep_invalid = false;
    bool drop_misjudge = false;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Top-level keys: seed, target, format, keep_invalid, drop_misjudge and the
/// sections "model", "train" (epochs, patience, learning_rate,
/// val_fraction, test_fraction) and "synth" (n_matches, rallies_per_match,
/// mean_rally_length, signal_strength). Keys absent from `j` keep their
/// value in `base`. Throws InvalidConfig on unknown keys or bad values.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json run_config_to_json(const RunConfig& c);

/// Independent stream `stream` derived from a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Rallies that enter training and evaluation: invalid rallies dropped
/// unless keep_invalid, misjudged rallies dropped when drop_misjudge.
blsr::Dataset prepare(const blsr::Dataset& d, const RunConfig& c);

struct Outcome {
    model::Checkpoint checkpoint; // meta carries the split and test metrics
    train::TrainReport report;
};

/// Split by match, train with early stopping and score the test matches.
/// All randomness comes from c.seed.
Outcome fit(const blsr::Dataset& prepared, const RunConfig& c);

struct RepeatSummary {
    std::vector<train::Metrics> runs;
    double mean_auc = 0.0, std_auc = 0.0;
    double mean_brier = 0.0, std_brier = 0.0;
};

/// n_runs independent fits with seeds derived from c.seed. Standard
/// deviations are population deviations (0 for one run).
RepeatSummary repeat_eval(const blsr::Dataset& prepared, const RunConfig& c, int n_runs);
nlohmann::json summary_to_json(const RepeatSummary& s);

/// Entry point. Returns an ExitCode; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace shotinf::cli
