#pragma once

// Match-level splitting, the Adam training loop with early stopping on
// validation AUC, and the evaluation metrics.

#include "shotinf/autodiff.hpp"
#include "shotinf/blsr.hpp"
#include "shotinf/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shotinf::train {

struct SplitSpec {
    std::vector<std::string> train_matches;
    std::vector<std::string> val_matches;
    std::vector<std::string> test_matches;
};

struct Fractions {
    double train = 0.85;
    double val = 0.05;
    double test = 0.10;

    friend bool operator==(const Fractions&, const Fractions&) = default;
};

/// Shuffles whole matches with `seed`; validation and test each receive
/// max(1, floor(fraction * matches)) matches, training the rest.
/// Throws TooFewMatches with fewer than 3 matches.
SplitSpec split_by_match(const blsr::Dataset& d, const Fractions& f, std::uint64_t seed);

struct SplitData {
    blsr::Dataset train;
    blsr::Dataset val;
    blsr::Dataset test;
};

/// Throws InvalidConfig unless the spec partitions the dataset's matches.
SplitData apply_split(const blsr::Dataset& d, const SplitSpec& spec);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_auc = 0.0;
    double val_brier = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> history;
    int best_epoch = 0; // 0: initial parameters kept
    std::optional<double> best_val_auc;
    std::optional<double> test_auc;
    std::optional<double> test_brier;
    double wall_clock_seconds = 0.0;
    std::uint64_t seed = 0;
};

struct TrainOptions {
    int epochs = 100;
    int patience = 10;
    std::uint64_t seed = 0; // shuffling order
    kernels::AdamHyper adam;
};

struct TrainResult {
    model::ModelParams params; // parameters of the best validation epoch
    ad::AdamState adam;        // optimizer state at that epoch
    TrainReport report;
};

/// Per-instance Adam updates over a seeded shuffle each epoch. The step loss
/// is ce_i + (lambda / D) * reg for D training instances, so one epoch of
/// steps follows the summed objective sum_i ce_i + lambda * reg. Stops once
/// validation AUC has not improved for `patience` epochs. Throws NonFinite
/// naming the epoch if training diverges.
TrainResult train(std::span<const blsr::Instance> train_set, std::span<const blsr::Instance> val_set,
                  model::ModelParams init, const model::ModelConfig& cfg, const TrainOptions& opt);

/// Win probabilities for each instance; OpenMP-parallel across instances.
std::vector<double> predict_all(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                                const model::ModelConfig& cfg);
/// Single-threaded reference for predict_all.
std::vector<double> predict_all_serial(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                                       const model::ModelConfig& cfg);

std::vector<int> labels_of(std::span<const blsr::Instance> instances);

/// Mann-Whitney AUC: fraction of positive/negative pairs ordered correctly,
/// ties counted as one half. Throws SingleClass.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean squared error between probabilities and 0/1 labels.
double brier(std::span<const double> scores, std::span<const int> labels);

struct Metrics {
    double auc = 0.0;
    double brier = 0.0;
};

Metrics evaluate(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                 const model::ModelConfig& cfg);

nlohmann::json report_to_json(const TrainReport& r, bool include_timing);

/// Fixed-order table: epoch, loss, val_auc, val_bs.
std::string format_history(const TrainReport& r);

} // namespace shotinf::train
