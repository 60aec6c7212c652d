#include "shotinf/trainer.hpp"

#include "shotinf/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <random>
#include <set>

namespace shotinf::train {

SplitSpec split_by_match(const blsr::Dataset& d, const Fractions& f, std::uint64_t seed) {
    const std::size_t m = d.matches.size();
    if (m < 3) throw TooFewMatches("need at least 3 matches to split, got " + std::to_string(m));
    if (f.val < 0 || f.test < 0 || f.val + f.test >= 1.0) throw InvalidConfig("split fractions must leave room for training");
    std::vector<std::string> order = d.matches;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto count = [m](double frac) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(m) + 1e-9)));
    };
    std::size_t n_val = count(f.val);
    std::size_t n_test = count(f.test);
    while (n_val + n_test > m - 1) {
        if (n_test >= n_val && n_test > 1) --n_test;
        else if (n_val > 1) --n_val;
        else break;
    }
    SplitSpec s;
    s.val_matches.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.test_matches.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                          order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    s.train_matches.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
    // Keep each list in dataset order so the partition reads naturally.
    auto by_dataset_order = [&](std::vector<std::string>& v) {
        std::vector<std::string> sorted;
        for (const auto& id : d.matches)
            if (std::find(v.begin(), v.end(), id) != v.end()) sorted.push_back(id);
        v = std::move(sorted);
    };
    by_dataset_order(s.train_matches);
    by_dataset_order(s.val_matches);
    by_dataset_order(s.test_matches);
    return s;
}

SplitData apply_split(const blsr::Dataset& d, const SplitSpec& spec) {
    std::set<std::string> seen;
    for (const auto* part : {&spec.train_matches, &spec.val_matches, &spec.test_matches})
        for (const auto& id : *part)
            if (!seen.insert(id).second) throw InvalidConfig("match '" + id + "' appears in more than one split");
    const std::set<std::string> all(d.matches.begin(), d.matches.end());
    if (seen != all) throw InvalidConfig("split does not cover exactly the dataset's matches");
    return {blsr::select_matches(d, spec.train_matches), blsr::select_matches(d, spec.val_matches),
            blsr::select_matches(d, spec.test_matches)};
}

std::vector<int> labels_of(std::span<const blsr::Instance> instances) {
    std::vector<int> y(instances.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = instances[i].label;
    return y;
}

std::vector<double> predict_all_serial(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                                       const model::ModelConfig& cfg) {
    std::vector<double> out(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) out[i] = model::predict(instances[i], p, cfg);
    return out;
}

std::vector<double> predict_all(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                                const model::ModelConfig& cfg) {
    std::vector<double> out(instances.size());
    std::exception_ptr error;
    const auto n = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = model::predict(instances[static_cast<std::size_t>(i)], p, cfg);
        } catch (...) {
#pragma omp critical(shotinf_predict_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return out;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeMismatch("auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j); // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]]) {
                rank_sum += mid_rank;
                ++pos;
            }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw SingleClass("auc needs both positive and negative labels");
    const double u = rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double brier(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeMismatch("brier: scores and labels differ in length");
    if (scores.empty()) throw ShapeMismatch("brier: no predictions");
    double acc = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double r = scores[i] - (labels[i] ? 1.0 : 0.0);
        acc += r * r;
    }
    return acc / static_cast<double>(scores.size());
}

Metrics evaluate(std::span<const blsr::Instance> instances, const model::ModelParams& p,
                 const model::ModelConfig& cfg) {
    const auto scores = predict_all(instances, p, cfg);
    const auto labels = labels_of(instances);
    return {auc(scores, labels), brier(scores, labels)};
}

TrainResult train(std::span<const blsr::Instance> train_set, std::span<const blsr::Instance> val_set,
                  model::ModelParams init, const model::ModelConfig& cfg, const TrainOptions& opt) {
    cfg.validate();
    if (opt.epochs < 0 || opt.patience < 1) throw InvalidConfig("epochs must be >= 0 and patience >= 1");
    const auto start = std::chrono::steady_clock::now();

    TrainResult best;
    best.report.seed = opt.seed;
    model::ModelParams params = std::move(init);
    auto tensors = params.tensors();
    ad::AdamState adam = ad::make_adam_state(tensors, opt.adam);
    best.params = params;
    best.adam = adam;
    if (opt.epochs > 0 && (train_set.empty() || val_set.empty()))
        throw InvalidConfig("training and validation sets must be non-empty");

    std::mt19937_64 rng(opt.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const auto val_labels = labels_of(val_set);
    int since_best = 0;
    // The objective sums cross-entropy over the training set and adds the
    // penalty once, so each single-instance step carries 1/D of it.
    model::ModelConfig step_cfg = cfg;
    if (!train_set.empty()) step_cfg.lambda = cfg.lambda / static_cast<double>(train_set.size());

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        try {
            for (std::size_t i : order) {
                params.zero_grad();
                ad::Graph g;
                const auto trace = model::forward(g, train_set[i], params, cfg);
                const auto loss = model::compute_loss(g, trace.p_win, train_set[i].label, params, step_cfg);
                g.backward(loss.total);
                ad::adam_step(tensors, adam);
                loss_sum += loss.total.item();
            }
        } catch (const NonFinite& e) {
            throw NonFinite("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const auto scores = predict_all(val_set, params, cfg);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.val_auc = auc(scores, val_labels);
        rec.val_brier = brier(scores, val_labels);
        best.report.history.push_back(rec);

        if (!best.report.best_val_auc || rec.val_auc > *best.report.best_val_auc) {
            best.report.best_val_auc = rec.val_auc;
            best.report.best_epoch = epoch;
            best.params = params;
            best.adam = adam;
            since_best = 0;
        } else if (++since_best >= opt.patience) {
            break;
        }
    }
    best.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return best;
}

nlohmann::json report_to_json(const TrainReport& r, bool include_timing) {
    using nlohmann::json;
    json history = json::array();
    for (const auto& e : r.history)
        history.push_back(json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_auc", e.val_auc}, {"val_bs", e.val_brier}});
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j{
        {"seed", r.seed},
        {"epochs_run", r.history.size()},
        {"best_epoch", r.best_epoch},
        {"best_val_auc", opt(r.best_val_auc)},
        {"test_auc", opt(r.test_auc)},
        {"test_bs", opt(r.test_brier)},
        {"history", std::move(history)},
    };
    if (include_timing) j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

std::string format_history(const TrainReport& r) {
    std::string out = "epoch      loss   val_auc    val_bs\n";
    char line[96];
    for (const auto& e : r.history) {
        std::snprintf(line, sizeof line, "%5d  %8.5f  %8.5f  %8.5f%s\n", e.epoch, e.train_loss, e.val_auc, e.val_brier,
                      e.epoch == r.best_epoch ? "  *" : "");
        out += line;
    }
    return out;
}

} // namespace shotinf::train
