#include "shotinf/cli.hpp"

#include "shotinf/errors.hpp"
#include "shotinf/influence.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace shotinf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_object(const json& j, const char* what) {
    if (!j.is_object()) throw InvalidConfig(std::string(what) + " must be a JSON object");
}

template <typename T>
T number(const json& v, const std::string& key) {
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw InvalidConfig("config key '" + key + "' must be a boolean");
        return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (std::is_unsigned_v<T> && !v.is_number_unsigned()))
            throw InvalidConfig("config key '" + key + "' must be an integer");
        return v.get<T>();
    } else {
        if (!v.is_number()) throw InvalidConfig("config key '" + key + "' must be a number");
        return v.get<T>();
    }
}

std::string text(const json& v, const std::string& key) {
    if (!v.is_string()) throw InvalidConfig("config key '" + key + "' must be a string");
    return v.get<std::string>();
}

blsr::Player player_of(const std::string& s) {
    const auto p = blsr::parse_player(s);
    if (!p) throw InvalidConfig("target must be A or B, got '" + s + "'");
    return *p;
}

blsr::Format format_of(const std::string& s) {
    const auto f = blsr::parse_format(s);
    if (!f) throw InvalidConfig("format must be csv or jsonl, got '" + s + "'");
    return *f;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

// Flags shared by the subcommands. Optional ones only override the config
// file when given.
struct Flags {
    std::string data;
    std::string config;
    std::string out = "out";
    std::string checkpoint;
    std::optional<std::string> format;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> target;
    std::optional<int> epochs;
    std::optional<int> patience;
    std::optional<double> signal_strength;
    std::optional<std::size_t> matches;
    bool no_two_cnns = false, no_cnn = false, no_bigru = false, no_temporal_score = false;
    bool no_attention = false, no_rally_input = false, literal_eq6 = false;
    bool keep_invalid = false, drop_misjudge = false;
    bool spread = false;
    int runs = 10;
    std::size_t top_k = 0;
    std::string report_format = "json";
    std::string split = "all";
    std::string rally;
};

RunConfig resolve(const Flags& f) {
    RunConfig c;
    if (!f.config.empty()) {
        json j;
        try {
            j = json::parse(read_file(f.config));
        } catch (const json::parse_error& e) {
            throw InvalidConfig("config '" + f.config + "' is not valid JSON: " + e.what());
        }
        c = run_config_from_json(j, c);
    }
    if (f.format) c.format = format_of(*f.format);
    else if (f.data.ends_with(".jsonl")) c.format = blsr::Format::Jsonl;
    if (f.seed) c.seed = *f.seed;
    if (f.target) c.target = player_of(*f.target);
    if (f.epochs) c.epochs = *f.epochs;
    if (f.patience) c.patience = *f.patience;
    if (f.signal_strength) c.synth.signal_strength = *f.signal_strength;
    if (f.matches) c.synth.n_matches = *f.matches;
    if (f.no_two_cnns) c.model.use_two_cnns = false;
    if (f.no_cnn) c.model.use_cnn = false;
    if (f.no_bigru) c.model.use_bigru = false;
    if (f.no_temporal_score) c.model.use_temporal_score = false;
    if (f.no_attention) c.model.use_attention = false;
    if (f.no_rally_input) c.model.use_rally_input = false;
    if (f.literal_eq6) c.model.literal_eq6_normalization = true;
    if (f.keep_invalid) c.keep_invalid = true;
    if (f.drop_misjudge) c.drop_misjudge = true;
    c.synth.seed = c.seed;
    c.model.validate();
    c.synth.validate();
    if (c.epochs < 0 || c.patience < 1) throw InvalidConfig("epochs must be >= 0 and patience >= 1");
    return c;
}

blsr::Dataset load_data(const Flags& f, const RunConfig& c) {
    if (f.data.empty()) throw InvalidConfig("--data is required");
    return blsr::parse_dataset(read_file(f.data), c.format);
}

fs::path checkpoint_path(const Flags& f) {
    return f.checkpoint.empty() ? fs::path(f.out) / "checkpoint.json" : fs::path(f.checkpoint);
}

model::Checkpoint load_checkpoint_file(const Flags& f) {
    return model::load_checkpoint(read_file(checkpoint_path(f).string()));
}

blsr::Player target_for(const Flags& f, const model::Checkpoint& ck) {
    return f.target ? player_of(*f.target) : ck.meta.target;
}

blsr::Dataset split_part(const blsr::Dataset& d, const model::Checkpoint& ck, const std::string& which) {
    if (which == "all") return d;
    if (which == "train") return blsr::select_matches(d, ck.meta.train_matches);
    if (which == "val") return blsr::select_matches(d, ck.meta.val_matches);
    if (which == "test") return blsr::select_matches(d, ck.meta.test_matches);
    throw InvalidConfig("--split must be all, train, val or test");
}

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON run configuration");
    app->add_option("--seed", f.seed, "Master seed");
    app->add_option("--out", f.out, "Output directory")->capture_default_str();
}

void add_data(CLI::App* app, Flags& f, bool required = true) {
    auto* opt = app->add_option("--data", f.data, "Dataset file (CSV or JSONL)");
    if (required) opt->required();
    app->add_option("--format", f.format, "csv or jsonl (default: by extension)");
    app->add_flag("--keep-invalid", f.keep_invalid, "Keep rallies that fail validation");
    app->add_flag("--drop-misjudge", f.drop_misjudge, "Drop rallies ending in misjudge");
}

void add_training(CLI::App* app, Flags& f) {
    app->add_option("--target", f.target, "Target player A or B");
    app->add_option("--epochs", f.epochs, "Maximum epochs");
    app->add_option("--patience", f.patience, "Early stopping patience");
    app->add_flag("--no-two-cnns", f.no_two_cnns, "Single CNN for both players");
    app->add_flag("--no-cnn", f.no_cnn, "Dense projection instead of the CNNs");
    app->add_flag("--no-bigru", f.no_bigru, "Dense projection instead of the BiGRU");
    app->add_flag("--no-temporal-score", f.no_temporal_score, "Unscaled shot-type embeddings");
    app->add_flag("--no-attention", f.no_attention, "Uniform pooling weights");
    app->add_flag("--no-rally-input", f.no_rally_input, "Drop the rally context vector");
    app->add_flag("--literal-eq6", f.literal_eq6, "Normalize attention scores by their plain sum");
}

void add_checkpoint(CLI::App* app, Flags& f) {
    app->add_option("--checkpoint", f.checkpoint, "Checkpoint file (default: <out>/checkpoint.json)");
    app->add_option("--target", f.target, "Target player A or B (default: from checkpoint)");
}

int cmd_validate(const Flags& f, std::ostream& out) {
    const RunConfig c = resolve(f);
    const auto d = load_data(f, c);
    std::size_t total = 0;
    for (const auto& r : d.rallies) {
        for (const auto& v : blsr::validate_rally(r)) {
            out << r.rally_id;
            if (v.shot_index) out << " shot " << v.shot_index;
            out << ": " << blsr::to_string(v.rule) << "\n";
            ++total;
        }
    }
    out << d.rallies.size() << " rallies, " << total << " violations\n";
    return total ? kDataViolations : kOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
    const RunConfig c = resolve(f);
    const auto d = synth::generate(c.synth);
    const fs::path path = fs::path(f.out) / (c.format == blsr::Format::Csv ? "synth.csv" : "synth.jsonl");
    write_file(path, blsr::serialize_dataset(d, c.format));
    std::size_t shots = 0;
    for (const auto& r : d.rallies) shots += r.shots.size();
    out << "wrote " << d.rallies.size() << " rallies (" << shots << " shots, " << d.matches.size() << " matches) to "
        << path.string() << "\n";
    return kOk;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve(f);
    const auto data = prepare(load_data(f, c), c);
    const Outcome o = fit(data, c);
    const fs::path ck_path = checkpoint_path(f);
    write_file(ck_path, model::save_checkpoint(o.checkpoint));
    json report = train::report_to_json(o.report, false);
    report["config"] = run_config_to_json(c);
    write_file(fs::path(f.out) / "train_report.json", report.dump(1) + "\n");
    out << train::format_history(o.report);
    char line[96];
    std::snprintf(line, sizeof line, "test_auc %.6f\ntest_bs %.6f\n", o.report.test_auc.value_or(NAN),
                  o.report.test_brier.value_or(NAN));
    out << line;
    err << "trained in " << o.report.wall_clock_seconds << " s; checkpoint " << ck_path.string() << "\n";
    return kOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
    const RunConfig c = resolve(f);
    const auto ck = load_checkpoint_file(f);
    const auto data = split_part(prepare(load_data(f, c), c), ck, f.split);
    const auto inst = blsr::make_instances(data, target_for(f, ck));
    const auto m = train::evaluate(inst, ck.params, ck.config);
    char line[96];
    std::snprintf(line, sizeof line, "rallies %zu\nauc %.6f\nbs %.6f\n", inst.size(), m.auc, m.brier);
    out << line;
    return kOk;
}

int cmd_predict(const Flags& f, std::ostream& out) {
    const RunConfig c = resolve(f);
    const auto ck = load_checkpoint_file(f);
    const auto data = split_part(prepare(load_data(f, c), c), ck, f.split);
    const auto inst = blsr::make_instances(data, target_for(f, ck));
    const auto p = train::predict_all(inst, ck.params, ck.config);
    out << "rally_id,p_win\n";
    char buf[32];
    for (std::size_t i = 0; i < inst.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", p[i]);
        out << inst[i].rally_id << "," << buf << "\n";
    }
    return kOk;
}

int cmd_influence(const Flags& f, std::ostream& out) {
    const RunConfig c = resolve(f);
    const auto ck = load_checkpoint_file(f);
    const auto data = split_part(prepare(load_data(f, c), c), ck, f.split);
    auto inst = blsr::make_instances(data, target_for(f, ck));
    if (!f.rally.empty()) {
        std::erase_if(inst, [&](const blsr::Instance& i) { return i.rally_id != f.rally; });
        if (inst.empty()) throw InvalidConfig("no rally with id '" + f.rally + "'");
    }
    std::vector<influence::InfluenceReport> reports;
    reports.reserve(inst.size());
    for (const auto& i : inst) reports.push_back(influence::score_shots(i, ck.params, ck.config, f.spread));

    fs::path path;
    if (f.report_format == "json") {
        path = fs::path(f.out) / "influence.json";
        write_file(path, influence::to_json(reports).dump(1) + "\n");
    } else if (f.report_format == "text") {
        path = fs::path(f.out) / "influence.txt";
        std::string body;
        for (const auto& r : reports) body += influence::to_text(r) + "\n";
        write_file(path, body);
    } else if (f.report_format == "csv") {
        path = fs::path(f.out) / "influence.csv";
        write_file(path, influence::to_csv(reports));
    } else {
        throw InvalidConfig("--report-format must be json, text or csv");
    }
    out << "wrote " << reports.size() << " influence reports to " << path.string() << "\n";
    if (f.top_k > 0) {
        out << "rally_id,peak_influence,shot_index\n";
        char buf[32];
        for (const auto& r : influence::rank_rallies(inst, ck.params, ck.config, f.top_k)) {
            std::snprintf(buf, sizeof buf, "%.6f", r.peak_influence);
            out << r.rally_id << "," << buf << "," << r.shot_index << "\n";
        }
    }
    return kOk;
}

int cmd_repeat(const Flags& f, std::ostream& out) {
    if (f.runs < 1) throw InvalidConfig("--runs must be >= 1");
    const RunConfig c = resolve(f);
    const auto data = prepare(load_data(f, c), c);
    const auto s = repeat_eval(data, c, f.runs);
    const std::string body = summary_to_json(s).dump(1) + "\n";
    write_file(fs::path(f.out) / "repeat_eval.json", body);
    out << body;
    return kOk;
}

} // namespace

RunConfig run_config_from_json(const json& j, RunConfig base) {
    require_object(j, "run config");
    RunConfig c = std::move(base);
    for (const auto& [key, v] : j.items()) {
        if (key == "seed") c.seed = number<std::uint64_t>(v, key);
        else if (key == "target") c.target = player_of(text(v, key));
        else if (key == "format") c.format = format_of(text(v, key));
        else if (key == "keep_invalid") c.keep_invalid = number<bool>(v, key);
        else if (key == "drop_misjudge") c.drop_misjudge = number<bool>(v, key);
        else if (key == "model") c.model = model::config_from_json(v, c.model);
        else if (key == "train") {
            require_object(v, "train section");
            for (const auto& [k, x] : v.items()) {
                if (k == "epochs") c.epochs = number<int>(x, k);
                else if (k == "patience") c.patience = number<int>(x, k);
                else if (k == "learning_rate") c.learning_rate = number<double>(x, k);
                else if (k == "val_fraction") c.fractions.val = number<double>(x, k);
                else if (k == "test_fraction") c.fractions.test = number<double>(x, k);
                else throw InvalidConfig("unknown train config key '" + k + "'");
            }
            c.fractions.train = 1.0 - c.fractions.val - c.fractions.test;
        } else if (key == "synth") {
            require_object(v, "synth section");
            for (const auto& [k, x] : v.items()) {
                if (k == "n_matches") c.synth.n_matches = number<std::size_t>(x, k);
                else if (k == "rallies_per_match") c.synth.rallies_per_match = number<std::size_t>(x, k);
                else if (k == "mean_rally_length") c.synth.mean_rally_length = number<double>(x, k);
                else if (k == "signal_strength") c.synth.signal_strength = number<double>(x, k);
                else throw InvalidConfig("unknown synth config key '" + k + "'");
            }
        } else {
            throw InvalidConfig("unknown config key '" + key + "'");
        }
    }
    if (!(c.learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
    if (c.epochs < 0 || c.patience < 1) throw InvalidConfig("epochs must be >= 0 and patience >= 1");
    if (!(c.fractions.val > 0.0 && c.fractions.test > 0.0 && c.fractions.train > 0.0))
        throw InvalidConfig("val_fraction and test_fraction must be positive and sum to less than 1");
    return c;
}

json run_config_to_json(const RunConfig& c) {
    return json{
        {"seed", c.seed},
        {"target", std::string(blsr::to_string(c.target))},
        {"format", std::string(blsr::to_string(c.format))},
        {"keep_invalid", c.keep_invalid},
        {"drop_misjudge", c.drop_misjudge},
        {"model", model::config_to_json(c.model)},
        {"train", json{{"epochs", c.epochs},
                       {"patience", c.patience},
                       {"learning_rate", c.learning_rate},
                       {"val_fraction", c.fractions.val},
                       {"test_fraction", c.fractions.test}}},
        {"synth", json{{"n_matches", c.synth.n_matches},
                       {"rallies_per_match", c.synth.rallies_per_match},
                       {"mean_rally_length", c.synth.mean_rally_length},
                       {"signal_strength", c.synth.signal_strength}}},
    };
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

blsr::Dataset prepare(const blsr::Dataset& d, const RunConfig& c) {
    blsr::Dataset out = c.keep_invalid ? d : blsr::drop_invalid(d);
    if (c.drop_misjudge)
        std::erase_if(out.rallies, [](const blsr::Rally& r) { return r.info.end_reason == blsr::EndReason::Misjudge; });
    return out;
}

Outcome fit(const blsr::Dataset& prepared, const RunConfig& c) {
    const auto spec = train::split_by_match(prepared, c.fractions, derive_seed(c.seed, 1));
    const auto parts = train::apply_split(prepared, spec);
    const auto train_set = blsr::make_instances(parts.train, c.target);
    const auto val_set = blsr::make_instances(parts.val, c.target);
    const auto test_set = blsr::make_instances(parts.test, c.target);

    train::TrainOptions opt;
    opt.epochs = c.epochs;
    opt.patience = c.patience;
    opt.seed = derive_seed(c.seed, 3);
    opt.adam.lr = c.learning_rate;
    auto result = train::train(train_set, val_set, model::init_params(c.model, derive_seed(c.seed, 2)), c.model, opt);
    const auto m = train::evaluate(test_set, result.params, c.model);
    result.report.test_auc = m.auc;
    result.report.test_brier = m.brier;
    result.report.seed = c.seed;

    Outcome o;
    o.checkpoint.config = c.model;
    o.checkpoint.params = std::move(result.params);
    o.checkpoint.adam = std::move(result.adam);
    auto& meta = o.checkpoint.meta;
    meta.best_epoch = result.report.best_epoch;
    meta.epochs_run = static_cast<int>(result.report.history.size());
    meta.best_val_auc = result.report.best_val_auc;
    meta.test_auc = m.auc;
    meta.test_brier = m.brier;
    meta.seed = c.seed;
    meta.target = c.target;
    meta.train_matches = spec.train_matches;
    meta.val_matches = spec.val_matches;
    meta.test_matches = spec.test_matches;
    o.report = std::move(result.report);
    return o;
}

RepeatSummary repeat_eval(const blsr::Dataset& prepared, const RunConfig& c, int n_runs) {
    if (n_runs < 1) throw InvalidConfig("repeat_eval needs n_runs >= 1");
    RepeatSummary s;
    for (int r = 0; r < n_runs; ++r) {
        RunConfig rc = c;
        rc.seed = derive_seed(c.seed, 100 + static_cast<std::uint64_t>(r));
        const auto o = fit(prepared, rc);
        s.runs.push_back({*o.report.test_auc, *o.report.test_brier});
    }
    const double n = static_cast<double>(n_runs);
    for (const auto& m : s.runs) {
        s.mean_auc += m.auc / n;
        s.mean_brier += m.brier / n;
    }
    for (const auto& m : s.runs) {
        s.std_auc += (m.auc - s.mean_auc) * (m.auc - s.mean_auc) / n;
        s.std_brier += (m.brier - s.mean_brier) * (m.brier - s.mean_brier) / n;
    }
    s.std_auc = std::sqrt(s.std_auc);
    s.std_brier = std::sqrt(s.std_brier);
    return s;
}

json summary_to_json(const RepeatSummary& s) {
    json runs = json::array();
    for (const auto& m : s.runs) runs.push_back(json{{"auc", m.auc}, {"bs", m.brier}});
    return json{{"runs", std::move(runs)},
                {"n_runs", s.runs.size()},
                {"auc", json{{"mean", s.mean_auc}, {"std", s.std_auc}}},
                {"bs", json{{"mean", s.mean_brier}, {"std", s.std_brier}}}};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Shot influence and rally win probability for badminton"};
    app.name("shotinf");
    app.require_subcommand(1);
    Flags f;

    auto* validate = app.add_subcommand("validate", "Parse a dataset and report rule violations");
    add_common(validate, f);
    add_data(validate, f);

    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset to <out>/synth.csv|jsonl");
    add_common(synth_cmd, f);
    synth_cmd->add_option("--format", f.format, "csv or jsonl");
    synth_cmd->add_option("--signal-strength", f.signal_strength, "Probability that the planted rule decides a rally");
    synth_cmd->add_option("--matches", f.matches, "Number of matches");

    auto* train_cmd = app.add_subcommand("train", "Fit a model; writes checkpoint.json and train_report.json");
    add_common(train_cmd, f);
    add_data(train_cmd, f);
    add_training(train_cmd, f);
    train_cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint path (default: <out>/checkpoint.json)");

    auto* evaluate = app.add_subcommand("evaluate", "Print AUC and Brier score of a checkpoint");
    auto* predict = app.add_subcommand("predict", "Print p_win per rally");
    auto* infl = app.add_subcommand("influence", "Write per-shot influence reports");
    for (auto* sub : {evaluate, predict, infl}) {
        add_common(sub, f);
        add_data(sub, f);
        add_checkpoint(sub, f);
        sub->add_option("--split", f.split, "all, train, val or test (matches recorded in the checkpoint)")
            ->capture_default_str();
    }
    infl->add_flag("--spread", f.spread, "Share each attention weight across its convolution window");
    infl->add_option("--report-format", f.report_format, "json, text or csv")->capture_default_str();
    infl->add_option("--rally", f.rally, "Only this rally_id");
    infl->add_option("--top-k", f.top_k, "Also print the k rallies with the highest peak influence");

    auto* repeat = app.add_subcommand("repeat-eval", "Repeat train/evaluate with derived seeds; mean and std");
    add_common(repeat, f);
    add_data(repeat, f);
    add_training(repeat, f);
    repeat->add_option("--runs", f.runs, "Number of runs")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kUsage;
    }

    try {
        if (*validate) return cmd_validate(f, out);
        if (*synth_cmd) return cmd_synth(f, out);
        if (*train_cmd) return cmd_train(f, out, err);
        if (*evaluate) return cmd_evaluate(f, out);
        if (*predict) return cmd_predict(f, out);
        if (*infl) return cmd_influence(f, out);
        if (*repeat) return cmd_repeat(f, out);
    } catch (const ParseError& e) {
        err << "data error: " << e.what() << "\n";
        return kDataViolations;
    } catch (const InvalidConfig& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    err << app.help();
    return kUsage;
}

} // namespace shotinf::cli
