#include "doctest.h"

#include "shotinf/cli.hpp"
#include "shotinf/errors.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace shotinf;
using namespace shotinf::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result call(std::vector<std::string> args) {
    args.insert(args.begin(), "shotinf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("shotinf_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kSmallConfig = R"({
  "seed": 4,
  "model": {"d_cnn": 8, "d_gru": 8, "d_loc": 4, "d_type": 5},
  "train": {"epochs": 2, "patience": 2},
  "synth": {"n_matches": 5, "rallies_per_match": 16, "mean_rally_length": 6}
})";

} // namespace

TEST_CASE("run config json") {
    RunConfig base;
    CHECK(run_config_from_json(run_config_to_json(base)) == base);
    const auto c = run_config_from_json(json::parse(kSmallConfig));
    CHECK(c.seed == 4);
    CHECK(c.model.d_cnn == 8);
    CHECK(c.epochs == 2);
    CHECK(c.patience == 2);
    CHECK(c.synth.n_matches == 5);
    CHECK(c.learning_rate == 0.001);
    CHECK(run_config_from_json(run_config_to_json(c)) == c);
    CHECK_THROWS_AS(run_config_from_json(json{{"sede", 1}}), InvalidConfig);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"epoch", 1}}}}), InvalidConfig);
    CHECK_THROWS_AS(run_config_from_json(json{{"target", "C"}}), InvalidConfig);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"patience", 0}}}}), InvalidConfig);
    CHECK_THROWS_AS(run_config_from_json(json::array()), InvalidConfig);
}

TEST_CASE("derived seeds") {
    CHECK(derive_seed(1, 1) != derive_seed(1, 2));
    CHECK(derive_seed(1, 1) != derive_seed(2, 1));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("usage errors exit 2") {
    CHECK(call({}).code == kUsage);
    CHECK(call({"frobnicate"}).code == kUsage);
    CHECK(call({"train", "--epochs", "many"}).code == kUsage);
    CHECK(call({"train", "--bogus"}).code == kUsage);
    CHECK(call({"--help"}).code == kOk);
    const auto dir = scratch("usage");
    spit(dir / "bad.json", R"({"trian": {}})");
    spit(dir / "d.csv", "");
    const auto r = call({"train", "--data", (dir / "d.csv").string(), "--config", (dir / "bad.json").string()});
    CHECK(r.code == kUsage);
    CHECK(r.err.find("trian") != std::string::npos);
}

TEST_CASE("validate reports violations") {
    const auto dir = scratch("validate");
    spit(dir / "c.json", kSmallConfig);
    REQUIRE(call({"synth", "--config", (dir / "c.json").string(), "--out", dir.string()}).code == kOk);
    const auto data = (dir / "synth.csv").string();
    auto ok = call({"validate", "--data", data});
    CHECK(ok.code == kOk);
    CHECK(ok.out.find(", 0 violations") != std::string::npos);

    // The second shot of the first multi-shot rally gets the first shot's player.
    std::istringstream in(slurp(data));
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() > 4);
    auto fields = [](const std::string& l) {
        std::vector<std::string> f;
        std::istringstream ss(l);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        return f;
    };
    std::size_t at = 2;
    while (at < lines.size() && fields(lines[at])[0] != fields(lines[at - 1])[0]) ++at;
    REQUIRE(at < lines.size());
    auto second = fields(lines[at]);
    second[3] = fields(lines[at - 1])[3];
    lines[at].clear();
    for (std::size_t i = 0; i < second.size(); ++i) lines[at] += (i ? "," : "") + second[i];
    std::string broken;
    for (const auto& l : lines) broken += l + "\n";
    spit(dir / "broken.csv", broken);
    const auto bad = call({"validate", "--data", (dir / "broken.csv").string()});
    CHECK(bad.code == kDataViolations);
    CHECK(bad.out.find(", 0 violations") == std::string::npos);

    spit(dir / "garbage.csv", "rally_id,nothing\nx,y\n");
    CHECK(call({"validate", "--data", (dir / "garbage.csv").string()}).code == kDataViolations);
    CHECK(call({"validate", "--data", (dir / "missing.csv").string()}).code == kRuntime);
}

TEST_CASE("synth, train, evaluate, predict and influence") {
    const auto dir = scratch("pipeline");
    spit(dir / "c.json", kSmallConfig);
    const auto cfg = (dir / "c.json").string();
    REQUIRE(call({"synth", "--config", cfg, "--out", dir.string(), "--format", "jsonl"}).code == kOk);
    const auto data = (dir / "synth.jsonl").string();
    REQUIRE(fs::exists(data));

    const auto tr = call({"train", "--data", data, "--config", cfg, "--out", (dir / "run").string()});
    REQUIRE(tr.code == kOk);
    CHECK(tr.out.find("epoch") != std::string::npos);
    CHECK(tr.out.find("test_auc") != std::string::npos);
    const auto report = json::parse(slurp(dir / "run" / "train_report.json"));
    CHECK(report.at("history").size() <= 2);
    CHECK_FALSE(report.contains("wall_clock_seconds"));
    const auto ck = model::load_checkpoint(slurp(dir / "run" / "checkpoint.json"));
    CHECK(ck.config.d_cnn == 8);
    CHECK(ck.meta.train_matches.size() == 3);

    const auto ev = call({"evaluate", "--data", data, "--out", (dir / "run").string(), "--split", "test"});
    REQUIRE(ev.code == kOk);
    CHECK(ev.out.rfind("rallies ", 0) == 0);
    CHECK(ev.out.find("\nauc ") != std::string::npos);
    CHECK(ev.out.find("\nbs ") != std::string::npos);

    const auto pr = call({"predict", "--data", data, "--out", (dir / "run").string()});
    REQUIRE(pr.code == kOk);
    CHECK(pr.out.rfind("rally_id,p_win\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(pr.out.begin(), pr.out.end(), '\n')) == 1 + 5 * 16);

    for (const std::string fmt : {"json", "text", "csv"}) {
        const auto inf = call({"influence", "--data", data, "--out", (dir / "run").string(), "--report-format", fmt,
                               "--split", "val", "--top-k", "2"});
        REQUIRE(inf.code == kOk);
        CHECK(fs::exists(dir / "run" / ("influence." + (fmt == "text" ? std::string("txt") : fmt))));
        CHECK(inf.out.find("rally_id,peak_influence,shot_index") != std::string::npos);
    }
    const auto reports = json::parse(slurp(dir / "run" / "influence.json"));
    REQUIRE(!reports.empty());
    double sum = 0;
    for (const auto& s : reports[0].at("shots")) sum += s.at("influence").get<double>();
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    CHECK(call({"evaluate", "--data", data, "--out", (dir / "none").string()}).code == kRuntime);
    CHECK(call({"influence", "--data", data, "--out", (dir / "run").string(), "--report-format", "xml"}).code ==
          kUsage);
}

TEST_CASE("flags override the config file") {
    const auto dir = scratch("flags");
    spit(dir / "c.json", kSmallConfig);
    const auto cfg = (dir / "c.json").string();
    REQUIRE(call({"synth", "--config", cfg, "--out", dir.string()}).code == kOk);
    const auto tr = call({"train", "--data", (dir / "synth.csv").string(), "--config", cfg, "--out",
                          (dir / "run").string(), "--epochs", "1", "--no-attention", "--target", "A", "--seed", "9"});
    REQUIRE(tr.code == kOk);
    const auto report = json::parse(slurp(dir / "run" / "train_report.json"));
    CHECK(report.at("history").size() == 1);
    CHECK(report.at("config").at("seed") == 9);
    CHECK(report.at("config").at("target") == "A");
    CHECK(report.at("config").at("model").at("use_attention") == false);
    CHECK(report.at("config").at("model").at("d_cnn") == 8);
}

TEST_CASE("training twice gives identical files") {
    const auto dir = scratch("repeat");
    spit(dir / "c.json", kSmallConfig);
    const auto cfg = (dir / "c.json").string();
    REQUIRE(call({"synth", "--config", cfg, "--out", dir.string()}).code == kOk);
    const auto data = (dir / "synth.csv").string();
    REQUIRE(call({"train", "--data", data, "--config", cfg, "--out", (dir / "a").string()}).code == kOk);
    REQUIRE(call({"train", "--data", data, "--config", cfg, "--out", (dir / "b").string()}).code == kOk);
    CHECK(slurp(dir / "a" / "checkpoint.json") == slurp(dir / "b" / "checkpoint.json"));
    CHECK(slurp(dir / "a" / "train_report.json") == slurp(dir / "b" / "train_report.json"));
}

TEST_CASE("one repeat equals a single fit with the derived seed") {
    auto c = run_config_from_json(json::parse(kSmallConfig));
    c.synth.seed = c.seed;
    const auto d = prepare(synth::generate(c.synth), c);
    const auto s = repeat_eval(d, c, 1);
    REQUIRE(s.runs.size() == 1);
    CHECK(s.std_auc == 0.0);
    auto single = c;
    single.seed = derive_seed(c.seed, 100);
    const auto o = fit(d, single);
    CHECK(s.runs[0].auc == *o.report.test_auc);
    CHECK(s.runs[0].brier == *o.report.test_brier);
    CHECK(s.mean_auc == s.runs[0].auc);
    const auto j = summary_to_json(s);
    CHECK(j.at("runs").size() == 1);
    CHECK_THROWS_AS(repeat_eval(d, c, 0), InvalidConfig);
}

TEST_CASE("installed binary exit codes") {
    const char* bin = std::getenv("SHOTINF_CLI");
    if (!bin) return;
    auto status = [&](const std::string& args) {
        const int raw = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    CHECK(status("--help") == 0);
    CHECK(status("nonsense") == 2);
    const auto dir = scratch("binary");
    CHECK(status("synth --matches 2 --out " + dir.string()) == 0);
    CHECK(status("validate --data " + (dir / "synth.csv").string()) == 0);
    spit(dir / "bad.csv", "rally_id\n");
    CHECK(status("validate --data " + (dir / "bad.csv").string()) == 1);
    CHECK(status("evaluate --data " + (dir / "synth.csv").string() + " --out " + (dir / "nothing").string()) == 3);
}
