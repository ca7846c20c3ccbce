#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include <spdlog/spdlog.h>

#include "forge/error.hpp"
#include "forge/evalstat.hpp"
#include "forge/io.hpp"
#include "forge/pipeline.hpp"

using namespace forge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = FORGE_SOURCE_DIR;

// Every 30th paragraph of the desk corpus and the first 60 minimal pairs.
fs::path small_inputs() {
    const auto dir = fs::temp_directory_path() / "forge_pipeline_inputs";
    if (fs::exists(dir / "pairs.tsv")) return dir;
    fs::create_directories(dir);
    const auto corpus = read_file(kSource / "data" / "desk_corpus.tsv");
    std::string out;
    std::size_t line = 0, start = 0;
    while (start < corpus.size()) {
        auto end = corpus.find('\n', start);
        if (end == std::string::npos) end = corpus.size();
        if (line++ % 30 == 0) out += corpus.substr(start, end - start + 1);
        start = end + 1;
    }
    write_file(dir / "corpus.tsv", out);
    const auto pairs = read_file(kSource / "data" / "minimal_pairs.tsv");
    std::size_t pos = 0;
    for (int i = 0; i < 60; ++i) pos = pairs.find('\n', pos) + 1;
    write_file(dir / "pairs.tsv", pairs.substr(0, pos));
    return dir;
}

json small_config_json(const fs::path& root) {
    const auto in = small_inputs();
    auto j = json::parse(R"({
      "corpus": {"splits": {"train": 0.8, "eval": 0.1, "seed": 0.1}},
      "tokenizer": {"vocab_size": 400},
      "backend": {"order": 3, "add_k": 0.01},
      "training": {"batch_sequences": 4, "seq_len": 32, "steps": 20, "snapshot_every": 5},
      "strategies": [
        {"name": "plain", "decoding": "no_contrast"},
        {"name": "cd", "decoding": "cd", "amateur": "early:auto"}
      ],
      "generation": {"budget": 3000, "per_domain_quota": 5, "completions_per_seed": 2, "max_new": 30},
      "mixture": {"ratios": [0.3]},
      "evaluation": {"resamples": 50},
      "n_runs": 2,
      "master_seed": 7
    })");
    j["corpus"]["path"] = (in / "corpus.tsv").string();
    j["evaluation"]["minimal_pairs"] = (in / "pairs.tsv").string();
    j["root"] = root.string();
    return j;
}

std::size_t executed(const std::vector<StageResult>& rs) {
    return static_cast<std::size_t>(std::count_if(rs.begin(), rs.end(), [](const auto& r) { return r.executed; }));
}

struct QuietLogs {
    QuietLogs() { spdlog::set_level(spdlog::level::err); }
    ~QuietLogs() { spdlog::set_level(spdlog::level::info); }
};

} // namespace

TEST_CASE("seed plan") {
    const auto one = seed_plan(42, 1);
    REQUIRE(one.size() == 1);
    CHECK(one == seed_plan(42, 1));

    const auto ten = seed_plan(42, 10);
    CHECK(std::set<std::uint64_t>(ten.begin(), ten.end()).size() == 10);
    CHECK(ten[0] == one[0]); // prefix-stable

    const auto other = seed_plan(43, 10);
    std::vector<std::uint64_t> common;
    auto a = ten, b = other;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    CHECK(common.empty());

    CHECK_THROWS_AS(seed_plan(1, 0), ArgumentError);
}

TEST_CASE("mixture method names") {
    CHECK(mixture_method("cd_early", 0.3) == "cd_early-MR-0.3");
    CHECK(mixture_method("x", 0.25) == "x-MR-0.25");
}

TEST_CASE("config parsing, validation and overrides") {
    const auto root = fs::temp_directory_path() / "forge_cfg_root";
    auto j = small_config_json(root);
    const auto c = ExperimentConfig::from_json(j);
    CHECK(c.strategies.size() == 2);
    CHECK(c.strategies[1].decoding.contrastive());
    CHECK(c.positive_ratios() == std::vector<double>{0.3});

    SUBCASE("round trip through to_json keeps the digest") {
        const auto back = ExperimentConfig::from_json(json::parse(c.to_json().dump()));
        CHECK(back.digest() == c.digest());
    }
    SUBCASE("workers and root do not change the digest") {
        auto k = j;
        k["workers"] = 4;
        k["root"] = "/elsewhere";
        CHECK(ExperimentConfig::from_json(k).digest() == c.digest());
        k["master_seed"] = 8;
        CHECK(ExperimentConfig::from_json(k).digest() != c.digest());
    }
    SUBCASE("overrides") {
        auto k = j;
        apply_override(k, "training.steps=40");
        apply_override(k, "good.early_fraction=0.5");
        apply_override(k, "evaluation.se_mode=draw_sd");
        const auto d = ExperimentConfig::from_json(k);
        CHECK(d.steps == 40);
        CHECK(d.early_fraction == 0.5);
        CHECK(d.se_mode == SeMode::DrawSd);
        CHECK_THROWS_AS(apply_override(k, "novalue"), ArgumentError);
    }
    SUBCASE("rejections") {
        auto bad = j;
        bad["training"]["stepz"] = 3;
        CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
        bad = j;
        bad["corpus"]["splits"]["seed"] = 0.3;
        CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
        bad = j;
        bad["strategies"][1].erase("amateur");
        CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
        bad = j;
        bad["strategies"][0]["amateur"] = "early:5";
        CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
        bad = j;
        bad["evaluation"]["tasks"] = {"minimal_pairs"};
        CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
        bad = j;
        bad["strategies"][1]["name"] = "plain";
        CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
        bad = j;
        bad["mixture"]["ratios"] = {1.0};
        CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
    }
}

TEST_CASE("pipeline runs, skips up-to-date stages and is reproducible") {
    QuietLogs quiet;
    const auto root = fs::temp_directory_path() / "forge_pipeline_run";
    fs::remove_all(root);
    auto j = small_config_json(root);

    Pipeline first(ExperimentConfig::from_json(j));
    const auto r1 = first.run();
    CHECK(executed(r1) == Pipeline::stage_names().size());
    const auto report = read_file(first.dir() / "report" / "report.json");
    const auto tex = read_file(first.dir() / "report" / "report.tex");
    const auto corpus = read_file(first.dir() / "corpora" / "cd" / "corpus.jsonl");

    const auto rj = json::parse(report);
    REQUIRE(rj.at("rows").size() == 3);
    CHECK(rj["rows"][0]["method"] == "baseline");
    CHECK(rj["rows"][1]["method"] == "plain-MR-0.3");
    CHECK(rj["rows"][2]["method"] == "cd-MR-0.3");
    CHECK(rj.at("pairwise").size() == 1);

    const auto models = json::parse(read_file(first.dir() / "eval" / "models.json"));
    const double good_ppl = models["good"]["perplexity"];
    for (const auto& a : models["amateurs"]) CHECK(a["perplexity"].get<double>() > good_ppl);

    SUBCASE("rerun executes nothing") {
        Pipeline again(ExperimentConfig::from_json(j));
        CHECK(executed(again.run()) == 0);
        CHECK(read_file(again.dir() / "report" / "report.json") == report);
    }
    SUBCASE("a damaged output reruns its stage and everything after it") {
        write_file(first.dir() / "report" / "report.tex", "x");
        const auto rs = Pipeline(ExperimentConfig::from_json(j)).run();
        CHECK(executed(rs) == 1);
        CHECK(read_file(first.dir() / "report" / "report.tex") == tex);
    }
    SUBCASE("fresh directory and more workers give identical bytes") {
        auto k = j;
        k["root"] = (root / "second").string();
        k["workers"] = 3;
        Pipeline second(ExperimentConfig::from_json(k));
        CHECK(executed(second.run()) == Pipeline::stage_names().size());
        CHECK(second.dir().filename() == first.dir().filename());
        CHECK(read_file(second.dir() / "report" / "report.json") == report);
        CHECK(read_file(second.dir() / "corpora" / "cd" / "corpus.jsonl") == corpus);
    }
    SUBCASE("partial runs stop at the requested stage") {
        auto k = j;
        k["master_seed"] = 8;
        Pipeline p(ExperimentConfig::from_json(k));
        const auto rs = p.run("select-good");
        CHECK(rs.size() == 3);
        CHECK(fs::exists(p.dir() / "good.json"));
        CHECK_FALSE(fs::exists(p.dir() / "report"));
        CHECK_THROWS_AS(p.run("nope"), ArgumentError);
    }
}

TEST_CASE("baseline-only pipeline reports one row") {
    QuietLogs quiet;
    const auto root = fs::temp_directory_path() / "forge_pipeline_baseline";
    fs::remove_all(root);
    auto j = small_config_json(root);
    j["mixture"]["ratios"] = {0.0};
    Pipeline p(ExperimentConfig::from_json(j));
    p.run();
    const auto rj = json::parse(read_file(p.dir() / "report" / "report.json"));
    CHECK(rj.at("rows").size() == 1);
    CHECK(rj.at("pairwise").empty());
    CHECK_FALSE(fs::exists(p.dir() / "corpora"));
}

TEST_CASE("stage failures name the stage and the completed ones") {
    QuietLogs quiet;
    const auto root = fs::temp_directory_path() / "forge_pipeline_fail";
    fs::remove_all(root);
    auto j = small_config_json(root);
    j["strategies"][1]["amateur"] = "early:999"; // no such snapshot
    Pipeline p(ExperimentConfig::from_json(j));
    try {
        p.run();
        FAIL("expected a failure");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("stage 'derive-bad' failed") != std::string::npos);
        CHECK(msg.find("tokenize, train, select-good") != std::string::npos);
    }
}
