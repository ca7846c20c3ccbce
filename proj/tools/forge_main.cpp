#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/error.hpp"
#include "forge/io.hpp"
#include "forge/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags that mirror config keys. Each one is applied as a "key=value" override.
struct Overrides {
    std::optional<std::string> corpus;
    std::optional<std::uint64_t> master_seed;
    std::optional<std::size_t> n_runs;
    std::optional<unsigned> workers;
    std::optional<std::size_t> vocab_size;
    std::optional<std::size_t> order;
    std::optional<double> add_k;
    std::optional<std::size_t> batch_sequences;
    std::optional<std::size_t> seq_len;
    std::optional<std::uint64_t> steps;
    std::optional<std::uint64_t> snapshot_every;
    std::optional<std::uint64_t> budget;
    std::optional<std::size_t> per_domain_quota;
    std::optional<std::size_t> completions_per_seed;
    std::optional<std::size_t> max_new;
    std::vector<double> ratios;
    std::vector<std::string> strategies;
    std::optional<std::size_t> resamples;
    std::optional<std::string> se_mode;
    std::optional<std::string> root;
    std::vector<std::string> sets;
};

void add_flags(CLI::App& app, Overrides& o) {
    app.add_option("--corpus", o.corpus, "corpus.path");
    app.add_option("--master-seed,--seed", o.master_seed, "master_seed");
    app.add_option("--n-runs", o.n_runs, "n_runs");
    app.add_option("--workers", o.workers, "workers (never changes results)");
    app.add_option("--vocab-size", o.vocab_size, "tokenizer.vocab_size");
    app.add_option("--order", o.order, "backend.order");
    app.add_option("--add-k", o.add_k, "backend.add_k");
    app.add_option("--batch-sequences", o.batch_sequences, "training.batch_sequences");
    app.add_option("--seq-len", o.seq_len, "training.seq_len");
    app.add_option("--steps", o.steps, "training.steps");
    app.add_option("--snapshot-every", o.snapshot_every, "training.snapshot_every");
    app.add_option("--budget", o.budget, "generation.budget");
    app.add_option("--per-domain-quota", o.per_domain_quota, "generation.per_domain_quota");
    app.add_option("--completions-per-seed", o.completions_per_seed, "generation.completions_per_seed");
    app.add_option("--max-new", o.max_new, "generation.max_new");
    app.add_option("--ratios,--ratio", o.ratios, "mixture.ratios")->delimiter(',');
    app.add_option("--strategy", o.strategies, "strategies: name=decoding[@amateur], repeatable");
    app.add_option("--resamples", o.resamples, "evaluation.resamples");
    app.add_option("--se-mode", o.se_mode, "evaluation.se_mode");
    app.add_option("--root", o.root, "root (FORGE_ROOT wins)");
    app.add_option("--set", o.sets, "any config key, e.g. good.early_fraction=0.3");
}

void put(json& j, const char* path, const json& v) {
    json* node = &j;
    std::string p(path);
    std::size_t start = 0;
    while (true) {
        const auto dot = p.find('.', start);
        const auto key = p.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[key] = v;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

json parse_strategy_flag(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw forge::ArgumentError(fmt::format("--strategy '{}' must look like name=decoding[@amateur]", text));
    json e;
    e["name"] = text.substr(0, eq);
    auto rest = text.substr(eq + 1);
    if (const auto at = rest.find('@'); at != std::string::npos) {
        e["amateur"] = rest.substr(at + 1);
        rest = rest.substr(0, at);
    }
    e["decoding"] = rest;
    return e;
}

forge::ExperimentConfig make_config(const std::optional<std::string>& config_path, const Overrides& o) {
    json j = json::object();
    fs::path base = fs::current_path();
    if (config_path) {
        j = json::parse(forge::read_file(*config_path));
        base = fs::absolute(*config_path).parent_path();
    }
    if (o.corpus) put(j, "corpus.path", fs::absolute(*o.corpus).string());
    if (o.master_seed) put(j, "master_seed", *o.master_seed);
    if (o.n_runs) put(j, "n_runs", *o.n_runs);
    if (o.workers) put(j, "workers", *o.workers);
    if (o.vocab_size) put(j, "tokenizer.vocab_size", *o.vocab_size);
    if (o.order) put(j, "backend.order", *o.order);
    if (o.add_k) put(j, "backend.add_k", *o.add_k);
    if (o.batch_sequences) put(j, "training.batch_sequences", *o.batch_sequences);
    if (o.seq_len) put(j, "training.seq_len", *o.seq_len);
    if (o.steps) put(j, "training.steps", *o.steps);
    if (o.snapshot_every) put(j, "training.snapshot_every", *o.snapshot_every);
    if (o.budget) put(j, "generation.budget", *o.budget);
    if (o.per_domain_quota) put(j, "generation.per_domain_quota", *o.per_domain_quota);
    if (o.completions_per_seed) put(j, "generation.completions_per_seed", *o.completions_per_seed);
    if (o.max_new) put(j, "generation.max_new", *o.max_new);
    if (!o.ratios.empty()) put(j, "mixture.ratios", o.ratios);
    if (!o.strategies.empty()) {
        json list = json::array();
        for (const auto& s : o.strategies) list.push_back(parse_strategy_flag(s));
        j["strategies"] = list;
    }
    if (o.resamples) put(j, "evaluation.resamples", *o.resamples);
    if (o.se_mode) put(j, "evaluation.se_mode", *o.se_mode);
    if (o.root) put(j, "root", fs::absolute(*o.root).string());
    for (const auto& s : o.sets) forge::apply_override(j, s);
    return forge::ExperimentConfig::from_json(j, base);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forge: synthetic-corpus experiments with contrastive decoding"};
    app.require_subcommand(1);
    std::optional<std::string> config_path;
    bool quiet = false;
    Overrides overrides;
    app.add_option("-c,--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    app.add_flag("-q,--quiet", quiet, "only print warnings and errors");

    std::vector<CLI::App*> subs;
    const std::vector<std::pair<std::string, std::string>> help{
        {"tokenize", "split the corpus and train the tokenizer"},
        {"train", "train the baseline runs"},
        {"select-good", "pick the GOOD checkpoint"},
        {"derive-bad", "derive the amateur models"},
        {"generate", "generate one synthetic corpus per strategy"},
        {"mix-train", "train on real/synthetic mixtures"},
        {"eval", "score every checkpoint"},
        {"report", "bootstrap statistics and tables"},
        {"pipeline", "run every stage"},
    };
    for (const auto& [name, text] : help) {
        auto* sub = app.add_subcommand(name, text);
        sub->fallthrough();
        add_flags(*sub, overrides);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
    spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

    std::string stage;
    for (auto* s : subs)
        if (s->parsed()) stage = s->get_name();
    const std::string last = stage == "pipeline" ? "report" : stage;

    try {
        forge::Pipeline pipeline(make_config(config_path, overrides));
        const auto results = pipeline.run(last);
        for (const auto& r : results) std::cout << fmt::format("{:<12} {}\n", r.name, r.executed ? "ran" : "skipped");
        std::cout << "experiment: " << pipeline.dir().string() << "\n";
        if (last == "report") std::cout << "\n" << forge::read_file(pipeline.dir() / "report" / "report.md");
    } catch (const std::exception& e) {
        std::cerr << "forge: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
