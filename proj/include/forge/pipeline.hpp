#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "forge/decoder.hpp"
#include "forge/evalstat.hpp"
#include "forge/ngram.hpp"

namespace forge {

/// Deterministic, duplicate-free run seeds. Seeds are generated in sequence,
/// so the plan for n runs is a prefix of the plan for n + 1.
std::vector<std::uint64_t> seed_plan(std::uint64_t master_seed, std::size_t n_runs);

struct StrategyEntry {
    std::string name;
    DecodingStrategy decoding;
    /// "early:<step>", "early:auto", "smaller:<factor>" or "noisy:<rate>";
    /// required for contrastive strategies.
    std::optional<std::string> amateur;
};

struct ExperimentConfig {
    // corpus: paragraphs as "domain<TAB>text"
    std::filesystem::path corpus_path = "data/desk_corpus.tsv";
    double train_fraction = 0.905;
    double eval_fraction = 0.089;
    double seed_fraction = 0.006;

    std::size_t vocab_size = 8000;
    NgramConfig backend;

    // training (baseline and mixture runs share these)
    std::size_t batch_sequences = 32;
    std::size_t seq_len = 128;
    std::uint64_t steps = 600;
    std::uint64_t snapshot_every = 60;
    std::size_t n_runs = 3;

    // GOOD selection; empty means all evaluation tasks
    std::vector<std::string> good_tasks;
    /// "early:auto" picks the last snapshot at or before this share of GOOD's step.
    double early_fraction = 0.2;

    std::vector<StrategyEntry> strategies;

    // generation
    std::uint64_t budget = 1'000'000;
    std::size_t prefix_len = 20;
    std::size_t per_domain_quota = 0; // 0 = every usable paragraph
    std::size_t completions_per_seed = 8;
    std::size_t max_new = 400;
    bool count_prefix = false;

    std::vector<double> ratios{0.3};

    // evaluation
    std::vector<std::string> tasks{"perplexity", "minimal_pairs"};
    std::filesystem::path minimal_pairs_path = "data/minimal_pairs.tsv";
    std::vector<std::filesystem::path> extra_outcomes;
    std::size_t resamples = 1000;
    SeMode se_mode = SeMode::DrawSdOverRootB;
    /// Head-to-head tables; empty pairs every contrastive strategy with every
    /// non-contrastive one at the same ratio.
    std::vector<std::pair<std::string, std::string>> pairs;

    std::uint64_t master_seed = 0;
    /// Thread count; never changes results.
    unsigned workers = 1;
    /// Experiment root; FORGE_ROOT overrides it.
    std::filesystem::path root = "runs";

    void validate() const;
    nlohmann::ordered_json to_json() const;
    /// Relative paths are resolved against `base_dir`.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Digest of everything that can change results (not root or workers;
    /// input files enter by content).
    std::string digest() const;
    std::vector<double> positive_ratios() const;
};

/// Applies "a.b.c=value" where value is JSON (bare strings are accepted).
void apply_override(nlohmann::json& config, std::string_view assignment);

/// Method name of a mixture run, e.g. "cd_early-MR-0.3".
std::string mixture_method(const std::string& strategy, double ratio);

inline constexpr std::string_view kBaselineMethod = "baseline";

struct StageResult {
    std::string name;
    bool executed = false;
};

/**
 * The experiment graph: tokenize, train, select-good, derive-bad, generate,
 * mix-train, eval, report. Every stage writes stages/<name>.json with its
 * input digest and the digests of its outputs; a stage whose manifest still
 * matches is skipped.
 */
class Pipeline {
public:
    static const std::vector<std::string>& stage_names();

    explicit Pipeline(ExperimentConfig config);

    /// <root>/exp-<digest prefix>
    const std::filesystem::path& dir() const noexcept { return dir_; }
    const ExperimentConfig& config() const noexcept { return config_; }

    /// Runs every stage up to and including `last` in order. On failure
    /// throws Error naming the stage and the completed ones.
    std::vector<StageResult> run(std::string_view last = "report");

private:
    struct Outputs;

    bool up_to_date(const std::string& stage, const std::string& input_digest) const;
    void write_manifest(const std::string& stage, const std::string& input_digest,
                        const std::vector<std::filesystem::path>& outputs) const;
    std::string manifest_output_digest(const std::string& stage) const;

    std::vector<std::filesystem::path> stage_tokenize();
    std::vector<std::filesystem::path> stage_train();
    std::vector<std::filesystem::path> stage_select_good();
    std::vector<std::filesystem::path> stage_derive_bad();
    std::vector<std::filesystem::path> stage_generate();
    std::vector<std::filesystem::path> stage_mix_train();
    std::vector<std::filesystem::path> stage_eval();
    std::vector<std::filesystem::path> stage_report();

    ExperimentConfig config_;
    std::string config_digest_;
    std::filesystem::path dir_;
};

} // namespace forge
