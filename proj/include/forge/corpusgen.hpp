#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forge/decoder.hpp"
#include "forge/lm.hpp"
#include "forge/tokenizer.hpp"

namespace forge {

/// One paragraph of a domain-labeled split ("domain<TAB>text" per line).
struct LabeledParagraph {
    std::string domain;
    std::string text;
};

std::vector<LabeledParagraph> read_labeled_tsv(const std::filesystem::path& path);
void write_labeled_tsv(const std::filesystem::path& path, std::span<const LabeledParagraph> rows);

struct Seed {
    std::uint64_t id = 0;
    std::string domain;
    TokenSeq prefix;
};

struct SeedSet {
    std::size_t prefix_len = 20;
    std::vector<Seed> seeds;

    nlohmann::json to_json() const;
    static SeedSet from_json(const nlohmann::json& j);
    std::string digest() const;
};

struct SeedExtraction {
    std::size_t prefix_len = 20;
    std::size_t per_domain_quota = 0;
    /// Texts (train/eval splits) that a seed prefix must not occur in.
    std::vector<std::string_view> forbidden;
};

/// Takes the first `per_domain_quota` usable paragraphs of every domain in
/// file order and interleaves domains (sorted by name) round-robin. Seed ids
/// are 0..n-1 in that order.
SeedSet extract_seeds(std::span<const LabeledParagraph> split, const Tokenizer& tokenizer,
                      const SeedExtraction& options);

struct GenerationConfig {
    DecodingStrategy strategy;
    std::size_t completions_per_seed = 8;
    std::size_t max_new = 400;
    std::uint64_t token_budget = 0;
    std::uint64_t master_seed = 0;
    /// Count prefix tokens toward the budget as well as generated ones.
    bool count_prefix = false;
    unsigned workers = 1;
};

struct CorpusRecord {
    std::uint64_t id = 0;
    std::uint64_t seed_id = 0;
    std::uint32_t completion_idx = 0;
    std::string source_domain;
    std::string strategy_digest;
    bool prefix_included = true;
    std::size_t new_tokens = 0;
    std::string text;

    nlohmann::ordered_json to_json() const;
    static CorpusRecord from_json(const nlohmann::json& j);
};

struct CorpusManifest {
    DecodingStrategy strategy;
    CheckpointId good;
    std::optional<CheckpointId> bad;
    std::string good_meta;
    std::string bad_meta;
    std::string tokenizer_digest;
    std::string seed_set_digest;
    std::size_t n_seeds = 0;
    std::size_t completions_per_seed = 0;
    std::size_t max_new = 0;
    std::uint64_t token_budget = 0;
    std::uint64_t master_seed = 0;
    bool count_prefix = false;
    std::uint64_t produced_tokens = 0;
    std::size_t records = 0;
    std::string status; // "complete" or "budget_unreachable"
    std::string corpus_digest;

    nlohmann::ordered_json to_json() const;
    static CorpusManifest from_json(const nlohmann::json& j);
};

struct GeneratedCorpus {
    std::vector<CorpusRecord> records;
    CorpusManifest manifest;

    std::string jsonl() const;
};

/// Visits (seed, completion) units in order until the budget is met. Output
/// is independent of the worker count.
GeneratedCorpus generate_corpus(const GenerationConfig& config, const CheckpointedModel& good,
                                const CheckpointedModel* bad, const SeedSet& seeds, const Tokenizer& tokenizer);

/// Recomputes one record from the inputs named in a manifest.
CorpusRecord regenerate_record(const CorpusManifest& manifest, const CheckpointedModel& good,
                               const CheckpointedModel* bad, const SeedSet& seeds, const Tokenizer& tokenizer,
                               std::uint64_t seed_id, std::uint32_t completion_idx, std::uint64_t record_id = 0);

void write_corpus(const GeneratedCorpus& corpus, const std::filesystem::path& jsonl_path,
                  const std::filesystem::path& manifest_path);
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& jsonl_path);

} // namespace forge
