#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "forge/evalstat.hpp"
#include "forge/lm.hpp"
#include "forge/tokenizer.hpp"

namespace forge {

/// A benchmark: fixed data plus a deterministic per-example scorer.
class TaskAdapter {
public:
    virtual ~TaskAdapter() = default;
    virtual const TaskSpec& spec() const = 0;
    virtual std::size_t size() const = 0;
    virtual Outcomes score(const LanguageModel& model, unsigned workers = 1) const = 0;
};

/// Eval-split perplexity. One outcome per document: the NLL of the document
/// followed by EOS, conditioned on a leading EOS (value), and the number of
/// scored tokens (weight). Aggregates to exp(sum NLL / sum tokens).
class PerplexityTask final : public TaskAdapter {
public:
    static constexpr const char* kName = "perplexity";

    PerplexityTask(std::vector<TokenSeq> documents, TokenId eos);

    const TaskSpec& spec() const override { return spec_; }
    std::size_t size() const override { return docs_.size(); }
    Outcomes score(const LanguageModel& model, unsigned workers = 1) const override;

private:
    TaskSpec spec_;
    std::vector<TokenSeq> docs_;
    TokenId eos_;
};

struct MinimalPair {
    std::string good;
    std::string bad;
};

/// "good<TAB>bad" per line.
std::vector<MinimalPair> read_minimal_pairs(const std::filesystem::path& path);

/// Outcome 1 when the acceptable sentence gets the lower NLL (both scored
/// after a leading EOS), else 0. Reported as accuracy in percent.
class MinimalPairTask final : public TaskAdapter {
public:
    static constexpr const char* kName = "minimal_pairs";

    MinimalPairTask(std::vector<std::pair<TokenSeq, TokenSeq>> pairs, TokenId eos);
    static MinimalPairTask from_text(std::span<const MinimalPair> pairs, const Tokenizer& tokenizer);

    const TaskSpec& spec() const override { return spec_; }
    std::size_t size() const override { return pairs_.size(); }
    Outcomes score(const LanguageModel& model, unsigned workers = 1) const override;

private:
    TaskSpec spec_;
    std::vector<std::pair<TokenSeq, TokenSeq>> pairs_;
    TokenId eos_;
};

TaskSpec perplexity_task_spec();
TaskSpec minimal_pair_task_spec();

} // namespace forge
