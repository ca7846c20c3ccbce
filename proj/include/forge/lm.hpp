#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "forge/types.hpp"

namespace forge {

/// Strictly positive probability vector over the vocabulary for one context.
class NextTokenDist {
public:
    static constexpr double kSumTolerance = 1e-9;

    /// Validates positivity and normalization; throws ContractError otherwise.
    explicit NextTokenDist(std::vector<double> probs);

    static void validate(std::span<const double> probs);

    std::span<const double> probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](TokenId id) const { return probs_[id]; }

private:
    std::vector<double> probs_;
};

/// Backend contract. Implementations must be immutable and safe to call from
/// many threads; contexts longer than max_context() are cut from the left.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual std::size_t vocab_size() const = 0;
    virtual std::size_t max_context() const = 0;

    /// Writes p(. | context) into `out` (size vocab_size()).
    virtual void next_dist_into(std::span<const TokenId> context, std::span<double> out) const = 0;

    /// p(token | context). The default computes the full distribution.
    virtual double prob(std::span<const TokenId> context, TokenId token) const;

    NextTokenDist next_dist(std::span<const TokenId> context) const;

    /// Trailing slice of `context` that the model actually conditions on.
    std::span<const TokenId> clip(std::span<const TokenId> context) const {
        const auto n = max_context();
        return context.size() > n ? context.subspan(context.size() - n) : context;
    }
};

/// Same distribution for every context; used for closed-form checks.
class FixedModel final : public LanguageModel {
public:
    explicit FixedModel(std::vector<double> probs);
    static std::shared_ptr<FixedModel> uniform(std::size_t vocab_size);

    std::size_t vocab_size() const override { return probs_.size(); }
    std::size_t max_context() const override { return 0; }
    void next_dist_into(std::span<const TokenId> context, std::span<double> out) const override;
    double prob(std::span<const TokenId> context, TokenId token) const override;

private:
    std::vector<double> probs_;
};

struct CheckpointId {
    std::string family;
    std::uint64_t step = 0;

    std::string str() const;
    auto operator<=>(const CheckpointId&) const = default;
};

/// A snapshot addressable by (family, step) plus the digest of the config
/// that produced it.
struct CheckpointedModel {
    CheckpointId id;
    std::string meta_digest;
    std::shared_ptr<const LanguageModel> model;

    const LanguageModel& lm() const { return *model; }
};

/// -sum_i ln p(tokens[i] | history + tokens[<i]), in nats. `history` is
/// conditioned on but not scored.
double sequence_nll(const LanguageModel& model, std::span<const TokenId> tokens,
                    std::span<const TokenId> history = {});

/// Per-token negative log-likelihoods, same conditioning as sequence_nll.
std::vector<double> token_nlls(const LanguageModel& model, std::span<const TokenId> tokens,
                               std::span<const TokenId> history = {});

/// exp(sequence_nll / n).
double perplexity(const LanguageModel& model, std::span<const TokenId> eval_stream);

} // namespace forge
