#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forge/lm.hpp"
#include "forge/rng.hpp"

namespace forge {

enum class StrategyKind { NoContrast, NoContrastVHead, NoContrastTopK, NoContrastTopP, Cd, CdTopK, CdTopP };

struct DecodingStrategy {
    StrategyKind kind = StrategyKind::NoContrast;
    double alpha = 0.1;
    double lambda = 1.0;
    std::size_t k = 50;
    double p = 0.95;
    bool ban_eos = false;

    bool contrastive() const noexcept {
        return kind == StrategyKind::Cd || kind == StrategyKind::CdTopK || kind == StrategyKind::CdTopP;
    }
    bool uses_top_k() const noexcept { return kind == StrategyKind::NoContrastTopK || kind == StrategyKind::CdTopK; }
    bool uses_top_p() const noexcept { return kind == StrategyKind::NoContrastTopP || kind == StrategyKind::CdTopP; }

    void validate() const;
    /// Short identifier, e.g. "cd", "cd_topk-50", "no_contrast_topp-0.95".
    std::string name() const;
    nlohmann::json to_json() const;
    static DecodingStrategy from_json(const nlohmann::json& j);
    /// Accepts "<kind>" or "<kind>:<k or p>", e.g. "cd_topk:100".
    static DecodingStrategy parse(std::string_view text);
    std::string digest() const;
};

std::string_view kind_name(StrategyKind kind);
StrategyKind parse_kind(std::string_view name);

/// Candidate tokens (ascending ids) and their scores in nats.
struct ScoredSupport {
    std::vector<TokenId> support;
    std::vector<double> logits;
};

/// Lower bound applied to ln p_B before contrasting.
inline constexpr double kLogProbFloor = -27.631021115928547; // ln(1e-12)

/// { x : p(x) >= alpha * max_w p(w) }, ascending ids. `banned` is treated as absent.
std::vector<TokenId> v_head(std::span<const double> dist, double alpha, std::optional<TokenId> banned = {});

/// ln p_G(x) - lambda ln p_B(x) over v_head(p_G, alpha).
ScoredSupport cd_logits(std::span<const double> dist_good, std::span<const double> dist_bad, double alpha,
                        double lambda, std::optional<TokenId> banned = {});

/// Keeps the k highest logits; ties at the cut go to the lower id.
ScoredSupport truncate_top_k(const ScoredSupport& scored, std::size_t k);

/// Keeps the smallest descending-probability prefix of softmax(logits) with mass >= p.
ScoredSupport truncate_top_p(const ScoredSupport& scored, double p);

/// Categorical draw from softmax(logits): one uniform, inverse CDF in support order.
TokenId sample_next(const ScoredSupport& scored, Rng& rng);

/// Same as sample_next over softmax(ln probs), without computing logs.
TokenId sample_from_probs(std::span<const double> probs, Rng& rng, std::optional<TokenId> banned = {});

/// Final masked/truncated support for one step. `dist_bad` must be present
/// for contrastive strategies.
ScoredSupport score_step(const DecodingStrategy& strategy, std::span<const double> dist_good,
                         std::span<const double> dist_bad, std::optional<TokenId> eos = {});

/// One sampling step over already computed distributions.
TokenId sample_step(const DecodingStrategy& strategy, std::span<const double> dist_good,
                    std::span<const double> dist_bad, Rng& rng, std::optional<TokenId> eos = {});

/// Appends up to max_new sampled tokens to `prefix`, stopping before EOS.
TokenSeq generate(const DecodingStrategy& strategy, const LanguageModel& good, const LanguageModel* bad,
                  std::span<const TokenId> prefix, std::size_t max_new, Rng& rng, std::optional<TokenId> eos = {});

} // namespace forge
