#include "forge/decoder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/digest.hpp"
#include "forge/error.hpp"

namespace forge {
namespace {

constexpr std::pair<StrategyKind, std::string_view> kKindNames[] = {
    {StrategyKind::NoContrast, "no_contrast"},         {StrategyKind::NoContrastVHead, "no_contrast_vhead"},
    {StrategyKind::NoContrastTopK, "no_contrast_topk"}, {StrategyKind::NoContrastTopP, "no_contrast_topp"},
    {StrategyKind::Cd, "cd"},                           {StrategyKind::CdTopK, "cd_topk"},
    {StrategyKind::CdTopP, "cd_topp"},
};

std::atomic<bool> floor_reported{false};

double floored_log(double p) {
    const double lp = std::log(p);
    if (lp < kLogProbFloor) {
        if (!floor_reported.exchange(true)) {
            spdlog::warn("amateur log-probability {} clamped to ln(1e-12); further clamps are not reported", lp);
        }
        return kLogProbFloor;
    }
    return lp;
}

// Descending score, ascending id.
struct ByScore {
    std::span<const double> score;
    bool operator()(std::size_t a, std::size_t b) const {
        return score[a] != score[b] ? score[a] > score[b] : a < b;
    }
};

ScoredSupport keep_positions(const ScoredSupport& scored, std::vector<std::size_t> pos) {
    std::sort(pos.begin(), pos.end());
    ScoredSupport out;
    out.support.reserve(pos.size());
    out.logits.reserve(pos.size());
    for (const auto i : pos) {
        out.support.push_back(scored.support[i]);
        out.logits.push_back(scored.logits[i]);
    }
    return out;
}

ScoredSupport log_support(std::span<const double> probs, std::vector<TokenId> ids) {
    ScoredSupport out;
    out.logits.reserve(ids.size());
    for (const auto id : ids) out.logits.push_back(std::log(probs[id]));
    out.support = std::move(ids);
    return out;
}

std::vector<TokenId> all_ids(std::size_t v, std::optional<TokenId> banned) {
    std::vector<TokenId> ids;
    ids.reserve(v);
    for (TokenId i = 0; i < v; ++i) {
        if (!banned || *banned != i) ids.push_back(i);
    }
    return ids;
}

// Top-k directly on probabilities (ln is strictly monotone, so the support matches top-k on logits).
std::vector<TokenId> top_k_ids(std::span<const double> probs, std::size_t k, std::optional<TokenId> banned) {
    auto ids = all_ids(probs.size(), banned);
    if (k < ids.size()) {
        auto cmp = [&](TokenId a, TokenId b) { return probs[a] != probs[b] ? probs[a] > probs[b] : a < b; };
        std::nth_element(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), cmp);
        ids.resize(k);
        std::sort(ids.begin(), ids.end());
    }
    return ids;
}

// Top-p directly on probabilities, growing a partially sorted prefix until it covers p.
std::vector<TokenId> top_p_ids(std::span<const double> probs, double p, std::optional<TokenId> banned) {
    auto ids = all_ids(probs.size(), banned);
    if (p >= 1.0) return ids;
    double total = 0.0;
    for (const auto id : ids) total += probs[id];
    const double target = p * total;
    auto cmp = [&](TokenId a, TokenId b) { return probs[a] != probs[b] ? probs[a] > probs[b] : a < b; };
    std::size_t m = std::min<std::size_t>(64, ids.size());
    while (true) {
        std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(m), ids.end(), cmp);
        double cum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            cum += probs[ids[i]];
            if (cum >= target) {
                ids.resize(i + 1);
                std::sort(ids.begin(), ids.end());
                return ids;
            }
        }
        if (m == ids.size()) break;
        m = std::min(ids.size(), m * 4);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

} // namespace

std::string_view kind_name(StrategyKind kind) {
    for (const auto& [k, n] : kKindNames) {
        if (k == kind) return n;
    }
    return "unknown";
}

StrategyKind parse_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) return k;
    }
    throw ConfigError(fmt::format("unknown decoding strategy '{}'", name));
}

void DecodingStrategy::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError(fmt::format("alpha {} outside (0, 1]", alpha));
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError(fmt::format("lambda {} must be >= 0", lambda));
    if (k < 1) throw ConfigError("top-k needs k >= 1");
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError(fmt::format("top-p {} outside (0, 1]", p));
}

std::string DecodingStrategy::name() const {
    std::string out(kind_name(kind));
    if (uses_top_k()) out += fmt::format("-{}", k);
    if (uses_top_p()) out += fmt::format("-{}", p);
    return out;
}

nlohmann::json DecodingStrategy::to_json() const {
    return {{"kind", kind_name(kind)}, {"alpha", alpha}, {"lambda", lambda},
            {"k", k},                  {"p", p},         {"ban_eos", ban_eos}};
}

DecodingStrategy DecodingStrategy::from_json(const nlohmann::json& j) {
    DecodingStrategy s;
    try {
        s.kind = parse_kind(j.at("kind").get<std::string>());
        s.alpha = j.value("alpha", s.alpha);
        s.lambda = j.value("lambda", s.lambda);
        s.k = j.value("k", s.k);
        s.p = j.value("p", s.p);
        s.ban_eos = j.value("ban_eos", s.ban_eos);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("bad strategy record: {}", e.what()));
    }
    s.validate();
    return s;
}

DecodingStrategy DecodingStrategy::parse(std::string_view text) {
    DecodingStrategy s;
    const auto colon = text.find(':');
    s.kind = parse_kind(text.substr(0, colon));
    if (colon != std::string_view::npos) {
        const std::string arg(text.substr(colon + 1));
        try {
            if (s.uses_top_k()) s.k = std::stoul(arg);
            else if (s.uses_top_p()) s.p = std::stod(arg);
            else throw ConfigError(fmt::format("strategy '{}' takes no parameter", kind_name(s.kind)));
        } catch (const std::logic_error&) {
            throw ConfigError(fmt::format("bad strategy parameter in '{}'", text));
        }
    }
    s.validate();
    return s;
}

std::string DecodingStrategy::digest() const { return sha256_hex(to_json().dump()); }

std::vector<TokenId> v_head(std::span<const double> dist, double alpha, std::optional<TokenId> banned) {
    double max_p = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (banned && *banned == i) continue;
        max_p = std::max(max_p, dist[i]);
    }
    const double threshold = alpha * max_p;
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (banned && *banned == i) continue;
        if (dist[i] >= threshold) out.push_back(static_cast<TokenId>(i));
    }
    return out;
}

ScoredSupport cd_logits(std::span<const double> dist_good, std::span<const double> dist_bad, double alpha,
                        double lambda, std::optional<TokenId> banned) {
    if (dist_good.size() != dist_bad.size()) {
        throw ContractError(fmt::format("GOOD vocabulary {} differs from BAD vocabulary {}", dist_good.size(),
                                        dist_bad.size()));
    }
    ScoredSupport out;
    out.support = v_head(dist_good, alpha, banned);
    out.logits.reserve(out.support.size());
    for (const auto id : out.support) {
        out.logits.push_back(std::log(dist_good[id]) - lambda * floored_log(dist_bad[id]));
    }
    return out;
}

ScoredSupport truncate_top_k(const ScoredSupport& scored, std::size_t k) {
    if (k >= scored.support.size()) return scored;
    std::vector<std::size_t> pos(scored.support.size());
    std::iota(pos.begin(), pos.end(), 0);
    // positions follow ascending ids, so the position tie-break is the id tie-break
    std::nth_element(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k), pos.end(), ByScore{scored.logits});
    pos.resize(k);
    return keep_positions(scored, std::move(pos));
}

ScoredSupport truncate_top_p(const ScoredSupport& scored, double p) {
    if (p >= 1.0 || scored.support.size() <= 1) return scored;
    const double max_l = *std::max_element(scored.logits.begin(), scored.logits.end());
    std::vector<double> w(scored.logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp(scored.logits[i] - max_l));
    std::vector<std::size_t> pos(w.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::sort(pos.begin(), pos.end(), ByScore{w});
    double cum = 0.0;
    std::size_t keep = pos.size();
    for (std::size_t i = 0; i < pos.size(); ++i) {
        cum += w[pos[i]] / total;
        if (cum >= p) {
            keep = i + 1;
            break;
        }
    }
    pos.resize(keep);
    return keep_positions(scored, std::move(pos));
}

TokenId sample_next(const ScoredSupport& scored, Rng& rng) {
    if (scored.support.empty()) throw ArgumentError("cannot sample from an empty support");
    if (scored.support.size() == 1) {
        (void)rng.uniform(); // keep stream consumption uniform per step
        return scored.support[0];
    }
    const double max_l = *std::max_element(scored.logits.begin(), scored.logits.end());
    std::vector<double> w(scored.logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp(scored.logits[i] - max_l));
    const double u = rng.uniform() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        cum += w[i];
        if (u < cum) return scored.support[i];
    }
    return scored.support.back();
}

TokenId sample_from_probs(std::span<const double> probs, Rng& rng, std::optional<TokenId> banned) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!banned || *banned != i) total += probs[i];
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (banned && *banned == i) continue;
        cum += probs[i];
        last = i;
        if (u < cum) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(last);
}

ScoredSupport score_step(const DecodingStrategy& s, std::span<const double> dist_good,
                         std::span<const double> dist_bad, std::optional<TokenId> eos) {
    const std::optional<TokenId> banned = s.ban_eos ? eos : std::nullopt;
    if (s.ban_eos && !eos) throw ConfigError("ban_eos needs an EOS id");
    switch (s.kind) {
    case StrategyKind::NoContrast: return log_support(dist_good, all_ids(dist_good.size(), banned));
    case StrategyKind::NoContrastVHead: return log_support(dist_good, v_head(dist_good, s.alpha, banned));
    case StrategyKind::NoContrastTopK: return log_support(dist_good, top_k_ids(dist_good, s.k, banned));
    case StrategyKind::NoContrastTopP: return log_support(dist_good, top_p_ids(dist_good, s.p, banned));
    case StrategyKind::Cd: return cd_logits(dist_good, dist_bad, s.alpha, s.lambda, banned);
    case StrategyKind::CdTopK: return truncate_top_k(cd_logits(dist_good, dist_bad, s.alpha, s.lambda, banned), s.k);
    case StrategyKind::CdTopP: return truncate_top_p(cd_logits(dist_good, dist_bad, s.alpha, s.lambda, banned), s.p);
    }
    throw ConfigError("unknown strategy kind");
}

TokenId sample_step(const DecodingStrategy& s, std::span<const double> dist_good, std::span<const double> dist_bad,
                    Rng& rng, std::optional<TokenId> eos) {
    if (s.kind == StrategyKind::NoContrast) {
        if (s.ban_eos && !eos) throw ConfigError("ban_eos needs an EOS id");
        return sample_from_probs(dist_good, rng, s.ban_eos ? eos : std::nullopt);
    }
    return sample_next(score_step(s, dist_good, dist_bad, eos), rng);
}

TokenSeq generate(const DecodingStrategy& s, const LanguageModel& good, const LanguageModel* bad,
                  std::span<const TokenId> prefix, std::size_t max_new, Rng& rng, std::optional<TokenId> eos) {
    s.validate();
    if (prefix.empty()) throw ArgumentError("generation needs a nonempty prefix");
    if (s.contrastive() && bad == nullptr) {
        throw ConfigError(fmt::format("strategy {} needs a BAD model", s.name()));
    }
    if (!s.contrastive() && bad != nullptr) {
        throw ConfigError(fmt::format("strategy {} does not take a BAD model", s.name()));
    }
    if (bad != nullptr && bad->vocab_size() != good.vocab_size()) {
        throw ContractError("GOOD and BAD models use different vocabularies");
    }
    TokenSeq seq(prefix.begin(), prefix.end());
    std::vector<double> pg(good.vocab_size());
    std::vector<double> pb(bad != nullptr ? bad->vocab_size() : 0);
    for (std::size_t step = 0; step < max_new; ++step) {
        good.next_dist_into(seq, pg);
        if (bad != nullptr) {
            // Contrast only reads p_B inside v_head, so query just those tokens.
            const std::optional<TokenId> banned = s.ban_eos ? eos : std::nullopt;
            for (const auto id : v_head(pg, s.alpha, banned)) pb[id] = bad->prob(seq, id);
        }
        const auto tok = sample_step(s, pg, pb, rng, eos);
        if (eos && tok == *eos) break;
        seq.push_back(tok);
    }
    return seq;
}

} // namespace forge
