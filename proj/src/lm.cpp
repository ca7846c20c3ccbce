#include "forge/lm.hpp"

#include <cmath>

#include <fmt/format.h>

#include "forge/error.hpp"

namespace forge {

NextTokenDist::NextTokenDist(std::vector<double> probs) : probs_(std::move(probs)) { validate(probs_); }

void NextTokenDist::validate(std::span<const double> probs) {
    if (probs.empty()) throw ContractError("next-token distribution is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!(probs[i] > 0.0) || !std::isfinite(probs[i])) {
            throw ContractError(fmt::format("next-token probability for id {} is {}, must be > 0", i, probs[i]));
        }
        sum += probs[i];
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw ContractError(fmt::format("next-token distribution sums to {:.17g}", sum));
    }
}

double LanguageModel::prob(std::span<const TokenId> context, TokenId token) const {
    std::vector<double> buf(vocab_size());
    next_dist_into(context, buf);
    return buf.at(token);
}

NextTokenDist LanguageModel::next_dist(std::span<const TokenId> context) const {
    std::vector<double> buf(vocab_size());
    next_dist_into(context, buf);
    return NextTokenDist(std::move(buf));
}

FixedModel::FixedModel(std::vector<double> probs) : probs_(std::move(probs)) {
    NextTokenDist::validate(probs_);
}

std::shared_ptr<FixedModel> FixedModel::uniform(std::size_t vocab_size) {
    if (vocab_size == 0) throw ArgumentError("uniform model needs a nonempty vocabulary");
    return std::make_shared<FixedModel>(std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)));
}

void FixedModel::next_dist_into(std::span<const TokenId>, std::span<double> out) const {
    std::copy(probs_.begin(), probs_.end(), out.begin());
}

double FixedModel::prob(std::span<const TokenId>, TokenId token) const { return probs_.at(token); }

std::string CheckpointId::str() const { return fmt::format("{}@{}", family, step); }

std::vector<double> token_nlls(const LanguageModel& model, std::span<const TokenId> tokens,
                               std::span<const TokenId> history) {
    const auto n_ctx = model.max_context();
    std::vector<TokenId> ctx;
    ctx.reserve(n_ctx + 1);
    const auto keep = std::min(history.size(), n_ctx);
    ctx.assign(history.end() - static_cast<std::ptrdiff_t>(keep), history.end());
    std::vector<double> out;
    out.reserve(tokens.size());
    for (const auto tok : tokens) {
        if (tok >= model.vocab_size()) throw ArgumentError(fmt::format("token id {} outside vocabulary", tok));
        out.push_back(-std::log(model.prob(ctx, tok)));
        if (n_ctx == 0) continue;
        if (ctx.size() == n_ctx) ctx.erase(ctx.begin());
        ctx.push_back(tok);
    }
    return out;
}

double sequence_nll(const LanguageModel& model, std::span<const TokenId> tokens, std::span<const TokenId> history) {
    if (tokens.empty()) throw ArgumentError("sequence_nll needs at least one token");
    double total = 0.0;
    for (const auto v : token_nlls(model, tokens, history)) total += v;
    return total;
}

double perplexity(const LanguageModel& model, std::span<const TokenId> eval_stream) {
    if (eval_stream.empty()) throw ArgumentError("perplexity needs at least one token");
    return std::exp(sequence_nll(model, eval_stream) / static_cast<double>(eval_stream.size()));
}

} // namespace forge
