#include "forge/tasks.hpp"

#include <fstream>

#include <fmt/format.h>

#include "forge/error.hpp"
#include "parallel.hpp"

namespace forge {

TaskSpec perplexity_task_spec() {
    return TaskSpec{PerplexityTask::kName, Aggregation::ExpWeighted, Direction::LowerBetter, 1.0, false};
}

TaskSpec minimal_pair_task_spec() {
    return TaskSpec{MinimalPairTask::kName, Aggregation::Mean, Direction::HigherBetter, 100.0, true};
}

PerplexityTask::PerplexityTask(std::vector<TokenSeq> documents, TokenId eos)
    : spec_(perplexity_task_spec()), eos_(eos) {
    for (auto& d : documents)
        if (!d.empty()) docs_.push_back(std::move(d));
    if (docs_.empty()) throw ConfigError("perplexity task needs at least one non-empty document");
}

Outcomes PerplexityTask::score(const LanguageModel& model, unsigned workers) const {
    Outcomes out;
    out.values.resize(docs_.size());
    out.weights.resize(docs_.size());
    const TokenId history[1] = {eos_};
    parallel_for(docs_.size(), workers, [&](std::size_t i) {
        TokenSeq seq = docs_[i];
        seq.push_back(eos_);
        out.values[i] = sequence_nll(model, seq, history);
        out.weights[i] = static_cast<double>(seq.size());
    });
    return out;
}

std::vector<MinimalPair> read_minimal_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open minimal pairs '{}'", path.string()));
    std::vector<MinimalPair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw IoError(fmt::format("{}:{}: expected 'good<TAB>bad'", path.string(), line_no));
        out.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return out;
}

MinimalPairTask::MinimalPairTask(std::vector<std::pair<TokenSeq, TokenSeq>> pairs, TokenId eos)
    : spec_(minimal_pair_task_spec()), pairs_(std::move(pairs)), eos_(eos) {
    if (pairs_.empty()) throw ConfigError("minimal pair task needs at least one pair");
    for (const auto& [g, b] : pairs_)
        if (g.empty() || b.empty()) throw ConfigError("minimal pair with an empty sentence");
}

MinimalPairTask MinimalPairTask::from_text(std::span<const MinimalPair> pairs, const Tokenizer& tokenizer) {
    std::vector<std::pair<TokenSeq, TokenSeq>> enc;
    enc.reserve(pairs.size());
    for (const auto& p : pairs) enc.emplace_back(tokenizer.encode(p.good), tokenizer.encode(p.bad));
    return MinimalPairTask(std::move(enc), tokenizer.specials().eos);
}

Outcomes MinimalPairTask::score(const LanguageModel& model, unsigned workers) const {
    Outcomes out;
    out.values.resize(pairs_.size());
    const TokenId history[1] = {eos_};
    parallel_for(pairs_.size(), workers, [&](std::size_t i) {
        const double g = sequence_nll(model, pairs_[i].first, history);
        const double b = sequence_nll(model, pairs_[i].second, history);
        out.values[i] = g < b ? 1.0 : 0.0;
    });
    return out;
}

} // namespace forge
