#include "forge/mixer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge {

void MixtureConfig::validate() const {
    if (!(synth_ratio >= 0.0 && synth_ratio < 1.0)) {
        throw ConfigError(fmt::format("synthetic ratio {} outside [0, 1)", synth_ratio));
    }
    if (batch_sequences < 1) throw ConfigError("batch_sequences must be >= 1");
    if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
}

std::size_t MixtureConfig::synth_per_batch() const {
    return static_cast<std::size_t>(std::floor(synth_ratio * static_cast<double>(batch_sequences) + 0.5));
}

nlohmann::json MixtureConfig::to_json() const {
    return {{"synth_ratio", synth_ratio},
            {"batch_sequences", batch_sequences},
            {"seq_len", seq_len},
            {"reshuffle_seed", reshuffle_seed}};
}

SegmentedCorpus::SegmentedCorpus(std::vector<TokenSeq> documents, TokenId eos, std::size_t seq_len,
                                 std::uint64_t seed, std::uint64_t tag)
    : docs_(std::move(documents)), eos_(eos), seq_len_(seq_len), seed_(seed), tag_(tag) {
    if (docs_.empty()) throw ConfigError("corpus has no documents");
    std::size_t total = 0;
    for (const auto& d : docs_) total += d.size() + 1;
    windows_ = total / seq_len_;
    if (windows_ == 0) {
        throw ConfigError(fmt::format("corpus of {} packed tokens is shorter than one {}-token sequence", total, seq_len_));
    }
    start_epoch();
}

void SegmentedCorpus::start_epoch() {
    std::vector<std::size_t> order(docs_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::substream({seed_, tag_, epoch_});
    shuffle(order, rng);
    packed_.clear();
    for (const auto i : order) {
        packed_.insert(packed_.end(), docs_[i].begin(), docs_[i].end());
        packed_.push_back(eos_);
    }
    packed_.resize(windows_ * seq_len_);
    cursor_ = 0;
}

std::span<const TokenId> SegmentedCorpus::next() {
    if (cursor_ == windows_) {
        ++epoch_;
        start_epoch();
    }
    return std::span<const TokenId>(packed_).subspan(seq_len_ * cursor_++, seq_len_);
}

MixtureStream::MixtureStream(std::vector<TokenSeq> real, std::vector<TokenSeq> synth, TokenId eos,
                             const MixtureConfig& config)
    : config_(config),
      real_((config.validate(), std::move(real)), eos, config.seq_len, config.reshuffle_seed, hash_name("real")) {
    if (config_.synth_per_batch() > 0) {
        if (synth.empty()) throw ConfigError("synthetic ratio > 0 but the synthetic corpus is empty");
        synth_.emplace(std::move(synth), eos, config.seq_len, config.reshuffle_seed, hash_name("synth"));
    }
}

Batch MixtureStream::next() {
    Batch b;
    b.step = ++step_;
    const auto n_synth = config_.synth_per_batch();
    const auto n_real = config_.batch_sequences - n_synth;
    b.sequences.reserve(config_.batch_sequences);
    for (std::size_t i = 0; i < n_real; ++i) {
        const auto s = real_.next();
        b.sequences.emplace_back(s.begin(), s.end());
        b.synthetic.push_back(false);
    }
    for (std::size_t i = 0; i < n_synth; ++i) {
        const auto s = synth_->next();
        b.sequences.emplace_back(s.begin(), s.end());
        b.synthetic.push_back(true);
    }
    return b;
}

MixtureStream build_stream(std::span<const std::string> real, std::span<const std::string> synth,
                           const Tokenizer& tokenizer, const MixtureConfig& config) {
    config.validate();
    if (real.empty()) throw ConfigError("real corpus is empty");
    std::vector<TokenSeq> real_tok;
    real_tok.reserve(real.size());
    for (const auto& d : real) real_tok.push_back(tokenizer.encode(d));
    std::vector<TokenSeq> synth_tok;
    if (config.synth_per_batch() > 0) {
        synth_tok.reserve(synth.size());
        for (const auto& d : synth) synth_tok.push_back(tokenizer.encode(d));
    }
    return MixtureStream(std::move(real_tok), std::move(synth_tok), tokenizer.specials().eos, config);
}

void train_on_stream(MixtureStream& stream, std::size_t vocab_size, const NgramConfig& config, std::uint64_t steps,
                     std::uint64_t snapshot_every, const SnapshotCallback& on_snapshot) {
    if (steps < 1) throw ConfigError("training needs at least one step");
    if (snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
    NgramModel model(vocab_size, config);
    for (std::uint64_t s = 1; s <= steps; ++s) {
        const auto batch = stream.next();
        for (const auto& seq : batch.sequences) model.observe(seq);
        if (s % snapshot_every == 0 || s == steps) on_snapshot(batch.step, model);
    }
}

} // namespace forge
