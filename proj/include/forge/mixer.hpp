#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/ngram.hpp"
#include "forge/tokenizer.hpp"

namespace forge {

struct MixtureConfig {
    double synth_ratio = 0.0;
    std::size_t batch_sequences = 32;
    std::size_t seq_len = 128;
    std::uint64_t reshuffle_seed = 0;

    void validate() const;
    /// round-half-up(q * batch_sequences)
    std::size_t synth_per_batch() const;
    nlohmann::json to_json() const;
};

/**
 * A corpus that yields fixed-length sequences forever. Each epoch draws a
 * fresh document permutation from (seed, tag, epoch), packs documents with an
 * EOS after each one, cuts seq_len windows and drops the short tail. Documents
 * are tokenized once; the tokenizer is deterministic, so re-tokenizing on
 * every epoch would produce the same ids.
 */
class SegmentedCorpus {
public:
    SegmentedCorpus(std::vector<TokenSeq> documents, TokenId eos, std::size_t seq_len, std::uint64_t seed,
                    std::uint64_t tag);

    /// Next window; starts a new epoch when the current one is used up.
    std::span<const TokenId> next();

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t sequences_per_epoch() const noexcept { return windows_; }

private:
    void start_epoch();

    std::vector<TokenSeq> docs_;
    TokenId eos_;
    std::size_t seq_len_;
    std::uint64_t seed_;
    std::uint64_t tag_;
    std::size_t epoch_ = 0;
    std::size_t windows_ = 0;
    std::size_t cursor_ = 0;
    TokenSeq packed_;
};

struct Batch {
    std::uint64_t step = 0;
    std::vector<TokenSeq> sequences;
    /// Parallel to `sequences`; real sequences come first.
    std::vector<bool> synthetic;
};

class MixtureStream {
public:
    MixtureStream(std::vector<TokenSeq> real, std::vector<TokenSeq> synth, TokenId eos, const MixtureConfig& config);

    Batch next();
    const MixtureConfig& config() const noexcept { return config_; }
    std::size_t real_epoch() const noexcept { return real_.epoch(); }
    std::size_t synth_epoch() const noexcept { return synth_ ? synth_->epoch() : 0; }

private:
    MixtureConfig config_;
    SegmentedCorpus real_;
    std::optional<SegmentedCorpus> synth_;
    std::uint64_t step_ = 0;
};

MixtureStream build_stream(std::span<const std::string> real, std::span<const std::string> synth,
                           const Tokenizer& tokenizer, const MixtureConfig& config);

/// Trains an n-gram model on `steps` batches, counting n-grams within each
/// sequence, and reports a snapshot every `snapshot_every` steps (and at the
/// last step). Snapshot steps are batch step numbers.
void train_on_stream(MixtureStream& stream, std::size_t vocab_size, const NgramConfig& config, std::uint64_t steps,
                     std::uint64_t snapshot_every, const SnapshotCallback& on_snapshot);

} // namespace forge
