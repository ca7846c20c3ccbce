#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/lm.hpp"

namespace forge {

struct NgramConfig {
    /// n of the n-gram: the model conditions on up to order-1 previous tokens.
    std::size_t order = 4;
    double add_k = 0.01;
    /// One weight per order 1..n; empty means uniform.
    std::vector<double> interp_weights;
    std::size_t max_order = 8;

    void validate() const;
    std::vector<double> resolved_weights() const;
};

enum class SnapshotFormat { Binary, Text };

/**
 * Interpolated add-k n-gram model.
 *
 *   p(w | h) = sum_j lambda_j (c_j(h, w) + k) / (C_j(h) + k V)
 *
 * where j runs over orders 1..n and c_j/C_j are counts for the last j-1
 * tokens of h. When that context was never observed (or h is too short) the
 * deepest observed shorter context stands in for it. Counts live in a trie
 * keyed on the context read backwards from the most recent token.
 */
class NgramModel final : public LanguageModel {
public:
    static constexpr std::size_t kHardMaxOrder = 16;

    NgramModel(std::size_t vocab_size, NgramConfig config);

    /// Counts every n-gram ending inside `tokens`; `history` supplies left
    /// context only.
    void observe(std::span<const TokenId> tokens, std::span<const TokenId> history = {});

    std::size_t vocab_size() const override { return vocab_size_; }
    std::size_t max_context() const override { return config_.order - 1; }
    void next_dist_into(std::span<const TokenId> context, std::span<double> out) const override;
    double prob(std::span<const TokenId> context, TokenId token) const override;

    const NgramConfig& config() const noexcept { return config_; }
    std::size_t order() const noexcept { return config_.order; }
    /// Number of stored (context, token) count entries.
    std::size_t entry_count() const noexcept;
    std::uint64_t tokens_seen() const noexcept { return nodes_[0].total; }
    std::uint64_t count(std::span<const TokenId> context, TokenId token) const;
    std::uint64_t context_total(std::span<const TokenId> context) const;

    /// Lower-order, count-pruned copy holding round(entries / factor) entries.
    NgramModel smaller(double factor) const;

    std::string serialize(SnapshotFormat format = SnapshotFormat::Binary) const;
    static NgramModel deserialize(std::string_view bytes);
    void save(const std::filesystem::path& path, SnapshotFormat format = SnapshotFormat::Binary) const;
    static NgramModel load(const std::filesystem::path& path);

    struct Entry {
        TokenId token;
        std::uint32_t count;
    };
    struct Child {
        TokenId token;
        std::uint32_t node;
    };
    struct Node {
        std::uint64_t total = 0;
        std::vector<Entry> entries;
        std::vector<Child> children;
    };

    /// Context node used by each order j (index j-1), plus the depth of that node.
    struct Chain {
        std::array<const Node*, kHardMaxOrder> node{};
        std::array<std::size_t, kHardMaxOrder> depth{};
    };
    Chain chain(std::span<const TokenId> context) const;
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Visits entries depth-first with their context in natural (oldest-first) order.
    void for_each_entry(const std::function<void(std::span<const TokenId>, TokenId, std::uint32_t)>& fn) const;

private:
    std::uint32_t child_or_create(std::uint32_t node, TokenId token);
    void add_count(std::uint32_t node, TokenId token, std::uint32_t count);
    const Node* find_child(const Node& node, TokenId token) const;

    std::size_t vocab_size_;
    NgramConfig config_;
    std::vector<double> weights_;
    std::vector<Node> nodes_;
};

/// Dropout analog: every count-table lookup is zeroed with probability
/// `rate`, decided by a hash of (seed, order, context, token), then the
/// remaining counts are re-smoothed. Pure function of its inputs.
class NoisyNgramModel final : public LanguageModel {
public:
    NoisyNgramModel(std::shared_ptr<const NgramModel> base, double rate, std::uint64_t seed);

    std::size_t vocab_size() const override { return base_->vocab_size(); }
    std::size_t max_context() const override { return base_->max_context(); }
    void next_dist_into(std::span<const TokenId> context, std::span<double> out) const override;
    double prob(std::span<const TokenId> context, TokenId token) const override;

    double rate() const noexcept { return rate_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    struct Masked;
    Masked masked(std::span<const TokenId> context) const;

    std::shared_ptr<const NgramModel> base_;
    double rate_;
    std::uint64_t seed_;
    std::uint64_t threshold_;
    std::uint64_t root_total_ = 0;
};

using SnapshotCallback = std::function<void(std::uint64_t step, const NgramModel& model)>;

/// Trains on a continuous token stream, snapshotting after every
/// `snapshot_every` tokens (and after a trailing partial chunk). Steps are 1..S.
void train_ngram(std::span<const TokenId> corpus, std::size_t vocab_size, const NgramConfig& config,
                 std::size_t snapshot_every, const SnapshotCallback& on_snapshot);

/// In-memory variant returning every snapshot.
std::vector<CheckpointedModel> train_ngram(std::span<const TokenId> corpus, std::size_t vocab_size,
                                           const NgramConfig& config, std::size_t snapshot_every,
                                           const std::string& family);

} // namespace forge
