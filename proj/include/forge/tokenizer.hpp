#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "forge/types.hpp"

namespace forge {

struct SpecialTokens {
    TokenId unk = 0;
    TokenId bos = 1;
    TokenId eos = 2;
};

/**
 * Byte-pair-encoding tokenizer over Unicode code points.
 *
 * Text is split into pre-tokens (an optional leading space followed by a run
 * of letters, digits or other symbols; whitespace runs stand alone) and merges
 * never cross pre-token boundaries. No normalization is applied: input must be
 * valid UTF-8 and characters unseen during training encode to UNK, which
 * decodes to U+FFFD.
 */
class Tokenizer {
public:
    static constexpr std::string_view kFormatHeader = "forge-bpe 1";

    /// Learns exactly `vocab_size` entries (specials + base characters + merges).
    static Tokenizer train(std::span<const std::string> documents, std::size_t vocab_size);

    TokenSeq encode(std::string_view text) const;
    std::string decode(std::span<const TokenId> tokens) const;

    std::size_t vocab_size() const noexcept { return vocab_.size(); }
    const SpecialTokens& specials() const noexcept { return specials_; }
    const std::string& token_text(TokenId id) const;
    const std::vector<std::pair<TokenId, TokenId>>& merges() const noexcept { return merges_; }

    std::string serialize() const;
    static Tokenizer parse(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Tokenizer load(const std::filesystem::path& path);

    /// SHA-256 of the serialized form.
    std::string digest() const;

private:
    void build_indexes();
    void encode_chunk(std::string_view chunk, TokenSeq& out) const;

    std::vector<std::string> vocab_;
    std::vector<std::pair<TokenId, TokenId>> merges_;
    SpecialTokens specials_;
    std::unordered_map<std::string, TokenId> base_ids_;
    std::unordered_map<std::uint64_t, std::uint32_t> merge_rank_;
};

/// Splits text into the pre-token chunks used by the tokenizer.
std::vector<std::string_view> pretokenize(std::string_view text);

} // namespace forge
