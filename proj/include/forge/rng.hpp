#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace forge {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Folds a list of integers into one well-mixed key. Order matters.
std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) noexcept;
std::uint64_t mix_keys(std::span<const std::uint64_t> keys) noexcept;

/// Stable 64-bit FNV-1a of a string, used to turn names into rng keys.
std::uint64_t hash_name(std::string_view name) noexcept;

/**
 * Counter-based random stream.
 *
 * The i-th output is mix64(key + i * golden), so a stream is fully described
 * by (key, counter) and independent substreams are obtained by deriving a new
 * key from any tuple of integers. Outputs do not depend on the standard
 * library's distribution implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t key) noexcept : key_(key) {}

    static Rng substream(std::initializer_list<std::uint64_t> keys) noexcept {
        return Rng(mix_keys(keys));
    }

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle driven by Rng (portable, unlike std::shuffle).
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace forge
