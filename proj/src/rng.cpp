#include "forge/rng.hpp"

namespace forge {

std::uint64_t mix_keys(std::span<const std::uint64_t> keys) noexcept {
    std::uint64_t h = 0x6A09E667F3BCC908ULL;
    for (const auto k : keys) {
        h = mix64(h ^ mix64(k + 0x9E3779B97F4A7C15ULL));
    }
    return h;
}

std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) noexcept {
    return mix_keys(std::span<const std::uint64_t>(keys.begin(), keys.size()));
}

std::uint64_t hash_name(std::string_view name) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
    // Lemire's nearly divisionless method.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next_u64()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

} // namespace forge
