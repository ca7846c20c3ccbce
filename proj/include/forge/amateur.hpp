#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "forge/lm.hpp"
#include "forge/registry.hpp"

namespace forge {

/// Recipe for deriving a BAD model from GOOD.
struct AmateurSpec {
    enum class Kind { EarlierCheckpoint, Smaller, Noisy };

    static constexpr std::array<double, 4> kDefaultFactors{10, 20, 50, 100};
    static constexpr std::array<double, 4> kDefaultRates{0.1, 0.3, 0.5, 0.7};

    Kind kind = Kind::EarlierCheckpoint;
    std::uint64_t step = 0; // EarlierCheckpoint
    double factor = 0.0;    // Smaller
    double rate = 0.0;      // Noisy

    static AmateurSpec earlier(std::uint64_t step) { return {Kind::EarlierCheckpoint, step, 0.0, 0.0}; }
    static AmateurSpec smaller(double factor) { return {Kind::Smaller, 0, factor, 0.0}; }
    static AmateurSpec noisy(double rate) { return {Kind::Noisy, 0, 0.0, rate}; }

    /// Accepts "early:<step>", "smaller:<factor>" and "noisy:<rate>".
    static AmateurSpec parse(std::string_view text);
    std::string str() const;
    void validate() const;
};

/// Family name under which a derived (non-checkpoint) amateur is stored.
std::string amateur_family(const CheckpointId& good, const AmateurSpec& spec);

/// Earlier checkpoints come from the registry; smaller/noisy are derived from
/// GOOD's n-gram tables. `rng_seed` only affects the noisy kind.
CheckpointedModel derive_amateur(const CheckpointedModel& good, const AmateurSpec& spec, std::uint64_t rng_seed,
                                 const Registry& registry);

} // namespace forge
