#include "forge/amateur.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/ngram.hpp"

namespace forge {

AmateurSpec AmateurSpec::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ConfigError(fmt::format("bad amateur spec '{}'", text));
    const auto kind = text.substr(0, colon);
    const std::string arg(text.substr(colon + 1));
    AmateurSpec spec;
    try {
        std::size_t used = 0;
        if (kind == "early") {
            spec = earlier(std::stoull(arg, &used));
        } else if (kind == "smaller") {
            spec = smaller(std::stod(arg, &used));
        } else if (kind == "noisy") {
            spec = noisy(std::stod(arg, &used));
        } else {
            throw ConfigError(fmt::format("unknown amateur kind '{}'", kind));
        }
        if (used != arg.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::logic_error&) {
        throw ConfigError(fmt::format("bad amateur spec '{}'", text));
    }
    spec.validate();
    return spec;
}

std::string AmateurSpec::str() const {
    switch (kind) {
    case Kind::EarlierCheckpoint: return fmt::format("early:{}", step);
    case Kind::Smaller: return fmt::format("smaller:{}", factor);
    case Kind::Noisy: return fmt::format("noisy:{}", rate);
    }
    return {};
}

void AmateurSpec::validate() const {
    switch (kind) {
    case Kind::EarlierCheckpoint:
        if (step < 1) throw ConfigError("earlier checkpoint step must be >= 1");
        break;
    case Kind::Smaller:
        if (!(factor > 1.0) || !std::isfinite(factor)) throw ConfigError("reduction factor must be > 1");
        break;
    case Kind::Noisy:
        if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("noise rate must be in [0, 1)");
        break;
    }
}

std::string amateur_family(const CheckpointId& good, const AmateurSpec& spec) {
    switch (spec.kind) {
    case AmateurSpec::Kind::EarlierCheckpoint: return good.family;
    case AmateurSpec::Kind::Smaller: return fmt::format("{}~smaller-{}", good.family, spec.factor);
    case AmateurSpec::Kind::Noisy: return fmt::format("{}~noisy-{}", good.family, spec.rate);
    }
    return good.family;
}

CheckpointedModel derive_amateur(const CheckpointedModel& good, const AmateurSpec& spec, std::uint64_t rng_seed,
                                 const Registry& registry) {
    spec.validate();
    const auto meta = sha256_hex(fmt::format("{}|{}|{}", good.meta_digest, spec.str(), rng_seed));
    switch (spec.kind) {
    case AmateurSpec::Kind::EarlierCheckpoint: {
        if (spec.step >= good.id.step) {
            throw ConfigError(fmt::format("earlier checkpoint step {} is not before GOOD step {}", spec.step,
                                          good.id.step));
        }
        return registry.load({good.id.family, spec.step});
    }
    case AmateurSpec::Kind::Smaller: {
        const auto base = std::dynamic_pointer_cast<const NgramModel>(good.model);
        if (!base) throw ContractError("smaller() amateurs need an n-gram GOOD model");
        return {{amateur_family(good.id, spec), good.id.step}, meta,
                std::make_shared<NgramModel>(base->smaller(spec.factor))};
    }
    case AmateurSpec::Kind::Noisy: {
        const auto base = std::dynamic_pointer_cast<const NgramModel>(good.model);
        if (!base) throw ContractError("noisy amateurs need an n-gram GOOD model");
        return {{amateur_family(good.id, spec), good.id.step}, meta,
                std::make_shared<NoisyNgramModel>(base, spec.rate, rng_seed)};
    }
    }
    throw ConfigError("unknown amateur kind");
}

} // namespace forge
