#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "forge/lm.hpp"
#include "forge/ngram.hpp"

namespace forge {

struct RegistryEntry {
    CheckpointId id;
    std::string kind; // "ngram" or "noisy"
    std::string file; // relative to the registry root; empty for "noisy"
    std::string file_digest;
    std::string meta_digest;
    std::optional<CheckpointId> base; // noisy only
    double rate = 0.0;
    std::uint64_t seed = 0;
};

/**
 * Directory of snapshots named <family>/step-<step>.ngram with an index.json
 * listing every snapshot. Loaded models are cached and shared.
 */
class Registry {
public:
    explicit Registry(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    void put(const CheckpointId& id, const NgramModel& model, const std::string& meta_digest,
             SnapshotFormat format = SnapshotFormat::Binary);
    void put_noisy(const CheckpointId& id, const CheckpointId& base, double rate, std::uint64_t seed,
                   const std::string& meta_digest);

    bool contains(const CheckpointId& id) const;
    const RegistryEntry& entry(const CheckpointId& id) const;
    std::vector<std::uint64_t> steps(const std::string& family) const;
    std::vector<RegistryEntry> entries() const;

    CheckpointedModel load(const CheckpointId& id) const;
    /// Drops cached models (snapshots stay on disk).
    void clear_cache() const;

private:
    void read_index();
    void write_index() const;

    std::filesystem::path root_;
    std::map<CheckpointId, RegistryEntry> index_;
    mutable std::mutex cache_mutex_;
    mutable std::map<CheckpointId, std::shared_ptr<const LanguageModel>> cache_;
};

} // namespace forge
