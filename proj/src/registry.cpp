#include "forge/registry.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/io.hpp"

namespace forge {

using nlohmann::json;

Registry::Registry(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    read_index();
}

void Registry::read_index() {
    const auto path = root_ / "index.json";
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path);
    json doc;
    try {
        in >> doc;
        for (const auto& e : doc.at("snapshots")) {
            RegistryEntry r;
            r.id = {e.at("family").get<std::string>(), e.at("step").get<std::uint64_t>()};
            r.kind = e.at("kind").get<std::string>();
            r.meta_digest = e.value("meta_digest", "");
            if (r.kind == "ngram") {
                r.file = e.at("file").get<std::string>();
                r.file_digest = e.at("file_digest").get<std::string>();
            } else if (r.kind == "noisy") {
                r.base = CheckpointId{e.at("base_family").get<std::string>(), e.at("base_step").get<std::uint64_t>()};
                r.rate = e.at("rate").get<double>();
                r.seed = e.at("seed").get<std::uint64_t>();
            } else {
                throw RegistryError(fmt::format("unknown snapshot kind '{}'", r.kind));
            }
            index_[r.id] = r;
        }
    } catch (const json::exception& ex) {
        throw RegistryError(fmt::format("corrupt registry index '{}': {}", path.string(), ex.what()));
    }
}

void Registry::write_index() const {
    json snaps = json::array();
    for (const auto& [id, r] : index_) {
        json e = {{"family", id.family}, {"step", id.step}, {"kind", r.kind}, {"meta_digest", r.meta_digest}};
        if (r.kind == "ngram") {
            e["file"] = r.file;
            e["file_digest"] = r.file_digest;
        } else {
            e["base_family"] = r.base->family;
            e["base_step"] = r.base->step;
            e["rate"] = r.rate;
            e["seed"] = r.seed;
        }
        snaps.push_back(std::move(e));
    }
    const json doc = {{"format", 1}, {"snapshots", std::move(snaps)}};
    write_file(root_ / "index.json", doc.dump(2) + "\n");
}

void Registry::put(const CheckpointId& id, const NgramModel& model, const std::string& meta_digest,
                   SnapshotFormat format) {
    if (id.family.empty() || id.family.find("..") != std::string::npos) {
        throw RegistryError(fmt::format("invalid model family '{}'", id.family));
    }
    const auto rel = std::filesystem::path(id.family) / fmt::format("step-{:08d}.ngram", id.step);
    std::filesystem::create_directories(root_ / rel.parent_path());
    const auto bytes = model.serialize(format);
    write_file(root_ / rel, bytes);
    RegistryEntry r{id, "ngram", rel.generic_string(), sha256_hex(bytes), meta_digest, std::nullopt, 0.0, 0};
    index_[id] = std::move(r);
    {
        std::lock_guard lock(cache_mutex_);
        cache_.erase(id);
    }
    write_index();
}

void Registry::put_noisy(const CheckpointId& id, const CheckpointId& base, double rate, std::uint64_t seed,
                         const std::string& meta_digest) {
    if (!contains(base)) throw RegistryError(fmt::format("noisy snapshot base {} not in registry", base.str()));
    index_[id] = RegistryEntry{id, "noisy", "", "", meta_digest, base, rate, seed};
    {
        std::lock_guard lock(cache_mutex_);
        cache_.erase(id);
    }
    write_index();
}

bool Registry::contains(const CheckpointId& id) const { return index_.contains(id); }

const RegistryEntry& Registry::entry(const CheckpointId& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw RegistryError(fmt::format("checkpoint {} not found in registry", id.str()));
    return it->second;
}

std::vector<std::uint64_t> Registry::steps(const std::string& family) const {
    std::vector<std::uint64_t> out;
    for (const auto& [id, _] : index_) {
        if (id.family == family) out.push_back(id.step);
    }
    return out;
}

std::vector<RegistryEntry> Registry::entries() const {
    std::vector<RegistryEntry> out;
    for (const auto& [_, r] : index_) out.push_back(r);
    return out;
}

CheckpointedModel Registry::load(const CheckpointId& id) const {
    const auto& r = entry(id);
    {
        std::lock_guard lock(cache_mutex_);
        if (const auto it = cache_.find(id); it != cache_.end()) return {id, r.meta_digest, it->second};
    }
    std::shared_ptr<const LanguageModel> model;
    if (r.kind == "ngram") {
        const auto path = root_ / r.file;
        if (!std::filesystem::exists(path)) throw RegistryError(fmt::format("snapshot file '{}' missing", path.string()));
        if (sha256_file(path) != r.file_digest) {
            throw RegistryError(fmt::format("snapshot file '{}' does not match its index digest", path.string()));
        }
        model = std::make_shared<NgramModel>(NgramModel::load(path));
    } else {
        auto base = std::dynamic_pointer_cast<const NgramModel>(load(*r.base).model);
        if (!base) throw RegistryError("noisy snapshot base is not an n-gram model");
        model = std::make_shared<NoisyNgramModel>(std::move(base), r.rate, r.seed);
    }
    std::lock_guard lock(cache_mutex_);
    cache_[id] = model;
    return {id, r.meta_digest, model};
}

void Registry::clear_cache() const {
    std::lock_guard lock(cache_mutex_);
    cache_.clear();
}

} // namespace forge
