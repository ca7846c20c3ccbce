#include "forge/corpusgen.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/io.hpp"

namespace forge {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<LabeledParagraph> read_labeled_tsv(const std::filesystem::path& path) {
    const auto data = read_file(path);
    std::vector<LabeledParagraph> rows;
    std::size_t line_no = 0;
    for (std::size_t pos = 0; pos < data.size();) {
        auto nl = data.find('\n', pos);
        if (nl == std::string::npos) nl = data.size();
        std::string_view line(data.data() + pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) {
            throw IoError(fmt::format("{}:{}: expected 'domain<TAB>text'", path.string(), line_no));
        }
        rows.push_back({std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))});
    }
    return rows;
}

void write_labeled_tsv(const std::filesystem::path& path, std::span<const LabeledParagraph> rows) {
    std::string out;
    for (const auto& r : rows) {
        if (r.domain.find_first_of("\t\n") != std::string::npos || r.text.find('\n') != std::string::npos) {
            throw ArgumentError("labeled rows must not contain tabs in the domain or newlines");
        }
        out += r.domain;
        out += '\t';
        out += r.text;
        out += '\n';
    }
    write_file(path, out);
}

json SeedSet::to_json() const {
    json seeds_j = json::array();
    for (const auto& s : seeds) seeds_j.push_back({{"id", s.id}, {"domain", s.domain}, {"prefix", s.prefix}});
    return {{"prefix_len", prefix_len}, {"seeds", std::move(seeds_j)}};
}

SeedSet SeedSet::from_json(const json& j) {
    SeedSet set;
    set.prefix_len = j.at("prefix_len").get<std::size_t>();
    for (const auto& s : j.at("seeds")) {
        set.seeds.push_back(
            {s.at("id").get<std::uint64_t>(), s.at("domain").get<std::string>(), s.at("prefix").get<TokenSeq>()});
    }
    return set;
}

std::string SeedSet::digest() const { return sha256_hex(to_json().dump()); }

SeedSet extract_seeds(std::span<const LabeledParagraph> split, const Tokenizer& tokenizer,
                      const SeedExtraction& options) {
    if (split.empty()) throw ConfigError("seed split is empty");
    if (options.prefix_len < 1) throw ConfigError("prefix_len must be >= 1");
    if (options.per_domain_quota < 1) throw ConfigError("per_domain_quota must be >= 1");

    std::map<std::string, std::vector<const LabeledParagraph*>> by_domain;
    for (const auto& p : split) by_domain[p.domain].push_back(&p);

    std::map<std::string, std::vector<TokenSeq>> picked;
    std::size_t too_short = 0;
    std::size_t overlapping = 0;
    for (const auto& [domain, paragraphs] : by_domain) {
        auto& out = picked[domain];
        for (const auto* p : paragraphs) {
            if (out.size() == options.per_domain_quota) break;
            auto tokens = tokenizer.encode(p->text);
            if (tokens.size() < options.prefix_len) {
                spdlog::debug("seed paragraph in '{}' has {} tokens (< {}), skipped", domain, tokens.size(),
                              options.prefix_len);
                ++too_short;
                continue;
            }
            tokens.resize(options.prefix_len);
            if (!options.forbidden.empty()) {
                const auto text = tokenizer.decode(tokens);
                const std::boyer_moore_horspool_searcher searcher(text.begin(), text.end());
                const bool seen = std::any_of(options.forbidden.begin(), options.forbidden.end(), [&](auto hay) {
                    return std::search(hay.begin(), hay.end(), searcher) != hay.end();
                });
                if (seen) {
                    spdlog::debug("seed prefix '{}' occurs in a training or evaluation split, skipped", text);
                    ++overlapping;
                    continue;
                }
            }
            out.push_back(std::move(tokens));
        }
        if (out.size() < options.per_domain_quota) {
            spdlog::warn("domain '{}' yielded {} of {} requested seeds", domain, out.size(), options.per_domain_quota);
        }
    }
    if (too_short + overlapping > 0) {
        spdlog::info("seed extraction skipped {} short paragraphs and {} prefixes found in other splits", too_short,
                     overlapping);
    }

    SeedSet set;
    set.prefix_len = options.prefix_len;
    for (std::size_t round = 0;; ++round) {
        bool any = false;
        for (auto& [domain, prefixes] : picked) {
            if (round >= prefixes.size()) continue;
            set.seeds.push_back({set.seeds.size(), domain, std::move(prefixes[round])});
            any = true;
        }
        if (!any) break;
    }
    if (set.seeds.empty()) throw ConfigError("no usable seed paragraphs");
    return set;
}

ordered_json CorpusRecord::to_json() const {
    return ordered_json{{"id", id},
                        {"seed_id", seed_id},
                        {"completion_idx", completion_idx},
                        {"source_domain", source_domain},
                        {"strategy_digest", strategy_digest},
                        {"prefix_included", prefix_included},
                        {"new_tokens", new_tokens},
                        {"text", text}};
}

CorpusRecord CorpusRecord::from_json(const json& j) {
    CorpusRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.seed_id = j.at("seed_id").get<std::uint64_t>();
    r.completion_idx = j.at("completion_idx").get<std::uint32_t>();
    r.source_domain = j.at("source_domain").get<std::string>();
    r.strategy_digest = j.at("strategy_digest").get<std::string>();
    r.prefix_included = j.at("prefix_included").get<bool>();
    r.new_tokens = j.value("new_tokens", std::size_t{0});
    r.text = j.at("text").get<std::string>();
    return r;
}

ordered_json CorpusManifest::to_json() const {
    ordered_json j{{"strategy", strategy.to_json()},
                   {"strategy_digest", strategy.digest()},
                   {"good", {{"family", good.family}, {"step", good.step}, {"meta_digest", good_meta}}}};
    if (bad) j["bad"] = {{"family", bad->family}, {"step", bad->step}, {"meta_digest", bad_meta}};
    else j["bad"] = nullptr;
    j["tokenizer_digest"] = tokenizer_digest;
    j["seed_set_digest"] = seed_set_digest;
    j["n_seeds"] = n_seeds;
    j["completions_per_seed"] = completions_per_seed;
    j["max_new"] = max_new;
    j["token_budget"] = token_budget;
    j["master_seed"] = master_seed;
    j["count_prefix"] = count_prefix;
    j["produced_tokens"] = produced_tokens;
    j["records"] = records;
    j["status"] = status;
    j["corpus_digest"] = corpus_digest;
    return j;
}

CorpusManifest CorpusManifest::from_json(const json& j) {
    CorpusManifest m;
    try {
        m.strategy = DecodingStrategy::from_json(j.at("strategy"));
        m.good = {j.at("good").at("family").get<std::string>(), j.at("good").at("step").get<std::uint64_t>()};
        m.good_meta = j.at("good").value("meta_digest", "");
        if (!j.at("bad").is_null()) {
            m.bad = CheckpointId{j.at("bad").at("family").get<std::string>(), j.at("bad").at("step").get<std::uint64_t>()};
            m.bad_meta = j.at("bad").value("meta_digest", "");
        }
        m.tokenizer_digest = j.at("tokenizer_digest").get<std::string>();
        m.seed_set_digest = j.at("seed_set_digest").get<std::string>();
        m.n_seeds = j.at("n_seeds").get<std::size_t>();
        m.completions_per_seed = j.at("completions_per_seed").get<std::size_t>();
        m.max_new = j.at("max_new").get<std::size_t>();
        m.token_budget = j.at("token_budget").get<std::uint64_t>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.count_prefix = j.at("count_prefix").get<bool>();
        m.produced_tokens = j.at("produced_tokens").get<std::uint64_t>();
        m.records = j.at("records").get<std::size_t>();
        m.status = j.at("status").get<std::string>();
        m.corpus_digest = j.at("corpus_digest").get<std::string>();
    } catch (const json::exception& e) {
        throw IoError(fmt::format("bad corpus manifest: {}", e.what()));
    }
    return m;
}

std::string GeneratedCorpus::jsonl() const {
    std::string out;
    for (const auto& r : records) {
        out += r.to_json().dump();
        out += '\n';
    }
    return out;
}

namespace {

CorpusRecord make_record(const DecodingStrategy& strategy, const std::string& strategy_digest,
                         const CheckpointedModel& good, const CheckpointedModel* bad, const Seed& seed,
                         const Tokenizer& tokenizer, std::size_t max_new, std::uint64_t master_seed,
                         std::uint32_t completion) {
    Rng rng = Rng::substream({master_seed, seed.id, completion});
    const auto seq = generate(strategy, good.lm(), bad != nullptr ? &bad->lm() : nullptr, seed.prefix, max_new, rng,
                              tokenizer.specials().eos);
    CorpusRecord r;
    r.seed_id = seed.id;
    r.completion_idx = completion;
    r.source_domain = seed.domain;
    r.strategy_digest = strategy_digest;
    r.prefix_included = true;
    r.new_tokens = seq.size() - seed.prefix.size();
    r.text = tokenizer.decode(seq);
    return r;
}

void check_models(const DecodingStrategy& strategy, const CheckpointedModel& good, const CheckpointedModel* bad,
                  const Tokenizer& tokenizer) {
    strategy.validate();
    if (strategy.contrastive() && bad == nullptr) {
        throw ConfigError(fmt::format("strategy {} needs a BAD model", strategy.name()));
    }
    if (!strategy.contrastive() && bad != nullptr) {
        throw ConfigError(fmt::format("strategy {} does not take a BAD model", strategy.name()));
    }
    if (good.lm().vocab_size() != tokenizer.vocab_size() ||
        (bad != nullptr && bad->lm().vocab_size() != tokenizer.vocab_size())) {
        throw ContractError("model and tokenizer vocabularies differ");
    }
}

} // namespace

GeneratedCorpus generate_corpus(const GenerationConfig& config, const CheckpointedModel& good,
                                const CheckpointedModel* bad, const SeedSet& seeds, const Tokenizer& tokenizer) {
    check_models(config.strategy, good, bad, tokenizer);
    if (config.completions_per_seed < 1) throw ConfigError("completions_per_seed must be >= 1");
    if (seeds.seeds.empty()) throw ConfigError("seed set is empty");

    const auto strategy_digest = config.strategy.digest();
    const std::size_t per_seed = config.completions_per_seed;
    const std::size_t total_units = seeds.seeds.size() * per_seed;
    const unsigned workers = std::max(1u, config.workers);
    const std::size_t block = std::max<std::size_t>(64, std::size_t{workers} * 16);

    GeneratedCorpus out;
    std::uint64_t produced = 0;
    for (std::size_t start = 0; start < total_units && produced < config.token_budget; start += block) {
        const auto end = std::min(total_units, start + block);
        std::vector<CorpusRecord> results(end - start);
        std::atomic<std::size_t> next{start};
        auto work = [&] {
            for (auto u = next.fetch_add(1); u < end; u = next.fetch_add(1)) {
                results[u - start] = make_record(config.strategy, strategy_digest, good, bad, seeds.seeds[u / per_seed],
                                                 tokenizer, config.max_new, config.master_seed,
                                                 static_cast<std::uint32_t>(u % per_seed));
            }
        };
        if (workers == 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        }
        for (auto& r : results) {
            if (produced >= config.token_budget) break;
            r.id = out.records.size();
            produced += r.new_tokens + (config.count_prefix ? seeds.prefix_len : 0);
            out.records.push_back(std::move(r));
        }
    }

    auto& m = out.manifest;
    m.strategy = config.strategy;
    m.good = good.id;
    m.good_meta = good.meta_digest;
    if (bad != nullptr) {
        m.bad = bad->id;
        m.bad_meta = bad->meta_digest;
    }
    m.tokenizer_digest = tokenizer.digest();
    m.seed_set_digest = seeds.digest();
    m.n_seeds = seeds.seeds.size();
    m.completions_per_seed = per_seed;
    m.max_new = config.max_new;
    m.token_budget = config.token_budget;
    m.master_seed = config.master_seed;
    m.count_prefix = config.count_prefix;
    m.produced_tokens = produced;
    m.records = out.records.size();
    m.status = produced >= config.token_budget ? "complete" : "budget_unreachable";
    if (m.status != "complete") {
        spdlog::warn("token budget {} unreachable: all {} seeds x {} completions produced {} tokens",
                     config.token_budget, seeds.seeds.size(), per_seed, produced);
    }
    m.corpus_digest = sha256_hex(out.jsonl());
    return out;
}

CorpusRecord regenerate_record(const CorpusManifest& manifest, const CheckpointedModel& good,
                               const CheckpointedModel* bad, const SeedSet& seeds, const Tokenizer& tokenizer,
                               std::uint64_t seed_id, std::uint32_t completion_idx, std::uint64_t record_id) {
    check_models(manifest.strategy, good, bad, tokenizer);
    if (tokenizer.digest() != manifest.tokenizer_digest) throw ContractError("tokenizer differs from the manifest");
    if (seeds.digest() != manifest.seed_set_digest) throw ContractError("seed set differs from the manifest");
    if (good.id != manifest.good || (bad != nullptr) != manifest.bad.has_value() ||
        (bad != nullptr && bad->id != *manifest.bad)) {
        throw ContractError("models differ from the manifest");
    }
    if (completion_idx >= manifest.completions_per_seed) throw ArgumentError("completion index out of range");
    const auto it = std::find_if(seeds.seeds.begin(), seeds.seeds.end(), [&](const Seed& s) { return s.id == seed_id; });
    if (it == seeds.seeds.end()) throw ArgumentError(fmt::format("seed {} not in seed set", seed_id));
    auto r = make_record(manifest.strategy, manifest.strategy.digest(), good, bad, *it, tokenizer, manifest.max_new,
                         manifest.master_seed, completion_idx);
    r.id = record_id;
    return r;
}

void write_corpus(const GeneratedCorpus& corpus, const std::filesystem::path& jsonl_path,
                  const std::filesystem::path& manifest_path) {
    write_file(jsonl_path, corpus.jsonl());
    write_file(manifest_path, corpus.manifest.to_json().dump(2) + "\n");
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& jsonl_path) {
    const auto data = read_file(jsonl_path);
    std::vector<CorpusRecord> out;
    std::istringstream in(data);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(CorpusRecord::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError(fmt::format("bad corpus record in '{}': {}", jsonl_path.string(), e.what()));
        }
    }
    return out;
}

} // namespace forge
