#include "forge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/amateur.hpp"
#include "forge/corpusgen.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/io.hpp"
#include "forge/mixer.hpp"
#include "forge/registry.hpp"
#include "forge/rng.hpp"
#include "forge/tasks.hpp"
#include "forge/tokenizer.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace forge {

std::vector<std::uint64_t> seed_plan(std::uint64_t master_seed, std::size_t n_runs) {
    if (n_runs < 1) throw ArgumentError("seed_plan needs at least one run");
    Rng rng = Rng::substream({master_seed, hash_name("seed_plan")});
    std::vector<std::uint64_t> seeds;
    std::set<std::uint64_t> seen;
    while (seeds.size() < n_runs) {
        const auto s = rng.next_u64();
        if (seen.insert(s).second) seeds.push_back(s);
    }
    return seeds;
}

std::string mixture_method(const std::string& strategy, double ratio) {
    return fmt::format("{}-MR-{:g}", strategy, ratio);
}

// ---------------------------------------------------------------- config

namespace {

const std::set<std::string> kBuiltinTasks{PerplexityTask::kName, MinimalPairTask::kName};

void reject_unknown(const json& j, const std::set<std::string>& known, std::string_view where) {
    if (!j.is_object()) throw ConfigError(fmt::format("config section '{}' must be an object", where));
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError(fmt::format("unknown config key '{}{}{}'", where, where.empty() ? "" : ".", k));
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return (base / p).lexically_normal();
}

bool valid_name(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

} // namespace

void ExperimentConfig::validate() const {
    for (double f : {train_fraction, eval_fraction, seed_fraction})
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
    if (std::abs(train_fraction + eval_fraction + seed_fraction - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
    if (train_fraction <= 0.0 || eval_fraction <= 0.0) throw ConfigError("train and eval splits must be non-empty");
    backend.validate();
    if (batch_sequences < 1 || seq_len < 2) throw ConfigError("batch_sequences >= 1 and seq_len >= 2 required");
    if (steps < 1 || snapshot_every < 1) throw ConfigError("steps and snapshot_every must be positive");
    if (n_runs < 1) throw ConfigError("n_runs must be at least 1");
    if (!(early_fraction > 0.0 && early_fraction < 1.0)) throw ConfigError("early_fraction must lie in (0, 1)");
    if (resamples < 2) throw ConfigError("resamples must be at least 2");
    for (double q : ratios) {
        MixtureConfig mc;
        mc.synth_ratio = q;
        mc.validate();
    }
    std::set<std::string> names;
    for (const auto& s : strategies) {
        if (!valid_name(s.name)) throw ConfigError(fmt::format("bad strategy name '{}'", s.name));
        if (!names.insert(s.name).second) throw ConfigError(fmt::format("duplicate strategy '{}'", s.name));
        s.decoding.validate();
        if (s.decoding.contrastive() && !s.amateur)
            throw ConfigError(fmt::format("strategy '{}' is contrastive and needs an amateur", s.name));
        if (!s.decoding.contrastive() && s.amateur)
            throw ConfigError(fmt::format("strategy '{}' does not use an amateur", s.name));
        if (s.amateur && *s.amateur != "early:auto") AmateurSpec::parse(*s.amateur).validate();
    }
    if (!positive_ratios().empty()) {
        if (strategies.empty()) throw ConfigError("mixture ratios above 0 need at least one strategy");
        if (seed_fraction <= 0.0) throw ConfigError("generation needs a non-empty seed split");
        if (budget < 1) throw ConfigError("generation budget must be positive");
    }
    if (tasks.empty()) throw ConfigError("at least one evaluation task is required");
    for (const auto& t : tasks)
        if (!kBuiltinTasks.count(t)) throw ConfigError(fmt::format("unknown evaluation task '{}'", t));
    if (std::find(tasks.begin(), tasks.end(), PerplexityTask::kName) == tasks.end())
        throw ConfigError("the perplexity task is required (GOOD selection uses it)");
    for (const auto& t : good_tasks)
        if (std::find(tasks.begin(), tasks.end(), t) == tasks.end())
            throw ConfigError(fmt::format("GOOD selection task '{}' is not an evaluation task", t));
}

std::vector<double> ExperimentConfig::positive_ratios() const {
    std::vector<double> out;
    for (double q : ratios)
        if (q > 0.0) out.push_back(q);
    return out;
}

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["corpus"] = {{"path", corpus_path.string()},
                   {"splits", {{"train", train_fraction}, {"eval", eval_fraction}, {"seed", seed_fraction}}}};
    j["tokenizer"] = {{"vocab_size", vocab_size}};
    j["backend"] = {{"order", backend.order}, {"add_k", backend.add_k}, {"interp_weights", backend.interp_weights}};
    j["training"] = {{"batch_sequences", batch_sequences},
                     {"seq_len", seq_len},
                     {"steps", steps},
                     {"snapshot_every", snapshot_every}};
    j["good"] = {{"tasks", good_tasks}, {"early_fraction", early_fraction}};
    auto sj = ordered_json::array();
    for (const auto& s : strategies) {
        ordered_json e;
        e["name"] = s.name;
        e["decoding"] = s.decoding.to_json();
        if (s.amateur) e["amateur"] = *s.amateur;
        sj.push_back(e);
    }
    j["strategies"] = sj;
    j["generation"] = {{"budget", budget},
                       {"prefix_len", prefix_len},
                       {"per_domain_quota", per_domain_quota},
                       {"completions_per_seed", completions_per_seed},
                       {"max_new", max_new},
                       {"count_prefix", count_prefix}};
    j["mixture"] = {{"ratios", ratios}};
    auto extra = ordered_json::array();
    for (const auto& p : extra_outcomes) extra.push_back(p.string());
    auto pj = ordered_json::array();
    for (const auto& [a, b] : pairs) pj.push_back({a, b});
    j["evaluation"] = {{"tasks", tasks},
                       {"minimal_pairs", minimal_pairs_path.string()},
                       {"extra_outcomes", extra},
                       {"resamples", resamples},
                       {"se_mode", se_mode_name(se_mode)},
                       {"pairs", pj}};
    j["n_runs"] = n_runs;
    j["master_seed"] = master_seed;
    j["workers"] = workers;
    j["root"] = root.string();
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
    ExperimentConfig c;
    reject_unknown(j, {"corpus", "tokenizer", "backend", "training", "good", "strategies", "generation", "mixture",
                       "evaluation", "n_runs", "master_seed", "workers", "root"},
                   "");
    try {
        if (j.contains("corpus")) {
            const auto& s = j.at("corpus");
            reject_unknown(s, {"path", "splits"}, "corpus");
            c.corpus_path = get_or<std::string>(s, "path", c.corpus_path.string());
            if (s.contains("splits")) {
                const auto& sp = s.at("splits");
                reject_unknown(sp, {"train", "eval", "seed"}, "corpus.splits");
                c.train_fraction = get_or(sp, "train", c.train_fraction);
                c.eval_fraction = get_or(sp, "eval", c.eval_fraction);
                c.seed_fraction = get_or(sp, "seed", c.seed_fraction);
            }
        }
        if (j.contains("tokenizer")) {
            reject_unknown(j.at("tokenizer"), {"vocab_size"}, "tokenizer");
            c.vocab_size = get_or(j.at("tokenizer"), "vocab_size", c.vocab_size);
        }
        if (j.contains("backend")) {
            const auto& s = j.at("backend");
            reject_unknown(s, {"order", "add_k", "interp_weights"}, "backend");
            c.backend.order = get_or(s, "order", c.backend.order);
            c.backend.add_k = get_or(s, "add_k", c.backend.add_k);
            c.backend.interp_weights = get_or(s, "interp_weights", c.backend.interp_weights);
        }
        if (j.contains("training")) {
            const auto& s = j.at("training");
            reject_unknown(s, {"batch_sequences", "seq_len", "steps", "snapshot_every"}, "training");
            c.batch_sequences = get_or(s, "batch_sequences", c.batch_sequences);
            c.seq_len = get_or(s, "seq_len", c.seq_len);
            c.steps = get_or(s, "steps", c.steps);
            c.snapshot_every = get_or(s, "snapshot_every", c.snapshot_every);
        }
        if (j.contains("good")) {
            const auto& s = j.at("good");
            reject_unknown(s, {"tasks", "early_fraction"}, "good");
            c.good_tasks = get_or(s, "tasks", c.good_tasks);
            c.early_fraction = get_or(s, "early_fraction", c.early_fraction);
        }
        if (j.contains("strategies")) {
            for (const auto& e : j.at("strategies")) {
                reject_unknown(e, {"name", "decoding", "amateur"}, "strategies[]");
                StrategyEntry s;
                s.name = e.at("name").get<std::string>();
                const auto& d = e.at("decoding");
                s.decoding = d.is_string() ? DecodingStrategy::parse(d.get<std::string>()) : DecodingStrategy::from_json(d);
                if (e.contains("amateur")) s.amateur = e.at("amateur").get<std::string>();
                c.strategies.push_back(std::move(s));
            }
        }
        if (j.contains("generation")) {
            const auto& s = j.at("generation");
            reject_unknown(s, {"budget", "prefix_len", "per_domain_quota", "completions_per_seed", "max_new",
                               "count_prefix"},
                           "generation");
            c.budget = get_or(s, "budget", c.budget);
            c.prefix_len = get_or(s, "prefix_len", c.prefix_len);
            c.per_domain_quota = get_or(s, "per_domain_quota", c.per_domain_quota);
            c.completions_per_seed = get_or(s, "completions_per_seed", c.completions_per_seed);
            c.max_new = get_or(s, "max_new", c.max_new);
            c.count_prefix = get_or(s, "count_prefix", c.count_prefix);
        }
        if (j.contains("mixture")) {
            reject_unknown(j.at("mixture"), {"ratios"}, "mixture");
            c.ratios = get_or(j.at("mixture"), "ratios", c.ratios);
        }
        if (j.contains("evaluation")) {
            const auto& s = j.at("evaluation");
            reject_unknown(s, {"tasks", "minimal_pairs", "extra_outcomes", "resamples", "se_mode", "pairs"},
                           "evaluation");
            c.tasks = get_or(s, "tasks", c.tasks);
            c.minimal_pairs_path = get_or<std::string>(s, "minimal_pairs", c.minimal_pairs_path.string());
            for (const auto& p : get_or(s, "extra_outcomes", std::vector<std::string>{})) c.extra_outcomes.push_back(p);
            c.resamples = get_or(s, "resamples", c.resamples);
            c.se_mode = parse_se_mode(get_or<std::string>(s, "se_mode", std::string(se_mode_name(c.se_mode))));
            for (const auto& p : get_or(s, "pairs", std::vector<std::vector<std::string>>{})) {
                if (p.size() != 2) throw ConfigError("evaluation.pairs entries must be [a, b]");
                c.pairs.emplace_back(p[0], p[1]);
            }
        }
        c.n_runs = get_or(j, "n_runs", c.n_runs);
        c.master_seed = get_or(j, "master_seed", c.master_seed);
        c.workers = get_or(j, "workers", c.workers);
        c.root = get_or<std::string>(j, "root", c.root.string());
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("bad config: {}", e.what()));
    }
    c.corpus_path = resolve(c.corpus_path, base_dir);
    c.minimal_pairs_path = resolve(c.minimal_pairs_path, base_dir);
    for (auto& p : c.extra_outcomes) p = resolve(p, base_dir);
    c.root = resolve(c.root, base_dir);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return from_json(j, fs::absolute(path).parent_path());
}

std::string ExperimentConfig::digest() const {
    auto j = to_json();
    j.erase("workers");
    j.erase("root");
    j["corpus"].erase("path");
    j["corpus"]["sha256"] = sha256_file(corpus_path);
    j["evaluation"].erase("minimal_pairs");
    if (std::find(tasks.begin(), tasks.end(), MinimalPairTask::kName) != tasks.end())
        j["evaluation"]["minimal_pairs_sha256"] = sha256_file(minimal_pairs_path);
    auto extra = ordered_json::array();
    for (const auto& p : extra_outcomes) extra.push_back(sha256_file(p));
    j["evaluation"]["extra_outcomes"] = extra;
    j["format"] = "forge-experiment 1";
    return sha256_hex(j.dump());
}

void apply_override(json& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ArgumentError(fmt::format("override '{}' must look like key.path=value", assignment));
    const std::string path(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ArgumentError(fmt::format("bad override key '{}'", path));
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

// -------------------------------------------------------------- pipeline

const std::vector<std::string>& Pipeline::stage_names() {
    static const std::vector<std::string> names{"tokenize",  "train",     "select-good", "derive-bad",
                                                "generate",  "mix-train", "eval",        "report"};
    return names;
}

Pipeline::Pipeline(ExperimentConfig config) : config_(std::move(config)) {
    config_.validate();
    if (const char* env = std::getenv("FORGE_ROOT"); env && *env) config_.root = env;
    config_digest_ = config_.digest();
    dir_ = config_.root / ("exp-" + config_digest_.substr(0, 16));
}

namespace {

constexpr std::string_view kManifestFormat = "forge-stage 1";

struct Paths {
    fs::path dir;
    fs::path stages() const { return dir / "stages"; }
    fs::path split(std::string_view name) const { return dir / "splits" / fmt::format("{}.tsv", name); }
    fs::path tokenizer() const { return dir / "tokenizer.txt"; }
    fs::path baseline_models() const { return dir / "models" / "baseline"; }
    fs::path amateur_models() const { return dir / "models" / "amateurs"; }
    fs::path mixture_models() const { return dir / "models" / "mixtures"; }
    fs::path good() const { return dir / "good.json"; }
    fs::path amateurs() const { return dir / "amateurs.json"; }
    fs::path seeds() const { return dir / "corpora" / "seeds.json"; }
    fs::path corpus(const std::string& s) const { return dir / "corpora" / s / "corpus.jsonl"; }
    fs::path corpus_manifest(const std::string& s) const { return dir / "corpora" / s / "manifest.json"; }
    fs::path outcomes() const { return dir / "eval" / "outcomes.tsv"; }
    fs::path models_summary() const { return dir / "eval" / "models.json"; }
    fs::path report(std::string_view ext) const { return dir / "report" / fmt::format("report.{}", ext); }
};

std::string baseline_family(std::size_t run) { return fmt::format("baseline-r{}", run); }

std::vector<fs::path> files_under(const fs::path& root) {
    std::vector<fs::path> out;
    if (!fs::exists(root)) return out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

void write_json(const fs::path& path, const ordered_json& j) { write_file(path, j.dump(2) + "\n"); }

std::vector<std::string> texts_of(const std::vector<LabeledParagraph>& rows) {
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.text);
    return out;
}

std::vector<TokenSeq> encode_all(const Tokenizer& tok, const std::vector<std::string>& texts, unsigned workers) {
    std::vector<TokenSeq> out(texts.size());
    parallel_for(texts.size(), workers, [&](std::size_t i) { out[i] = tok.encode(texts[i]); });
    return out;
}

/// Last snapshot step at or before `target`, else the first one.
std::uint64_t snapshot_at_or_before(const std::vector<std::uint64_t>& steps, double target) {
    if (steps.empty()) throw RegistryError("no snapshots to choose from");
    std::uint64_t pick = steps.front();
    for (auto s : steps)
        if (static_cast<double>(s) <= target) pick = s;
    return pick;
}

struct TaskSet {
    std::vector<std::unique_ptr<TaskAdapter>> adapters;

    std::vector<TaskSpec> specs() const {
        std::vector<TaskSpec> out;
        for (const auto& a : adapters) out.push_back(a->spec());
        return out;
    }
};

TaskSet make_tasks(const ExperimentConfig& cfg, const std::vector<std::string>& names, const Tokenizer& tok,
                   const Paths& paths) {
    TaskSet set;
    for (const auto& name : names) {
        if (name == PerplexityTask::kName) {
            auto docs = encode_all(tok, texts_of(read_labeled_tsv(paths.split("eval"))), cfg.workers);
            set.adapters.push_back(std::make_unique<PerplexityTask>(std::move(docs), tok.specials().eos));
        } else if (name == MinimalPairTask::kName) {
            const auto pairs = read_minimal_pairs(cfg.minimal_pairs_path);
            set.adapters.push_back(std::make_unique<MinimalPairTask>(MinimalPairTask::from_text(pairs, tok)));
        }
    }
    return set;
}

CheckpointId id_from_json(const json& j) { return {j.at("family").get<std::string>(), j.at("step").get<std::uint64_t>()}; }

ordered_json id_to_json(const CheckpointId& id) {
    ordered_json j;
    j["family"] = id.family;
    j["step"] = id.step;
    return j;
}

} // namespace

std::string Pipeline::manifest_output_digest(const std::string& stage) const {
    const auto path = Paths{dir_}.stages() / (stage + ".json");
    const auto j = json::parse(read_file(path));
    return sha256_hex(j.at("outputs").dump());
}

bool Pipeline::up_to_date(const std::string& stage, const std::string& input_digest) const {
    const auto path = Paths{dir_}.stages() / (stage + ".json");
    if (!fs::exists(path)) return false;
    try {
        const auto j = json::parse(read_file(path));
        if (j.at("format") != kManifestFormat || j.at("input_digest") != input_digest) return false;
        for (const auto& [rel, digest] : j.at("outputs").items()) {
            const auto p = dir_ / rel;
            if (!fs::exists(p) || sha256_file(p) != digest.get<std::string>()) return false;
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void Pipeline::write_manifest(const std::string& stage, const std::string& input_digest,
                              const std::vector<fs::path>& outputs) const {
    ordered_json j;
    j["format"] = kManifestFormat;
    j["stage"] = stage;
    j["input_digest"] = input_digest;
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& p : outputs) rows.emplace_back(fs::relative(p, dir_).generic_string(), sha256_file(p));
    std::sort(rows.begin(), rows.end());
    ordered_json out = ordered_json::object();
    for (const auto& [rel, d] : rows) out[rel] = d;
    j["outputs"] = out;
    write_json(Paths{dir_}.stages() / (stage + ".json"), j);
}

std::vector<StageResult> Pipeline::run(std::string_view last) {
    const auto& names = stage_names();
    const auto stop = std::find(names.begin(), names.end(), last);
    if (stop == names.end()) throw ArgumentError(fmt::format("unknown stage '{}'", last));

    fs::create_directories(dir_);
    write_json(dir_ / "config.json", config_.to_json());

    std::vector<StageResult> results;
    std::vector<std::string> upstream;
    for (auto it = names.begin(); it != std::next(stop); ++it) {
        const std::string& name = *it;
        Sha256 h;
        h.update(name).update("\n").update(config_digest_);
        for (const auto& u : upstream) h.update("\n").update(u);
        const auto input_digest = h.hex();

        StageResult res{name, false};
        if (up_to_date(name, input_digest)) {
            spdlog::info("stage {}: up to date", name);
        } else {
            spdlog::info("stage {}: running", name);
            std::vector<fs::path> outputs;
            try {
                if (name == "tokenize") outputs = stage_tokenize();
                else if (name == "train") outputs = stage_train();
                else if (name == "select-good") outputs = stage_select_good();
                else if (name == "derive-bad") outputs = stage_derive_bad();
                else if (name == "generate") outputs = stage_generate();
                else if (name == "mix-train") outputs = stage_mix_train();
                else if (name == "eval") outputs = stage_eval();
                else outputs = stage_report();
            } catch (const std::exception& e) {
                std::string done;
                for (const auto& r : results) done += (done.empty() ? "" : ", ") + r.name;
                throw Error(fmt::format("stage '{}' failed: {} (completed stages: {})", name, e.what(),
                                        done.empty() ? "none" : done));
            }
            write_manifest(name, input_digest, outputs);
            res.executed = true;
        }
        upstream.push_back(manifest_output_digest(name));
        results.push_back(res);
    }
    return results;
}

// ---------------------------------------------------------------- stages

std::vector<fs::path> Pipeline::stage_tokenize() {
    const Paths paths{dir_};
    const auto rows = read_labeled_tsv(config_.corpus_path);
    if (rows.size() < 3) throw ConfigError("corpus needs at least three paragraphs");
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::substream({config_.master_seed, hash_name("split")});
    shuffle(order, rng);

    const auto n = static_cast<double>(rows.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * config_.train_fraction));
    const auto n_eval = std::min(rows.size() - n_train, static_cast<std::size_t>(std::llround(n * config_.eval_fraction)));
    if (n_train == 0 || n_eval == 0) throw ConfigError("corpus too small for the configured splits");

    auto take = [&](std::size_t from, std::size_t to) {
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(from),
                                     order.begin() + static_cast<std::ptrdiff_t>(to));
        std::sort(idx.begin(), idx.end()); // keep file order inside a split
        std::vector<LabeledParagraph> out;
        for (auto i : idx) out.push_back(rows[i]);
        return out;
    };
    const auto train = take(0, n_train);
    write_labeled_tsv(paths.split("train"), train);
    write_labeled_tsv(paths.split("eval"), take(n_train, n_train + n_eval));
    write_labeled_tsv(paths.split("seed"), take(n_train + n_eval, rows.size()));

    const auto texts = texts_of(train);
    Tokenizer::train(texts, config_.vocab_size).save(paths.tokenizer());
    spdlog::info("tokenize: {} train / {} eval / {} seed paragraphs, vocab {}", n_train, n_eval,
                 rows.size() - n_train - n_eval, config_.vocab_size);
    return {paths.split("train"), paths.split("eval"), paths.split("seed"), paths.tokenizer()};
}

std::vector<fs::path> Pipeline::stage_train() {
    const Paths paths{dir_};
    fs::remove_all(paths.baseline_models());
    const auto tok = Tokenizer::load(paths.tokenizer());
    const auto docs = encode_all(tok, texts_of(read_labeled_tsv(paths.split("train"))), config_.workers);
    const auto plan = seed_plan(config_.master_seed, config_.n_runs);
    Registry registry(paths.baseline_models());
    for (std::size_t r = 0; r < plan.size(); ++r) {
        MixtureConfig mc{0.0, config_.batch_sequences, config_.seq_len, plan[r]};
        MixtureStream stream(docs, {}, tok.specials().eos, mc);
        const auto family = baseline_family(r);
        train_on_stream(stream, tok.vocab_size(), config_.backend, config_.steps, config_.snapshot_every,
                        [&](std::uint64_t step, const NgramModel& model) {
                            const auto meta = sha256_hex(fmt::format("{}|{}|{}", config_digest_, family, step));
                            registry.put({family, step}, model, meta);
                        });
        spdlog::info("train: {} done ({} steps)", family, config_.steps);
    }
    return files_under(paths.baseline_models());
}

std::vector<fs::path> Pipeline::stage_select_good() {
    const Paths paths{dir_};
    const auto tok = Tokenizer::load(paths.tokenizer());
    const auto& names = config_.good_tasks.empty() ? config_.tasks : config_.good_tasks;
    auto tasks = make_tasks(config_, names, tok, paths);
    const auto plan = seed_plan(config_.master_seed, config_.n_runs);
    Registry registry(paths.baseline_models());

    std::vector<GoodCandidate> cands;
    std::map<std::uint64_t, std::string> family_of;
    for (std::size_t r = 0; r < plan.size(); ++r) {
        const auto family = baseline_family(r);
        family_of[plan[r]] = family;
        for (auto step : registry.steps(family)) {
            const auto model = registry.load({family, step});
            GoodCandidate c{plan[r], step, {}};
            for (const auto& t : tasks.adapters)
                c.scores[t->spec().name] = aggregate(t->spec(), t->score(model.lm(), config_.workers));
            cands.push_back(std::move(c));
        }
        registry.clear_cache();
    }
    const auto specs = tasks.specs();
    const auto sel = select_good(cands, specs, PerplexityTask::kName);

    ordered_json j;
    j["id"] = id_to_json({family_of.at(sel.seed), sel.step});
    j["seed"] = sel.seed;
    j["mean_percentile"] = sel.mean_percentile;
    auto cj = ordered_json::array();
    for (const auto& [seed, step, pct] : sel.candidates)
        cj.push_back({{"family", family_of.at(seed)}, {"step", step}, {"mean_percentile", pct}});
    j["candidates"] = cj;
    auto sj = ordered_json::array();
    for (const auto& c : cands) {
        ordered_json row{{"family", family_of.at(c.seed)}, {"step", c.step}};
        for (const auto& [t, v] : c.scores) row[t] = v;
        sj.push_back(row);
    }
    j["scores"] = sj;
    write_json(paths.good(), j);
    spdlog::info("select-good: {}@{}", family_of.at(sel.seed), sel.step);
    return {paths.good()};
}

namespace {

/// Resolves the amateur spec string of a strategy against the GOOD checkpoint.
AmateurSpec resolve_amateur(const std::string& text, const CheckpointId& good, const Registry& baseline,
                            double early_fraction) {
    if (text == "early:auto") {
        const auto steps = baseline.steps(good.family);
        const auto target = static_cast<double>(good.step) * early_fraction;
        const auto step = snapshot_at_or_before(steps, target);
        if (step >= good.step)
            throw ConfigError(fmt::format("no snapshot of {} precedes GOOD step {}", good.family, good.step));
        return AmateurSpec::earlier(step);
    }
    return AmateurSpec::parse(text);
}

std::uint64_t amateur_seed(std::uint64_t master, const AmateurSpec& spec) {
    return mix_keys({master, hash_name("amateur"), hash_name(spec.str())});
}

} // namespace

std::vector<fs::path> Pipeline::stage_derive_bad() {
    const Paths paths{dir_};
    fs::remove_all(paths.amateur_models());
    ordered_json list = ordered_json::array();
    if (config_.positive_ratios().empty()) {
        write_json(paths.amateurs(), list);
        return {paths.amateurs()};
    }
    Registry baseline(paths.baseline_models());
    const auto good_id = id_from_json(json::parse(read_file(paths.good())).at("id"));
    const auto good = baseline.load(good_id);
    Registry store(paths.amateur_models());
    std::set<std::string> done;
    for (const auto& s : config_.strategies) {
        if (!s.amateur || !done.insert(*s.amateur).second) continue;
        const auto spec = resolve_amateur(*s.amateur, good_id, baseline, config_.early_fraction);
        const auto bad = derive_amateur(good, spec, amateur_seed(config_.master_seed, spec), baseline);
        if (spec.kind == AmateurSpec::Kind::Smaller)
            store.put(bad.id, dynamic_cast<const NgramModel&>(bad.lm()), bad.meta_digest);
        ordered_json e;
        e["config"] = *s.amateur;
        e["spec"] = spec.str();
        e["id"] = id_to_json(bad.id);
        e["meta_digest"] = bad.meta_digest;
        list.push_back(e);
        spdlog::info("derive-bad: {} -> {}", *s.amateur, bad.id.str());
    }
    write_json(paths.amateurs(), list);
    auto out = files_under(paths.amateur_models());
    out.push_back(paths.amateurs());
    return out;
}

namespace {

CheckpointedModel load_amateur(const json& entry, const CheckpointedModel& good, std::uint64_t master,
                               const Registry& baseline, const fs::path& amateur_root) {
    const auto spec = AmateurSpec::parse(entry.at("spec").get<std::string>());
    switch (spec.kind) {
    case AmateurSpec::Kind::EarlierCheckpoint: return baseline.load(id_from_json(entry.at("id")));
    case AmateurSpec::Kind::Smaller: return Registry(amateur_root).load(id_from_json(entry.at("id")));
    case AmateurSpec::Kind::Noisy: return derive_amateur(good, spec, amateur_seed(master, spec), baseline);
    }
    throw ConfigError("unknown amateur kind");
}

const json& amateur_entry(const json& list, const std::string& config_text) {
    for (const auto& e : list)
        if (e.at("config") == config_text) return e;
    throw ConfigError(fmt::format("amateur '{}' was not derived", config_text));
}

} // namespace

std::vector<fs::path> Pipeline::stage_generate() {
    const Paths paths{dir_};
    fs::remove_all(dir_ / "corpora");
    if (config_.positive_ratios().empty()) return {};
    const auto tok = Tokenizer::load(paths.tokenizer());
    Registry baseline(paths.baseline_models());
    const auto good = baseline.load(id_from_json(json::parse(read_file(paths.good())).at("id")));
    const auto amateurs = json::parse(read_file(paths.amateurs()));

    const auto seed_rows = read_labeled_tsv(paths.split("seed"));
    const auto train_text = [&] {
        std::string all;
        for (const auto& r : read_labeled_tsv(paths.split("train"))) all += r.text + "\n";
        return all;
    }();
    const auto eval_text = [&] {
        std::string all;
        for (const auto& r : read_labeled_tsv(paths.split("eval"))) all += r.text + "\n";
        return all;
    }();
    SeedExtraction ex;
    ex.prefix_len = config_.prefix_len;
    ex.per_domain_quota = config_.per_domain_quota == 0 ? seed_rows.size() : config_.per_domain_quota;
    ex.forbidden = {train_text, eval_text};
    const auto seeds = extract_seeds(seed_rows, tok, ex);
    if (seeds.seeds.empty()) throw ConfigError("no usable generation seeds in the seed split");
    write_json(paths.seeds(), seeds.to_json());
    std::vector<fs::path> out{paths.seeds()};

    for (const auto& s : config_.strategies) {
        GenerationConfig gc;
        gc.strategy = s.decoding;
        gc.completions_per_seed = config_.completions_per_seed;
        gc.max_new = config_.max_new;
        gc.token_budget = config_.budget;
        gc.master_seed = mix_keys({config_.master_seed, hash_name("generate"), hash_name(s.name)});
        gc.count_prefix = config_.count_prefix;
        gc.workers = config_.workers;
        std::optional<CheckpointedModel> bad;
        if (s.amateur)
            bad = load_amateur(amateur_entry(amateurs, *s.amateur), good, config_.master_seed, baseline,
                               paths.amateur_models());
        const auto corpus = generate_corpus(gc, good, bad ? &*bad : nullptr, seeds, tok);
        if (corpus.manifest.status != "complete")
            spdlog::warn("generate: {} produced {} of {} tokens ({})", s.name, corpus.manifest.produced_tokens,
                         config_.budget, corpus.manifest.status);
        write_corpus(corpus, paths.corpus(s.name), paths.corpus_manifest(s.name));
        out.push_back(paths.corpus(s.name));
        out.push_back(paths.corpus_manifest(s.name));
        spdlog::info("generate: {} -> {} records, {} tokens", s.name, corpus.records.size(),
                     corpus.manifest.produced_tokens);
    }
    return out;
}

std::vector<fs::path> Pipeline::stage_mix_train() {
    const Paths paths{dir_};
    fs::remove_all(paths.mixture_models());
    if (config_.positive_ratios().empty()) return {};
    const auto tok = Tokenizer::load(paths.tokenizer());
    const auto real = encode_all(tok, texts_of(read_labeled_tsv(paths.split("train"))), config_.workers);
    const auto plan = seed_plan(config_.master_seed, config_.n_runs);
    Registry registry(paths.mixture_models());
    for (const auto& s : config_.strategies) {
        std::vector<std::string> texts;
        for (auto& rec : read_corpus(paths.corpus(s.name))) texts.push_back(std::move(rec.text));
        const auto synth = encode_all(tok, texts, config_.workers);
        for (double q : config_.positive_ratios()) {
            for (std::size_t r = 0; r < plan.size(); ++r) {
                MixtureConfig mc{q, config_.batch_sequences, config_.seq_len, plan[r]};
                MixtureStream stream(real, synth, tok.specials().eos, mc);
                const auto family = fmt::format("{}-r{}", mixture_method(s.name, q), r);
                train_on_stream(stream, tok.vocab_size(), config_.backend, config_.steps, config_.snapshot_every,
                                [&](std::uint64_t step, const NgramModel& model) {
                                    const auto meta =
                                        sha256_hex(fmt::format("{}|{}|{}", config_digest_, family, step));
                                    registry.put({family, step}, model, meta);
                                });
                spdlog::info("mix-train: {} done", family);
            }
        }
    }
    return files_under(paths.mixture_models());
}

std::vector<fs::path> Pipeline::stage_eval() {
    const Paths paths{dir_};
    const auto tok = Tokenizer::load(paths.tokenizer());
    auto tasks = make_tasks(config_, config_.tasks, tok, paths);
    const auto plan = seed_plan(config_.master_seed, config_.n_runs);

    OutcomeMatrix matrix;
    for (const auto& t : tasks.adapters) matrix.add_task(t->spec());
    const TaskAdapter* ppl = nullptr;
    for (const auto& t : tasks.adapters)
        if (t->spec().name == PerplexityTask::kName) ppl = t.get();

    auto perplexity_of = [&](const LanguageModel& lm) { return aggregate(ppl->spec(), ppl->score(lm, config_.workers)); };
    ordered_json finals = ordered_json::array();

    auto score_family = [&](const Registry& reg, const std::string& family, const std::string& method,
                            std::uint64_t seed) {
        const auto steps = reg.steps(family);
        for (auto step : steps) {
            const auto model = reg.load({family, step});
            for (const auto& t : tasks.adapters) {
                auto o = t->score(model.lm(), config_.workers);
                if (step == steps.back() && t.get() == ppl)
                    finals.push_back({{"method", method}, {"family", family}, {"step", step},
                                      {"perplexity", aggregate(ppl->spec(), o)}});
                matrix.set(method, t->spec().name, seed, step, std::move(o));
            }
        }
        reg.clear_cache();
    };

    Registry baseline(paths.baseline_models());
    for (std::size_t r = 0; r < plan.size(); ++r)
        score_family(baseline, baseline_family(r), std::string(kBaselineMethod), plan[r]);
    if (!config_.positive_ratios().empty()) {
        Registry mixtures(paths.mixture_models());
        for (const auto& s : config_.strategies)
            for (double q : config_.positive_ratios())
                for (std::size_t r = 0; r < plan.size(); ++r)
                    score_family(mixtures, fmt::format("{}-r{}", mixture_method(s.name, q), r),
                                 mixture_method(s.name, q), plan[r]);
    }
    for (const auto& extra : config_.extra_outcomes) matrix.merge(OutcomeMatrix::load(extra));
    matrix.validate();
    matrix.save(paths.outcomes());

    ordered_json summary;
    const auto good_id = id_from_json(json::parse(read_file(paths.good())).at("id"));
    const auto good = baseline.load(good_id);
    summary["good"] = {{"id", id_to_json(good_id)}, {"perplexity", perplexity_of(good.lm())}};
    ordered_json am = ordered_json::array();
    if (!config_.positive_ratios().empty()) {
        const auto amateurs = json::parse(read_file(paths.amateurs()));
        for (const auto& e : amateurs) {
            const auto bad = load_amateur(e, good, config_.master_seed, baseline, paths.amateur_models());
            am.push_back({{"spec", e.at("spec")}, {"id", id_to_json(bad.id)}, {"perplexity", perplexity_of(bad.lm())}});
        }
    }
    summary["amateurs"] = am;
    summary["final_checkpoints"] = finals;
    write_json(paths.models_summary(), summary);
    return {paths.outcomes(), paths.models_summary()};
}

std::vector<fs::path> Pipeline::stage_report() {
    const Paths paths{dir_};
    const auto matrix = OutcomeMatrix::load(paths.outcomes());
    ReportConfig rc;
    rc.baseline = std::string(kBaselineMethod);
    rc.resamples = config_.resamples;
    rc.seed = mix_keys({config_.master_seed, hash_name("bootstrap")});
    rc.se_mode = config_.se_mode;
    rc.workers = config_.workers;
    rc.pairs = config_.pairs;
    if (rc.pairs.empty()) {
        for (double q : config_.positive_ratios())
            for (const auto& a : config_.strategies)
                for (const auto& b : config_.strategies)
                    if (a.decoding.contrastive() && !b.decoding.contrastive())
                        rc.pairs.emplace_back(mixture_method(a.name, q), mixture_method(b.name, q));
    }
    const auto report = build_report(matrix, rc);
    write_file(paths.report("json"), report.to_json().dump(2) + "\n");
    std::string tex = render_latex(report);
    for (const auto& pw : report.pairwise) tex += "\n" + render_latex_pairwise(pw, report.tasks);
    write_file(paths.report("tex"), tex);
    write_file(paths.report("md"), render_markdown(report));
    write_file(paths.report("csv"), render_csv(report));
    return {paths.report("json"), paths.report("tex"), paths.report("md"), paths.report("csv")};
}

} // namespace forge
