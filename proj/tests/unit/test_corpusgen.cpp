#include <doctest.h>

#include <filesystem>

#include <fmt/format.h>

#include "forge/corpusgen.hpp"
#include "forge/error.hpp"
#include "forge/ngram.hpp"

using namespace forge;

namespace {

std::vector<LabeledParagraph> toy_split(std::size_t per_domain) {
    std::vector<LabeledParagraph> rows;
    const std::vector<std::string> domains{"wiki", "stories"};
    for (std::size_t i = 0; i < per_domain; ++i) {
        for (const auto& d : domains) {
            rows.push_back({d, fmt::format("the {} number {} went to the market and then it came back home again "
                                           "with a basket of fruit",
                                           d, i)});
        }
    }
    return rows;
}

struct Fixture {
    Tokenizer tok;
    CheckpointedModel good;
    CheckpointedModel bad;
    SeedSet seeds;

    Fixture() {
        const auto rows = toy_split(30);
        std::vector<std::string> texts;
        for (const auto& r : rows) texts.push_back(r.text);
        tok = Tokenizer::train(texts, 80);
        TokenSeq stream;
        for (const auto& t : texts) {
            const auto e = tok.encode(t);
            stream.insert(stream.end(), e.begin(), e.end());
            stream.push_back(tok.specials().eos);
        }
        const auto snaps = train_ngram(stream, tok.vocab_size(), {.order = 3}, stream.size() / 4 + 1, "toy");
        good = snaps.back();
        bad = snaps.front();
        seeds = extract_seeds(rows, tok, {.prefix_len = 6, .per_domain_quota = 4});
    }
};

} // namespace

TEST_CASE("labeled tsv round trip") {
    const auto path = std::filesystem::temp_directory_path() / "forge_tsv_test.tsv";
    const std::vector<LabeledParagraph> rows{{"a", "x y"}, {"b", "z\tw"}};
    write_labeled_tsv(path, rows);
    const auto back = read_labeled_tsv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].domain == "b");
    CHECK(back[1].text == "z\tw");
    std::filesystem::remove(path);
}

TEST_CASE("seed extraction quotas, skipping and ordering") {
    const auto rows = toy_split(10);
    std::vector<std::string> texts;
    for (const auto& r : rows) texts.push_back(r.text);
    const auto tok = Tokenizer::train(texts, 60);
    const auto set = extract_seeds(rows, tok, {.prefix_len = 5, .per_domain_quota = 5});
    REQUIRE(set.seeds.size() == 10);
    for (std::size_t i = 0; i < set.seeds.size(); ++i) {
        CHECK(set.seeds[i].id == i);
        CHECK(set.seeds[i].prefix.size() == 5);
        CHECK(set.seeds[i].domain == (i % 2 == 0 ? "stories" : "wiki"));
    }

    std::vector<LabeledParagraph> with_short{{"wiki", "tiny"}, {"wiki", texts[1]}};
    const auto s2 = extract_seeds(with_short, tok, {.prefix_len = 20, .per_domain_quota = 5});
    CHECK(s2.seeds.size() == 1);
    const auto full = tok.encode(texts[1]);
    CHECK(s2.seeds[0].prefix == TokenSeq(full.begin(), full.begin() + 20));

    // prefixes found in another split are excluded
    const std::string other = tok.decode(set.seeds[0].prefix) + " and more";
    const auto s3 = extract_seeds(rows, tok, {.prefix_len = 5, .per_domain_quota = 5, .forbidden = {other}});
    for (const auto& s : s3.seeds) CHECK(s.prefix != set.seeds[0].prefix);

    CHECK_THROWS_AS(extract_seeds({}, tok, {.prefix_len = 5, .per_domain_quota = 5}), ConfigError);
    CHECK(SeedSet::from_json(set.to_json()).digest() == set.digest());
}

TEST_CASE("generation counts records and honours the budget") {
    const Fixture f;
    SeedSet two = f.seeds;
    two.seeds.resize(2);
    GenerationConfig cfg{.strategy = DecodingStrategy::parse("no_contrast"),
                         .completions_per_seed = 2,
                         .max_new = 5,
                         .token_budget = 1'000'000,
                         .master_seed = 42};
    const auto c = generate_corpus(cfg, f.good, nullptr, two, f.tok);
    REQUIRE(c.records.size() == 4);
    for (const auto& r : c.records) CHECK(r.new_tokens <= 5);
    CHECK(c.manifest.status == "budget_unreachable");
    CHECK(c.records[1].seed_id == 0);
    CHECK(c.records[1].completion_idx == 1);
    CHECK(c.records[2].seed_id == 1);

    cfg.max_new = 30;
    cfg.completions_per_seed = 8;
    cfg.token_budget = 60;
    const auto capped = generate_corpus(cfg, f.good, nullptr, f.seeds, f.tok);
    CHECK(capped.manifest.status == "complete");
    CHECK(capped.manifest.produced_tokens >= 60);
    CHECK(capped.manifest.produced_tokens - capped.records.back().new_tokens < 60);
}

TEST_CASE("generation is worker-count invariant and records regenerate") {
    const Fixture f;
    GenerationConfig cfg{.strategy = DecodingStrategy::parse("cd"),
                         .completions_per_seed = 3,
                         .max_new = 20,
                         .token_budget = 300,
                         .master_seed = 7};
    const auto one = generate_corpus(cfg, f.good, &f.bad, f.seeds, f.tok);
    cfg.workers = 8;
    const auto eight = generate_corpus(cfg, f.good, &f.bad, f.seeds, f.tok);
    CHECK(one.jsonl() == eight.jsonl());
    CHECK(one.manifest.to_json().dump() == eight.manifest.to_json().dump());

    const auto manifest = CorpusManifest::from_json(nlohmann::json::parse(one.manifest.to_json().dump()));
    for (const auto& r : one.records) {
        const auto again = regenerate_record(manifest, f.good, &f.bad, f.seeds, f.tok, r.seed_id, r.completion_idx, r.id);
        CHECK(again.to_json().dump() == r.to_json().dump());
    }
    CHECK_THROWS_AS(generate_corpus(cfg, f.good, nullptr, f.seeds, f.tok), ConfigError);

    const auto dir = std::filesystem::temp_directory_path() / "forge_corpus_test";
    write_corpus(one, dir / "c.jsonl", dir / "c.manifest.json");
    const auto back = read_corpus(dir / "c.jsonl");
    REQUIRE(back.size() == one.records.size());
    CHECK(back[0].text == one.records[0].text);
    std::filesystem::remove_all(dir);
}
