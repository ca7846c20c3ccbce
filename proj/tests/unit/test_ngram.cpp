#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "forge/amateur.hpp"
#include "forge/error.hpp"
#include "forge/ngram.hpp"
#include "forge/registry.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

TokenSeq random_stream(std::uint64_t seed, std::size_t n, std::size_t vocab) {
    // Skewed toward low ids with some local structure so contexts repeat.
    Rng rng(seed);
    TokenSeq out;
    TokenId prev = 0;
    for (std::size_t i = 0; i < n; ++i) {
        TokenId t = rng.uniform() < 0.5 ? static_cast<TokenId>((prev * 7 + 3) % vocab)
                                        : static_cast<TokenId>(rng.below(1 + rng.below(vocab)));
        out.push_back(t);
        prev = t;
    }
    return out;
}

// Independent oracle: plain tuple counting plus the interpolation formula.
struct BruteNgram {
    std::size_t order, vocab;
    double k;
    std::map<std::vector<TokenId>, std::map<TokenId, double>> counts;

    BruteNgram(const TokenSeq& s, std::size_t order, std::size_t vocab, double k) : order(order), vocab(vocab), k(k) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (std::size_t d = 0; d < order && d <= i; ++d) {
                std::vector<TokenId> ctx(s.begin() + static_cast<long>(i - d), s.begin() + static_cast<long>(i));
                counts[ctx][s[i]] += 1;
            }
        }
    }

    double prob(std::vector<TokenId> ctx, TokenId w) const {
        if (ctx.size() > order - 1) ctx.erase(ctx.begin(), ctx.end() - static_cast<long>(order - 1));
        // deepest observed suffix
        std::size_t found = 0;
        for (std::size_t d = 1; d <= ctx.size(); ++d) {
            std::vector<TokenId> suffix(ctx.end() - static_cast<long>(d), ctx.end());
            if (!counts.contains(suffix)) break;
            found = d;
        }
        double p = 0.0;
        for (std::size_t j = 0; j < order; ++j) {
            const auto d = std::min(j, found);
            std::vector<TokenId> suffix(ctx.end() - static_cast<long>(d), ctx.end());
            double c = 0.0, total = 0.0;
            if (const auto it = counts.find(suffix); it != counts.end()) {
                for (const auto& [t, n] : it->second) total += n;
                if (const auto jt = it->second.find(w); jt != it->second.end()) c = jt->second;
            }
            p += (1.0 / static_cast<double>(order)) * (c + k) / (total + k * static_cast<double>(vocab));
        }
        return p;
    }
};

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("bigram model on an alternating stream") {
    // counts: unigram {0:3, 1:3}; after 0 -> {1:3}; after 1 -> {0:2}
    const TokenSeq s{0, 1, 0, 1, 0, 1};
    NgramModel m(2, {.order = 2});
    m.observe(s);
    const double k = 0.01;
    const double p_b_given_a = 0.5 * (3 + k) / (6 + 2 * k) + 0.5 * (3 + k) / (3 + 2 * k);
    const double p_a_given_a = 0.5 * (3 + k) / (6 + 2 * k) + 0.5 * (0 + k) / (3 + 2 * k);
    const TokenSeq ctx{0};
    CHECK(m.prob(ctx, 1) == doctest::Approx(p_b_given_a).epsilon(1e-14));
    CHECK(m.prob(ctx, 0) == doctest::Approx(p_a_given_a).epsilon(1e-14));
    CHECK(m.prob(ctx, 1) > m.prob(ctx, 0));
    CHECK(m.count(ctx, 1) == 3);
    CHECK(m.context_total(TokenSeq{1}) == 2);
}

TEST_CASE("n-gram probabilities match a brute-force counting oracle") {
    const std::size_t vocab = 23;
    const auto s = random_stream(1, 3000, vocab);
    NgramModel m(vocab, {.order = 4});
    m.observe(s);
    const BruteNgram oracle(s, 4, vocab, 0.01);
    Rng rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<TokenId> ctx;
        const auto len = rng.below(6);
        const auto start = rng.below(s.size() - 6);
        for (std::size_t i = 0; i < len; ++i) {
            ctx.push_back(rng.uniform() < 0.8 ? s[start + i] : static_cast<TokenId>(rng.below(vocab)));
        }
        const auto w = static_cast<TokenId>(rng.below(vocab));
        CHECK(m.prob(ctx, w) == doctest::Approx(oracle.prob(ctx, w)).epsilon(1e-12));
    }
}

TEST_CASE("dense and single-token paths agree bit for bit and distributions are valid") {
    const std::size_t vocab = 50;
    const auto s = random_stream(4, 5000, vocab);
    NgramModel m(vocab, {.order = 3});
    m.observe(s);
    Rng rng(5);
    std::vector<double> dist(vocab);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<TokenId> ctx;
        for (std::size_t i = 0, n = rng.below(5); i < n; ++i) ctx.push_back(static_cast<TokenId>(rng.below(vocab)));
        m.next_dist_into(ctx, dist);
        CHECK_NOTHROW(NextTokenDist::validate(dist));
        for (TokenId w = 0; w < vocab; w += 7) CHECK(dist[w] == m.prob(ctx, w));
    }
}

TEST_CASE("an untrained model is uniform") {
    NgramModel m(9, {.order = 3});
    const auto d = m.next_dist(TokenSeq{1, 2});
    for (const auto p : d.probs()) CHECK(p == doctest::Approx(1.0 / 9));
}

TEST_CASE("configuration validation") {
    CHECK_THROWS_AS(NgramModel(10, {.order = 9}), ConfigError);
    CHECK_THROWS_AS(NgramModel(10, {.order = 0}), ConfigError);
    CHECK_THROWS_AS(NgramModel(10, {.order = 2, .add_k = 0.0}), ConfigError);
    CHECK_THROWS_AS(NgramModel(10, {.order = 2, .interp_weights = {0.3, 0.3}}), ConfigError);
    CHECK_NOTHROW(NgramModel(10, {.order = 2, .interp_weights = {0.3, 0.7}}));
    CHECK_NOTHROW(NgramModel(10, {.order = 12, .max_order = 12}));
    CHECK_THROWS_AS(train_ngram(TokenSeq{}, 5, {}, 10, "x"), ConfigError);
    CHECK_THROWS_AS(train_ngram(TokenSeq{1}, 5, {}, 0, "x"), ConfigError);
}

TEST_CASE("snapshots every k tokens") {
    const auto s = random_stream(6, 300, 12);
    const auto snaps = train_ngram(s, 12, {.order = 3}, 100, "fam");
    REQUIRE(snaps.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(snaps[i].id.step == i + 1);
    const auto& last = dynamic_cast<const NgramModel&>(snaps.back().lm());
    CHECK(last.tokens_seen() == 300);
    // chunked training equals one pass over the whole stream
    NgramModel whole(12, {.order = 3});
    whole.observe(s);
    CHECK(last.serialize() == whole.serialize());
    // counts never decrease between snapshots
    for (std::size_t i = 1; i < 3; ++i) {
        const auto& prev = dynamic_cast<const NgramModel&>(snaps[i - 1].lm());
        const auto& cur = dynamic_cast<const NgramModel&>(snaps[i].lm());
        bool monotone = true;
        prev.for_each_entry([&](std::span<const TokenId> ctx, TokenId tok, std::uint32_t c) {
            monotone = monotone && cur.count(ctx, tok) >= c;
        });
        CHECK(monotone);
    }
    CHECK(train_ngram(s, 12, {.order = 3}, 301, "fam").size() == 1);
    CHECK(train_ngram(s, 12, {.order = 3}, 299, "fam").size() == 2);
}

TEST_CASE("snapshots round-trip in both formats") {
    const std::size_t vocab = 40;
    const auto s = random_stream(7, 4000, vocab);
    NgramModel m(vocab, {.order = 4, .interp_weights = {0.1, 0.2, 0.3, 0.4}});
    m.observe(s);
    for (const auto fmt : {SnapshotFormat::Binary, SnapshotFormat::Text}) {
        const auto bytes = m.serialize(fmt);
        const auto back = NgramModel::deserialize(bytes);
        CHECK(back.serialize(fmt) == bytes);
        CHECK(back.serialize() == m.serialize());
        std::vector<double> a(vocab), b(vocab);
        const TokenSeq probe{s[10], s[11], s[12]};
        m.next_dist_into(probe, a);
        back.next_dist_into(probe, b);
        CHECK(a == b);
    }
    NgramModel again(vocab, {.order = 4, .interp_weights = {0.1, 0.2, 0.3, 0.4}});
    again.observe(s);
    CHECK(again.serialize() == m.serialize());
    CHECK_THROWS_AS(NgramModel::deserialize("garbage"), IoError);
    auto truncated = m.serialize();
    truncated.resize(truncated.size() / 2);
    CHECK_THROWS_AS(NgramModel::deserialize(truncated), IoError);
}

TEST_CASE("smaller() prunes to the target entry count") {
    const std::size_t vocab = 200;
    const auto s = random_stream(8, 60000, vocab);
    NgramModel m(vocab, {.order = 4});
    m.observe(s);
    const auto e = m.entry_count();
    for (const double f : {10.0, 20.0, 50.0, 100.0}) {
        const auto small = m.smaller(f);
        const double ratio = static_cast<double>(small.entry_count()) / (static_cast<double>(e) / f);
        CHECK(ratio >= 0.8);
        CHECK(ratio <= 1.2);
        CHECK(small.entry_count() == static_cast<std::size_t>(std::llround(e / f)));
        CHECK(small.order() <= m.order());
        CHECK(small.serialize() == m.smaller(f).serialize());
        // totals are recomputed, so distributions stay normalized
        CHECK_NOTHROW(small.next_dist(TokenSeq{s[0], s[1], s[2]}));
        // pruned counts never exceed the originals
        bool subset = true;
        small.for_each_entry([&](std::span<const TokenId> ctx, TokenId tok, std::uint32_t c) {
            subset = subset && m.count(ctx, tok) == c;
        });
        CHECK(subset);
    }
    NgramModel tiny(3, {.order = 1});
    tiny.observe(TokenSeq{1});
    CHECK_THROWS_AS(tiny.smaller(10), ConfigError);
    CHECK_THROWS_AS(m.smaller(1.0), ArgumentError);
}

TEST_CASE("smaller() drops lowest counts first with lexicographic ties") {
    // order 1: unigram counts {0:3, 1:1, 2:1, 3:2}; shrinking 4 -> 2 entries drops ids 1 and 2
    NgramModel m(5, {.order = 1});
    m.observe(TokenSeq{0, 0, 0, 1, 2, 3, 3});
    const auto s = m.smaller(2.0);
    CHECK(s.entry_count() == 2);
    CHECK(s.count({}, 0) == 3);
    CHECK(s.count({}, 3) == 2);
    CHECK(s.count({}, 1) == 0);
    // 4 -> 3 entries (factor 4/3) drops only the first tie, id 1
    const auto s3 = m.smaller(4.0 / 3.0);
    CHECK(s3.count({}, 1) == 0);
    CHECK(s3.count({}, 2) == 1);
}

TEST_CASE("noisy amateur") {
    const std::size_t vocab = 60;
    const auto s = random_stream(9, 8000, vocab);
    auto base = std::make_shared<NgramModel>(vocab, NgramConfig{.order = 3});
    base->observe(s);
    const NoisyNgramModel zero(base, 0.0, 1);
    const NoisyNgramModel noisy(base, 0.5, 1);
    const NoisyNgramModel other_seed(base, 0.5, 2);
    Rng rng(10);
    std::vector<double> a(vocab), b(vocab), c(vocab), d(vocab);
    bool differs = false, seed_matters = false;
    for (int trial = 0; trial < 200; ++trial) {
        const auto at = rng.below(s.size() - 3);
        const TokenSeq ctx{s[at], s[at + 1]};
        base->next_dist_into(ctx, a);
        zero.next_dist_into(ctx, b);
        CHECK(a == b);
        noisy.next_dist_into(ctx, c);
        noisy.next_dist_into(ctx, d);
        CHECK(c == d);
        CHECK_NOTHROW(NextTokenDist::validate(c));
        for (TokenId w = 0; w < vocab; w += 5) CHECK(c[w] == noisy.prob(ctx, w));
        differs = differs || c != a;
        other_seed.next_dist_into(ctx, d);
        seed_matters = seed_matters || c != d;
    }
    CHECK(differs);
    CHECK(seed_matters);
    CHECK_THROWS_AS(NoisyNgramModel(base, 1.0, 1), ArgumentError);
}

TEST_CASE("registry stores snapshots and derives amateurs") {
    const auto root = temp_dir("forge_registry_test");
    const std::size_t vocab = 30;
    const auto s = random_stream(11, 3000, vocab);
    {
        Registry reg(root);
        train_ngram(s, vocab, {.order = 3}, 1000, [&](std::uint64_t step, const NgramModel& m) {
            reg.put({"base", step}, m, "meta");
        });
        CHECK(reg.steps("base") == std::vector<std::uint64_t>{1, 2, 3});
    }
    Registry reg(root);
    const auto snaps = train_ngram(s, vocab, {.order = 3}, 1000, "base");
    const auto good = reg.load({"base", 3});
    CHECK(good.meta_digest == "meta");
    const auto early = derive_amateur(good, AmateurSpec::earlier(1), 0, reg);
    CHECK(dynamic_cast<const NgramModel&>(early.lm()).serialize() ==
          dynamic_cast<const NgramModel&>(snaps[0].lm()).serialize());
    CHECK_THROWS_AS(derive_amateur(good, AmateurSpec::earlier(3), 0, reg), ConfigError);
    const auto mid = reg.load({"base", 2});
    CHECK_THROWS_AS(reg.load({"base", 9}), RegistryError);
    CHECK(derive_amateur(good, AmateurSpec::earlier(2), 0, reg).id == mid.id);
    CheckpointedModel gapped{{"missing", 5}, "", good.model};
    CHECK_THROWS_AS(derive_amateur(gapped, AmateurSpec::earlier(2), 0, reg), RegistryError);

    const auto noisy = derive_amateur(good, AmateurSpec::noisy(0.3), 5, reg);
    reg.put_noisy(noisy.id, good.id, 0.3, 5, noisy.meta_digest);
    const auto reloaded = Registry(root).load(noisy.id);
    const TokenSeq ctx{s[0], s[1]};
    CHECK(reloaded.lm().next_dist(ctx).probs()[0] == noisy.lm().next_dist(ctx).probs()[0]);

    // a tampered snapshot is detected
    {
        std::ofstream out(root / "base" / "step-00000001.ngram", std::ios::app);
        out << "x";
    }
    CHECK_THROWS_AS(Registry(root).load({"base", 1}), RegistryError);
    std::filesystem::remove_all(root);
}

TEST_CASE("amateur spec parsing") {
    CHECK(AmateurSpec::parse("early:500").step == 500);
    CHECK(AmateurSpec::parse("smaller:10").factor == 10.0);
    CHECK(AmateurSpec::parse("noisy:0.3").rate == 0.3);
    CHECK(AmateurSpec::parse("noisy:0.3").str() == "noisy:0.3");
    CHECK_THROWS_AS(AmateurSpec::parse("noisy:1.5"), ConfigError);
    CHECK_THROWS_AS(AmateurSpec::parse("bogus:1"), ConfigError);
    CHECK_THROWS_AS(AmateurSpec::parse("early:x"), ConfigError);
    CHECK_THROWS_AS(AmateurSpec::parse("smaller:1"), ConfigError);
}
