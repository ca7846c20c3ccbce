#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "forge/error.hpp"
#include "forge/rng.hpp"
#include "forge/tokenizer.hpp"
#include "utf8.hpp"

using namespace forge;

namespace {

// Reference trainer: recount every pair from scratch each round.
std::vector<std::pair<std::string, std::string>> naive_bpe(const std::vector<std::string>& docs, std::size_t merges) {
    std::map<std::string, long> chunk_freq;
    for (const auto& d : docs) {
        for (auto c : pretokenize(d)) ++chunk_freq[std::string(c)];
    }
    std::vector<std::pair<std::vector<std::string>, long>> words;
    for (const auto& [w, f] : chunk_freq) {
        std::vector<std::string> sym;
        for (std::size_t i = 0; i < w.size();) {
            const auto len = utf8::sequence_length(w, i);
            sym.push_back(w.substr(i, len));
            i += len;
        }
        words.emplace_back(sym, f);
    }
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t m = 0; m < merges; ++m) {
        std::map<std::pair<std::string, std::string>, long> counts;
        for (const auto& [sym, f] : words) {
            for (std::size_t i = 0; i + 1 < sym.size(); ++i) counts[{sym[i], sym[i + 1]}] += f;
        }
        if (counts.empty()) break;
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > best->second) best = it; // map order gives the lexicographic tie-break
        }
        out.push_back(best->first);
        for (auto& [sym, f] : words) {
            std::vector<std::string> next;
            for (std::size_t i = 0; i < sym.size();) {
                if (i + 1 < sym.size() && sym[i] == best->first.first && sym[i + 1] == best->first.second) {
                    next.push_back(sym[i] + sym[i + 1]);
                    i += 2;
                } else {
                    next.push_back(sym[i++]);
                }
            }
            sym = std::move(next);
        }
    }
    return out;
}

std::vector<std::string> random_docs(std::uint64_t seed, std::size_t n, std::string_view alphabet) {
    Rng rng(seed);
    std::vector<std::string> docs;
    std::vector<std::string> letters;
    for (std::size_t i = 0; i < alphabet.size();) {
        const auto len = utf8::sequence_length(alphabet, i);
        letters.emplace_back(alphabet.substr(i, len));
        i += len;
    }
    for (std::size_t d = 0; d < n; ++d) {
        std::string s;
        const auto len = 5 + rng.below(60);
        for (std::size_t i = 0; i < len; ++i) s += letters[rng.below(letters.size())];
        docs.push_back(s);
    }
    return docs;
}

} // namespace

TEST_CASE("tokenizer learns the single most frequent pair") {
    const std::vector<std::string> corpus{"abababab"};
    // specials (3) + base {a, b} + one merge
    const auto tok = Tokenizer::train(corpus, 3 + 2 + 1);
    REQUIRE(tok.merges().size() == 1);
    CHECK(tok.token_text(tok.merges()[0].first) == "a");
    CHECK(tok.token_text(tok.merges()[0].second) == "b");
    CHECK(tok.vocab_size() == 6);
    CHECK(tok.encode("abababab").size() == 4);
}

TEST_CASE("tokenizer merge ties go to the lexicographically smallest pair") {
    const std::vector<std::string> corpus{"abcd"};
    const auto tok = Tokenizer::train(corpus, 3 + 4 + 1);
    CHECK(tok.token_text(tok.merges()[0].first) == "a");
    CHECK(tok.token_text(tok.merges()[0].second) == "b");
}

TEST_CASE("tokenizer training matches a from-scratch reference trainer") {
    const auto docs = random_docs(7, 300, "abcde fgh.,!1é");
    const auto tok = Tokenizer::train(docs, 3 + 14 + 120);
    const auto ref = naive_bpe(docs, 120);
    REQUIRE(ref.size() == tok.merges().size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(tok.token_text(tok.merges()[i].first) == ref[i].first);
        CHECK(tok.token_text(tok.merges()[i].second) == ref[i].second);
    }
}

TEST_CASE("tokenizer rejects empty corpora and undersized vocabularies") {
    CHECK_THROWS_AS(Tokenizer::train(std::vector<std::string>{}, 100), ConfigError);
    CHECK_THROWS_AS(Tokenizer::train(std::vector<std::string>{""}, 100), ConfigError);
    CHECK_THROWS_AS(Tokenizer::train(std::vector<std::string>{"abc"}, 5), ConfigError);
    // only two distinct pairs exist in "ab"
    CHECK_THROWS_AS(Tokenizer::train(std::vector<std::string>{"ab"}, 3 + 2 + 2), ConfigError);
    CHECK_THROWS_AS(Tokenizer::train(std::vector<std::string>{"a\xff"}, 10), ConfigError);
}

TEST_CASE("tokenizer vocabulary has exactly the requested size with unique entries") {
    const auto docs = random_docs(11, 500, "abcdefghij klmn");
    const auto tok = Tokenizer::train(docs, 300);
    CHECK(tok.vocab_size() == 300);
    std::set<std::string> seen;
    for (TokenId i = 0; i < tok.vocab_size(); ++i) seen.insert(tok.token_text(i));
    CHECK(seen.size() == 300);
}

TEST_CASE("encode/decode edge cases") {
    const auto tok = Tokenizer::train(std::vector<std::string>{"hello world, hello there"}, 25);
    CHECK(tok.encode("").empty());
    CHECK(tok.decode(std::vector<TokenId>{}).empty());
    CHECK(tok.encode("h").size() == 1);
    const auto unk = tok.encode("zq");
    CHECK(unk == TokenSeq{tok.specials().unk, tok.specials().unk});
    CHECK(tok.decode(unk) == "\xEF\xBF\xBD\xEF\xBF\xBD");
    CHECK(tok.decode(std::vector<TokenId>{tok.specials().bos, tok.specials().eos}).empty());
    // invalid bytes are unknown too
    CHECK(tok.encode("h\xff") == TokenSeq{tok.encode("h")[0], tok.specials().unk});
    try {
        (void)tok.decode(std::vector<TokenId>{999});
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(std::string(e.what()).find("999") != std::string::npos);
    }
}

TEST_CASE("pretokenizer chunks") {
    const auto chunks = pretokenize("Hi  there, 42x\n\nok");
    const std::vector<std::string_view> expected{"Hi", " ", " there", ",", " 42", "x", "\n\n", "ok"};
    CHECK(chunks == expected);
}

TEST_CASE("round trip holds for 10,000 random in-domain strings") {
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ABC.,;'\"!?\n\t0123456789éü€ß";
    const auto docs = random_docs(3, 400, alphabet);
    const auto tok = Tokenizer::train(docs, 400);
    const auto probes = random_docs(99, 10000, alphabet);
    std::size_t ok = 0;
    for (const auto& s : probes) ok += tok.decode(tok.encode(s)) == s;
    CHECK(ok == probes.size());
}

TEST_CASE("serialized tokenizer reloads with identical encodings") {
    const auto docs = random_docs(5, 300, "ab cd\\ef\n\tgh");
    const auto tok = Tokenizer::train(docs, 120);
    const auto reloaded = Tokenizer::parse(tok.serialize());
    CHECK(reloaded.serialize() == tok.serialize());
    CHECK(reloaded.digest() == tok.digest());
    for (const auto& probe : random_docs(6, 200, "ab cd\\ef\n\tgh")) CHECK(reloaded.encode(probe) == tok.encode(probe));

    const auto path = std::filesystem::temp_directory_path() / "forge_tok_test.bpe";
    tok.save(path);
    CHECK(Tokenizer::load(path).serialize() == tok.serialize());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(Tokenizer::parse("not a tokenizer"), IoError);
}

TEST_CASE("tokenizer training is deterministic") {
    const auto docs = random_docs(8, 200, "abcdef gh");
    CHECK(Tokenizer::train(docs, 150).serialize() == Tokenizer::train(docs, 150).serialize());
}
