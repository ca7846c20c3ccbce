#include "forge/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "utf8.hpp"

namespace forge {
namespace {

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";

enum class CharClass { Letter, Digit, Space, Other, Invalid };

CharClass classify(std::string_view s, std::size_t i, std::size_t len) {
    if (len == 0) return CharClass::Invalid;
    if (len > 1) return CharClass::Letter;
    const char c = s[i];
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return CharClass::Letter;
    if (c >= '0' && c <= '9') return CharClass::Digit;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return CharClass::Space;
    return CharClass::Other;
}

std::uint64_t pair_key(TokenId a, TokenId b) { return (std::uint64_t{a} << 32) | b; }

std::string escape_line(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out;
}

std::string unescape_line(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') { out += s[i]; continue; }
        if (++i == s.size()) throw IoError("tokenizer file: dangling escape");
        switch (s[i]) {
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        case 't': out += '\t'; break;
        default: throw IoError(fmt::format("tokenizer file: bad escape '\\{}'", s[i]));
        }
    }
    return out;
}

} // namespace

std::vector<std::string_view> pretokenize(std::string_view text) {
    std::vector<std::string_view> chunks;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto char_at = [&](std::size_t pos) {
        const auto len = utf8::sequence_length(text, pos);
        return std::pair{classify(text, pos, len), len == 0 ? std::size_t{1} : len};
    };
    auto run_end = [&](std::size_t pos, CharClass cls) {
        while (pos < n) {
            const auto [c, len] = char_at(pos);
            if (c != cls) break;
            pos += len;
        }
        return pos;
    };
    while (i < n) {
        const auto [cls, len] = char_at(i);
        if (cls == CharClass::Invalid) {
            chunks.push_back(text.substr(i, 1));
            i += 1;
            continue;
        }
        if (cls != CharClass::Space) {
            const auto end = run_end(i + len, cls);
            chunks.push_back(text.substr(i, end - i));
            i = end;
            continue;
        }
        if (text[i] == ' ' && i + 1 < n) {
            const auto [next_cls, next_len] = char_at(i + 1);
            if (next_cls != CharClass::Space && next_cls != CharClass::Invalid) {
                const auto end = run_end(i + 1 + next_len, next_cls);
                chunks.push_back(text.substr(i, end - i));
                i = end;
                continue;
            }
        }
        auto end = run_end(i, CharClass::Space);
        // Leave a final ' ' to lead the following word.
        if (end < n && end - i > 1 && text[end - 1] == ' ' && char_at(end).first != CharClass::Invalid) {
            --end;
        }
        chunks.push_back(text.substr(i, end - i));
        i = end;
    }
    return chunks;
}

Tokenizer Tokenizer::train(std::span<const std::string> documents, std::size_t vocab_size) {
    std::unordered_map<std::string, std::uint64_t> chunk_freq;
    for (const auto& doc : documents) {
        if (!utf8::valid(doc)) throw ConfigError("tokenizer training text is not valid UTF-8");
        for (const auto chunk : pretokenize(doc)) ++chunk_freq[std::string(chunk)];
    }
    if (chunk_freq.empty()) throw ConfigError("tokenizer training corpus is empty");

    std::set<std::string> base_chars;
    for (const auto& [chunk, _] : chunk_freq) {
        for (std::size_t i = 0; i < chunk.size();) {
            const auto len = utf8::sequence_length(chunk, i);
            base_chars.insert(chunk.substr(i, len));
            i += len;
        }
    }

    Tokenizer tok;
    tok.vocab_ = {"<unk>", "<s>", "</s>"};
    for (const auto& c : base_chars) tok.vocab_.push_back(c);
    if (vocab_size < tok.vocab_.size()) {
        throw ConfigError(fmt::format("vocab_size {} is below the {} special and base symbols", vocab_size,
                                      tok.vocab_.size()));
    }
    tok.build_indexes();

    // Words in sorted order so every tie-break below is corpus-order independent.
    std::vector<std::pair<std::string, std::uint64_t>> sorted(chunk_freq.begin(), chunk_freq.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::vector<TokenId>> words(sorted.size());
    std::vector<std::int64_t> freq(sorted.size());
    for (std::size_t w = 0; w < sorted.size(); ++w) {
        const auto& s = sorted[w].first;
        freq[w] = static_cast<std::int64_t>(sorted[w].second);
        for (std::size_t i = 0; i < s.size();) {
            const auto len = utf8::sequence_length(s, i);
            words[w].push_back(tok.base_ids_.at(s.substr(i, len)));
            i += len;
        }
    }

    std::unordered_map<std::uint64_t, std::int64_t> pair_count;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words;
    for (std::uint32_t w = 0; w < words.size(); ++w) {
        for (std::size_t i = 0; i + 1 < words[w].size(); ++i) {
            const auto key = pair_key(words[w][i], words[w][i + 1]);
            pair_count[key] += freq[w];
            pair_words[key].push_back(w);
        }
    }

    struct Entry {
        std::int64_t count;
        std::uint64_t key;
    };
    const auto& vocab = tok.vocab_;
    auto lower_priority = [&vocab](const Entry& a, const Entry& b) {
        if (a.count != b.count) return a.count < b.count;
        const auto& al = vocab[a.key >> 32];
        const auto& bl = vocab[b.key >> 32];
        if (al != bl) return al > bl;
        return vocab[a.key & 0xFFFFFFFFu] > vocab[b.key & 0xFFFFFFFFu];
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(lower_priority);
    for (const auto& [key, count] : pair_count) heap.push({count, key});

    std::vector<std::uint64_t> touched;
    auto adjust = [&](const std::vector<TokenId>& word, std::int64_t delta, std::uint32_t w, bool index) {
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            const auto key = pair_key(word[i], word[i + 1]);
            pair_count[key] += delta;
            touched.push_back(key);
            if (index) pair_words[key].push_back(w);
        }
    };

    while (tok.vocab_.size() < vocab_size) {
        std::uint64_t best = 0;
        bool found = false;
        while (!heap.empty()) {
            const auto top = heap.top();
            heap.pop();
            const auto it = pair_count.find(top.key);
            if (it != pair_count.end() && it->second == top.count && top.count > 0) {
                best = top.key;
                found = true;
                break;
            }
        }
        if (!found) {
            throw ConfigError(fmt::format("corpus supports at most {} vocabulary entries, {} requested",
                                          tok.vocab_.size(), vocab_size));
        }
        const auto left = static_cast<TokenId>(best >> 32);
        const auto right = static_cast<TokenId>(best & 0xFFFFFFFFu);
        const auto merged = static_cast<TokenId>(tok.vocab_.size());
        tok.vocab_.push_back(tok.vocab_[left] + tok.vocab_[right]);
        tok.merges_.emplace_back(left, right);

        auto affected = std::move(pair_words[best]);
        pair_words.erase(best);
        std::sort(affected.begin(), affected.end());
        affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
        touched.clear();
        for (const auto w : affected) {
            auto& word = words[w];
            bool present = false;
            for (std::size_t i = 0; i + 1 < word.size(); ++i) {
                if (word[i] == left && word[i + 1] == right) { present = true; break; }
            }
            if (!present) continue;
            adjust(word, -freq[w], w, false);
            std::vector<TokenId> next;
            next.reserve(word.size());
            for (std::size_t i = 0; i < word.size();) {
                if (i + 1 < word.size() && word[i] == left && word[i + 1] == right) {
                    next.push_back(merged);
                    i += 2;
                } else {
                    next.push_back(word[i++]);
                }
            }
            word = std::move(next);
            adjust(word, freq[w], w, true);
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (const auto key : touched) {
            const auto c = pair_count[key];
            if (c > 0) heap.push({c, key});
            else pair_count.erase(key);
        }
    }
    tok.build_indexes();
    return tok;
}

void Tokenizer::build_indexes() {
    base_ids_.clear();
    merge_rank_.clear();
    const std::size_t n_base = vocab_.size() - 3 - merges_.size();
    for (std::size_t i = 0; i < n_base; ++i) base_ids_.emplace(vocab_[3 + i], static_cast<TokenId>(3 + i));
    for (std::size_t r = 0; r < merges_.size(); ++r) {
        merge_rank_.emplace(pair_key(merges_[r].first, merges_[r].second), static_cast<std::uint32_t>(r));
    }
}

void Tokenizer::encode_chunk(std::string_view chunk, TokenSeq& out) const {
    std::vector<TokenId> sym;
    for (std::size_t i = 0; i < chunk.size();) {
        const auto len = utf8::sequence_length(chunk, i);
        if (len == 0) {
            sym.push_back(specials_.unk);
            ++i;
            continue;
        }
        const auto it = base_ids_.find(std::string(chunk.substr(i, len)));
        sym.push_back(it == base_ids_.end() ? specials_.unk : it->second);
        i += len;
    }
    const auto first_merge_id = static_cast<TokenId>(vocab_.size() - merges_.size());
    while (sym.size() > 1) {
        std::uint32_t best_rank = UINT32_MAX;
        for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
            const auto it = merge_rank_.find(pair_key(sym[i], sym[i + 1]));
            if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
        }
        if (best_rank == UINT32_MAX) break;
        const auto [l, r] = merges_[best_rank];
        std::size_t w = 0;
        for (std::size_t i = 0; i < sym.size();) {
            if (i + 1 < sym.size() && sym[i] == l && sym[i + 1] == r) {
                sym[w++] = first_merge_id + best_rank;
                i += 2;
            } else {
                sym[w++] = sym[i++];
            }
        }
        sym.resize(w);
    }
    out.insert(out.end(), sym.begin(), sym.end());
}

TokenSeq Tokenizer::encode(std::string_view text) const {
    TokenSeq out;
    for (const auto chunk : pretokenize(text)) encode_chunk(chunk, out);
    return out;
}

std::string Tokenizer::decode(std::span<const TokenId> tokens) const {
    std::string out;
    for (const auto id : tokens) {
        if (id >= vocab_.size()) {
            throw DecodeError(fmt::format("invalid token id {} (vocab size {})", id, vocab_.size()));
        }
        if (id == specials_.unk) out += kReplacement;
        else if (id == specials_.bos || id == specials_.eos) continue;
        else out += vocab_[id];
    }
    return out;
}

const std::string& Tokenizer::token_text(TokenId id) const {
    if (id >= vocab_.size()) throw DecodeError(fmt::format("invalid token id {}", id));
    return vocab_[id];
}

std::string Tokenizer::serialize() const {
    std::string out;
    out += fmt::format("{}\nvocab_size {}\n", kFormatHeader, vocab_.size());
    out += fmt::format("special unk {}\nspecial bos {}\nspecial eos {}\n", specials_.unk, specials_.bos,
                       specials_.eos);
    out += fmt::format("vocab {}\n", vocab_.size());
    for (const auto& t : vocab_) {
        out += escape_line(t);
        out += '\n';
    }
    out += fmt::format("merges {}\n", merges_.size());
    for (const auto& [l, r] : merges_) out += fmt::format("{} {}\n", l, r);
    return out;
}

Tokenizer Tokenizer::parse(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos < text.size();) {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    std::size_t li = 0;
    auto next = [&]() -> std::string_view {
        if (li >= lines.size()) throw IoError("tokenizer file truncated");
        return lines[li++];
    };
    auto expect_number = [&](std::string_view prefix) -> std::size_t {
        const auto line = next();
        if (!line.starts_with(prefix)) throw IoError(fmt::format("tokenizer file: expected '{}'", prefix));
        try {
            return std::stoull(std::string(line.substr(prefix.size())));
        } catch (const std::exception&) {
            throw IoError(fmt::format("tokenizer file: bad number after '{}'", prefix));
        }
    };
    if (next() != kFormatHeader) throw IoError("tokenizer file: unsupported format header");
    const auto vocab_size = expect_number("vocab_size ");
    Tokenizer tok;
    tok.specials_.unk = static_cast<TokenId>(expect_number("special unk "));
    tok.specials_.bos = static_cast<TokenId>(expect_number("special bos "));
    tok.specials_.eos = static_cast<TokenId>(expect_number("special eos "));
    if (tok.specials_.unk != 0 || tok.specials_.bos != 1 || tok.specials_.eos != 2) {
        throw IoError("tokenizer file: special token ids must be unk=0 bos=1 eos=2");
    }
    const auto n_vocab = expect_number("vocab ");
    if (n_vocab != vocab_size) throw IoError("tokenizer file: vocab count disagrees with header");
    for (std::size_t i = 0; i < n_vocab; ++i) tok.vocab_.push_back(unescape_line(next()));
    const auto n_merges = expect_number("merges ");
    if (n_merges + 3 > n_vocab) throw IoError("tokenizer file: more merges than vocabulary allows");
    const auto first_merge = n_vocab - n_merges;
    for (std::size_t r = 0; r < n_merges; ++r) {
        std::istringstream ls{std::string(next())};
        TokenId l = 0;
        TokenId rr = 0;
        if (!(ls >> l >> rr) || l >= first_merge + r || rr >= first_merge + r) {
            throw IoError(fmt::format("tokenizer file: bad merge record {}", r));
        }
        if (tok.vocab_[l] + tok.vocab_[rr] != tok.vocab_[first_merge + r]) {
            throw IoError(fmt::format("tokenizer file: merge {} does not match its vocab entry", r));
        }
        tok.merges_.emplace_back(l, rr);
    }
    tok.build_indexes();
    return tok;
}

void Tokenizer::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    out << serialize();
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string Tokenizer::digest() const { return sha256_hex(serialize()); }

} // namespace forge
