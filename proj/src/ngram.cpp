#include "forge/ngram.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "forge/error.hpp"
#include "forge/rng.hpp"
#include "varint.hpp"

namespace forge {
namespace {

constexpr std::string_view kBinaryMagic = "FNGRAM";
constexpr std::string_view kTextHeader = "forge-ngram-text 1";
constexpr std::uint8_t kBinaryVersion = 1;

template <typename T>
auto lower_by_token(std::vector<T>& v, TokenId token) {
    return std::lower_bound(v.begin(), v.end(), token, [](const T& e, TokenId t) { return e.token < t; });
}

template <typename T>
auto lower_by_token(const std::vector<T>& v, TokenId token) {
    return std::lower_bound(v.begin(), v.end(), token, [](const T& e, TokenId t) { return e.token < t; });
}

std::uint32_t lookup_count(const NgramModel::Node& node, TokenId token) {
    const auto it = lower_by_token(node.entries, token);
    return (it != node.entries.end() && it->token == token) ? it->count : 0;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(fmt::format("n-gram text snapshot: bad {} '{}'", what, s));
    }
    return v;
}

double parse_hex_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw IoError(fmt::format("n-gram text snapshot: bad number '{}'", s));
    return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        const auto start = i;
        while (i < line.size() && line[i] != ' ') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

constexpr std::uint64_t kCtxSalt = 0x243F6A8885A308D3ULL;

std::uint64_t extend_ctx_hash(std::uint64_t h, TokenId token) { return mix64(h ^ mix64(token + kCtxSalt)); }

bool is_masked(std::uint64_t node_hash, TokenId token, std::uint64_t threshold) {
    return mix64(node_hash + 0x9E3779B97F4A7C15ULL * (std::uint64_t{token} + 1)) < threshold;
}

} // namespace

void NgramConfig::validate() const {
    if (max_order < 1 || max_order > NgramModel::kHardMaxOrder) {
        throw ConfigError(fmt::format("max_order must be in [1, {}]", NgramModel::kHardMaxOrder));
    }
    if (order < 1 || order > max_order) {
        throw ConfigError(fmt::format("n-gram order {} outside [1, {}]", order, max_order));
    }
    if (!(add_k > 0.0) || !std::isfinite(add_k)) throw ConfigError("add_k must be > 0");
    if (!interp_weights.empty()) {
        if (interp_weights.size() != order) {
            throw ConfigError(fmt::format("expected {} interpolation weights, got {}", order, interp_weights.size()));
        }
        double sum = 0.0;
        for (const auto w : interp_weights) {
            if (!(w >= 0.0)) throw ConfigError("interpolation weights must be >= 0");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("interpolation weights must sum to 1");
    }
}

std::vector<double> NgramConfig::resolved_weights() const {
    if (!interp_weights.empty()) return interp_weights;
    return std::vector<double>(order, 1.0 / static_cast<double>(order));
}

NgramModel::NgramModel(std::size_t vocab_size, NgramConfig config)
    : vocab_size_(vocab_size), config_(std::move(config)) {
    if (vocab_size_ == 0) throw ConfigError("n-gram vocabulary is empty");
    config_.validate();
    weights_ = config_.resolved_weights();
    nodes_.emplace_back();
}

const NgramModel::Node* NgramModel::find_child(const Node& node, TokenId token) const {
    const auto it = lower_by_token(node.children, token);
    return (it != node.children.end() && it->token == token) ? &nodes_[it->node] : nullptr;
}

std::uint32_t NgramModel::child_or_create(std::uint32_t node, TokenId token) {
    auto& children = nodes_[node].children;
    auto it = lower_by_token(children, token);
    if (it != children.end() && it->token == token) return it->node;
    const auto idx = static_cast<std::uint32_t>(nodes_.size());
    children.insert(it, Child{token, idx});
    nodes_.emplace_back();
    return idx;
}

void NgramModel::add_count(std::uint32_t node, TokenId token, std::uint32_t count) {
    auto& n = nodes_[node];
    auto it = lower_by_token(n.entries, token);
    if (it != n.entries.end() && it->token == token) it->count += count;
    else n.entries.insert(it, Entry{token, count});
    n.total += count;
}

void NgramModel::observe(std::span<const TokenId> tokens, std::span<const TokenId> history) {
    const auto n_ctx = config_.order - 1;
    const auto keep = std::min(history.size(), n_ctx);
    std::vector<TokenId> buf(history.end() - static_cast<std::ptrdiff_t>(keep), history.end());
    buf.insert(buf.end(), tokens.begin(), tokens.end());
    for (const auto t : buf) {
        if (t >= vocab_size_) throw ArgumentError(fmt::format("token id {} outside vocabulary", t));
    }
    for (std::size_t i = keep; i < buf.size(); ++i) {
        const auto tok = buf[i];
        std::uint32_t node = 0;
        add_count(node, tok, 1);
        const auto depth = std::min(i, n_ctx);
        for (std::size_t d = 1; d <= depth; ++d) {
            node = child_or_create(node, buf[i - d]);
            add_count(node, tok, 1);
        }
    }
}

NgramModel::Chain NgramModel::chain(std::span<const TokenId> context) const {
    const auto ctx = clip(context);
    std::array<const Node*, kHardMaxOrder> at_depth{};
    at_depth[0] = &nodes_[0];
    std::size_t found = 0;
    for (std::size_t d = 1; d <= ctx.size(); ++d) {
        const auto* child = find_child(*at_depth[d - 1], ctx[ctx.size() - d]);
        if (child == nullptr) break;
        at_depth[d] = child;
        found = d;
    }
    Chain c;
    for (std::size_t j = 0; j < config_.order; ++j) {
        c.depth[j] = std::min(j, found);
        c.node[j] = at_depth[c.depth[j]];
    }
    return c;
}

void NgramModel::next_dist_into(std::span<const TokenId> context, std::span<double> out) const {
    if (out.size() != vocab_size_) throw ContractError("output buffer does not match vocabulary size");
    const auto c = chain(context);
    const double k = config_.add_k;
    const double kv = k * static_cast<double>(vocab_size_);
    std::array<double, kHardMaxOrder> f{};
    double base = 0.0;
    for (std::size_t j = 0; j < config_.order; ++j) {
        const double denom = static_cast<double>(c.node[j]->total) + kv;
        f[j] = weights_[j] / denom;
        base += weights_[j] * k / denom;
    }
    std::fill(out.begin(), out.end(), base);
    for (std::size_t j = 0; j < config_.order; ++j) {
        for (const auto& e : c.node[j]->entries) out[e.token] += f[j] * e.count;
    }
}

double NgramModel::prob(std::span<const TokenId> context, TokenId token) const {
    if (token >= vocab_size_) throw ArgumentError(fmt::format("token id {} outside vocabulary", token));
    const auto c = chain(context);
    const double k = config_.add_k;
    const double kv = k * static_cast<double>(vocab_size_);
    std::array<double, kHardMaxOrder> f{};
    double p = 0.0;
    for (std::size_t j = 0; j < config_.order; ++j) {
        const double denom = static_cast<double>(c.node[j]->total) + kv;
        f[j] = weights_[j] / denom;
        p += weights_[j] * k / denom;
    }
    for (std::size_t j = 0; j < config_.order; ++j) {
        const auto cnt = lookup_count(*c.node[j], token);
        if (cnt != 0) p += f[j] * cnt;
    }
    return p;
}

std::size_t NgramModel::entry_count() const noexcept {
    std::size_t n = 0;
    for (const auto& node : nodes_) n += node.entries.size();
    return n;
}

std::uint64_t NgramModel::count(std::span<const TokenId> context, TokenId token) const {
    const Node* node = &nodes_[0];
    for (std::size_t d = 1; d <= context.size(); ++d) {
        node = find_child(*node, context[context.size() - d]);
        if (node == nullptr) return 0;
    }
    return lookup_count(*node, token);
}

std::uint64_t NgramModel::context_total(std::span<const TokenId> context) const {
    const Node* node = &nodes_[0];
    for (std::size_t d = 1; d <= context.size(); ++d) {
        node = find_child(*node, context[context.size() - d]);
        if (node == nullptr) return 0;
    }
    return node->total;
}

void NgramModel::for_each_entry(
    const std::function<void(std::span<const TokenId>, TokenId, std::uint32_t)>& fn) const {
    std::vector<TokenId> natural;
    auto visit = [&](auto&& self, const Node& node) -> void {
        for (const auto& e : node.entries) fn(natural, e.token, e.count);
        for (const auto& ch : node.children) {
            natural.insert(natural.begin(), ch.token);
            self(self, nodes_[ch.node]);
            natural.erase(natural.begin());
        }
    };
    visit(visit, nodes_[0]);
}

NgramModel NgramModel::smaller(double factor) const {
    if (!(factor > 1.0)) throw ArgumentError("reduction factor must be > 1");
    const auto total_entries = entry_count();
    const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(total_entries) / factor));
    if (target < 1 || target >= total_entries) {
        throw ConfigError(fmt::format("cannot shrink a model with {} entries by {}", total_entries, factor));
    }

    // Entries per depth decide whether dropping the top order leaves enough to prune from.
    std::vector<std::size_t> per_depth(config_.order, 0);
    for_each_entry([&](std::span<const TokenId> ctx, TokenId, std::uint32_t) { ++per_depth[ctx.size()]; });
    std::size_t new_order = config_.order;
    if (config_.order > 1) {
        std::size_t reduced = 0;
        for (std::size_t d = 0; d + 1 < config_.order; ++d) reduced += per_depth[d];
        if (reduced >= target) new_order = config_.order - 1;
    }

    struct Item {
        std::uint32_t count;
        std::size_t ctx_off;
        std::uint32_t ctx_len;
        TokenId token;
    };
    std::vector<TokenId> ctx_pool;
    std::vector<Item> items;
    std::vector<std::size_t> hist;
    for_each_entry([&](std::span<const TokenId> ctx, TokenId, std::uint32_t cnt) {
        if (ctx.size() >= new_order) return;
        if (hist.size() <= cnt) hist.resize(cnt + 1, 0);
        ++hist[cnt];
    });
    std::size_t kept_total = 0;
    for (const auto h : hist) kept_total += h;
    const auto drop = kept_total - target;

    // Every entry below `cut` is dropped; `partial` of the entries equal to `cut` go too.
    std::uint32_t cut = 0;
    std::size_t below = 0;
    while (below + hist[cut] <= drop && below + hist[cut] < kept_total) {
        below += hist[cut];
        ++cut;
    }
    const auto partial = drop - below;
    for_each_entry([&](std::span<const TokenId> ctx, TokenId tok, std::uint32_t cnt) {
        if (ctx.size() >= new_order || cnt != cut) return;
        items.push_back({cnt, ctx_pool.size(), static_cast<std::uint32_t>(ctx.size()), tok});
        ctx_pool.insert(ctx_pool.end(), ctx.begin(), ctx.end());
    });
    auto ctx_of = [&](const Item& it) {
        return std::span<const TokenId>(ctx_pool.data() + it.ctx_off, it.ctx_len);
    };
    auto key_less = [](std::span<const TokenId> ca, TokenId ta, std::span<const TokenId> cb, TokenId tb) {
        if (std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end())) return true;
        if (std::lexicographical_compare(cb.begin(), cb.end(), ca.begin(), ca.end())) return false;
        return ta < tb;
    };
    std::sort(items.begin(), items.end(),
              [&](const Item& a, const Item& b) { return key_less(ctx_of(a), a.token, ctx_of(b), b.token); });
    items.resize(partial);
    auto is_dropped = [&](std::span<const TokenId> ctx, TokenId tok) {
        const auto it = std::lower_bound(items.begin(), items.end(), 0, [&](const Item& a, int) {
            return key_less(ctx_of(a), a.token, ctx, tok);
        });
        return it != items.end() && !key_less(ctx, tok, ctx_of(*it), it->token);
    };

    NgramConfig cfg = config_;
    cfg.order = new_order;
    if (!config_.interp_weights.empty()) {
        cfg.interp_weights.assign(config_.interp_weights.begin(),
                                  config_.interp_weights.begin() + static_cast<std::ptrdiff_t>(new_order));
        double sum = 0.0;
        for (const auto w : cfg.interp_weights) sum += w;
        for (auto& w : cfg.interp_weights) w /= sum;
    }
    NgramModel out(vocab_size_, cfg);
    for_each_entry([&](std::span<const TokenId> ctx, TokenId tok, std::uint32_t cnt) {
        if (ctx.size() >= new_order || cnt < cut) return;
        if (cnt == cut && is_dropped(ctx, tok)) return;
        std::uint32_t node = 0;
        for (std::size_t d = 1; d <= ctx.size(); ++d) node = out.child_or_create(node, ctx[ctx.size() - d]);
        out.add_count(node, tok, cnt);
    });
    return out;
}

std::string NgramModel::serialize(SnapshotFormat format) const {
    std::string out;
    if (format == SnapshotFormat::Binary) {
        out += kBinaryMagic;
        out += static_cast<char>(kBinaryVersion);
        varint::put(out, vocab_size_);
        varint::put(out, config_.order);
        varint::put(out, config_.max_order);
        varint::put_f64(out, config_.add_k);
        varint::put(out, config_.interp_weights.size());
        for (const auto w : config_.interp_weights) varint::put_f64(out, w);
        auto write = [&](auto&& self, const Node& node) -> void {
            varint::put(out, node.entries.size());
            TokenId prev = 0;
            for (const auto& e : node.entries) {
                varint::put(out, e.token - prev);
                varint::put(out, e.count);
                prev = e.token;
            }
            varint::put(out, node.children.size());
            prev = 0;
            for (const auto& ch : node.children) {
                varint::put(out, ch.token - prev);
                prev = ch.token;
                self(self, nodes_[ch.node]);
            }
        };
        write(write, nodes_[0]);
        return out;
    }
    out += fmt::format("{}\nvocab_size {}\norder {}\nmax_order {}\nadd_k {:a}\nweights", kTextHeader, vocab_size_,
                       config_.order, config_.max_order, config_.add_k);
    for (const auto w : config_.interp_weights) out += fmt::format(" {:a}", w);
    out += fmt::format("\nentries {}\n", entry_count());
    for_each_entry([&](std::span<const TokenId> ctx, TokenId tok, std::uint32_t cnt) {
        out += fmt::format("{}", ctx.size());
        for (const auto t : ctx) out += fmt::format(" {}", t);
        out += fmt::format(" {} {}\n", tok, cnt);
    });
    return out;
}

NgramModel NgramModel::deserialize(std::string_view bytes) {
    if (bytes.starts_with(kBinaryMagic)) {
        varint::Reader r(bytes.substr(kBinaryMagic.size()));
        const auto version = static_cast<std::uint8_t>(r.take(1)[0]);
        if (version != kBinaryVersion) throw IoError(fmt::format("unsupported n-gram snapshot version {}", version));
        const auto vocab = r.get();
        NgramConfig cfg;
        cfg.order = r.get();
        cfg.max_order = r.get();
        cfg.add_k = r.get_f64();
        const auto n_w = r.get();
        if (n_w > kHardMaxOrder) throw IoError("n-gram snapshot: too many weights");
        for (std::uint64_t i = 0; i < n_w; ++i) cfg.interp_weights.push_back(r.get_f64());
        NgramModel m(vocab, cfg);
        auto read = [&](auto&& self, std::uint32_t node, std::size_t depth) -> void {
            const auto n_entries = r.get();
            if (n_entries > vocab) throw IoError("n-gram snapshot: corrupt entry count");
            auto& entries = m.nodes_[node].entries;
            entries.reserve(n_entries);
            TokenId tok = 0;
            std::uint64_t total = 0;
            for (std::uint64_t i = 0; i < n_entries; ++i) {
                tok += static_cast<TokenId>(r.get());
                const auto cnt = static_cast<std::uint32_t>(r.get());
                if (tok >= vocab || (i > 0 && entries.back().token >= tok)) {
                    throw IoError("n-gram snapshot: corrupt entry");
                }
                entries.push_back({tok, cnt});
                total += cnt;
            }
            m.nodes_[node].total = total;
            const auto n_children = r.get();
            if (n_children > vocab || (n_children > 0 && depth + 1 >= cfg.order)) {
                throw IoError("n-gram snapshot: corrupt child count");
            }
            tok = 0;
            for (std::uint64_t i = 0; i < n_children; ++i) {
                tok += static_cast<TokenId>(r.get());
                const auto child = static_cast<std::uint32_t>(m.nodes_.size());
                m.nodes_.emplace_back();
                m.nodes_[node].children.push_back({tok, child});
                self(self, child, depth + 1);
            }
        };
        read(read, 0, 0);
        if (!r.done()) throw IoError("n-gram snapshot: trailing bytes");
        return m;
    }
    if (!bytes.starts_with(kTextHeader)) throw IoError("not an n-gram snapshot");
    std::istringstream in{std::string(bytes)};
    std::string line;
    std::getline(in, line);
    auto field = [&](std::string_view name) {
        if (!std::getline(in, line)) throw IoError("n-gram text snapshot truncated");
        auto parts = split_ws(line);
        if (parts.empty() || parts[0] != name) throw IoError(fmt::format("n-gram text snapshot: expected '{}'", name));
        return std::vector<std::string>(parts.begin() + 1, parts.end());
    };
    const auto vocab = parse_u64(field("vocab_size").at(0), "vocab_size");
    NgramConfig cfg;
    cfg.order = parse_u64(field("order").at(0), "order");
    cfg.max_order = parse_u64(field("max_order").at(0), "max_order");
    cfg.add_k = parse_hex_double(field("add_k").at(0));
    for (const auto& w : field("weights")) cfg.interp_weights.push_back(parse_hex_double(w));
    const auto n_entries = parse_u64(field("entries").at(0), "entries");
    NgramModel m(vocab, cfg);
    for (std::uint64_t i = 0; i < n_entries; ++i) {
        if (!std::getline(in, line)) throw IoError("n-gram text snapshot truncated");
        const auto parts = split_ws(line);
        if (parts.empty()) throw IoError("n-gram text snapshot: empty record");
        const auto len = parse_u64(parts[0], "context length");
        if (parts.size() != len + 3 || len + 1 > cfg.order) throw IoError("n-gram text snapshot: bad record");
        std::uint32_t node = 0;
        for (std::size_t d = 1; d <= len; ++d) {
            const auto t = parse_u64(parts[1 + len - d], "token");
            if (t >= vocab) throw IoError("n-gram text snapshot: token outside vocabulary");
            node = m.child_or_create(node, static_cast<TokenId>(t));
        }
        const auto tok = parse_u64(parts[len + 1], "token");
        if (tok >= vocab) throw IoError("n-gram text snapshot: token outside vocabulary");
        m.add_count(node, static_cast<TokenId>(tok), static_cast<std::uint32_t>(parse_u64(parts[len + 2], "count")));
    }
    return m;
}

void NgramModel::save(const std::filesystem::path& path, SnapshotFormat format) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    const auto bytes = serialize(format);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

// Noisy wrapper -------------------------------------------------------------

struct NoisyNgramModel::Masked {
    NgramModel::Chain chain;
    std::array<std::uint64_t, NgramModel::kHardMaxOrder> hash{};
    std::array<std::uint64_t, NgramModel::kHardMaxOrder> total{};
};

NoisyNgramModel::NoisyNgramModel(std::shared_ptr<const NgramModel> base, double rate, std::uint64_t seed)
    : base_(std::move(base)), rate_(rate), seed_(seed) {
    if (!base_) throw ArgumentError("noisy model needs a base model");
    if (!(rate_ >= 0.0 && rate_ < 1.0)) throw ArgumentError("noise rate must be in [0, 1)");
    threshold_ = static_cast<std::uint64_t>(std::ldexp(rate_, 64));
    const auto root_hash = mix64(seed_ ^ kCtxSalt);
    for (const auto& e : base_->chain({}).node[0]->entries) {
        if (!is_masked(root_hash, e.token, threshold_)) root_total_ += e.count;
    }
}

NoisyNgramModel::Masked NoisyNgramModel::masked(std::span<const TokenId> context) const {
    Masked m;
    m.chain = base_->chain(context);
    const auto ctx = clip(context);
    std::array<std::uint64_t, NgramModel::kHardMaxOrder> by_depth{};
    by_depth[0] = mix64(seed_ ^ kCtxSalt);
    for (std::size_t d = 1; d <= ctx.size(); ++d) by_depth[d] = extend_ctx_hash(by_depth[d - 1], ctx[ctx.size() - d]);
    for (std::size_t j = 0; j < base_->order(); ++j) {
        m.hash[j] = by_depth[m.chain.depth[j]];
        if (j > 0 && m.chain.node[j] == m.chain.node[j - 1]) {
            m.total[j] = m.total[j - 1];
            continue;
        }
        if (m.chain.depth[j] == 0) {
            m.total[j] = root_total_;
            continue;
        }
        std::uint64_t t = 0;
        for (const auto& e : m.chain.node[j]->entries) {
            if (!is_masked(m.hash[j], e.token, threshold_)) t += e.count;
        }
        m.total[j] = t;
    }
    return m;
}

void NoisyNgramModel::next_dist_into(std::span<const TokenId> context, std::span<double> out) const {
    if (rate_ == 0.0) {
        base_->next_dist_into(context, out);
        return;
    }
    if (out.size() != vocab_size()) throw ContractError("output buffer does not match vocabulary size");
    const auto m = masked(context);
    const double k = base_->config().add_k;
    const double kv = k * static_cast<double>(vocab_size());
    const auto& w = base_->weights();
    std::array<double, NgramModel::kHardMaxOrder> f{};
    double base = 0.0;
    for (std::size_t j = 0; j < base_->order(); ++j) {
        const double denom = static_cast<double>(m.total[j]) + kv;
        f[j] = w[j] / denom;
        base += w[j] * k / denom;
    }
    std::fill(out.begin(), out.end(), base);
    for (std::size_t j = 0; j < base_->order(); ++j) {
        for (const auto& e : m.chain.node[j]->entries) {
            if (!is_masked(m.hash[j], e.token, threshold_)) out[e.token] += f[j] * e.count;
        }
    }
}

double NoisyNgramModel::prob(std::span<const TokenId> context, TokenId token) const {
    if (rate_ == 0.0) return base_->prob(context, token);
    if (token >= vocab_size()) throw ArgumentError(fmt::format("token id {} outside vocabulary", token));
    const auto m = masked(context);
    const double k = base_->config().add_k;
    const double kv = k * static_cast<double>(vocab_size());
    const auto& w = base_->weights();
    std::array<double, NgramModel::kHardMaxOrder> f{};
    double p = 0.0;
    for (std::size_t j = 0; j < base_->order(); ++j) {
        const double denom = static_cast<double>(m.total[j]) + kv;
        f[j] = w[j] / denom;
        p += w[j] * k / denom;
    }
    for (std::size_t j = 0; j < base_->order(); ++j) {
        const auto cnt = lookup_count(*m.chain.node[j], token);
        if (cnt != 0 && !is_masked(m.hash[j], token, threshold_)) p += f[j] * cnt;
    }
    return p;
}

// Training ------------------------------------------------------------------

void train_ngram(std::span<const TokenId> corpus, std::size_t vocab_size, const NgramConfig& config,
                 std::size_t snapshot_every, const SnapshotCallback& on_snapshot) {
    if (corpus.empty()) throw ConfigError("n-gram training corpus is empty");
    if (snapshot_every == 0) throw ConfigError("snapshot_every must be > 0");
    NgramModel model(vocab_size, config);
    std::uint64_t step = 0;
    for (std::size_t start = 0; start < corpus.size(); start += snapshot_every) {
        const auto len = std::min(snapshot_every, corpus.size() - start);
        model.observe(corpus.subspan(start, len), corpus.first(start));
        on_snapshot(++step, model);
    }
}

std::vector<CheckpointedModel> train_ngram(std::span<const TokenId> corpus, std::size_t vocab_size,
                                           const NgramConfig& config, std::size_t snapshot_every,
                                           const std::string& family) {
    std::vector<CheckpointedModel> out;
    train_ngram(corpus, vocab_size, config, snapshot_every, [&](std::uint64_t step, const NgramModel& m) {
        out.push_back({{family, step}, {}, std::make_shared<NgramModel>(m)});
    });
    return out;
}

} // namespace forge
