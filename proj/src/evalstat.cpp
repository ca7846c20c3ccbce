#include "forge/evalstat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "forge/error.hpp"
#include "forge/io.hpp"
#include "forge/rng.hpp"

namespace forge {

std::string_view direction_name(Direction d) {
    return d == Direction::HigherBetter ? "higher" : "lower";
}

Direction parse_direction(std::string_view s) {
    if (s == "higher") return Direction::HigherBetter;
    if (s == "lower") return Direction::LowerBetter;
    throw ConfigError(fmt::format("unknown direction '{}'", s));
}

std::string_view aggregation_name(Aggregation a) {
    switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::WeightedMean: return "weighted_mean";
    case Aggregation::ExpWeighted: return "exp_weighted";
    }
    return "mean";
}

Aggregation parse_aggregation(std::string_view s) {
    if (s == "mean") return Aggregation::Mean;
    if (s == "weighted_mean") return Aggregation::WeightedMean;
    if (s == "exp_weighted") return Aggregation::ExpWeighted;
    throw ConfigError(fmt::format("unknown aggregation '{}'", s));
}

nlohmann::ordered_json TaskSpec::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["aggregation"] = aggregation_name(aggregation);
    j["direction"] = direction_name(direction);
    j["display_scale"] = display_scale;
    j["in_mu_delta_rel"] = in_mu_delta_rel;
    return j;
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    t.aggregation = parse_aggregation(j.value("aggregation", std::string("mean")));
    t.direction = parse_direction(j.value("direction", std::string("higher")));
    t.display_scale = j.value("display_scale", 1.0);
    t.in_mu_delta_rel = j.value("in_mu_delta_rel", true);
    return t;
}

double aggregate(const TaskSpec& task, const Outcomes& outcomes, std::span<const std::uint32_t> indices) {
    const std::size_t n = indices.empty() ? outcomes.size() : indices.size();
    if (n == 0) throw ArgumentError(fmt::format("task '{}': no outcomes to aggregate", task.name));
    double sv = 0.0;
    double sw = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = indices.empty() ? k : indices[k];
        sv += outcomes.values[i];
        sw += outcomes.weight(i);
    }
    double score = 0.0;
    switch (task.aggregation) {
    case Aggregation::Mean: score = sv / static_cast<double>(n); break;
    case Aggregation::WeightedMean: score = sv / sw; break;
    case Aggregation::ExpWeighted: score = std::exp(sv / sw); break;
    }
    return score * task.display_scale;
}

// ---------------------------------------------------------------- matrix

void OutcomeMatrix::add_task(TaskSpec task) {
    for (const auto& t : tasks_) {
        if (t.name == task.name) {
            if (t.to_json() != task.to_json())
                throw ConfigError(fmt::format("task '{}' declared twice with different settings", task.name));
            return;
        }
    }
    if (task.name.empty() || task.name.find_first_of("\t\n") != std::string::npos)
        throw ConfigError("task names must be non-empty and free of tabs and newlines");
    if (!(task.display_scale > 0.0) || !std::isfinite(task.display_scale))
        throw ConfigError(fmt::format("task '{}': display_scale must be positive", task.name));
    tasks_.push_back(std::move(task));
}

const TaskSpec& OutcomeMatrix::task(std::string_view name) const {
    for (const auto& t : tasks_)
        if (t.name == name) return t;
    throw ArgumentError(fmt::format("unknown task '{}'", name));
}

void OutcomeMatrix::set(const std::string& method, const std::string& task_name, std::uint64_t seed,
                        std::uint64_t checkpoint, Outcomes outcomes) {
    task(task_name);
    if (method.empty() || method.find_first_of("\t\n") != std::string::npos)
        throw ArgumentError("method names must be non-empty and free of tabs and newlines");
    if (outcomes.values.empty()) throw ArgumentError("empty outcome vector");
    if (!outcomes.weights.empty() && outcomes.weights.size() != outcomes.values.size())
        throw ArgumentError("outcome weights must be empty or parallel to values");
    for (double v : outcomes.values)
        if (!std::isfinite(v)) throw ArgumentError(fmt::format("non-finite outcome for {}/{}", method, task_name));
    for (double w : outcomes.weights)
        if (!std::isfinite(w) || w < 0.0) throw ArgumentError("outcome weights must be finite and non-negative");
    if (std::find(methods_.begin(), methods_.end(), method) == methods_.end()) methods_.push_back(method);
    cells_[Key{method, task_name, seed, checkpoint}] = std::move(outcomes);
}

std::vector<std::uint64_t> OutcomeMatrix::seeds(const std::string& method, const std::string& task_name) const {
    std::vector<std::uint64_t> out;
    auto it = cells_.lower_bound(Key{method, task_name, 0, 0});
    for (; it != cells_.end() && std::get<0>(it->first) == method && std::get<1>(it->first) == task_name; ++it) {
        const auto s = std::get<2>(it->first);
        if (out.empty() || out.back() != s) out.push_back(s);
    }
    return out;
}

std::vector<std::uint64_t> OutcomeMatrix::checkpoints(const std::string& method, const std::string& task_name,
                                                      std::uint64_t seed) const {
    std::vector<std::uint64_t> out;
    auto it = cells_.lower_bound(Key{method, task_name, seed, 0});
    for (; it != cells_.end() && std::get<0>(it->first) == method && std::get<1>(it->first) == task_name &&
           std::get<2>(it->first) == seed;
         ++it)
        out.push_back(std::get<3>(it->first));
    return out;
}

const Outcomes& OutcomeMatrix::at(const std::string& method, const std::string& task_name, std::uint64_t seed,
                                  std::uint64_t checkpoint) const {
    auto it = cells_.find(Key{method, task_name, seed, checkpoint});
    if (it == cells_.end())
        throw ArgumentError(fmt::format("no outcomes for {}/{}/seed {}/checkpoint {}", method, task_name, seed,
                                        checkpoint));
    return it->second;
}

void OutcomeMatrix::validate() const {
    for (const auto& t : tasks_) {
        std::optional<std::vector<std::uint64_t>> seed_set;
        std::size_t n_t = 0;
        for (const auto& m : methods_) {
            const auto s = seeds(m, t.name);
            if (s.empty()) throw PairingError(fmt::format("method '{}' has no outcomes for task '{}'", m, t.name));
            if (!seed_set) {
                seed_set = s;
            } else if (*seed_set != s) {
                throw PairingError(fmt::format("task '{}': method '{}' was run with a different seed set", t.name, m));
            }
            for (auto seed : s) {
                for (auto c : checkpoints(m, t.name, seed)) {
                    const auto n = at(m, t.name, seed, c).size();
                    if (n_t == 0) n_t = n;
                    if (n != n_t)
                        throw PairingError(fmt::format("task '{}': {} examples for {}/seed {}/checkpoint {}, expected {}",
                                                       t.name, n, m, seed, c, n_t));
                }
            }
        }
    }
}

namespace {

constexpr std::string_view kOutcomeHeader = "# forge-outcomes 1";

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

std::uint64_t parse_u64(std::string_view s, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        const std::string str(s);
        const auto v = std::stoull(str, &pos);
        if (pos != str.size() || str.empty() || str[0] == '-') throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw IoError(fmt::format("outcome file line {}: bad integer '{}'", line_no, s));
    }
}

double parse_double(std::string_view s, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        const std::string str(s);
        const double v = std::stod(str, &pos);
        if (pos != str.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw IoError(fmt::format("outcome file line {}: bad number '{}'", line_no, s));
    }
}

} // namespace

std::string OutcomeMatrix::serialize() const {
    std::string out(kOutcomeHeader);
    out += '\n';
    for (const auto& t : tasks_)
        out += fmt::format("#task\t{}\t{}\t{}\t{:.17g}\t{}\n", t.name, aggregation_name(t.aggregation),
                           direction_name(t.direction), t.display_scale, t.in_mu_delta_rel ? 1 : 0);
    // Methods in insertion order so a parse reproduces row order.
    for (const auto& m : methods_) {
        for (const auto& t : tasks_) {
            for (auto it = cells_.lower_bound(Key{m, t.name, 0, 0});
                 it != cells_.end() && std::get<0>(it->first) == m && std::get<1>(it->first) == t.name; ++it) {
                const auto& [method, task_name, seed, ckpt] = it->first;
                const auto& o = it->second;
                for (std::size_t i = 0; i < o.size(); ++i)
                    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{:.17g}\t{:.17g}\n", method, task_name, seed, ckpt, i,
                                       o.values[i], o.weight(i));
            }
        }
    }
    return out;
}

OutcomeMatrix OutcomeMatrix::parse(std::string_view text) {
    OutcomeMatrix m;
    struct Pending {
        std::vector<std::pair<std::uint64_t, std::pair<double, double>>> rows;
    };
    std::map<Key, Pending> pending;
    std::vector<std::string> method_order;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (line.starts_with("#task\t")) {
            if (f.size() != 6) throw IoError(fmt::format("outcome file line {}: malformed task line", line_no));
            TaskSpec t;
            t.name = std::string(f[1]);
            t.aggregation = parse_aggregation(f[2]);
            t.direction = parse_direction(f[3]);
            t.display_scale = parse_double(f[4], line_no);
            t.in_mu_delta_rel = f[5] == "1";
            m.add_task(std::move(t));
            continue;
        }
        if (line.starts_with("#")) continue;
        if (f.size() != 6 && f.size() != 7)
            throw IoError(fmt::format("outcome file line {}: expected 6 or 7 fields, got {}", line_no, f.size()));
        Key key{std::string(f[0]), std::string(f[1]), parse_u64(f[2], line_no), parse_u64(f[3], line_no)};
        const auto idx = parse_u64(f[4], line_no);
        const double v = parse_double(f[5], line_no);
        const double w = f.size() == 7 ? parse_double(f[6], line_no) : 1.0;
        if (std::find(method_order.begin(), method_order.end(), std::get<0>(key)) == method_order.end())
            method_order.push_back(std::get<0>(key));
        pending[key].rows.push_back({idx, {v, w}});
    }
    m.methods_ = method_order;
    for (auto& [key, p] : pending) {
        std::sort(p.rows.begin(), p.rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        Outcomes o;
        bool unit = true;
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
            if (p.rows[i].first != i)
                throw IoError(fmt::format("outcomes for {}/{}/{}/{}: example indices must be 0..n-1 without gaps",
                                          std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key)));
            o.values.push_back(p.rows[i].second.first);
            o.weights.push_back(p.rows[i].second.second);
            unit = unit && p.rows[i].second.second == 1.0;
        }
        if (unit) o.weights.clear();
        m.set(std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), std::move(o));
    }
    m.methods_ = method_order;
    return m;
}

void OutcomeMatrix::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

OutcomeMatrix OutcomeMatrix::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void OutcomeMatrix::merge(const OutcomeMatrix& other) {
    for (const auto& t : other.tasks_) add_task(t);
    for (const auto& m : other.methods_)
        if (std::find(methods_.begin(), methods_.end(), m) == methods_.end()) methods_.push_back(m);
    for (const auto& [k, v] : other.cells_) cells_[k] = v;
}

// ------------------------------------------------------------- selection

std::uint64_t mean_max_select(std::span<const std::pair<std::uint64_t, double>> scores, Direction direction) {
    if (scores.empty()) throw ArgumentError("mean_max_select: no checkpoints scored");
    const auto* best = &scores[0];
    for (const auto& s : scores) {
        const bool better = direction == Direction::HigherBetter ? s.second > best->second : s.second < best->second;
        if (better || (s.second == best->second && s.first < best->first)) best = &s;
    }
    return best->first;
}

Selection select_checkpoints(const OutcomeMatrix& matrix) {
    Selection sel;
    for (const auto& m : matrix.methods()) {
        for (const auto& t : matrix.tasks()) {
            for (auto s : matrix.seeds(m, t.name)) {
                std::vector<std::pair<std::uint64_t, double>> scores;
                for (auto c : matrix.checkpoints(m, t.name, s))
                    scores.emplace_back(c, aggregate(t, matrix.at(m, t.name, s, c)));
                sel[{m, t.name, s}] = mean_max_select(scores, t.direction);
            }
        }
    }
    return sel;
}

// ------------------------------------------------------------- bootstrap

const std::vector<double>& BootstrapDraws::at(const std::string& method, const std::string& task) const {
    auto it = draws.find({method, task});
    if (it == draws.end()) throw ArgumentError(fmt::format("no draws for {}/{}", method, task));
    return it->second;
}

BootstrapDraws paired_bootstrap(const OutcomeMatrix& matrix, const Selection& selection, std::size_t resamples,
                                std::uint64_t seed, unsigned workers) {
    if (resamples < 1) throw ArgumentError("bootstrap needs at least one resample");
    matrix.validate();
    BootstrapDraws out;
    out.resamples = resamples;
    out.seed = seed;

    for (const auto& t : matrix.tasks()) {
        const auto& methods = matrix.methods();
        const auto seeds = matrix.seeds(methods.front(), t.name);
        // cells[m][s] -> selected outcomes
        std::vector<std::vector<const Outcomes*>> cells(methods.size());
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            for (auto s : seeds) {
                auto it = selection.find({methods[mi], t.name, s});
                if (it == selection.end())
                    throw ArgumentError(fmt::format("no selected checkpoint for {}/{}/seed {}", methods[mi], t.name, s));
                cells[mi].push_back(&matrix.at(methods[mi], t.name, s, it->second));
            }
        }
        const std::size_t n_t = cells[0][0]->size();
        const auto task_key = hash_name(t.name);
        std::vector<std::vector<double>> draws(methods.size(), std::vector<double>(resamples, 0.0));

        auto run = [&](std::size_t b_begin, std::size_t b_end) {
            std::vector<std::uint32_t> idx(n_t);
            for (std::size_t b = b_begin; b < b_end; ++b) {
                std::vector<double> sums(methods.size(), 0.0);
                for (std::size_t si = 0; si < seeds.size(); ++si) {
                    Rng rng = Rng::substream({seed, task_key, seeds[si], b});
                    for (auto& i : idx) i = static_cast<std::uint32_t>(rng.below(n_t));
                    for (std::size_t mi = 0; mi < methods.size(); ++mi) sums[mi] += aggregate(t, *cells[mi][si], idx);
                }
                for (std::size_t mi = 0; mi < methods.size(); ++mi)
                    draws[mi][b] = sums[mi] / static_cast<double>(seeds.size());
            }
        };
        const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(resamples)));
        if (w == 1) {
            run(0, resamples);
        } else {
            std::vector<std::jthread> pool;
            const std::size_t chunk = (resamples + w - 1) / w;
            for (unsigned k = 0; k < w; ++k) {
                const std::size_t lo = k * chunk;
                const std::size_t hi = std::min(resamples, lo + chunk);
                if (lo < hi) pool.emplace_back(run, lo, hi);
            }
        }
        for (std::size_t mi = 0; mi < methods.size(); ++mi) out.draws[{methods[mi], t.name}] = std::move(draws[mi]);
    }
    return out;
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ArgumentError("percentile of an empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

Comparison compare(std::span<const double> draws_a, std::span<const double> draws_b) {
    if (draws_a.size() != draws_b.size() || draws_a.empty())
        throw PairingError("compare needs two draw vectors of equal, non-zero length");
    const std::size_t n = draws_a.size();
    std::vector<double> delta(n);
    for (std::size_t b = 0; b < n; ++b) delta[b] = draws_a[b] - draws_b[b];

    Comparison c;
    c.delta_hat = mean_of(delta);
    std::vector<double> sorted = delta;
    std::sort(sorted.begin(), sorted.end());
    c.ci_low = percentile_sorted(sorted, 0.025);
    c.ci_high = percentile_sorted(sorted, 0.975);
    c.significant = c.delta_hat != 0.0 && (c.ci_low > 0.0 || c.ci_high < 0.0);
    if (c.delta_hat == 0.0) {
        c.p_value = 1.0;
    } else {
        std::size_t against = 0;
        for (double d : delta) against += c.delta_hat > 0.0 ? (d <= 0.0) : (d >= 0.0);
        c.p_value = static_cast<double>(1 + against) / static_cast<double>(n + 1);
    }
    return c;
}

std::string_view significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

std::string_view se_mode_name(SeMode m) {
    return m == SeMode::DrawSdOverRootB ? "draw_sd_over_sqrt_b" : "draw_sd";
}

SeMode parse_se_mode(std::string_view s) {
    if (s == "draw_sd_over_sqrt_b") return SeMode::DrawSdOverRootB;
    if (s == "draw_sd") return SeMode::DrawSd;
    throw ConfigError(fmt::format("unknown se_mode '{}'", s));
}

Summary summarize(std::span<const double> draws, SeMode mode) {
    if (draws.size() < 2) throw ArgumentError("summarize needs at least two draws");
    Summary s;
    s.mean = mean_of(draws);
    double ss = 0.0;
    for (double x : draws) ss += (x - s.mean) * (x - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(draws.size() - 1));
    s.se = mode == SeMode::DrawSd ? sd : sd / std::sqrt(static_cast<double>(draws.size()));
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    s.ci_low = percentile_sorted(sorted, 0.025);
    s.ci_high = percentile_sorted(sorted, 0.975);
    return s;
}

double relative_delta(double value, double base, Direction direction) {
    if (base == 0.0) throw ArgumentError("relative change against a zero baseline");
    const double diff = direction == Direction::HigherBetter ? value - base : base - value;
    return diff / base * 100.0;
}

double mu_delta_rel(std::span<const double> relative_deltas) {
    if (relative_deltas.empty()) throw ArgumentError("mean relative improvement needs at least one task");
    return mean_of(relative_deltas);
}

// ----------------------------------------------------------- GOOD choice

std::vector<double> percentiles(std::span<const double> scores, Direction direction) {
    const std::size_t n = scores.size();
    std::vector<double> out(n, 100.0);
    if (n <= 1) return out;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Worst first, so rank 1 is the worst score.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return direction == Direction::HigherBetter ? scores[a] < scores[b] : scores[a] > scores[b];
    });
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) out[order[k]] = (avg_rank - 1.0) / static_cast<double>(n - 1) * 100.0;
        i = j + 1;
    }
    return out;
}

GoodSelection select_good(std::span<const GoodCandidate> checkpoints, std::span<const TaskSpec> tasks,
                          const std::string& perplexity_task) {
    if (checkpoints.empty()) throw ArgumentError("select_good: no checkpoints");
    auto score_of = [](const GoodCandidate& c, const std::string& task) {
        auto it = c.scores.find(task);
        if (it == c.scores.end())
            throw ConfigError(fmt::format("checkpoint seed {} step {} has no '{}' score", c.seed, c.step, task));
        return it->second;
    };

    std::map<std::uint64_t, const GoodCandidate*> per_seed;
    for (const auto& c : checkpoints) {
        auto [it, fresh] = per_seed.emplace(c.seed, &c);
        if (fresh) continue;
        const double a = score_of(c, perplexity_task);
        const double b = score_of(*it->second, perplexity_task);
        if (a < b || (a == b && c.step < it->second->step)) it->second = &c;
    }
    std::vector<const GoodCandidate*> cands;
    for (const auto& [seed, c] : per_seed) cands.push_back(c);

    std::vector<double> mean_pct(cands.size(), 0.0);
    for (const auto& t : tasks) {
        std::vector<double> s;
        for (const auto* c : cands) s.push_back(score_of(*c, t.name));
        const auto p = percentiles(s, t.direction);
        for (std::size_t i = 0; i < cands.size(); ++i) mean_pct[i] += p[i];
    }
    if (!tasks.empty())
        for (auto& v : mean_pct) v /= static_cast<double>(tasks.size());

    GoodSelection sel;
    std::size_t best = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        sel.candidates.emplace_back(cands[i]->seed, cands[i]->step, mean_pct[i]);
        if (mean_pct[i] > mean_pct[best]) best = i; // seeds ascend, so ties keep the lowest
    }
    sel.seed = cands[best]->seed;
    sel.step = cands[best]->step;
    sel.mean_percentile = mean_pct[best];
    return sel;
}

// ---------------------------------------------------------------- report

nlohmann::ordered_json ReportConfig::to_json() const {
    nlohmann::ordered_json j;
    j["baseline"] = baseline;
    j["resamples"] = resamples;
    j["seed"] = seed;
    j["se_mode"] = se_mode_name(se_mode);
    auto pj = nlohmann::ordered_json::array();
    for (const auto& [a, b] : pairs) pj.push_back({a, b});
    j["pairs"] = pj;
    return j;
}

namespace {

nlohmann::ordered_json comparison_json(const Comparison& c) {
    nlohmann::ordered_json j;
    j["delta_hat"] = c.delta_hat;
    j["ci95"] = {c.ci_low, c.ci_high};
    j["significant"] = c.significant;
    j["p_value"] = c.p_value;
    j["stars"] = significance_stars(c.p_value);
    return j;
}

} // namespace

nlohmann::ordered_json Report::to_json() const {
    nlohmann::ordered_json j;
    j["config"] = config.to_json();
    auto tj = nlohmann::ordered_json::array();
    for (const auto& t : tasks) tj.push_back(t.to_json());
    j["tasks"] = tj;
    auto rj = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["method"] = r.method;
        row["mu_delta_rel"] = r.mu_delta_rel ? nlohmann::ordered_json(*r.mu_delta_rel) : nlohmann::ordered_json();
        auto cj = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& c = r.cells[i];
            nlohmann::ordered_json cell;
            cell["mean"] = c.summary.mean;
            cell["se"] = c.summary.se;
            cell["ci95"] = {c.summary.ci_low, c.summary.ci_high};
            cell["relative_pct"] = c.relative_pct ? nlohmann::ordered_json(*c.relative_pct) : nlohmann::ordered_json();
            cell["vs_baseline"] = c.vs_baseline ? comparison_json(*c.vs_baseline) : nlohmann::ordered_json();
            cj[tasks[i].name] = cell;
        }
        row["tasks"] = cj;
        rj.push_back(row);
    }
    j["rows"] = rj;
    auto pj = nlohmann::ordered_json::array();
    for (const auto& p : pairwise) {
        nlohmann::ordered_json pr;
        pr["a"] = p.method_a;
        pr["b"] = p.method_b;
        pr["mu_delta_rel_diff_pp"] = p.mu_delta_rel_diff;
        auto ej = nlohmann::ordered_json::array();
        for (const auto& e : p.entries) {
            nlohmann::ordered_json ent;
            ent["task"] = e.task;
            ent["change_pct"] = e.change_pct;
            ent["comparison"] = comparison_json(e.comparison);
            ej.push_back(ent);
        }
        pr["entries"] = ej;
        pj.push_back(pr);
    }
    j["pairwise"] = pj;
    auto sj = nlohmann::ordered_json::array();
    for (const auto& [key, step] : selection) {
        const auto& [m, t, s] = key;
        sj.push_back({{"method", m}, {"task", t}, {"seed", s}, {"checkpoint", step}});
    }
    j["selection"] = sj;
    return j;
}

Report build_report_from_draws(const std::vector<TaskSpec>& tasks, const std::vector<std::string>& methods,
                               const BootstrapDraws& draws, const ReportConfig& config) {
    if (std::find(methods.begin(), methods.end(), config.baseline) == methods.end())
        throw ConfigError(fmt::format("baseline method '{}' has no outcomes", config.baseline));
    Report rep;
    rep.config = config;
    rep.tasks = tasks;

    std::vector<std::string> order{config.baseline};
    for (const auto& m : methods)
        if (m != config.baseline) order.push_back(m);

    std::map<std::string, double> mu;
    for (const auto& m : order) {
        ReportRow row;
        row.method = m;
        std::vector<double> rels;
        for (const auto& t : tasks) {
            ReportCell cell;
            const auto& d = draws.at(m, t.name);
            cell.summary = summarize(d, config.se_mode);
            if (m != config.baseline) {
                const auto& base = draws.at(config.baseline, t.name);
                cell.relative_pct = relative_delta(cell.summary.mean, mean_of(base), t.direction);
                cell.vs_baseline = compare(d, base);
                if (t.in_mu_delta_rel) rels.push_back(*cell.relative_pct);
            }
            row.cells.push_back(cell);
        }
        if (m != config.baseline && !rels.empty()) row.mu_delta_rel = mu_delta_rel(rels);
        mu[m] = row.mu_delta_rel.value_or(0.0);
        rep.rows.push_back(std::move(row));
    }

    for (const auto& [a, b] : config.pairs) {
        for (const auto& m : {a, b})
            if (std::find(methods.begin(), methods.end(), m) == methods.end())
                throw ConfigError(fmt::format("pairwise comparison names unknown method '{}'", m));
        PairwiseReport pr;
        pr.method_a = a;
        pr.method_b = b;
        pr.mu_delta_rel_diff = mu[a] - mu[b];
        for (const auto& t : tasks) {
            const auto& da = draws.at(a, t.name);
            const auto& db = draws.at(b, t.name);
            PairwiseEntry e;
            e.task = t.name;
            const double mb = mean_of(db);
            if (mb == 0.0) throw ArgumentError("relative change against a zero mean");
            e.change_pct = (mean_of(da) - mb) / mb * 100.0;
            e.comparison = compare(da, db);
            pr.entries.push_back(e);
        }
        rep.pairwise.push_back(std::move(pr));
    }
    return rep;
}

Report build_report(const OutcomeMatrix& matrix, const ReportConfig& config) {
    matrix.validate();
    const auto selection = select_checkpoints(matrix);
    const auto draws = paired_bootstrap(matrix, selection, config.resamples, config.seed, config.workers);
    auto rep = build_report_from_draws(matrix.tasks(), matrix.methods(), draws, config);
    rep.selection = selection;
    return rep;
}

// ------------------------------------------------------------- rendering

namespace {

std::string fixed(double v, int decimals) {
    auto s = fmt::format("{:.{}f}", v, decimals);
    if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string signed_fixed(double v, int decimals) {
    auto s = fixed(v, decimals);
    return s.starts_with('-') ? s : "+" + s;
}

std::string latex_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '_' || c == '%' || c == '&' || c == '#') out += '\\';
        out += c;
    }
    return out;
}

std::string label_for(const std::map<std::string, std::string>& labels, const std::string& name, bool latex) {
    auto it = labels.find(name);
    if (it != labels.end()) return it->second;
    return latex ? latex_escape(name) : name;
}

bool has_mu_column(const Report& r) {
    return std::any_of(r.tasks.begin(), r.tasks.end(), [](const TaskSpec& t) { return t.in_mu_delta_rel; });
}

/// bold[row][col] for task columns and bold_mu[row], decided on printed values.
struct Emphasis {
    std::vector<std::vector<bool>> cell;
    std::vector<bool> mu;
};

Emphasis emphasis(const Report& r, int decimals) {
    Emphasis e;
    e.cell.assign(r.rows.size(), std::vector<bool>(r.tasks.size(), false));
    e.mu.assign(r.rows.size(), false);
    auto printed = [&](double v) { return std::stod(fixed(v, decimals)); };
    for (std::size_t c = 0; c < r.tasks.size(); ++c) {
        const bool lower = r.tasks[c].lower_better();
        double best = printed(r.rows[0].cells[c].summary.mean);
        for (const auto& row : r.rows) {
            const double v = printed(row.cells[c].summary.mean);
            best = lower ? std::min(best, v) : std::max(best, v);
        }
        for (std::size_t i = 0; i < r.rows.size(); ++i)
            e.cell[i][c] = printed(r.rows[i].cells[c].summary.mean) == best;
    }
    std::optional<double> best_mu;
    for (const auto& row : r.rows)
        if (row.mu_delta_rel) best_mu = std::max(best_mu.value_or(printed(*row.mu_delta_rel)), printed(*row.mu_delta_rel));
    for (std::size_t i = 0; i < r.rows.size(); ++i)
        e.mu[i] = best_mu && r.rows[i].mu_delta_rel && printed(*r.rows[i].mu_delta_rel) == *best_mu;
    return e;
}

} // namespace

std::string render_latex(const Report& report, const RenderOptions& options) {
    const int d = options.decimals;
    const bool mu_col = has_mu_column(report);
    const auto emph = emphasis(report, d);
    std::string out;
    out += "\\begin{tabular}{l|";
    if (mu_col) out += "l|";
    out += std::string(report.tasks.size(), 'l') + "}\n\\toprule\nName";
    if (mu_col) out += " & $\\mu_{\\Delta \\mathrm{REL}}$$\\uparrow$";
    for (const auto& t : report.tasks)
        out += fmt::format(" & {}{}", label_for(options.task_labels, t.name, true),
                           t.lower_better() ? "$\\downarrow$" : "$\\uparrow$");
    out += " \\\\\n\\midrule\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        out += label_for(options.labels, row.method, true);
        if (mu_col) {
            if (!row.mu_delta_rel) {
                out += " & -";
            } else {
                const auto v = fixed(*row.mu_delta_rel, d) + "\\%";
                out += emph.mu[i] ? " & \\textbf{" + v + "}" : " & " + v;
            }
        }
        for (std::size_t c = 0; c < report.tasks.size(); ++c) {
            const auto& cell = row.cells[c];
            auto body = fixed(cell.summary.mean, d) + "$\\pm$" + fixed(cell.summary.se, d);
            if (emph.cell[i][c]) body = "\\textbf{" + body + "}";
            if (cell.significant()) body += "$^{*}$";
            if (cell.relative_pct) body += " (" + fixed(*cell.relative_pct, d) + "\\%)";
            out += " & " + body;
        }
        out += " \\\\\n";
    }
    out += "\\bottomrule\n\\end{tabular}\n";
    return out;
}

std::string render_latex_pairwise(const PairwiseReport& pw, const std::vector<TaskSpec>& tasks,
                                  const RenderOptions& options) {
    std::string out = "\\begin{tabular}{l r l}\n\\toprule\n";
    out += fmt::format("\\textbf{{Metric}} & {} vs {} & Significance \\\\\n\\midrule\n",
                       label_for(options.labels, pw.method_a, true), label_for(options.labels, pw.method_b, true));
    out += fmt::format("$\\mu_{{\\Delta \\mathrm{{REL}}}}$ difference & {}pp & \\\\\n",
                       signed_fixed(pw.mu_delta_rel_diff, 2));
    for (const auto& e : pw.entries) {
        const auto it = std::find_if(tasks.begin(), tasks.end(), [&](const TaskSpec& t) { return t.name == e.task; });
        const bool lower = it != tasks.end() && it->lower_better();
        const auto stars = significance_stars(e.comparison.p_value);
        std::string sig;
        if (stars.size() == 1) sig = "$^*$ ";
        else if (!stars.empty()) sig = fmt::format("$^{{{}}}$ ", stars);
        out += fmt::format("{}{} & {}\\% & {}\\\\\n", label_for(options.task_labels, e.task, true),
                           lower ? "$\\downarrow$" : "$\\uparrow$", signed_fixed(e.change_pct, 1), sig);
    }
    out += "\\bottomrule\n\\end{tabular}\n";
    return out;
}

std::string render_markdown(const Report& report, const RenderOptions& options) {
    const int d = options.decimals;
    const bool mu_col = has_mu_column(report);
    const auto emph = emphasis(report, d);
    std::string out = "| Name |";
    std::string rule = "|---|";
    if (mu_col) {
        out += " μΔREL↑ |";
        rule += "---|";
    }
    for (const auto& t : report.tasks) {
        out += fmt::format(" {}{} |", label_for(options.task_labels, t.name, false), t.lower_better() ? "↓" : "↑");
        rule += "---|";
    }
    out += "\n" + rule + "\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        out += "| " + label_for(options.labels, row.method, false) + " |";
        if (mu_col) {
            if (!row.mu_delta_rel) {
                out += " - |";
            } else {
                const auto v = fixed(*row.mu_delta_rel, d) + "%";
                out += emph.mu[i] ? " **" + v + "** |" : " " + v + " |";
            }
        }
        for (std::size_t c = 0; c < report.tasks.size(); ++c) {
            const auto& cell = row.cells[c];
            auto body = fixed(cell.summary.mean, d) + "±" + fixed(cell.summary.se, d);
            if (emph.cell[i][c]) body = "**" + body + "**";
            if (cell.significant()) body += "\\*";
            if (cell.relative_pct) body += " (" + fixed(*cell.relative_pct, d) + "%)";
            out += " " + body + " |";
        }
        out += "\n";
    }
    for (const auto& pw : report.pairwise) {
        out += fmt::format("\n| Metric | {} vs {} | Significance |\n|---|---|---|\n",
                           label_for(options.labels, pw.method_a, false), label_for(options.labels, pw.method_b, false));
        out += fmt::format("| μΔREL difference | {}pp | |\n", signed_fixed(pw.mu_delta_rel_diff, 2));
        for (const auto& e : pw.entries) {
            const auto stars = significance_stars(e.comparison.p_value);
            std::string esc;
            for (std::size_t k = 0; k < stars.size(); ++k) esc += "\\*";
            const auto it = std::find_if(report.tasks.begin(), report.tasks.end(),
                                         [&](const TaskSpec& t) { return t.name == e.task; });
            const bool lower = it != report.tasks.end() && it->lower_better();
            out += fmt::format("| {}{} | {}% | {}|\n", label_for(options.task_labels, e.task, false),
                               lower ? "↓" : "↑", signed_fixed(e.change_pct, 1), esc.empty() ? "" : esc + " ");
        }
    }
    return out;
}

std::string render_csv(const Report& report) {
    std::string out = "method,mu_delta_rel";
    for (const auto& t : report.tasks)
        out += fmt::format(",{0}_mean,{0}_se,{0}_ci_low,{0}_ci_high,{0}_rel_pct,{0}_p,{0}_significant", t.name);
    out += "\n";
    auto num = [](double v) { return fixed(v, 6); };
    for (const auto& row : report.rows) {
        out += row.method + "," + (row.mu_delta_rel ? num(*row.mu_delta_rel) : "");
        for (const auto& c : row.cells) {
            out += "," + num(c.summary.mean) + "," + num(c.summary.se) + "," + num(c.summary.ci_low) + "," +
                   num(c.summary.ci_high) + ",";
            out += c.relative_pct ? num(*c.relative_pct) : "";
            out += ",";
            out += c.vs_baseline ? num(c.vs_baseline->p_value) : "";
            out += ",";
            out += c.vs_baseline ? (c.vs_baseline->significant ? "1" : "0") : "";
        }
        out += "\n";
    }
    return out;
}

} // namespace forge
