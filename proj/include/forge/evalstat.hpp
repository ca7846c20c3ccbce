#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

namespace forge {

enum class Direction { HigherBetter, LowerBetter };

/// How per-example outcomes collapse into one task score.
///   Mean:        sum(v) / n
///   WeightedMean sum(v) / sum(w)
///   ExpWeighted: exp(sum(v) / sum(w)), e.g. perplexity from per-document NLL
///                sums (v) and token counts (w)
enum class Aggregation { Mean, WeightedMean, ExpWeighted };

std::string_view direction_name(Direction d);
Direction parse_direction(std::string_view s);
std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

struct TaskSpec {
    std::string name;
    Aggregation aggregation = Aggregation::Mean;
    Direction direction = Direction::HigherBetter;
    /// Multiplies the aggregated score, e.g. 100 for accuracies in percent.
    double display_scale = 1.0;
    /// Whether the task enters the mean relative improvement.
    bool in_mu_delta_rel = true;

    bool lower_better() const noexcept { return direction == Direction::LowerBetter; }
    nlohmann::ordered_json to_json() const;
    static TaskSpec from_json(const nlohmann::json& j);
};

/// Per-example outcomes; `weights` is empty or parallel to `values`.
struct Outcomes {
    std::vector<double> values;
    std::vector<double> weights;

    std::size_t size() const noexcept { return values.size(); }
    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
};

/// Task score over all examples, or over the multiset `indices` when given.
double aggregate(const TaskSpec& task, const Outcomes& outcomes, std::span<const std::uint32_t> indices = {});

/**
 * y[m, t, s, c, i]: outcomes of method m on task t for run seed s at
 * checkpoint c. Tasks and methods keep their insertion order, which is the
 * order of report columns and rows.
 */
class OutcomeMatrix {
public:
    void add_task(TaskSpec task);
    void set(const std::string& method, const std::string& task, std::uint64_t seed, std::uint64_t checkpoint,
             Outcomes outcomes);

    const std::vector<TaskSpec>& tasks() const noexcept { return tasks_; }
    const TaskSpec& task(std::string_view name) const;
    const std::vector<std::string>& methods() const noexcept { return methods_; }
    std::vector<std::uint64_t> seeds(const std::string& method, const std::string& task) const;
    std::vector<std::uint64_t> checkpoints(const std::string& method, const std::string& task,
                                           std::uint64_t seed) const;
    const Outcomes& at(const std::string& method, const std::string& task, std::uint64_t seed,
                       std::uint64_t checkpoint) const;
    bool empty() const noexcept { return cells_.empty(); }

    /// Throws PairingError unless every task has the same seed set for all
    /// methods and one example count N_t across methods, seeds and checkpoints.
    void validate() const;

    /// Line format: "#task" declarations followed by
    /// method, task, seed, checkpoint, example index, value, weight (TSV).
    std::string serialize() const;
    static OutcomeMatrix parse(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static OutcomeMatrix load(const std::filesystem::path& path);

    /// Adds every cell of `other` (tasks must agree where both declare them).
    void merge(const OutcomeMatrix& other);

private:
    using Key = std::tuple<std::string, std::string, std::uint64_t, std::uint64_t>;

    std::vector<TaskSpec> tasks_;
    std::vector<std::string> methods_;
    std::map<Key, Outcomes> cells_;
};

/// (step, score) pairs of one (method, task, seed). Ties go to the earliest
/// step. Throws ArgumentError when empty.
std::uint64_t mean_max_select(std::span<const std::pair<std::uint64_t, double>> scores, Direction direction);

/// Selected checkpoint per (method, task, seed).
using Selection = std::map<std::tuple<std::string, std::string, std::uint64_t>, std::uint64_t>;

Selection select_checkpoints(const OutcomeMatrix& matrix);

/// Draw vectors mu^(b)[m, t] for b = 0..B-1.
struct BootstrapDraws {
    std::size_t resamples = 0;
    std::uint64_t seed = 0;
    std::map<std::pair<std::string, std::string>, std::vector<double>> draws;

    const std::vector<double>& at(const std::string& method, const std::string& task) const;
};

/// For every (t, s, b) one index multiset of size N_t is drawn from
/// substream(seed, task, s, b) and shared by all methods. The result does not
/// depend on `workers` or on method order.
BootstrapDraws paired_bootstrap(const OutcomeMatrix& matrix, const Selection& selection, std::size_t resamples,
                                std::uint64_t seed, unsigned workers = 1);

struct Comparison {
    double delta_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool significant = false;
    double p_value = 1.0;
};

/// Percentile of sorted data with linear interpolation at h = (n - 1) q.
double percentile_sorted(std::span<const double> sorted, double q);

/// Delta^(b) = a^(b) - b^(b). The one-sided p-value counts draws on the far
/// side of zero from the mean difference (inclusive), which covers both
/// metric directions. A zero mean difference gives p = 1.
Comparison compare(std::span<const double> draws_a, std::span<const double> draws_b);

/// "*", "**", "***" for p below 0.05, 0.01, 0.001; empty otherwise.
std::string_view significance_stars(double p);

enum class SeMode {
    /// sd(draws) / sqrt(B)
    DrawSdOverRootB,
    /// sd(draws): the usual bootstrap standard error
    DrawSd,
};

std::string_view se_mode_name(SeMode m);
SeMode parse_se_mode(std::string_view s);

struct Summary {
    double mean = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Mean and standard error of a draw vector (sample sd, n - 1). B >= 2.
Summary summarize(std::span<const double> draws, SeMode mode = SeMode::DrawSdOverRootB);

/// Improvement of `value` over `base` in percent; positive is better in both
/// directions.
double relative_delta(double value, double base, Direction direction);

/// Mean of the given per-task relative changes. Throws ArgumentError if empty.
double mu_delta_rel(std::span<const double> relative_deltas);

struct GoodCandidate {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    /// Keyed by task name.
    std::map<std::string, double> scores;
};

struct GoodSelection {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    double mean_percentile = 0.0;
    /// (seed, step, mean percentile) of every per-seed candidate.
    std::vector<std::tuple<std::uint64_t, std::uint64_t, double>> candidates;
};

/// Within-task percentiles (rank - 1) / (n - 1) * 100 with ties sharing their
/// average rank, best scoring 100. A single value scores 100.
std::vector<double> percentiles(std::span<const double> scores, Direction direction);

/// Keeps the lowest-perplexity checkpoint of every seed, scores the survivors
/// on all tasks, and picks the highest mean percentile (ties: lowest seed).
GoodSelection select_good(std::span<const GoodCandidate> checkpoints, std::span<const TaskSpec> tasks,
                          const std::string& perplexity_task);

struct ReportConfig {
    std::string baseline;
    std::size_t resamples = 1000;
    std::uint64_t seed = 0;
    SeMode se_mode = SeMode::DrawSdOverRootB;
    unsigned workers = 1;
    /// Method pairs (a, b) that get a head-to-head table.
    std::vector<std::pair<std::string, std::string>> pairs;

    nlohmann::ordered_json to_json() const;
};

struct ReportCell {
    Summary summary;
    /// Versus baseline; absent in the baseline row.
    std::optional<double> relative_pct;
    std::optional<Comparison> vs_baseline;

    bool significant() const noexcept { return vs_baseline && vs_baseline->significant; }
};

struct ReportRow {
    std::string method;
    std::vector<ReportCell> cells; // parallel to Report::tasks
    std::optional<double> mu_delta_rel;
};

struct PairwiseEntry {
    std::string task;
    /// (mean_a - mean_b) / mean_b in percent, without direction adjustment.
    double change_pct = 0.0;
    Comparison comparison;
};

struct PairwiseReport {
    std::string method_a;
    std::string method_b;
    /// Difference of the two mean relative improvements, in points.
    double mu_delta_rel_diff = 0.0;
    std::vector<PairwiseEntry> entries;
};

struct Report {
    ReportConfig config;
    std::vector<TaskSpec> tasks;
    std::vector<ReportRow> rows; // baseline first
    std::vector<PairwiseReport> pairwise;
    Selection selection;

    nlohmann::ordered_json to_json() const;
};

/// Selection, paired bootstrap, summaries and comparisons in one pass.
Report build_report(const OutcomeMatrix& matrix, const ReportConfig& config);

/// Same as build_report from precomputed draws (selection left empty).
Report build_report_from_draws(const std::vector<TaskSpec>& tasks, const std::vector<std::string>& methods,
                               const BootstrapDraws& draws, const ReportConfig& config);

struct RenderOptions {
    int decimals = 2;
    /// Row labels by method name; the method name is used when absent.
    std::map<std::string, std::string> labels;
    /// Column labels by task name.
    std::map<std::string, std::string> task_labels;
};

/// Best value per column in bold (ties on the printed value all bold), an
/// asterisk outside the bold when significant versus baseline, the relative
/// change in parentheses.
std::string render_latex(const Report& report, const RenderOptions& options = {});
std::string render_latex_pairwise(const PairwiseReport& pairwise, const std::vector<TaskSpec>& tasks,
                                  const RenderOptions& options = {});
std::string render_markdown(const Report& report, const RenderOptions& options = {});
std::string render_csv(const Report& report);

} // namespace forge
