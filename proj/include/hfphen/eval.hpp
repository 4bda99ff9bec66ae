#pragma once

// Classification metrics, Youden-index thresholds, stratified folds and
// grid search over a parameter lattice.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "util.hpp"

namespace hfphen {

namespace detail {
inline void require_both_classes(std::span<const double> scores, std::span<const int> labels, const char* who) {
    if (scores.size() != labels.size()) throw std::invalid_argument(std::string(who) + ": size mismatch");
    std::size_t pos = 0;
    for (int l : labels) pos += l == 1;
    if (pos == 0 || pos == labels.size()) throw std::invalid_argument(std::string(who) + ": both classes required");
}
}  // namespace detail

/// Probability that a random positive outranks a random negative (ties count 1/2),
/// computed from mid-ranks.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    detail::require_both_classes(scores, labels, "roc_auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) {
                rank_sum_pos += mid_rank;
                ++n_pos;
            }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n - n_pos);
    return (rank_sum_pos - np * (np + 1) / 2.0) / (np * nn);
}

struct YoudenResult {
    double threshold = 0;  // predict positive when score > threshold
    double j = 0;          // sensitivity + specificity - 1
};

/// Youden-optimal threshold over midpoints between consecutive distinct
/// scores plus the +/- infinity sentinels. Ties go to the lower threshold.
inline YoudenResult youden_threshold(std::span<const double> scores, std::span<const int> labels) {
    detail::require_both_classes(scores, labels, "youden_threshold");
    std::vector<std::pair<double, int>> sorted;
    for (std::size_t i = 0; i < scores.size(); ++i) sorted.emplace_back(scores[i], labels[i]);
    std::sort(sorted.begin(), sorted.end());
    double P = 0, N = 0;
    for (auto& [s, l] : sorted) (l == 1 ? P : N) += 1;
    // Threshold -inf: everything positive.
    double tp = P, fp = N;
    YoudenResult best{-std::numeric_limits<double>::infinity(), tp / P - fp / N};
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) {
            (sorted[j].second == 1 ? tp : fp) -= 1;
            ++j;
        }
        const double thr = j < sorted.size() ? 0.5 * (sorted[i].first + sorted[j].first)
                                             : std::numeric_limits<double>::infinity();
        const double J = tp / P - fp / N;
        if (J > best.j) best = {thr, J};
        i = j;
    }
    return best;
}

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct MetricsReport {
    double auc = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double threshold = 0;
    ClassMetrics positive;  // HFrEF
    ClassMetrics negative;  // HFpEF
};

inline double harmonic_f1(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Precision/recall/F1 for both classes with `score > threshold` predicting positive.
inline MetricsReport metrics_at_threshold(std::span<const double> scores, std::span<const int> labels, double threshold) {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        if (pred && labels[i] == 1) ++tp;
        else if (pred) ++fp;
        else if (labels[i] == 1) ++fn;
        else ++tn;
    }
    MetricsReport m;
    m.threshold = threshold;
    m.positive.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    m.positive.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    m.positive.f1 = harmonic_f1(m.positive.precision, m.positive.recall);
    m.negative.precision = tn + fn > 0 ? tn / (tn + fn) : 0.0;
    m.negative.recall = tn + fp > 0 ? tn / (tn + fp) : 0.0;
    m.negative.f1 = harmonic_f1(m.negative.precision, m.negative.recall);
    m.precision = m.positive.precision;
    m.recall = m.positive.recall;
    m.f1 = m.positive.f1;
    return m;
}

/// AUC plus P/R/F1 at the Youden threshold chosen on the same data.
inline MetricsReport evaluate_scores(std::span<const double> scores, std::span<const int> labels) {
    auto m = metrics_at_threshold(scores, labels, youden_threshold(scores, labels).threshold);
    m.auc = roc_auc(scores, labels);
    return m;
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;  // sample index -> fold
    std::uint64_t seed = 0;

    /// (train indices, test indices) for fold f, both ascending.
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(std::size_t f) const {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < assignment.size(); ++i) (assignment[i] == f ? test : train).push_back(i);
        return {train, test};
    }
};

/// Stratified k-fold assignment: each class is shuffled and dealt round-robin.
inline FoldPlan stratified_folds(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_folds: k must be >= 2");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, idx] : by_class)
        if (idx.size() < k)
            throw std::invalid_argument("stratified_folds: class " + std::to_string(cls) + " has fewer than k members");
    FoldPlan plan{k, std::vector<std::size_t>(labels.size()), seed};
    Rng rng(seed);
    std::size_t offset = 0;
    for (auto& [cls, idx] : by_class) {
        shuffle_in_place(idx, rng);
        for (std::size_t j = 0; j < idx.size(); ++j) plan.assignment[idx[j]] = (offset + j) % k;
        offset += idx.size();
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

using GridPoint = std::map<std::string, double>;

struct GridRow {
    GridPoint params;
    std::vector<double> fold_scores;
    double mean = 0;
    double std = 0;  // sample standard deviation
    bool failed = false;
    std::string error;
};

struct GridResult {
    std::size_t best = 0;
    std::vector<GridRow> rows;
    const GridPoint& best_params() const { return rows.at(best).params; }
};

/// Cartesian product of named axes, in axis-name then value order.
inline std::vector<GridPoint> make_lattice(const std::map<std::string, std::vector<double>>& axes) {
    std::vector<GridPoint> out{GridPoint{}};
    for (const auto& [name, values] : axes) {
        std::vector<GridPoint> next;
        for (const auto& p : out)
            for (double v : values) {
                auto q = p;
                q[name] = v;
                next.push_back(std::move(q));
            }
        out = std::move(next);
    }
    return out;
}

inline std::pair<double, double> mean_and_sample_std(std::span<const double> v) {
    if (v.empty()) return {0, 0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0};
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

/// Evaluates every lattice point by the fold mean of `score_fn(params, fold)`.
/// Points whose evaluation throws are recorded as failed and never selected.
inline GridResult grid_search(const std::function<double(const GridPoint&, std::size_t fold)>& score_fn,
                              const std::vector<GridPoint>& grid, const FoldPlan& folds, std::size_t jobs = 1) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    GridResult result;
    result.rows.resize(grid.size());
    parallel_for(grid.size(), jobs, [&](std::size_t g) {
        auto& row = result.rows[g];
        row.params = grid[g];
        try {
            for (std::size_t f = 0; f < folds.k; ++f) row.fold_scores.push_back(score_fn(grid[g], f));
            std::tie(row.mean, row.std) = mean_and_sample_std(row.fold_scores);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
    });
    bool found = false;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (result.rows[g].failed) continue;
        if (!found || result.rows[g].mean > result.rows[result.best].mean) {
            result.best = g;
            found = true;
        }
    }
    if (!found) throw std::runtime_error("grid_search: every grid point failed");
    return result;
}

}  // namespace hfphen
