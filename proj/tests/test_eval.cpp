#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hfphen/eval.hpp"
#include "oracles.hpp"

using namespace hfphen;
using namespace hfphen::testing;

namespace {

struct Instance {
    std::vector<double> s;
    std::vector<int> y;
};

Instance random_instance(Rng& rng, bool ties) {
    Instance in;
    const std::size_t n = 4 + uniform_index(rng, 40);
    for (std::size_t i = 0; i < n; ++i) {
        in.y.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(uniform_index(rng, 2)));
        in.s.push_back(ties ? static_cast<double>(uniform_index(rng, 5)) : standard_normal(rng));
    }
    return in;
}

}  // namespace

TEST(RocAuc, MatchesPairCount) {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const auto in = random_instance(rng, t % 2 == 0);
        EXPECT_NEAR(roc_auc(in.s, in.y), auc_by_pairs(in.s, in.y), 1e-12);
    }
}

TEST(RocAuc, Extremes) {
    const std::vector<int> y = {0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, y), 1.0);
    EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.4, 0.3, 0.2, 0.1}, y), 0.0);
    EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{7, 7, 7, 7}, y), 0.5);
}

TEST(RocAuc, InvariantUnderMonotoneTransform) {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const auto in = random_instance(rng, false);
        std::vector<double> z;
        for (double v : in.s) z.push_back(std::exp(3 * v) + 1);
        EXPECT_NEAR(roc_auc(in.s, in.y), roc_auc(z, in.y), 1e-12);
    }
}

TEST(RocAuc, SingleClassThrows) {
    EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), std::invalid_argument);
}

TEST(Youden, MatchesBruteForceScan) {
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        const auto in = random_instance(rng, t % 3 == 0);
        const auto [best_thr, best_j] = youden_scan(in.s, in.y);
        const auto r = youden_threshold(in.s, in.y);
        EXPECT_NEAR(r.j, best_j, 1e-12);
        EXPECT_EQ(r.threshold, best_thr);
        EXPECT_NEAR(youden_at(in.s, in.y, r.threshold), r.j, 1e-12);
    }
}

TEST(Youden, PerfectSeparationSplitsTheGap) {
    const auto r = youden_threshold(std::vector<double>{0.1, 0.2, 0.6, 0.9}, std::vector<int>{0, 0, 1, 1});
    EXPECT_DOUBLE_EQ(r.threshold, 0.4);
    EXPECT_DOUBLE_EQ(r.j, 1.0);
}

TEST(Youden, FlippingLabelsAndNegatingScoresKeepsJ) {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        auto in = random_instance(rng, false);
        const double j = youden_threshold(in.s, in.y).j;
        for (auto& v : in.s) v = -v;
        for (auto& l : in.y) l = 1 - l;
        EXPECT_NEAR(youden_threshold(in.s, in.y).j, j, 1e-12);
    }
}

TEST(MetricsAtThreshold, RecountsTheConfusionMatrix) {
    Rng rng(13);
    for (int t = 0; t < 100; ++t) {
        const auto in = random_instance(rng, false);
        const double thr = standard_normal(rng) * 0.5;
        double tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < in.s.size(); ++i) {
            const bool p = in.s[i] > thr;
            if (p) (in.y[i] ? tp : fp) += 1;
            else (in.y[i] ? fn : tn) += 1;
        }
        const auto m = metrics_at_threshold(in.s, in.y, thr);
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0, rec = tp / (tp + fn);
        EXPECT_NEAR(m.precision, prec, 1e-12);
        EXPECT_NEAR(m.recall, rec, 1e-12);
        EXPECT_NEAR(m.f1, prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0, 1e-12);
        EXPECT_NEAR(m.negative.recall, tn / (tn + fp), 1e-12);
        EXPECT_NEAR(m.negative.precision, tn + fn > 0 ? tn / (tn + fn) : 0, 1e-12);
    }
}

TEST(EvaluateScores, CombinesAucAndYouden) {
    const std::vector<double> s = {0.1, 0.35, 0.4, 0.8};
    const std::vector<int> y = {0, 1, 0, 1};
    const auto m = evaluate_scores(s, y);
    EXPECT_DOUBLE_EQ(m.auc, 0.75);
    EXPECT_DOUBLE_EQ(m.threshold, youden_threshold(s, y).threshold);
}

TEST(StratifiedFolds, OnePositiveAndOneNegativePerFold) {
    std::vector<int> y(20, 0);
    for (std::size_t i = 0; i < 10; ++i) y[2 * i] = 1;
    const auto plan = stratified_folds(y, 10, 42);
    for (std::size_t f = 0; f < 10; ++f) {
        const auto [train, test] = plan.split(f);
        ASSERT_EQ(test.size(), 2u);
        EXPECT_EQ(y[test[0]] + y[test[1]], 1);
        EXPECT_EQ(train.size(), 18u);
    }
}

TEST(StratifiedFolds, PartitionBalanceAndDeterminism) {
    Rng rng(17);
    for (int t = 0; t < 30; ++t) {
        const std::size_t k = 2 + uniform_index(rng, 9);
        std::vector<int> y;
        const std::size_t n = 3 * k + uniform_index(rng, 100);
        for (std::size_t i = 0; i < n; ++i) y.push_back(i < k ? 1 : i < 2 * k ? 0 : static_cast<int>(uniform_index(rng, 2)));
        const auto plan = stratified_folds(y, k, 99 + t);
        EXPECT_EQ(plan.assignment, stratified_folds(y, k, 99 + t).assignment);
        std::vector<std::size_t> seen(n, 0);
        const double P = static_cast<double>(std::count(y.begin(), y.end(), 1));
        for (std::size_t f = 0; f < k; ++f) {
            const auto [train, test] = plan.split(f);
            EXPECT_EQ(train.size() + test.size(), n);
            EXPECT_TRUE(std::is_sorted(test.begin(), test.end()));
            double pos = 0;
            for (auto i : test) {
                ++seen[i];
                pos += y[i];
            }
            EXPECT_LE(std::abs(pos - P / static_cast<double>(k)), 1.0);
        }
        for (auto c : seen) EXPECT_EQ(c, 1u);
    }
}

TEST(StratifiedFolds, Errors) {
    const std::vector<int> y = {1, 1, 0, 0, 0};
    EXPECT_THROW(stratified_folds(y, 1, 0), std::invalid_argument);
    EXPECT_THROW(stratified_folds(y, 3, 0), std::invalid_argument);
    EXPECT_NO_THROW(stratified_folds(y, 2, 0));
}

TEST(Lattice, CartesianProduct) {
    const auto g = make_lattice({{"a", {1, 2}}, {"b", {10, 20, 30}}});
    ASSERT_EQ(g.size(), 6u);
    EXPECT_EQ(g[0], (GridPoint{{"a", 1}, {"b", 10}}));
    EXPECT_EQ(g[5], (GridPoint{{"a", 2}, {"b", 30}}));
    EXPECT_EQ(make_lattice({}).size(), 1u);
}

TEST(MeanAndStd, SampleStandardDeviation) {
    const auto [m, s] = mean_and_sample_std(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9});
    EXPECT_DOUBLE_EQ(m, 5.0);
    EXPECT_NEAR(s, std::sqrt(32.0 / 7.0), 1e-12);
}

TEST(GridSearch, PicksDominantPointAndSkipsFailures) {
    const std::vector<int> y = {0, 1, 0, 1, 0, 1};
    const auto plan = stratified_folds(y, 3, 1);
    const auto grid = make_lattice({{"c", {0.1, 1, 10, 100}}});
    auto score = [](const GridPoint& p, std::size_t f) {
        const double c = p.at("c");
        if (c == 100) throw std::runtime_error("diverged");
        return (c == 1 ? 0.9 : 0.6) + 0.01 * static_cast<double>(f);
    };
    for (std::size_t jobs : {1, 3}) {
        const auto r = grid_search(score, grid, plan, jobs);
        ASSERT_EQ(r.rows.size(), 4u);
        EXPECT_EQ(r.best_params().at("c"), 1);
        EXPECT_TRUE(r.rows[3].failed);
        EXPECT_EQ(r.rows[3].error, "diverged");
        EXPECT_EQ(r.rows[1].fold_scores.size(), 3u);
        EXPECT_NEAR(r.rows[1].mean, 0.91, 1e-12);
        EXPECT_NEAR(r.rows[1].std, 0.01, 1e-12);
    }
}

TEST(GridSearch, SingletonAndAllFailed) {
    const std::vector<int> y = {0, 1, 0, 1};
    const auto plan = stratified_folds(y, 2, 1);
    const auto r = grid_search([](const GridPoint&, std::size_t) { return 0.5; }, {GridPoint{}}, plan);
    EXPECT_EQ(r.best, 0u);
    EXPECT_THROW(grid_search([](const GridPoint&, std::size_t) -> double { throw std::runtime_error("x"); },
                             {GridPoint{}}, plan),
                 std::runtime_error);
    EXPECT_THROW(grid_search([](const GridPoint&, std::size_t) { return 0.0; }, {}, plan), std::invalid_argument);
}
