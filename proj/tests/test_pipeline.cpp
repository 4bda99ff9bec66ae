#include <gtest/gtest.h>

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hfphen/pipeline.hpp"
#include "hfphen/synth.hpp"

using namespace hfphen;

namespace {

std::vector<LabeledCase> labeled_synth(std::size_t n, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_docs = n;
    cfg.seed = seed;
    cfg.lvef_mention_rate = 0.5;
    auto s = generate(cfg);
    for (std::size_t i = 0; i < s.cases.size(); ++i) {
        s.cases[i].label = s.truth[i];
        s.cases[i].source = LabelSource::Gold;
    }
    return s.cases;
}

}  // namespace

TEST(Dataset, DropsUnspecifiedAndMasksTrainingView) {
    auto cases = labeled_synth(40, 3);
    cases[0].label = LabelClass::Unspecified;
    const auto d = make_dataset(cases, 2);
    EXPECT_EQ(d.size(), 39u);
    EXPECT_EQ(d.ids[0], cases[1].document.id);
    const auto mask_token = normalize(kMaskToken).tokens.at(0);
    bool saw_mask = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(d.raw[i].tokens, normalize(cases[i + 1].document.text).tokens);
        EXPECT_EQ(d.masked[i].tokens, normalize(mask_lvef(cases[i + 1].document.text)).tokens);
        for (const auto& t : d.masked[i].tokens) saw_mask |= t == mask_token;
    }
    EXPECT_TRUE(saw_mask);
}

TEST(CrossValidate, HookSeesMaskedTrainingAndRawEvaluation) {
    const auto d = make_dataset(labeled_synth(60, 4));
    ModelConfig cfg;
    cfg.variant = Variant::TfidfLR;
    CvOptions opt;
    opt.k = 3;
    std::map<std::pair<std::size_t, std::string>, std::tuple<bool, bool>> seen;
    std::size_t calls = 0;
    opt.hook = [&](std::size_t fold, const std::string& id, bool masked, bool training) {
        ++calls;
        seen[{fold, id}] = {masked, training};
    };
    const auto r = cross_validate(d, cfg, nullptr, opt);
    EXPECT_EQ(calls, 3 * d.size());
    EXPECT_EQ(seen.size(), 3 * d.size());
    std::map<std::string, int> eval_count;
    for (const auto& [key, v] : seen) {
        const auto [masked, training] = v;
        EXPECT_EQ(masked, training);
        if (!training) ++eval_count[key.second];
    }
    EXPECT_EQ(eval_count.size(), d.size());
    for (const auto& [id, c] : eval_count) EXPECT_EQ(c, 1);
    ASSERT_EQ(r.folds.size(), 3u);
    for (const auto& f : r.folds) {
        EXPECT_GE(f.auc, 0.0);
        EXPECT_LE(f.auc, 1.0);
    }
}

TEST(CrossValidate, DeterministicAcrossJobs) {
    const auto d = make_dataset(labeled_synth(60, 5));
    ModelConfig cfg;
    cfg.variant = Variant::TfidfLR;
    CvOptions a, b;
    a.k = b.k = 3;
    b.jobs = 3;
    const auto ra = cross_validate(d, cfg, nullptr, a), rb = cross_validate(d, cfg, nullptr, b);
    for (std::size_t f = 0; f < 3; ++f) {
        EXPECT_EQ(ra.folds[f].auc, rb.folds[f].auc);
        EXPECT_EQ(ra.folds[f].threshold, rb.folds[f].threshold);
    }
}

TEST(SummarizeFolds, MeanAndSampleStd) {
    std::vector<MetricsReport> f(2);
    f[0].auc = 0.8;
    f[1].auc = 0.6;
    const auto r = summarize_folds(f);
    EXPECT_NEAR(r.mean.auc, 0.7, 1e-12);
    EXPECT_NEAR(r.std.auc, std::sqrt(0.02), 1e-12);
}

TEST(Grid, LatticeShapesPerVariant) {
    EXPECT_EQ(make_lattice(paper_grid(Variant::LR)).size(), 7u * 3u * 6u);
    EXPECT_EQ(make_lattice(paper_grid(Variant::EBM)).size(), 4u * 3u * 6u);
    EXPECT_EQ(make_lattice(paper_grid(Variant::TfidfLR)).size(), 7u);
    EXPECT_EQ(make_lattice(paper_grid(Variant::StructEBM)).size(), 4u);
}

TEST(Grid, ApplyGridPoint) {
    const auto cfg = apply_grid_point(ModelConfig{}, {{"reg_c", 10}, {"n_max", 2}, {"threshold", 50}});
    EXPECT_EQ(cfg.reg_c, 10);
    EXPECT_EQ(cfg.n_max, 2u);
    EXPECT_EQ(cfg.thresholds, uniform_thresholds(2, 50));
    EXPECT_EQ(apply_grid_point(ModelConfig{}, {{"learning_rate", 0.05}}).ebm.learning_rate, 0.05);
    EXPECT_THROW(apply_grid_point(ModelConfig{}, {{"depth", 3}}), std::invalid_argument);
}

TEST(Grid, TuneReturnsOneRowPerPoint) {
    const auto d = make_dataset(labeled_synth(60, 6));
    ModelConfig cfg;
    cfg.variant = Variant::TfidfLR;
    const auto grid = make_lattice({{"reg_c", {0.01, 1}}});
    const auto r = tune(d, cfg, grid, nullptr, 3, 1);
    ASSERT_EQ(r.rows.size(), 2u);
    for (const auto& row : r.rows) EXPECT_EQ(row.fold_scores.size(), 3u);
    EXPECT_GE(r.rows[r.best].mean, r.rows[1 - r.best].mean);
}
