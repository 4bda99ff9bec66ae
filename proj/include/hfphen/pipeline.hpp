#pragma once

// Cross-validated training and evaluation of model variants: LVEF masking of
// training texts, Youden thresholds, and the hyperparameter grids.

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embedding.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "models.hpp"
#include "silver_labeler.hpp"
#include "util.hpp"

namespace hfphen {

/// Labeled documents with both text views precomputed.
struct Dataset {
    std::vector<std::string> ids;
    std::vector<TokenSeq> raw;     // normalized original text
    std::vector<TokenSeq> masked;  // normalized text after mask_lvef
    std::vector<std::optional<StructuredRecord>> structured;
    std::vector<int> labels;  // 1 = HFrEF
    std::vector<Site> sites;

    std::size_t size() const { return labels.size(); }

    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset d;
        for (std::size_t i : idx) {
            d.ids.push_back(ids[i]);
            d.raw.push_back(raw[i]);
            d.masked.push_back(masked[i]);
            d.structured.push_back(structured[i]);
            d.labels.push_back(labels[i]);
            d.sites.push_back(sites[i]);
        }
        return d;
    }
};

/// Cases with a binary label; Unspecified cases are dropped.
inline Dataset make_dataset(std::span<const LabeledCase> cases, std::size_t jobs = 1) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cases.size(); ++i)
        if (cases[i].label != LabelClass::Unspecified) keep.push_back(i);
    Dataset d;
    d.ids.resize(keep.size());
    d.raw.resize(keep.size());
    d.masked.resize(keep.size());
    d.structured.resize(keep.size());
    d.labels.resize(keep.size());
    d.sites.resize(keep.size());
    parallel_for(keep.size(), jobs, [&](std::size_t j) {
        const auto& c = cases[keep[j]];
        d.ids[j] = c.document.id;
        d.raw[j] = normalize(c.document.text);
        d.masked[j] = normalize(mask_lvef(c.document.text));
        d.structured[j] = c.structured;
        d.labels[j] = c.label == LabelClass::HFrEF ? 1 : 0;
        d.sites[j] = c.document.site;
    });
    return d;
}

/// Records which text view each document took in each fit; the evaluation
/// harness calls it once per document per fold.
using MaskHook = std::function<void(std::size_t fold, const std::string& doc_id, bool masked, bool training)>;

struct CvOptions {
    std::size_t k = 10;
    std::uint64_t seed = 0;
    bool threshold_on_eval = false;  // pick the Youden threshold on the held-out fold instead
    std::size_t jobs = 1;
    MaskHook hook;
};

/// Fits on masked training texts; returns held-out probabilities on unmasked texts.
struct FitOutcome {
    TextModel model;
    std::vector<double> train_scores;
    std::vector<double> eval_scores;
};

inline TrainingData training_view(const Dataset& d) { return {d.masked, d.structured, d.labels}; }

inline FitOutcome fit_and_score(const Dataset& train, const Dataset& eval, const ModelConfig& cfg,
                                const EmbeddingProvider* provider, std::size_t jobs = 1) {
    FitOutcome out{train_text_model(training_view(train), cfg, provider, jobs), {}, {}};
    out.train_scores.resize(train.size());
    out.eval_scores.resize(eval.size());
    parallel_for(train.size(), jobs, [&](std::size_t i) {
        out.train_scores[i] = out.model.probability(train.masked[i], train.structured[i]);
    });
    parallel_for(eval.size(), jobs, [&](std::size_t i) {
        out.eval_scores[i] = out.model.probability(eval.raw[i], eval.structured[i]);
    });
    return out;
}

/// Metrics on `eval` with the threshold chosen on training scores (or on
/// the evaluation scores themselves when `threshold_on_eval`).
inline MetricsReport score_split(const FitOutcome& fit, std::span<const int> train_labels, std::span<const int> eval_labels,
                                 bool threshold_on_eval) {
    const double thr = threshold_on_eval ? youden_threshold(fit.eval_scores, eval_labels).threshold
                                         : youden_threshold(fit.train_scores, train_labels).threshold;
    auto m = metrics_at_threshold(fit.eval_scores, eval_labels, thr);
    m.auc = roc_auc(fit.eval_scores, eval_labels);
    return m;
}

struct CvResult {
    std::vector<MetricsReport> folds;
    MetricsReport mean;
    MetricsReport std;  // sample standard deviation per field
};

inline CvResult summarize_folds(std::vector<MetricsReport> folds) {
    CvResult r;
    r.folds = std::move(folds);
    auto field = [&](auto get, double& mean_out, double& std_out) {
        std::vector<double> v;
        for (const auto& f : r.folds) v.push_back(get(f));
        std::tie(mean_out, std_out) = mean_and_sample_std(v);
    };
    field([](const MetricsReport& m) { return m.auc; }, r.mean.auc, r.std.auc);
    field([](const MetricsReport& m) { return m.precision; }, r.mean.precision, r.std.precision);
    field([](const MetricsReport& m) { return m.recall; }, r.mean.recall, r.std.recall);
    field([](const MetricsReport& m) { return m.f1; }, r.mean.f1, r.std.f1);
    field([](const MetricsReport& m) { return m.threshold; }, r.mean.threshold, r.std.threshold);
    return r;
}

/// k-fold stratified cross-validation of one configuration.
inline CvResult cross_validate(const Dataset& data, const ModelConfig& cfg, const EmbeddingProvider* provider,
                               const CvOptions& opt) {
    const auto plan = stratified_folds(data.labels, opt.k, derive_seed(opt.seed, "cv.folds"));
    std::vector<MetricsReport> folds(opt.k);
    std::mutex hook_mutex;
    parallel_for(opt.k, opt.jobs, [&](std::size_t f) {
        const auto [tr, te] = plan.split(f);
        const auto train = data.subset(tr), eval = data.subset(te);
        if (opt.hook) {
            std::lock_guard lock(hook_mutex);
            for (const auto& id : train.ids) opt.hook(f, id, true, true);
            for (const auto& id : eval.ids) opt.hook(f, id, false, false);
        }
        auto fold_cfg = cfg;
        fold_cfg.logistic.seed = derive_seed(opt.seed, "cv.fit", f);
        fold_cfg.ebm.seed = fold_cfg.logistic.seed;
        const auto fit = fit_and_score(train, eval, fold_cfg, provider);
        folds[f] = score_split(fit, train.labels, eval.labels, opt.threshold_on_eval);
    });
    return summarize_folds(std::move(folds));
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Hyperparameter axes tuned for a variant: C for logistic heads, learning
/// rate for EBM heads, plus n-gram order and a uniform frequency threshold
/// for embedding variants.
inline std::map<std::string, std::vector<double>> paper_grid(Variant v) {
    std::map<std::string, std::vector<double>> axes;
    if (is_ebm(v)) axes["learning_rate"] = {2e-2, 5e-2, 2e-3, 5e-3};
    else axes["reg_c"] = {1e-3, 1e-2, 1e-1, 1, 10, 100, 1000};
    if (uses_embeddings(v)) {
        axes["n_max"] = {1, 2, 3};
        axes["threshold"] = {50, 100, 500, 1000, 5000, 10000};
    }
    return axes;
}

inline ModelConfig apply_grid_point(ModelConfig cfg, const GridPoint& p) {
    for (const auto& [name, value] : p) {
        if (name == "reg_c") cfg.reg_c = value;
        else if (name == "learning_rate") cfg.ebm.learning_rate = value;
        else if (name == "n_max") cfg.n_max = static_cast<std::size_t>(value);
        else if (name == "threshold") continue;
        else throw std::invalid_argument("unknown grid axis '" + name + "'");
    }
    if (auto it = p.find("threshold"); it != p.end())
        cfg.thresholds = uniform_thresholds(cfg.n_max, static_cast<std::size_t>(it->second));
    else if (p.count("n_max"))
        cfg.thresholds = uniform_thresholds(cfg.n_max, cfg.thresholds.empty() ? 1 : cfg.thresholds.begin()->second);
    return cfg;
}

/// Grid search by fold-mean held-out AUC.
inline GridResult tune(const Dataset& data, const ModelConfig& base, const std::vector<GridPoint>& grid,
                       const EmbeddingProvider* provider, std::size_t k, std::uint64_t seed, std::size_t jobs = 1) {
    const auto plan = stratified_folds(data.labels, k, derive_seed(seed, "cv.folds"));
    std::vector<Dataset> train(k), eval(k);
    for (std::size_t f = 0; f < k; ++f) {
        const auto [tr, te] = plan.split(f);
        train[f] = data.subset(tr);
        eval[f] = data.subset(te);
    }
    auto score = [&](const GridPoint& p, std::size_t f) {
        auto cfg = apply_grid_point(base, p);
        cfg.logistic.seed = derive_seed(seed, "cv.fit", f);
        cfg.ebm.seed = cfg.logistic.seed;
        const auto fit = fit_and_score(train[f], eval[f], cfg, provider);
        return roc_auc(fit.eval_scores, eval[f].labels);
    };
    return grid_search(score, grid, plan, jobs);
}

}  // namespace hfphen
