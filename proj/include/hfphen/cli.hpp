#pragma once

// Command-line front end: synth, label, train, predict, explain, agree, eval
// and report. Every subcommand writes into an output directory and leaves a
// manifest.json there.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agreement.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "eval.hpp"
#include "explainers.hpp"
#include "json.hpp"
#include "models.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "silver_labeler.hpp"
#include "synth.hpp"
#include "util.hpp"

namespace hfphen {

inline constexpr const char* kToolVersion = "hfphen 1.0.0";

/// Usage error detected after parsing (bad flag value combinations).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct RunManifest {
    std::vector<std::string> command_line;
    nlohmann::json config;
    nlohmann::json seeds = nlohmann::json::object();
    std::map<std::string, std::string> inputs;  // path -> digest
    double wall_clock_seconds = 0;

    void add_input(const std::filesystem::path& p) {
        if (std::filesystem::is_directory(p)) {
            std::vector<std::filesystem::path> files;
            for (const auto& e : std::filesystem::directory_iterator(p))
                if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) add_input(f);
            return;
        }
        inputs[p.string()] = "fnv1a64:" + hex64(fnv1a64(read_file(p)));
    }

    nlohmann::json to_json() const {
        return {{"command_line", command_line},
                {"config", config},
                {"config_hash", "fnv1a64:" + hex64(fnv1a64(config.dump()))},
                {"seeds", seeds},
                {"inputs", inputs},
                {"versions", {{"tool", kToolVersion}, {"model_format", 1}}},
                {"wall_clock_seconds", wall_clock_seconds}};
    }

    void write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "manifest.json", to_json().dump(1) + "\n");
    }
};

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace cli_detail {

inline std::string fixed6(double v) { return format_fixed(v, 6); }
inline std::string opt_fixed(const std::optional<double>& v) { return v ? fixed6(*v) : "NA"; }

/// silver_labels.jsonl {id, label, source}
inline std::map<std::string, SilverLabel> load_labels(const std::filesystem::path& path) {
    std::map<std::string, SilverLabel> out;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
        out[detail::string_field(j, "id")] = {parse_label(detail::string_field(j, "label")),
                                             parse_source(detail::string_field(j, "source"))};
    });
    return out;
}

inline std::vector<LabeledCase> load_labeled_corpus(const std::string& corpus, const std::string& labels) {
    auto cases = load_corpus(corpus);
    if (!labels.empty()) {
        const auto by_id = load_labels(labels);
        for (auto& c : cases)
            if (auto it = by_id.find(c.document.id); it != by_id.end()) {
                c.label = it->second.label;
                c.source = it->second.source;
            }
    }
    return cases;
}

struct EmbedderFlags {
    std::string kind = "hashed";
    std::size_t dim = 256;
    std::string store;  // file store, or cache directory for the remote backend

    void add_to(CLI::App* app) {
        app->add_option("--embedder", kind, "Embedding backend")->check(CLI::IsMember({"hashed", "file", "remote"}));
        app->add_option("--embed-dim", dim, "Embedding dimension");
        app->add_option("--embed-store", store, "Store file (file) or cache directory (remote)");
    }

    std::unique_ptr<EmbeddingProvider> make(std::uint64_t seed) const {
        if (kind == "hashed") return std::make_unique<HashedEmbedder>(dim, derive_seed(seed, "embedder"));
        if (kind == "file") {
            if (store.empty()) throw UsageError("--embedder file needs --embed-store PATH");
            return std::make_unique<FileEmbedder>(import_store(store, dim));
        }
        const char* url = std::getenv("EMBED_URL");
        if (!url || !*url) throw UsageError("--embedder remote needs the EMBED_URL environment variable");
        RemoteOptions opt;
        opt.url = url;
        opt.cache_dir = store;
        return std::make_unique<RemoteEmbedder>(dim, opt);
    }

    nlohmann::json to_json() const { return {{"kind", kind}, {"dim", dim}, {"store", store}}; }
};

struct ModelFlags {
    std::string variant = "lr";
    std::size_t n_max = 3;
    std::vector<std::string> thresholds;  // "n=k"
    double reg_c = 1.0;
    double learning_rate = 0.02;
    std::size_t rounds = 5000;
    std::size_t bins = 64;
    std::size_t tfidf_max_features = 2000;

    void add_to(CLI::App* app, bool single_variant) {
        if (single_variant)
            app->add_option("--variant", variant, "Model variant")->check(CLI::IsMember(variant_list()));
        app->add_option("--nmax", n_max, "Largest n-gram order (1-5)");
        app->add_option("--threshold", thresholds, "Minimum count per order, as n=k (repeatable)");
        app->add_option("--reg-c", reg_c, "Inverse L2 strength C");
        app->add_option("--learning-rate", learning_rate, "EBM learning rate");
        app->add_option("--rounds", rounds, "EBM boosting rounds");
        app->add_option("--bins", bins, "EBM bins per feature");
        app->add_option("--tfidf-max-features", tfidf_max_features, "TF-IDF vocabulary cap");
    }

    static std::vector<std::string> variant_list() {
        std::vector<std::string> v;
        for (const auto& [var, name] : variant_names()) v.push_back(name);
        return v;
    }

    ModelConfig config(const std::string& var) const {
        ModelConfig c;
        c.variant = parse_variant(var);
        c.n_max = n_max;
        c.thresholds = uniform_thresholds(n_max, 5);
        for (const auto& t : thresholds) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw UsageError("--threshold expects n=k, got '" + t + "'");
            try {
                c.thresholds[std::stoul(t.substr(0, eq))] = std::stoul(t.substr(eq + 1));
            } catch (const std::logic_error&) {
                throw UsageError("--threshold expects n=k, got '" + t + "'");
            }
        }
        for (auto it = c.thresholds.begin(); it != c.thresholds.end();)
            it = it->first > n_max ? c.thresholds.erase(it) : std::next(it);
        c.reg_c = reg_c;
        c.ebm.learning_rate = learning_rate;
        c.ebm.rounds = rounds;
        c.ebm.bins = bins;
        c.tfidf_max_features = tfidf_max_features;
        return c;
    }

    nlohmann::json to_json() const {
        return {{"n_max", n_max},     {"thresholds", thresholds}, {"reg_c", reg_c},
                {"learning_rate", learning_rate}, {"rounds", rounds}, {"bins", bins},
                {"tfidf_max_features", tfidf_max_features}};
    }
};

inline std::string tsv_row(std::initializer_list<std::string> cells) {
    std::string out;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += '\t';
        out += c;
        first = false;
    }
    return out + '\n';
}

inline std::string top_k_tsv(const GlobalRanking& r) {
    std::string out = "class\trank\tngram\tscore\n";
    for (std::size_t i = 0; i < r.positive.size(); ++i)
        out += tsv_row({"HFrEF", std::to_string(i + 1), r.positive[i].ngram, format_double(r.positive[i].score)});
    for (std::size_t i = 0; i < r.negative.size(); ++i)
        out += tsv_row({"HFpEF", std::to_string(i + 1), r.negative[i].ngram, format_double(r.negative[i].score)});
    return out;
}

inline std::string grid_tsv(const GridResult& g) {
    std::string out = "params\tmean_auc\tstd_auc\tstatus\n";
    for (std::size_t i = 0; i < g.rows.size(); ++i) {
        const auto& r = g.rows[i];
        std::string params;
        for (const auto& [k, v] : r.params) params += (params.empty() ? "" : ",") + k + "=" + format_double(v);
        out += tsv_row({params, r.failed ? "NA" : fixed6(r.mean), r.failed ? "NA" : fixed6(r.std),
                        r.failed ? "failed: " + r.error : (i == g.best ? "best" : "ok")});
    }
    return out;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct CommonFlags {
    std::uint64_t seed = 0;
    std::size_t jobs = default_jobs();
    std::string out;
};

inline void run_synth(const CommonFlags& common, const std::string& config_path, bool seed_given, RunManifest& mf) {
    SynthConfig cfg;
    if (!config_path.empty()) {
        cfg = SynthConfig::from_json(nlohmann::json::parse(read_file(config_path)));
        mf.add_input(config_path);
    }
    if (seed_given) cfg.seed = common.seed;
    const auto out = generate(cfg);
    write_synth(out, cfg, common.out);
    mf.config = cfg.to_json();
    mf.seeds["synth"] = cfg.seed;
}

inline void run_label(const CommonFlags& common, const std::string& corpus_path, const std::string& echo_path,
                      const std::string& diag_path, const std::string& codes_path, RunManifest& mf) {
    const auto cases = load_corpus(corpus_path);
    mf.add_input(corpus_path);
    std::vector<EchoMeasurement> echos;
    if (!echo_path.empty()) {
        echos = load_echo(echo_path);
        mf.add_input(echo_path);
    }
    std::map<std::string, std::vector<std::pair<CodeSystem, std::string>>> codes_by_doc;
    if (!diag_path.empty()) {
        for (const auto& d : load_diagnoses(diag_path)) codes_by_doc[d.id].emplace_back(d.system, d.code);
        mf.add_input(diag_path);
    }
    std::vector<CodeEntry> table = default_code_table();
    if (!codes_path.empty()) {
        table = load_codes(codes_path);
        mf.add_input(codes_path);
    }
    std::map<std::string, std::vector<EchoMeasurement>> echo_by_patient;
    for (const auto& e : echos) echo_by_patient[e.patient_id].push_back(e);

    std::vector<SilverLabel> labels(cases.size());
    parallel_for(cases.size(), common.jobs, [&](std::size_t i) {
        const auto& doc = cases[i].document;
        if (cases[i].source == LabelSource::Gold && cases[i].label != LabelClass::Unspecified) {
            labels[i] = {cases[i].label, LabelSource::Gold};
            return;
        }
        static const std::vector<std::pair<CodeSystem, std::string>> kNoCodes;
        static const std::vector<EchoMeasurement> kNoEcho;
        const auto cit = codes_by_doc.find(doc.id);
        const auto eit = echo_by_patient.find(doc.patient_id);
        const auto r = assign_silver_label(doc, cit == codes_by_doc.end() ? kNoCodes : cit->second,
                                           eit == echo_by_patient.end() ? kNoEcho : eit->second, table);
        labels[i] = r.value_or(SilverLabel{});
    });

    std::vector<nlohmann::json> rows;
    std::map<std::string, std::map<std::string, std::size_t>> summary;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        rows.push_back({{"id", cases[i].document.id},
                        {"label", to_string(labels[i].label)},
                        {"source", to_string(labels[i].source)}});
        ++summary[to_string(labels[i].source)][to_string(labels[i].label)];
    }
    std::filesystem::create_directories(common.out);
    write_file_atomic(std::filesystem::path(common.out) / "silver_labels.jsonl", to_jsonl(rows));
    std::string tsv = "source\tHFrEF\tHFpEF\tUnspecified\ttotal\n";
    std::map<std::string, std::size_t> totals;
    for (const char* src : {"Gold", "Code", "Echo", "Text", "None"}) {
        auto& m = summary[src];
        const std::size_t t = m["HFrEF"] + m["HFpEF"] + m["Unspecified"];
        for (const char* c : {"HFrEF", "HFpEF", "Unspecified"}) totals[c] += m[c];
        tsv += cli_detail::tsv_row({src, std::to_string(m["HFrEF"]), std::to_string(m["HFpEF"]),
                                    std::to_string(m["Unspecified"]), std::to_string(t)});
    }
    tsv += cli_detail::tsv_row({"total", std::to_string(totals["HFrEF"]), std::to_string(totals["HFpEF"]),
                                std::to_string(totals["Unspecified"]), std::to_string(cases.size())});
    write_file_atomic(std::filesystem::path(common.out) / "label_summary.tsv", tsv);
    mf.config = {{"codes", codes_path.empty() ? "default" : codes_path}};
}

inline void run_train(const CommonFlags& common, const std::string& corpus_path, const std::string& labels_path,
                      const cli_detail::ModelFlags& mflags, const cli_detail::EmbedderFlags& eflags, bool grid,
                      std::size_t folds, RunManifest& mf) {
    const auto cases = cli_detail::load_labeled_corpus(corpus_path, labels_path);
    mf.add_input(corpus_path);
    if (!labels_path.empty()) mf.add_input(labels_path);
    const auto data = make_dataset(cases, common.jobs);
    if (data.size() < 2) throw std::runtime_error("train: fewer than two labeled documents");
    auto cfg = mflags.config(mflags.variant);
    cfg.logistic.seed = derive_seed(common.seed, "train.fit");
    cfg.ebm.seed = cfg.logistic.seed;
    std::unique_ptr<EmbeddingProvider> provider;
    if (uses_embeddings(cfg.variant)) provider = eflags.make(common.seed);
    const std::filesystem::path out(common.out);
    std::filesystem::create_directories(out);
    if (grid) {
        const auto lattice = make_lattice(paper_grid(cfg.variant));
        const auto result = tune(data, cfg, lattice, provider.get(), folds, common.seed, common.jobs);
        write_file_atomic(out / "grid.tsv", cli_detail::grid_tsv(result));
        cfg = apply_grid_point(cfg, result.best_params());
    }
    const auto model = train_text_model(training_view(data), cfg, provider.get(), common.jobs);
    save_model(model, out);
    if (uses_text(cfg.variant)) {
        const auto scores = model.unit_scores();
        write_file_atomic(out / "top_k.tsv", cli_detail::top_k_tsv(global_top_k(scores, model.unit_names(), 15)));
    }
    mf.config = {{"variant", mflags.variant},
                 {"model", mflags.to_json()},
                 {"embedder", eflags.to_json()},
                 {"grid", grid},
                 {"folds", folds}};
    mf.seeds["root"] = common.seed;
    mf.seeds["fit"] = cfg.logistic.seed;
    if (uses_embeddings(cfg.variant) && eflags.kind == "hashed") mf.seeds["embedder"] = derive_seed(common.seed, "embedder");
    if (grid) mf.seeds["folds"] = derive_seed(common.seed, "cv.folds");
}

inline void run_predict(const CommonFlags& common, const std::string& model_dir, const std::string& corpus_path,
                        RunManifest& mf) {
    const auto model = load_model(model_dir);
    const auto cases = load_corpus(corpus_path);
    mf.add_input(model_dir);
    mf.add_input(corpus_path);
    std::vector<double> logits(cases.size());
    parallel_for(cases.size(), common.jobs, [&](std::size_t i) {
        logits[i] = model.decision(normalize(cases[i].document.text), cases[i].structured);
    });
    std::vector<nlohmann::json> rows;
    for (std::size_t i = 0; i < cases.size(); ++i)
        rows.push_back({{"id", cases[i].document.id}, {"logit", logits[i]}, {"probability", sigmoid(logits[i])}});
    std::filesystem::create_directories(common.out);
    write_file_atomic(std::filesystem::path(common.out) / "predictions.jsonl", to_jsonl(rows));
    mf.config = {{"model", model_dir}};
}

struct ExplainFlags {
    std::string method = "intrinsic";
    std::size_t m = 100;
    std::size_t lime_samples = 100;
    std::size_t top_k = 15;
};

inline void run_explain(const CommonFlags& common, const std::string& model_dir, const std::string& corpus_path,
                        const ExplainFlags& ef, RunManifest& mf) {
    const auto model = load_model(model_dir);
    const auto cases = load_corpus(corpus_path);
    mf.add_input(model_dir);
    mf.add_input(corpus_path);
    if (cases.empty()) throw std::runtime_error("explain: empty corpus");
    std::vector<TokenSeq> docs(cases.size());
    parallel_for(cases.size(), common.jobs, [&](std::size_t i) { docs[i] = normalize(cases[i].document.text); });
    if (ef.method == "intrinsic" && !uses_text(model.variant))
        throw UsageError("explain: intrinsic explanations need a text model");
    auto unit_scores = std::make_shared<const std::vector<double>>(model.unit_scores());

    auto explain = [&](std::size_t i) -> LocalExplanation {
        const auto& doc = docs[i];
        const auto& id = cases[i].document.id;
        if (ef.method == "intrinsic") return {id, "intrinsic", model.intrinsic_token_scores(doc, *unit_scores)};
        if (doc.empty()) return {id, ef.method, {}};
        const auto f = masked_predictor(model, doc, cases[i].structured, unit_scores);
        if (ef.method == "lime") {
            LimeOptions opt;
            opt.n = ef.lime_samples;
            opt.seed = derive_seed(common.seed, "explain.lime", i);
            return lime_text(f, doc, opt, id);
        }
        if (ef.method == "owen") return owen_values(f, doc, build_token_hierarchy(doc, cases[i].document.text), id);
        return exact_shapley(f, doc, id);
    };
    const auto g = global_from_local(explain, docs, ef.m, derive_seed(common.seed, "explain.sample"), ef.top_k, common.jobs);

    const std::filesystem::path out(common.out);
    std::filesystem::create_directories(out);
    write_explanations(g.local, out / "explanations.jsonl");
    std::string tsv = "word\tmean_score\toccurrences\n";
    for (std::size_t i = 0; i < g.words.size(); ++i)
        tsv += cli_detail::tsv_row({g.words[i], format_double(g.mean_scores[i]), std::to_string(g.occurrences[i])});
    write_file_atomic(out / "global.tsv", tsv);
    write_file_atomic(out / "global_top_k.tsv", cli_detail::top_k_tsv(g.ranking));
    mf.config = {{"method", ef.method}, {"m", ef.m}, {"lime_samples", ef.lime_samples}, {"top_k", ef.top_k}};
    mf.seeds["root"] = common.seed;
    mf.seeds["sample"] = derive_seed(common.seed, "explain.sample");
}

inline void run_agree(const CommonFlags& common, const std::string& corpus_path, const std::string& pred_path,
                      const std::string& gold_path, const std::string& annotator, int tags, RunManifest& mf) {
    const auto cases = load_corpus(corpus_path);
    const auto preds = load_explanations(pred_path);
    const auto gold = load_annotations(gold_path, cases);
    mf.add_input(corpus_path);
    mf.add_input(pred_path);
    mf.add_input(gold_path);
    std::map<std::string, const LabeledCase*> by_id;
    for (const auto& c : cases) by_id[c.document.id] = &c;

    std::vector<DocumentAgreement> rows(preds.size());
    parallel_for(preds.size(), common.jobs, [&](std::size_t i) {
        const auto& p = preds[i];
        auto it = by_id.find(p.doc_id);
        if (it == by_id.end()) throw std::runtime_error("agree: unknown document '" + p.doc_id + "'");
        static const std::vector<AnnotationSpan> kNone;
        const std::vector<AnnotationSpan>* spans = &kNone;
        if (auto g = gold.find(p.doc_id); g != gold.end() && !g->second.empty()) {
            if (annotator.empty()) spans = &g->second.begin()->second;
            else if (auto a = g->second.find(annotator); a != g->second.end()) spans = &a->second;
        }
        rows[i] = document_agreement(p.doc_id, normalize(it->second->document.text), p.scores, *spans, tags);
    });

    std::string tsv = "doc_id\tkappa\talpha\ttau\tspan_precision\tspan_recall\tspan_f1\n";
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : rows) {
        tsv += cli_detail::tsv_row({r.doc_id, cli_detail::opt_fixed(r.kappa), cli_detail::opt_fixed(r.alpha),
                                    cli_detail::opt_fixed(r.tau), cli_detail::fixed6(r.spans.precision),
                                    cli_detail::fixed6(r.spans.recall), cli_detail::fixed6(r.spans.f1)});
        if (r.kappa) values["kappa"].push_back(*r.kappa);
        if (r.alpha) values["alpha"].push_back(*r.alpha);
        if (r.tau) values["tau"].push_back(*r.tau);
        values["span_f1"].push_back(r.spans.f1);
    }
    std::string summary = "metric\tn\tmedian\tmean\n";
    for (const char* name : {"kappa", "alpha", "tau", "span_f1"}) {
        auto v = values[name];
        std::string med = "NA", mean = "NA";
        if (!v.empty()) {
            std::sort(v.begin(), v.end());
            const std::size_t h = v.size() / 2;
            med = cli_detail::fixed6(v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]));
            mean = cli_detail::fixed6(mean_and_sample_std(v).first);
        }
        summary += cli_detail::tsv_row({name, std::to_string(v.size()), med, mean});
    }
    const std::filesystem::path out(common.out);
    std::filesystem::create_directories(out);
    write_file_atomic(out / "agreement.tsv", tsv);
    write_file_atomic(out / "agreement_summary.tsv", summary);
    mf.config = {{"tags", tags}, {"annotator", annotator}};
}

inline void run_eval(const CommonFlags& common, const std::string& corpus_path, const std::string& labels_path,
                     std::vector<std::string> variants, const cli_detail::ModelFlags& mflags,
                     const cli_detail::EmbedderFlags& eflags, std::size_t folds, bool threshold_on_eval,
                     RunManifest& mf) {
    const auto cases = cli_detail::load_labeled_corpus(corpus_path, labels_path);
    mf.add_input(corpus_path);
    if (!labels_path.empty()) mf.add_input(labels_path);
    const auto data = make_dataset(cases, common.jobs);
    std::vector<std::size_t> site_a, site_b;
    for (std::size_t i = 0; i < data.size(); ++i) (data.sites[i] == Site::A ? site_a : site_b).push_back(i);
    const auto train = data.subset(site_a), external = data.subset(site_b);
    const bool has_external = std::count(external.labels.begin(), external.labels.end(), 1) > 0 &&
                              std::count(external.labels.begin(), external.labels.end(), 0) > 0;
    if (variants.empty()) variants = {mflags.variant};

    std::string tsv = "variant\tsplit\tn\tP\tP_std\tR\tR_std\tF1\tF1_std\tAUC\tAUC_std\tthreshold\n";
    for (const auto& name : variants) {
        auto cfg = mflags.config(name);
        std::unique_ptr<EmbeddingProvider> provider;
        if (uses_embeddings(cfg.variant)) provider = eflags.make(common.seed);
        CvOptions opt;
        opt.k = folds;
        opt.seed = common.seed;
        opt.threshold_on_eval = threshold_on_eval;
        opt.jobs = common.jobs;
        const auto cv = cross_validate(train, cfg, provider.get(), opt);
        using cli_detail::fixed6;
        tsv += cli_detail::tsv_row({name, "cv", std::to_string(train.size()), fixed6(cv.mean.precision),
                                    fixed6(cv.std.precision), fixed6(cv.mean.recall), fixed6(cv.std.recall),
                                    fixed6(cv.mean.f1), fixed6(cv.std.f1), fixed6(cv.mean.auc), fixed6(cv.std.auc),
                                    fixed6(cv.mean.threshold)});
        if (has_external) {
            auto full_cfg = cfg;
            full_cfg.logistic.seed = derive_seed(common.seed, "eval.external");
            full_cfg.ebm.seed = full_cfg.logistic.seed;
            const auto fit = fit_and_score(train, external, full_cfg, provider.get(), common.jobs);
            const auto m = score_split(fit, train.labels, external.labels, threshold_on_eval);
            tsv += cli_detail::tsv_row({name, "site-B", std::to_string(external.size()), fixed6(m.precision), "NA",
                                        fixed6(m.recall), "NA", fixed6(m.f1), "NA", fixed6(m.auc), "NA",
                                        fixed6(m.threshold)});
        }
    }
    std::filesystem::create_directories(common.out);
    write_file_atomic(std::filesystem::path(common.out) / "eval.tsv", tsv);
    mf.config = {{"variants", variants},
                 {"model", mflags.to_json()},
                 {"embedder", eflags.to_json()},
                 {"folds", folds},
                 {"threshold_on_eval", threshold_on_eval}};
    mf.seeds["root"] = common.seed;
    mf.seeds["folds"] = derive_seed(common.seed, "cv.folds");
}

inline void run_report(const CommonFlags&, const std::string& corpus_path, const std::string& expl_path,
                       const std::string& out_dir, RunManifest& mf) {
    const auto cases = load_corpus(corpus_path);
    const auto ex = load_explanations(expl_path);
    mf.add_input(corpus_path);
    mf.add_input(expl_path);
    std::filesystem::create_directories(out_dir);
    write_report(cases, ex, std::filesystem::path(out_dir) / "report.html");
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Error category printed on the single failure line.
inline std::string error_category(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e)) return "usage";
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "parse";
    if (dynamic_cast<const EmbeddingError*>(&e)) return "embedding";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence";
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return "io";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid-input";
    return "runtime";
}

inline std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

/// Runs one command line (argv[0] excluded). Returns the process exit code.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    const auto started = std::chrono::steady_clock::now();
    CLI::App app{"Heart-failure phenotyping from discharge letters: silver labels, interpretable models, explanations",
                 "hfphen"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonFlags common;
    auto add_common = [&](CLI::App* sub, bool with_seed = true) {
        sub->add_option("--out", common.out, "Output directory")->required();
        if (with_seed) sub->add_option("--seed", common.seed, "Root seed");
        sub->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
    };

    std::string config_path, corpus, echo, diagnoses, codes, labels, model_dir, pred, gold, annotator = "truth",
                                                                                    explanations;
    int tags = 4;
    std::size_t folds = 10;
    bool grid = false, threshold_on_eval = false;
    std::vector<std::string> variants;
    cli_detail::ModelFlags mflags;
    cli_detail::EmbedderFlags eflags;
    ExplainFlags xflags;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth->add_option("--config", config_path, "Synthesis config (JSON)")->check(CLI::ExistingFile);
    add_common(synth);

    auto* label = app.add_subcommand("label", "Assign silver labels");
    label->add_option("--corpus", corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
    label->add_option("--echo", echo, "echo.jsonl")->check(CLI::ExistingFile);
    label->add_option("--diagnoses", diagnoses, "diagnoses.jsonl")->check(CLI::ExistingFile);
    label->add_option("--codes", codes, "codes.csv (default: built-in table)")->check(CLI::ExistingFile);
    add_common(label, false);

    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--corpus", corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
    train->add_option("--labels", labels, "silver_labels.jsonl")->check(CLI::ExistingFile);
    train->add_flag("--grid", grid, "Tune hyperparameters by cross-validated grid search");
    train->add_option("--folds", folds, "Folds for --grid")->check(CLI::Range(2, 1000));
    mflags.add_to(train, true);
    eflags.add_to(train);
    add_common(train);

    auto* predict = app.add_subcommand("predict", "Score documents with a trained model");
    predict->add_option("--model", model_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
    predict->add_option("--corpus", corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
    add_common(predict, false);

    auto* explain = app.add_subcommand("explain", "Local and global explanations");
    explain->add_option("--model", model_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
    explain->add_option("--corpus", corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
    explain->add_option("--method", xflags.method, "Explainer")
        ->check(CLI::IsMember({"intrinsic", "lime", "owen", "exact"}));
    explain->add_option("--m", xflags.m, "Documents sampled for the global explanation")->check(CLI::PositiveNumber);
    explain->add_option("--lime-samples", xflags.lime_samples, "LIME perturbations per document")
        ->check(CLI::PositiveNumber);
    explain->add_option("--top-k", xflags.top_k, "Global ranking length")->check(CLI::PositiveNumber);
    add_common(explain);

    auto* agree = app.add_subcommand("agree", "Compare explanations with gold annotations");
    agree->add_option("--corpus", corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
    agree->add_option("--pred", pred, "explanations.jsonl")->required()->check(CLI::ExistingFile);
    agree->add_option("--gold", gold, "annotations.jsonl")->required()->check(CLI::ExistingFile);
    agree->add_option("--annotator", annotator, "Gold annotator (empty: first per document)");
    agree->add_option("--tags", tags, "Tag space")->check(CLI::IsMember({2, 3, 4}));
    add_common(agree, false);

    auto* eval = app.add_subcommand("eval", "Cross-validated classification metrics");
    eval->add_option("--corpus", corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
    eval->add_option("--labels", labels, "silver_labels.jsonl")->check(CLI::ExistingFile);
    eval->add_option("--variant", variants, "Model variant (repeatable)")
        ->check(CLI::IsMember(cli_detail::ModelFlags::variant_list()));
    eval->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
    eval->add_flag("--threshold-on-eval", threshold_on_eval, "Choose the Youden threshold on held-out folds");
    mflags.add_to(eval, false);
    eflags.add_to(eval);
    add_common(eval);

    auto* report = app.add_subcommand("report", "Render explanations as HTML");
    report->add_option("--corpus", corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
    report->add_option("--explanations", explanations, "explanations.jsonl")->required()->check(CLI::ExistingFile);
    add_common(report, false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error[usage]: " << one_line(e.what()) << '\n';
        err << "run with --help for usage\n";
        return 2;
    }

    RunManifest mf;
    mf.command_line = {"hfphen"};
    mf.command_line.insert(mf.command_line.end(), args.begin(), args.end());
    try {
        if (synth->parsed()) run_synth(common, config_path, synth->count("--seed") > 0, mf);
        else if (label->parsed()) run_label(common, corpus, echo, diagnoses, codes, mf);
        else if (train->parsed()) run_train(common, corpus, labels, mflags, eflags, grid, folds, mf);
        else if (predict->parsed()) run_predict(common, model_dir, corpus, mf);
        else if (explain->parsed()) run_explain(common, model_dir, corpus, xflags, mf);
        else if (agree->parsed()) run_agree(common, corpus, pred, gold, annotator, tags, mf);
        else if (eval->parsed()) run_eval(common, corpus, labels, variants, mflags, eflags, folds, threshold_on_eval, mf);
        else if (report->parsed()) run_report(common, corpus, explanations, common.out, mf);
        mf.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        mf.write(common.out);
    } catch (const UsageError& e) {
        err << "error[usage]: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error[" << error_category(e) << "]: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}

inline int dispatch(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return dispatch(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace hfphen
