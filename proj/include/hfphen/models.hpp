#pragma once

// Classifier variants over three feature spaces (summed n-gram embeddings,
// TF-IDF, structured covariates), their intrinsic n-gram scores, and the
// on-disk model format.

#include <algorithm>
#include <filesystem>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebm.hpp"
#include "embedding.hpp"
#include "features.hpp"
#include "imputer.hpp"
#include "json.hpp"
#include "logistic.hpp"

namespace hfphen {

enum class Variant { LR, EBM, LRStruct, EBMStruct, TfidfLR, TfidfEBM, StructLR, StructEBM };

inline const std::array<std::pair<Variant, const char*>, 8>& variant_names() {
    static const std::array<std::pair<Variant, const char*>, 8> names = {{{Variant::LR, "lr"},
                                                                          {Variant::EBM, "ebm"},
                                                                          {Variant::LRStruct, "lr+struct"},
                                                                          {Variant::EBMStruct, "ebm+struct"},
                                                                          {Variant::TfidfLR, "tfidf-lr"},
                                                                          {Variant::TfidfEBM, "tfidf-ebm"},
                                                                          {Variant::StructLR, "struct-lr"},
                                                                          {Variant::StructEBM, "struct-ebm"}}};
    return names;
}

inline std::string to_string(Variant v) {
    for (auto [k, name] : variant_names())
        if (k == v) return name;
    throw std::logic_error("bad variant");
}

inline Variant parse_variant(std::string_view s) {
    for (auto [k, name] : variant_names())
        if (s == name) return k;
    throw std::invalid_argument("unknown model variant '" + std::string(s) + "'");
}

inline bool uses_embeddings(Variant v) {
    return v == Variant::LR || v == Variant::EBM || v == Variant::LRStruct || v == Variant::EBMStruct;
}
inline bool uses_tfidf(Variant v) { return v == Variant::TfidfLR || v == Variant::TfidfEBM; }
inline bool uses_struct(Variant v) {
    return v == Variant::LRStruct || v == Variant::EBMStruct || v == Variant::StructLR || v == Variant::StructEBM;
}
inline bool uses_text(Variant v) { return uses_embeddings(v) || uses_tfidf(v); }
inline bool is_ebm(Variant v) {
    return v == Variant::EBM || v == Variant::EBMStruct || v == Variant::TfidfEBM || v == Variant::StructEBM;
}

struct ModelConfig {
    Variant variant = Variant::LR;
    std::size_t n_max = 3;
    Thresholds thresholds = uniform_thresholds(3, 5);
    double reg_c = 1.0;
    LogisticOptions logistic{};
    EbmOptions ebm{};
    std::size_t tfidf_max_features = 2000;
    ImputerOptions imputer{};
};

/// Either head type behind one decision function.
struct Head {
    bool ebm = false;
    LinearModel lr;
    EbmModel gam;

    double decision(const Vector& x) const { return ebm ? gam.decision(x) : lr.decision(x); }
};

/// Sum of occurrence embeddings. Rows of `table` are indexed by vocabulary id.
inline Vector doc_vector(std::span<const NgramOccurrence> occurrences, const Matrix& table) {
    Vector v = Vector::Zero(table.cols());
    for (const auto& o : occurrences) {
        if (static_cast<Eigen::Index>(o.id) >= table.rows())
            throw std::out_of_range("doc_vector: n-gram id " + std::to_string(o.id) + " has no embedding");
        v += table.row(static_cast<Eigen::Index>(o.id)).transpose();
    }
    return v;
}

/// Per-token scores from per-n-gram scores: a token takes the maximum of its
/// own unigram score and the scores of every higher-order n-gram covering it;
/// a token covered by nothing scores 0.
inline std::vector<double> token_scores(std::span<const NgramOccurrence> occurrences, std::span<const double> ngram_scores,
                                        std::size_t n_tokens) {
    std::vector<std::optional<double>> best(n_tokens);
    for (const auto& o : occurrences) {
        const double s = ngram_scores[o.id];
        for (std::size_t t = o.begin; t < o.end && t < n_tokens; ++t)
            if (!best[t] || s > *best[t]) best[t] = s;
    }
    std::vector<double> out(n_tokens, 0.0);
    for (std::size_t t = 0; t < n_tokens; ++t) out[t] = best[t].value_or(0.0);
    return out;
}

struct RankedNgram {
    std::size_t id = 0;
    std::string ngram;
    double score = 0;
};

struct GlobalRanking {
    std::vector<RankedNgram> positive;  // descending score
    std::vector<RankedNgram> negative;  // ascending score
};

/// Top-k n-grams per class from per-id scores; ties broken by id.
inline GlobalRanking global_top_k(std::span<const double> scores, const std::vector<std::string>& names, std::size_t k) {
    if (k < 1) throw std::invalid_argument("global_top_k: k must be >= 1");
    if (scores.size() != names.size()) throw std::invalid_argument("global_top_k: size mismatch");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    GlobalRanking r;
    auto take = [&](auto cmp, std::vector<RankedNgram>& out) {
        auto sorted = idx;
        std::sort(sorted.begin(), sorted.end(), cmp);
        for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i)
            out.push_back({sorted[i], names[sorted[i]], scores[sorted[i]]});
    };
    take([&](auto a, auto b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; }, r.positive);
    take([&](auto a, auto b) { return scores[a] != scores[b] ? scores[a] < scores[b] : a < b; }, r.negative);
    return r;
}

// ---------------------------------------------------------------------------
// TextModel
// ---------------------------------------------------------------------------

class TextModel {
public:
    Variant variant = Variant::LR;
    ModelConfig config;
    nlohmann::json embedder;  // description of the provider used at training time
    Vocabulary vocab;
    Matrix ngram_embeddings;  // vocab.size() x embed_dim
    TfidfModel tfidf;
    std::optional<ImputerSpec> imputer;
    Head head;

    std::size_t text_dim() const {
        if (uses_embeddings(variant)) return static_cast<std::size_t>(ngram_embeddings.cols());
        if (uses_tfidf(variant)) return tfidf.size();
        return 0;
    }
    std::size_t struct_dim() const { return uses_struct(variant) ? StructuredRecord::kWidth : 0; }
    std::size_t feature_dim() const { return text_dim() + struct_dim(); }

    /// Names of the units carrying intrinsic scores (n-grams or TF-IDF terms).
    const std::vector<std::string>& unit_names() const {
        static const std::vector<std::string> none;
        if (uses_embeddings(variant)) return vocab.ngrams();
        if (uses_tfidf(variant)) return tfidf.terms;
        return none;
    }

    Vector text_features(const TokenSeq& doc) const {
        if (uses_embeddings(variant)) return doc_vector(doc_ngrams(doc, vocab), ngram_embeddings);
        if (uses_tfidf(variant)) {
            Vector v = Vector::Zero(static_cast<Eigen::Index>(tfidf.size()));
            for (auto [j, x] : tfidf.transform_row(doc)) v[static_cast<Eigen::Index>(j)] = x;
            return v;
        }
        return Vector(0);
    }

    Vector struct_features(const std::optional<StructuredRecord>& rec) const {
        if (!uses_struct(variant)) return Vector(0);
        if (!rec) throw std::invalid_argument("model variant " + to_string(variant) + " needs structured covariates");
        return apply_imputer(*imputer, *rec);
    }

    Vector features(const TokenSeq& doc, const std::optional<StructuredRecord>& rec) const {
        Vector x(static_cast<Eigen::Index>(feature_dim()));
        x << text_features(doc), struct_features(rec);
        return x;
    }

    double decision(const TokenSeq& doc, const std::optional<StructuredRecord>& rec) const {
        return head.decision(features(doc, rec));
    }
    double probability(const TokenSeq& doc, const std::optional<StructuredRecord>& rec) const {
        return sigmoid(decision(doc, rec));
    }

    /// Intrinsic score of one n-gram (Aug-Linear): embedding times the text
    /// block of the weights for LR heads, the summed shape contributions at
    /// the embedding for EBM heads.
    double ngram_score(std::size_t id) const {
        if (!uses_embeddings(variant)) throw std::logic_error("ngram_score: not an embedding model");
        const auto row = ngram_embeddings.row(static_cast<Eigen::Index>(id));
        const Eigen::Index d = ngram_embeddings.cols();
        if (!head.ebm) return row.dot(head.lr.weights.head(d));
        double s = 0;
        for (Eigen::Index f = 0; f < d; ++f) s += head.gam.shapes[static_cast<std::size_t>(f)](row[f]);
        return s;
    }

    /// Intrinsic score per unit: n-grams for embedding models, terms for
    /// TF-IDF models (effect of a document made of that single term).
    std::vector<double> unit_scores() const {
        std::vector<double> out;
        if (uses_embeddings(variant)) {
            out.resize(vocab.size());
            if (!head.ebm) {
                const Vector s = ngram_embeddings * head.lr.weights.head(ngram_embeddings.cols());
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = s[static_cast<Eigen::Index>(i)];
            } else {
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = ngram_score(i);
            }
        } else if (uses_tfidf(variant)) {
            out.resize(tfidf.size());
            for (std::size_t j = 0; j < out.size(); ++j) {
                const auto f = static_cast<Eigen::Index>(j);
                out[j] = head.ebm ? head.gam.shapes[j](1.0) - head.gam.shapes[j](0.0) : head.lr.weights[f];
            }
        }
        return out;
    }

    /// Unit occurrences in a document, as n-gram occurrences over unit ids.
    std::vector<NgramOccurrence> unit_occurrences(const TokenSeq& doc) const {
        if (uses_embeddings(variant)) return doc_ngrams(doc, vocab);
        std::vector<NgramOccurrence> out;
        if (uses_tfidf(variant))
            for (std::size_t i = 0; i < doc.size(); ++i)
                if (auto it = tfidf.index.find(doc.tokens[i]); it != tfidf.index.end())
                    out.push_back({it->second, i, i + 1});
        return out;
    }

    /// Per-token intrinsic explanation for one document.
    std::vector<double> intrinsic_token_scores(const TokenSeq& doc, std::span<const double> cached_unit_scores) const {
        return token_scores(unit_occurrences(doc), cached_unit_scores, doc.size());
    }
};

struct TrainingData {
    std::vector<TokenSeq> docs;
    std::vector<std::optional<StructuredRecord>> structured;
    std::vector<int> labels;  // 1 = HFrEF
};

/// Fits every stage of `cfg.variant` on the training data only.
inline TextModel train_text_model(const TrainingData& data, const ModelConfig& cfg, const EmbeddingProvider* provider,
                                  std::size_t jobs = 1) {
    const std::size_t n = data.labels.size();
    if (data.docs.size() != n) throw std::invalid_argument("train_text_model: docs/labels size mismatch");
    TextModel m;
    m.variant = cfg.variant;
    m.config = cfg;
    if (uses_embeddings(cfg.variant)) {
        if (!provider) throw std::invalid_argument("train_text_model: embedding variant needs a provider");
        m.vocab = build_vocabulary(data.docs, cfg.n_max, cfg.thresholds, jobs);
        if (m.vocab.empty()) throw std::runtime_error("train_text_model: empty vocabulary (thresholds too high?)");
        m.ngram_embeddings = embed_batch(*provider, m.vocab.ngrams());
        m.embedder = {{"kind", provider->kind()}, {"dim", provider->dim()}};
        if (auto* h = dynamic_cast<const HashedEmbedder*>(provider)) m.embedder["seed"] = h->seed();
    } else if (uses_tfidf(cfg.variant)) {
        m.tfidf = fit_tfidf(data.docs, dutch_stopwords(), cfg.tfidf_max_features);
    }
    if (uses_struct(cfg.variant)) {
        if (data.structured.size() != n) throw std::invalid_argument("train_text_model: structured/labels size mismatch");
        std::vector<StructuredRecord> recs;
        for (std::size_t i = 0; i < n; ++i) {
            if (!data.structured[i]) throw std::invalid_argument("train_text_model: case without structured covariates");
            recs.push_back(*data.structured[i]);
        }
        m.imputer = fit_imputer(recs, cfg.imputer);
    }
    Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.feature_dim()));
    static const std::optional<StructuredRecord> kNone;
    parallel_for(n, jobs, [&](std::size_t i) {
        X.row(static_cast<Eigen::Index>(i)) =
            m.features(data.docs[i], data.structured.empty() ? kNone : data.structured[i]).transpose();
    });
    m.head.ebm = is_ebm(cfg.variant);
    if (m.head.ebm) {
        m.head.gam = train_ebm(X, data.labels, cfg.ebm);
    } else {
        auto opt = cfg.logistic;
        opt.reg_c = cfg.reg_c;
        m.head.lr = train_logistic(X, data.labels, opt);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Persistence: model.json (+ vocab.tsv and store.tsv for embedding variants)
// ---------------------------------------------------------------------------

inline nlohmann::json head_to_json(const Head& h) {
    if (!h.ebm) {
        const auto& w = h.lr.weights;
        return {{"type", "lr"},
                {"bias", h.lr.bias},
                {"reg_c", h.lr.reg_c},
                {"weights", std::vector<double>(w.data(), w.data() + w.size())}};
    }
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& s : h.gam.shapes) shapes.push_back({{"edges", s.edges}, {"values", s.values}});
    return {{"type", "ebm"},
            {"intercept", h.gam.intercept},
            {"learning_rate", h.gam.learning_rate},
            {"rounds", h.gam.rounds},
            {"bins", h.gam.bins_per_feature},
            {"shapes", shapes}};
}

inline Head head_from_json(const nlohmann::json& j) {
    Head h;
    const auto type = j.at("type").get<std::string>();
    if (type == "lr") {
        const auto w = j.at("weights").get<std::vector<double>>();
        h.lr.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
        h.lr.bias = j.at("bias").get<double>();
        h.lr.reg_c = j.at("reg_c").get<double>();
    } else if (type == "ebm") {
        h.ebm = true;
        h.gam.intercept = j.at("intercept").get<double>();
        h.gam.learning_rate = j.at("learning_rate").get<double>();
        h.gam.rounds = j.at("rounds").get<std::size_t>();
        h.gam.bins_per_feature = j.at("bins").get<std::size_t>();
        for (const auto& s : j.at("shapes")) {
            ShapeFunction f{s.at("edges").get<std::vector<double>>(), s.at("values").get<std::vector<double>>()};
            if (f.values.size() != f.edges.size() + 1) throw std::runtime_error("model: malformed shape function");
            h.gam.shapes.push_back(std::move(f));
        }
    } else {
        throw std::runtime_error("model: unknown head type '" + type + "'");
    }
    return h;
}

inline void save_model(const TextModel& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json thresholds = nlohmann::json::object();
    for (auto [n, k] : m.config.thresholds) thresholds[std::to_string(n)] = k;
    nlohmann::json j = {{"format", "hfphen-model"},
                        {"version", 1},
                        {"variant", to_string(m.variant)},
                        {"text_dim", m.text_dim()},
                        {"struct_dim", m.struct_dim()},
                        {"n_max", m.config.n_max},
                        {"thresholds", thresholds},
                        {"reg_c", m.config.reg_c},
                        {"head", head_to_json(m.head)}};
    if (uses_embeddings(m.variant)) {
        j["embedder"] = m.embedder;
        j["vocab_size"] = m.vocab.size();
        j["vocab_hash"] = hex64(m.vocab.hash());
        write_file_atomic(dir / "vocab.tsv", m.vocab.to_tsv());
        // Stored as float text; the vectors are float-valued so this is exact.
        std::string store = "dim=" + std::to_string(m.ngram_embeddings.cols()) + '\n';
        for (std::size_t i = 0; i < m.vocab.size(); ++i) {
            store += m.vocab.ngram(i);
            store += '\t';
            for (Eigen::Index d = 0; d < m.ngram_embeddings.cols(); ++d) {
                if (d) store += ',';
                store += detail::format_float(static_cast<float>(m.ngram_embeddings(static_cast<Eigen::Index>(i), d)));
            }
            store += '\n';
        }
        write_file_atomic(dir / "store.tsv", store);
    }
    if (uses_tfidf(m.variant)) j["tfidf"] = {{"terms", m.tfidf.terms}, {"idf", m.tfidf.idf}};
    if (m.imputer) j["imputer"] = to_json(*m.imputer);
    write_file_atomic(dir / "model.json", j.dump(1) + "\n");
}

inline TextModel load_model(const std::filesystem::path& dir) {
    const auto j = nlohmann::json::parse(read_file(dir / "model.json"));
    if (j.value("format", "") != "hfphen-model") throw std::runtime_error(dir.string() + ": not a model directory");
    TextModel m;
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.config.variant = m.variant;
    m.config.n_max = j.at("n_max").get<std::size_t>();
    m.config.thresholds.clear();
    for (const auto& [k, v] : j.at("thresholds").items()) m.config.thresholds[std::stoul(k)] = v.get<std::size_t>();
    m.config.reg_c = j.at("reg_c").get<double>();
    m.head = head_from_json(j.at("head"));
    if (uses_embeddings(m.variant)) {
        m.embedder = j.at("embedder");
        m.vocab = Vocabulary::from_tsv(read_file(dir / "vocab.tsv"), m.config.n_max, m.config.thresholds);
        if (hex64(m.vocab.hash()) != j.at("vocab_hash").get<std::string>())
            throw std::runtime_error(dir.string() + ": vocab.tsv does not match the model's vocabulary hash");
        const auto store = import_store(dir / "store.tsv", j.at("text_dim").get<std::size_t>());
        m.ngram_embeddings = embed_batch(store, m.vocab.ngrams());
    }
    if (uses_tfidf(m.variant)) {
        m.tfidf.terms = j.at("tfidf").at("terms").get<std::vector<std::string>>();
        m.tfidf.idf = j.at("tfidf").at("idf").get<std::vector<double>>();
        if (m.tfidf.terms.size() != m.tfidf.idf.size()) throw std::runtime_error("model: tfidf terms/idf mismatch");
        m.tfidf.rebuild_index();
    }
    if (j.contains("imputer")) m.imputer = imputer_from_json(j.at("imputer"));
    if (uses_struct(m.variant) && !m.imputer) throw std::runtime_error("model: structured variant without imputer");
    const std::size_t head_dim = m.head.ebm ? m.head.gam.dim() : static_cast<std::size_t>(m.head.lr.weights.size());
    if (head_dim != m.feature_dim()) throw std::runtime_error("model: head dimension does not match features");
    return m;
}

}  // namespace hfphen
