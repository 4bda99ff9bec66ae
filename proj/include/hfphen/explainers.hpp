#pragma once

// Post-hoc attributions over word-presence masks: LIME for text, Owen values
// on a punctuation-driven partition tree, exact Shapley values, and the
// local-to-global aggregation.

#include <algorithm>
#include <bit>
#include <limits>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "features.hpp"
#include "logistic.hpp"
#include "models.hpp"
#include "util.hpp"

namespace hfphen {

/// f(present) over the d distinct word types of one document.
using MaskedPredictFn = std::function<double(std::span<const std::uint8_t> present)>;

struct LocalExplanation {
    std::string doc_id;
    std::string method;
    std::vector<double> scores;  // one per token
};

/// Distinct word types in first-occurrence order and each token's type index.
struct WordTypes {
    std::vector<std::string> types;
    std::vector<std::size_t> type_of_token;
    std::vector<std::vector<std::size_t>> tokens_of_type;

    std::size_t size() const { return types.size(); }
};

inline WordTypes word_types(const TokenSeq& doc) {
    WordTypes w;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t t = 0; t < doc.size(); ++t) {
        auto [it, inserted] = index.emplace(doc.tokens[t], w.types.size());
        if (inserted) {
            w.types.push_back(doc.tokens[t]);
            w.tokens_of_type.emplace_back();
        }
        w.type_of_token.push_back(it->second);
        w.tokens_of_type[it->second].push_back(t);
    }
    return w;
}

/// The document with every occurrence of each absent type deleted.
inline TokenSeq apply_mask(const TokenSeq& doc, const WordTypes& w, std::span<const std::uint8_t> present) {
    TokenSeq out;
    for (std::size_t t = 0; t < doc.size(); ++t)
        if (present[w.type_of_token[t]]) {
            out.tokens.push_back(doc.tokens[t]);
            out.offsets.push_back(doc.offsets[t]);
        }
    return out;
}

/// Black-box view of a trained model on one document. For LR heads with
/// cached per-unit scores the logit is assembled from those scores, which
/// equals the full featurization exactly up to summation order.
inline MaskedPredictFn masked_predictor(const TextModel& model, const TokenSeq& doc,
                                        const std::optional<StructuredRecord>& rec,
                                        std::shared_ptr<const std::vector<double>> unit_scores = nullptr) {
    auto w = std::make_shared<WordTypes>(word_types(doc));
    const bool fast = unit_scores && !model.head.ebm && uses_embeddings(model.variant);
    double offset = 0;
    if (fast) {
        offset = model.head.lr.bias;
        if (uses_struct(model.variant))
            offset += model.head.lr.weights.tail(static_cast<Eigen::Index>(model.struct_dim())).dot(model.struct_features(rec));
    }
    return [&model, &doc, rec, w, unit_scores, fast, offset](std::span<const std::uint8_t> present) {
        const TokenSeq reduced = apply_mask(doc, *w, present);
        if (fast) {
            double z = offset;
            for (const auto& o : doc_ngrams(reduced, model.vocab)) z += (*unit_scores)[o.id];
            return sigmoid(z);
        }
        return model.probability(reduced, rec);
    };
}

/// Spreads per-type scores onto tokens: `split` divides a type's score
/// equally among its occurrences, otherwise every occurrence gets it whole.
inline std::vector<double> type_to_token_scores(const WordTypes& w, std::span<const double> type_scores, bool split) {
    std::vector<double> out(w.type_of_token.size(), 0.0);
    for (std::size_t t = 0; t < out.size(); ++t) {
        const std::size_t ty = w.type_of_token[t];
        out[t] = split ? type_scores[ty] / static_cast<double>(w.tokens_of_type[ty].size()) : type_scores[ty];
    }
    return out;
}

// ---------------------------------------------------------------------------
// LIME
// ---------------------------------------------------------------------------

struct LimeOptions {
    std::size_t n = 100;
    double nu = 25;
    double lambda_ridge = 1;
    std::size_t k_select = 10;
    double lambda_select = 0.01;
    std::size_t forward_max = 6;  // forward selection when d <= this
    std::uint64_t seed = 0;
};

struct WeightedRidgeFit {
    Vector coef;
    double intercept = 0;
};

/// Weighted ridge with an unpenalized intercept, on the columns in `cols`.
inline WeightedRidgeFit weighted_ridge(const Matrix& Z, const Vector& y, const Vector& pi, std::span<const std::size_t> cols,
                                       double lambda) {
    const auto k = static_cast<Eigen::Index>(cols.size());
    const double wsum = pi.sum();
    Matrix X(Z.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) X.col(c) = Z.col(static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]));
    const Vector xbar = (X.transpose() * pi) / wsum;
    const double ybar = pi.dot(y) / wsum;
    const Matrix Xc = X.rowwise() - xbar.transpose();
    const Vector yc = y.array() - ybar;
    Matrix A = Xc.transpose() * pi.asDiagonal() * Xc;
    A.diagonal().array() += lambda;
    WeightedRidgeFit fit;
    fit.coef = A.ldlt().solve(Xc.transpose() * pi.asDiagonal() * yc);
    fit.intercept = ybar - fit.coef.dot(xbar);
    return fit;
}

/// Weighted coefficient of determination of a fit on the columns in `cols`.
inline double weighted_r2(const Matrix& Z, const Vector& y, const Vector& pi, std::span<const std::size_t> cols,
                          const WeightedRidgeFit& fit) {
    const double ybar = pi.dot(y) / pi.sum();
    double ss_res = 0, ss_tot = 0;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        double pred = fit.intercept;
        for (std::size_t c = 0; c < cols.size(); ++c) pred += fit.coef[static_cast<Eigen::Index>(c)] * Z(i, static_cast<Eigen::Index>(cols[c]));
        ss_res += pi[i] * (y[i] - pred) * (y[i] - pred);
        ss_tot += pi[i] * (y[i] - ybar) * (y[i] - ybar);
    }
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
}

/// cos_dist(1, z) = 1 - sum(z) / (sqrt(d) sqrt(sum(z))); 1 for the empty mask.
inline double lime_cosine_distance(std::span<const std::uint8_t> z) {
    const double s = std::accumulate(z.begin(), z.end(), 0.0);
    if (s == 0) return 1.0;
    return 1.0 - s / (std::sqrt(static_cast<double>(z.size())) * std::sqrt(s));
}

inline double lime_kernel(double distance, double nu) {
    return std::sqrt(std::exp(-(distance * 100.0) * (distance * 100.0) / (nu * nu)));
}

/// Per-type LIME scores. Row 0 of the design is the intact document; rows
/// 1..n remove a uniformly drawn number s in [1, d] of distinct words.
inline std::vector<double> lime_type_scores(const MaskedPredictFn& f, std::size_t d, const LimeOptions& opt) {
    if (opt.n < 1) throw std::invalid_argument("lime: n must be >= 1");
    if (d == 0) throw std::invalid_argument("lime: document has no words");
    Rng rng(opt.seed);
    const auto rows = static_cast<Eigen::Index>(opt.n + 1);
    Matrix Z = Matrix::Ones(rows, static_cast<Eigen::Index>(d));
    Vector y(rows), pi(rows);
    std::vector<std::uint8_t> z(d, 1);
    y[0] = f(z);
    pi[0] = lime_kernel(0.0, opt.nu);
    for (Eigen::Index i = 1; i < rows; ++i) {
        const std::size_t s = 1 + uniform_index(rng, d);
        std::fill(z.begin(), z.end(), 1);
        for (std::size_t j : sample_without_replacement(d, s, rng)) {
            z[j] = 0;
            Z(i, static_cast<Eigen::Index>(j)) = 0.0;
        }
        y[i] = f(z);
        pi[i] = lime_kernel(lime_cosine_distance(z), opt.nu);
    }

    const std::size_t k = std::min(opt.k_select, d);
    std::vector<std::size_t> selected;
    if (d <= opt.forward_max) {
        // Greedy forward selection by weighted R^2 of a lambda_select ridge.
        std::vector<bool> used(d, false);
        for (std::size_t step = 0; step < k; ++step) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_j = d;
            for (std::size_t j = 0; j < d; ++j) {
                if (used[j]) continue;
                auto cols = selected;
                cols.push_back(j);
                const double r2 = weighted_r2(Z, y, pi, cols, weighted_ridge(Z, y, pi, cols, opt.lambda_select));
                if (r2 > best) {
                    best = r2;
                    best_j = j;
                }
            }
            used[best_j] = true;
            selected.push_back(best_j);
        }
    } else {
        std::vector<std::size_t> all(d);
        std::iota(all.begin(), all.end(), 0);
        const auto fit = weighted_ridge(Z, y, pi, all, opt.lambda_select);
        std::stable_sort(all.begin(), all.end(), [&](auto a, auto b) {
            return std::abs(fit.coef[static_cast<Eigen::Index>(a)]) > std::abs(fit.coef[static_cast<Eigen::Index>(b)]);
        });
        selected.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(selected.begin(), selected.end());
    const auto fit = weighted_ridge(Z, y, pi, selected, opt.lambda_ridge);
    std::vector<double> scores(d, 0.0);
    for (std::size_t c = 0; c < selected.size(); ++c) scores[selected[c]] = fit.coef[static_cast<Eigen::Index>(c)];
    return scores;
}

/// LIME explanation: each token receives its word type's coefficient.
inline LocalExplanation lime_text(const MaskedPredictFn& f, const TokenSeq& doc, const LimeOptions& opt = {},
                                  std::string doc_id = {}) {
    const auto w = word_types(doc);
    const auto type_scores = lime_type_scores(f, w.size(), opt);
    return {std::move(doc_id), "lime", type_to_token_scores(w, type_scores, false)};
}

// ---------------------------------------------------------------------------
// Partition tree and Owen values
// ---------------------------------------------------------------------------

struct PartitionNode {
    std::size_t begin = 0, end = 0;  // token range [begin, end)
    int left = -1, right = -1;
    bool leaf() const { return left < 0; }
};

struct PartitionTree {
    std::vector<PartitionNode> nodes;
    int root = -1;

    /// Leaves left to right as token indices.
    std::vector<std::size_t> leaves() const {
        std::vector<std::size_t> out;
        std::function<void(int)> walk = [&](int i) {
            if (i < 0) return;
            const auto& n = nodes[static_cast<std::size_t>(i)];
            if (n.leaf()) {
                for (std::size_t t = n.begin; t < n.end; ++t) out.push_back(t);
                return;
            }
            walk(n.left);
            walk(n.right);
        };
        walk(root);
        return out;
    }
};

inline const std::vector<std::string>& connector_words() {
    static const std::vector<std::string> words = {"en", "maar", "of", "want", "dus"};
    return words;
}

/// Split priority of the boundary before token b: 3 sentence punctuation,
/// 2 clause punctuation, 1 connector word, 0 none.
inline std::vector<int> boundary_priorities(const TokenSeq& doc, std::string_view text) {
    const std::u32string cps = utf8_decode(text);
    std::vector<int> pri(doc.size(), 0);
    for (std::size_t b = 1; b < doc.size(); ++b) {
        int p = 0;
        const std::size_t gap_lo = doc.offsets[b - 1].second, gap_hi = doc.offsets[b].first;
        for (std::size_t c = gap_lo; c < gap_hi && c < cps.size(); ++c) {
            const char32_t ch = cps[c];
            if (ch == U'.' || ch == U'!' || ch == U'?' || ch == U'\n') p = std::max(p, 3);
            else if (ch == U',' || ch == U';' || ch == U':' || ch == U'(' || ch == U')' || ch == 0x2013 || ch == 0x2014)
                p = std::max(p, 2);
        }
        if (p == 0 && std::find(connector_words().begin(), connector_words().end(), doc.tokens[b]) != connector_words().end())
            p = 1;
        pri[b] = p;
    }
    return pri;
}

/// Recursive binary split of the token sequence, choosing the highest
/// priority boundary and, among those, the one nearest the midpoint (lower
/// boundary on ties). Leaves are single tokens.
inline PartitionTree build_token_hierarchy(const TokenSeq& doc, std::string_view text) {
    PartitionTree tree;
    if (doc.empty()) return tree;
    const auto pri = boundary_priorities(doc, text);
    std::function<int(std::size_t, std::size_t)> build = [&](std::size_t lo, std::size_t hi) -> int {
        const int idx = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({lo, hi, -1, -1});
        if (hi - lo == 1) return idx;
        int best_p = -1;
        std::size_t best_b = lo + 1;
        double best_dist = 0;
        const double mid = 0.5 * static_cast<double>(lo + hi);
        for (std::size_t b = lo + 1; b < hi; ++b) {
            const double dist = std::abs(static_cast<double>(b) - mid);
            if (pri[b] > best_p || (pri[b] == best_p && dist < best_dist)) {
                best_p = pri[b];
                best_b = b;
                best_dist = dist;
            }
        }
        const int l = build(lo, best_b);
        const int r = build(best_b, hi);
        tree.nodes[static_cast<std::size_t>(idx)].left = l;
        tree.nodes[static_cast<std::size_t>(idx)].right = r;
        return idx;
    };
    tree.root = build(0, doc.size());
    return tree;
}

namespace detail {

/// Tree over word types: each type sits at the leaf of its first occurrence.
struct TypeNode {
    std::vector<std::size_t> types;
    int left = -1, right = -1;
};

inline int project_tree(const PartitionTree& tree, int node, const WordTypes& w, std::vector<TypeNode>& out) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.leaf()) {
        TypeNode t;
        for (std::size_t tok = n.begin; tok < n.end; ++tok) {
            const std::size_t ty = w.type_of_token[tok];
            if (w.tokens_of_type[ty].front() == tok) t.types.push_back(ty);
        }
        if (t.types.empty()) return -1;
        out.push_back(std::move(t));
        return static_cast<int>(out.size() - 1);
    }
    const int l = project_tree(tree, n.left, w, out);
    const int r = project_tree(tree, n.right, w, out);
    if (l < 0) return r;
    if (r < 0) return l;
    TypeNode t;
    t.types = out[static_cast<std::size_t>(l)].types;
    t.types.insert(t.types.end(), out[static_cast<std::size_t>(r)].types.begin(), out[static_cast<std::size_t>(r)].types.end());
    t.left = l;
    t.right = r;
    out.push_back(std::move(t));
    return static_cast<int>(out.size() - 1);
}

class MemoGame {
public:
    MemoGame(const MaskedPredictFn& f, std::size_t d) : f_(f), d_(d) {}
    double operator()(const std::vector<std::uint8_t>& z) {
        std::string key(z.begin(), z.end());
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const double v = f_(z);
        memo_.emplace(std::move(key), v);
        return v;
    }
    std::size_t evaluations() const { return memo_.size(); }

private:
    const MaskedPredictFn& f_;
    std::size_t d_;
    std::unordered_map<std::string, double> memo_;
};

}  // namespace detail

/// Per-type Owen values for the binary hierarchy: at every internal node the
/// two children play a two-player game (each ordering with weight 1/2) in the
/// context of the players already present outside the node.
inline std::vector<double> owen_type_scores(const MaskedPredictFn& f, const WordTypes& w, const PartitionTree& tree) {
    const std::size_t d = w.size();
    std::vector<double> phi(d, 0.0);
    if (d == 0) return phi;
    std::vector<detail::TypeNode> nodes;
    const int root = detail::project_tree(tree, tree.root, w, nodes);
    detail::MemoGame game(f, d);
    std::vector<std::uint8_t> ctx(d, 0);
    std::function<void(int, double)> owen = [&](int node, double weight) {
        const auto& n = nodes[static_cast<std::size_t>(node)];
        if (n.left < 0) {
            if (n.types.size() == 1) {
                const std::size_t i = n.types[0];
                const double without = game(ctx);
                ctx[i] = 1;
                const double with = game(ctx);
                ctx[i] = 0;
                phi[i] += weight * (with - without);
                return;
            }
            // Several types share one leaf token range: exact Shapley among them.
            const std::size_t k = n.types.size();
            std::vector<double> fact(k + 1, 1.0);
            for (std::size_t i = 1; i <= k; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
            for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
                const std::size_t s = static_cast<std::size_t>(std::popcount(mask));
                for (std::size_t a = 0; a < k; ++a) ctx[n.types[a]] = (mask >> a) & 1u;
                const double base = game(ctx);
                for (std::size_t a = 0; a < k; ++a) {
                    if ((mask >> a) & 1u) continue;
                    ctx[n.types[a]] = 1;
                    const double gain = game(ctx) - base;
                    ctx[n.types[a]] = 0;
                    phi[n.types[a]] += weight * fact[s] * fact[k - s - 1] / fact[k] * gain;
                }
            }
            for (std::size_t a = 0; a < k; ++a) ctx[n.types[a]] = 0;
            return;
        }
        const auto set = [&](int child, std::uint8_t v) {
            for (std::size_t t : nodes[static_cast<std::size_t>(child)].types) ctx[t] = v;
        };
        owen(n.left, weight / 2);
        set(n.right, 1);
        owen(n.left, weight / 2);
        set(n.right, 0);
        owen(n.right, weight / 2);
        set(n.left, 1);
        owen(n.right, weight / 2);
        set(n.left, 0);
    };
    owen(root, 1.0);
    return phi;
}

/// Owen-value explanation; a type's value is split equally over its tokens,
/// so token scores sum to f(full) - f(empty).
inline LocalExplanation owen_values(const MaskedPredictFn& f, const TokenSeq& doc, const PartitionTree& tree,
                                    std::string doc_id = {}) {
    const auto w = word_types(doc);
    if (!doc.empty() && tree.leaves().size() != doc.size())
        throw std::invalid_argument("owen_values: tree does not match the document");
    return {std::move(doc_id), "owen", type_to_token_scores(w, owen_type_scores(f, w, tree), true)};
}

inline constexpr std::size_t kMaxExactShapley = 15;

/// Textbook Shapley values over word types by full subset enumeration.
inline std::vector<double> exact_shapley_types(const MaskedPredictFn& f, std::size_t d) {
    if (d > kMaxExactShapley)
        throw std::invalid_argument("exact_shapley: " + std::to_string(d) +
                                    " distinct words exceed the enumeration limit of 15; use owen_values");
    const std::size_t full = std::size_t{1} << d;
    std::vector<double> v(full);
    std::vector<std::uint8_t> z(d);
    for (std::size_t mask = 0; mask < full; ++mask) {
        for (std::size_t j = 0; j < d; ++j) z[j] = (mask >> j) & 1u;
        v[mask] = f(z);
    }
    std::vector<double> fact(d + 1, 1.0);
    for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
    std::vector<double> phi(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t mask = 0; mask < full; ++mask) {
            if ((mask >> i) & 1u) continue;
            const auto s = static_cast<std::size_t>(std::popcount(mask));
            phi[i] += fact[s] * fact[d - s - 1] / fact[d] * (v[mask | (std::size_t{1} << i)] - v[mask]);
        }
    return phi;
}

inline LocalExplanation exact_shapley(const MaskedPredictFn& f, const TokenSeq& doc, std::string doc_id = {}) {
    const auto w = word_types(doc);
    return {std::move(doc_id), "exact", type_to_token_scores(w, exact_shapley_types(f, w.size()), true)};
}

// ---------------------------------------------------------------------------
// Global aggregation
// ---------------------------------------------------------------------------

struct GlobalExplanation {
    std::vector<std::string> words;  // word types, sorted
    std::vector<double> mean_scores;
    std::vector<std::size_t> occurrences;
    std::vector<std::size_t> sampled_docs;  // indices into the input
    std::vector<LocalExplanation> local;    // aligned with sampled_docs
    GlobalRanking ranking;
};

/// Averages token scores per word type over a seeded sample of min(m, n)
/// documents. `explain(i)` returns the local explanation of document i.
inline GlobalExplanation global_from_local(const std::function<LocalExplanation(std::size_t)>& explain,
                                           std::span<const TokenSeq> docs, std::size_t m, std::uint64_t seed,
                                           std::size_t k = 15, std::size_t jobs = 1) {
    if (docs.empty()) throw std::invalid_argument("global_from_local: no documents");
    Rng rng(seed);
    auto sample = sample_without_replacement(docs.size(), std::min(m, docs.size()), rng);
    std::sort(sample.begin(), sample.end());
    std::vector<LocalExplanation> local(sample.size());
    parallel_for(sample.size(), jobs, [&](std::size_t i) { local[i] = explain(sample[i]); });
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const auto& doc = docs[sample[i]];
        if (local[i].scores.size() != doc.size()) throw std::runtime_error("global_from_local: score/token mismatch");
        for (std::size_t t = 0; t < doc.size(); ++t) {
            auto& slot = acc[doc.tokens[t]];
            slot.first += local[i].scores[t];
            ++slot.second;
        }
    }
    GlobalExplanation g;
    g.sampled_docs = sample;
    for (const auto& [word, sc] : acc) {
        g.words.push_back(word);
        g.mean_scores.push_back(sc.first / static_cast<double>(sc.second));
        g.occurrences.push_back(sc.second);
    }
    if (!g.words.empty()) g.ranking = global_top_k(g.mean_scores, g.words, k);
    g.local = std::move(local);
    return g;
}

}  // namespace hfphen
