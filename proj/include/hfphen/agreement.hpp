#pragma once

// Explanation scores to ordinal tags, and the agreement statistics used to
// compare explanations with human annotations.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "features.hpp"

namespace hfphen {

enum class TokenTag { Opposite = 0, NoIndication = 1, Strong = 2, Giveaway = 3 };

inline std::string to_string(TokenTag t) {
    switch (t) {
        case TokenTag::Opposite: return "Opposite";
        case TokenTag::NoIndication: return "NoIndication";
        case TokenTag::Strong: return "Strong";
        case TokenTag::Giveaway: return "Giveaway";
    }
    throw std::logic_error("bad tag");
}

inline TokenTag to_token_tag(SpanTag t) {
    switch (t) {
        case SpanTag::Giveaway: return TokenTag::Giveaway;
        case SpanTag::Strong: return TokenTag::Strong;
        case SpanTag::Opposite: return TokenTag::Opposite;
    }
    throw std::logic_error("bad span tag");
}

inline constexpr double kGiveawayAbove = 0.8;
inline constexpr double kStrongAbove = 0.2;
inline constexpr double kOppositeBelow = -0.3;

/// Scores scaled by the document's max |score|, then cut at 0.8 / 0.2 / -0.3.
inline std::vector<TokenTag> scores_to_tags(std::span<const double> scores) {
    double mx = 0;
    for (double s : scores) mx = std::max(mx, std::abs(s));
    std::vector<TokenTag> out(scores.size(), TokenTag::NoIndication);
    if (mx == 0) return out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = scores[i] / mx;
        if (s > kGiveawayAbove) out[i] = TokenTag::Giveaway;
        else if (s > kStrongAbove) out[i] = TokenTag::Strong;
        else if (s < kOppositeBelow) out[i] = TokenTag::Opposite;
    }
    return out;
}

/// Tag-space collapse: 4 keeps all tags; 3 merges Giveaway into Strong
/// ("indication for the correct class"); 2 additionally turns Opposite into
/// NoIndication (indication vs. none).
inline TokenTag collapse_tag(TokenTag t, int mode) {
    if (mode != 2 && mode != 3 && mode != 4) throw std::invalid_argument("tag mode must be 2, 3 or 4");
    if (mode <= 3 && t == TokenTag::Giveaway) t = TokenTag::Strong;
    if (mode == 2 && t == TokenTag::Opposite) t = TokenTag::NoIndication;
    return t;
}

inline std::vector<TokenTag> collapse_tags(std::span<const TokenTag> tags, int mode) {
    std::vector<TokenTag> out;
    for (auto t : tags) out.push_back(collapse_tag(t, mode));
    return out;
}

/// Token tags from annotated character spans; a token covered by several
/// spans takes the highest tag in ordinal order, uncovered tokens NoIndication.
inline std::vector<TokenTag> spans_to_token_tags(const TokenSeq& doc, std::span<const AnnotationSpan> spans) {
    std::vector<TokenTag> out(doc.size(), TokenTag::NoIndication);
    std::vector<bool> set(doc.size(), false);
    for (const auto& s : spans)
        for (std::size_t t = 0; t < doc.size(); ++t) {
            const auto [a, b] = doc.offsets[t];
            if (a < s.end && s.start < b) {
                const TokenTag tag = to_token_tag(s.tag);
                if (!set[t] || tag > out[t]) out[t] = tag;
                set[t] = true;
            }
        }
    return out;
}

/// Maximal runs of equal non-NoIndication tags as character spans.
inline std::vector<AnnotationSpan> token_tags_to_spans(const TokenSeq& doc, std::span<const TokenTag> tags,
                                                       const std::string& doc_id) {
    std::vector<AnnotationSpan> out;
    for (std::size_t t = 0; t < tags.size();) {
        if (tags[t] == TokenTag::NoIndication) {
            ++t;
            continue;
        }
        std::size_t u = t;
        while (u < tags.size() && tags[u] == tags[t]) ++u;
        SpanTag st = tags[t] == TokenTag::Giveaway ? SpanTag::Giveaway
                     : tags[t] == TokenTag::Strong ? SpanTag::Strong
                                                   : SpanTag::Opposite;
        out.push_back({doc_id, doc.offsets[t].first, doc.offsets[u - 1].second, st});
        t = u;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Agreement coefficients
// ---------------------------------------------------------------------------

/// Unweighted Cohen's kappa. nullopt when chance agreement is 1 and the
/// sequences differ (cannot happen for equal-length inputs, kept for safety).
inline std::optional<double> cohen_kappa(std::span<const TokenTag> a, std::span<const TokenTag> b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("cohen_kappa: need equal non-empty sequences");
    const double n = static_cast<double>(a.size());
    std::array<double, 4> ma{}, mb{};
    double agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma[static_cast<std::size_t>(a[i])] += 1;
        mb[static_cast<std::size_t>(b[i])] += 1;
        agree += a[i] == b[i];
    }
    const double po = agree / n;
    double pe = 0;
    for (std::size_t c = 0; c < 4; ++c) pe += (ma[c] / n) * (mb[c] / n);
    if (pe >= 1.0) {
        if (std::equal(a.begin(), a.end(), b.begin())) return 1.0;
        return std::nullopt;
    }
    return (po - pe) / (1.0 - pe);
}

/// Krippendorff's alpha, two raters, no missing values, ordinal metric over
/// the TokenTag order. nullopt when every value is identical.
inline std::optional<double> krippendorff_alpha_ordinal(std::span<const TokenTag> a, std::span<const TokenTag> b) {
    if (a.size() != b.size()) throw std::invalid_argument("krippendorff_alpha: length mismatch");
    constexpr std::size_t K = 4;
    std::array<std::array<double, K>, K> o{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto x = static_cast<std::size_t>(a[i]), y = static_cast<std::size_t>(b[i]);
        o[x][y] += 1;
        o[y][x] += 1;
    }
    std::array<double, K> nc{};
    double n = 0;
    for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t k = 0; k < K; ++k) nc[c] += o[c][k];
        n += nc[c];
    }
    auto delta2 = [&](std::size_t c, std::size_t k) {
        if (c > k) std::swap(c, k);
        double s = 0;
        for (std::size_t g = c; g <= k; ++g) s += nc[g];
        s -= (nc[c] + nc[k]) / 2.0;
        return s * s;
    };
    double obs = 0, exp = 0;
    for (std::size_t c = 0; c < K; ++c)
        for (std::size_t k = 0; k < K; ++k) {
            const double d2 = delta2(c, k);
            obs += o[c][k] * d2;
            exp += nc[c] * nc[k] * d2;
        }
    if (exp == 0) return std::nullopt;
    return 1.0 - (n - 1.0) * obs / exp;
}

namespace detail {
/// Sorts v in place, returns the number of strictly inverted pairs.
inline std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = (lo + hi) / 2;
    std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += mid - i;
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

inline std::uint64_t tied_pairs(const std::vector<double>& sorted) {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        t += static_cast<std::uint64_t>(j - i) * (j - i - 1) / 2;
        i = j;
    }
    return t;
}
}  // namespace detail

/// Kendall's tau-b by Knight's O(n log n) algorithm. nullopt when either
/// side has no variation.
inline std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("kendall_tau: need equal lengths >= 2");
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b]; });
    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    std::uint64_t n1 = 0, n3 = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && x[idx[j]] == x[idx[i]]) ++j;
        n1 += static_cast<std::uint64_t>(j - i) * (j - i - 1) / 2;
        for (std::size_t k = i; k < j;) {
            std::size_t l = k;
            while (l < j && y[idx[l]] == y[idx[k]]) ++l;
            n3 += static_cast<std::uint64_t>(l - k) * (l - k - 1) / 2;
            k = l;
        }
        i = j;
    }
    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
    const std::uint64_t swaps = detail::merge_count(ys, buf, 0, n);
    const std::uint64_t n2 = detail::tied_pairs(ys);
    const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
    if (denom == 0) return std::nullopt;
    const double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                       static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
    return num / denom;
}

/// Kendall's tau-b between real scores and ordinal tags.
inline std::optional<double> kendall_tau(std::span<const double> scores, std::span<const TokenTag> tags) {
    std::vector<double> ranks;
    for (auto t : tags) ranks.push_back(static_cast<double>(t));
    return kendall_tau_b(scores, ranks);
}

// ---------------------------------------------------------------------------
// Spans, frequency score, global relevance
// ---------------------------------------------------------------------------

struct SpanF1 {
    double precision = 0, recall = 0, f1 = 0;
    std::size_t matched_pred = 0, matched_gold = 0, n_pred = 0, n_gold = 0;
};

/// Lenient matching: a predicted span matches when it overlaps a gold span
/// of the same document and a compatible tag (equal after collapse) by at
/// least one character. Each gold span is credited once for recall.
inline SpanF1 lenient_span_f1(std::span<const AnnotationSpan> pred, std::span<const AnnotationSpan> gold, int mode = 4) {
    auto compatible = [&](const AnnotationSpan& p, const AnnotationSpan& g) {
        return p.doc_id == g.doc_id && p.start < g.end && g.start < p.end &&
               collapse_tag(to_token_tag(p.tag), mode) == collapse_tag(to_token_tag(g.tag), mode);
    };
    SpanF1 r;
    r.n_pred = pred.size();
    r.n_gold = gold.size();
    if (pred.empty() && gold.empty()) {
        r.precision = r.recall = r.f1 = 1.0;
        return r;
    }
    std::vector<bool> gold_hit(gold.size(), false);
    for (const auto& p : pred) {
        bool hit = false;
        for (std::size_t g = 0; g < gold.size(); ++g)
            if (compatible(p, gold[g])) {
                hit = true;
                gold_hit[g] = true;
            }
        r.matched_pred += hit;
    }
    r.matched_gold = static_cast<std::size_t>(std::count(gold_hit.begin(), gold_hit.end(), true));
    r.precision = pred.empty() ? 0.0 : static_cast<double>(r.matched_pred) / static_cast<double>(pred.size());
    r.recall = gold.empty() ? 0.0 : static_cast<double>(r.matched_gold) / static_cast<double>(gold.size());
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

struct FrequencyScoreInput {
    std::vector<std::pair<std::string, double>> top_true;   // positive class: (n-gram, e_i)
    std::vector<std::pair<std::string, double>> top_false;  // negative class
    std::map<std::string, double> counts_true;   // occurrences within positive-class samples
    std::map<std::string, double> counts_false;  // occurrences within negative-class samples
};

inline constexpr std::size_t kFrequencyTopN = 50;

/// s = sum_true e_i c_i - sum_false e_i c_i with raw signed scores e_i.
/// An n-gram missing from the count map contributes 0.
inline double frequency_score(const FrequencyScoreInput& in) {
    auto sum = [](const auto& top, const auto& counts) {
        double s = 0;
        for (const auto& [g, e] : top)
            if (auto it = counts.find(g); it != counts.end()) s += e * it->second;
        return s;
    };
    return sum(in.top_true, in.counts_true) - sum(in.top_false, in.counts_false);
}

/// Occurrence counts of each listed n-gram (space-joined tokens) in `docs`.
inline std::map<std::string, double> ngram_occurrence_counts(std::span<const TokenSeq> docs,
                                                             const std::set<std::string>& ngrams) {
    std::map<std::string, double> out;
    std::set<std::size_t> orders;
    for (const auto& g : ngrams) {
        out[g] = 0;
        orders.insert(split(g, ' ').size());
    }
    for (const auto& doc : docs)
        for (std::size_t n : orders)
            for (std::size_t i = 0; i + n <= doc.size(); ++i) {
                const auto g = join_ngram(std::span(doc.tokens).subspan(i, n));
                if (auto it = out.find(g); it != out.end()) it->second += 1;
            }
    return out;
}

struct RelevanceSummary {
    std::size_t positive_relevant = 0, positive_judged = 0;
    std::size_t negative_relevant = 0, negative_judged = 0;
    double positive_pct = 0, negative_pct = 0;
    double average_count = 0, average_pct = 0;
};

/// Relevant counts and percentages per class plus their mean.
inline RelevanceSummary global_relevance(std::span<const std::pair<std::string, bool>> positive,
                                         std::span<const std::pair<std::string, bool>> negative) {
    RelevanceSummary r;
    auto tally = [](auto judged, std::size_t& rel, std::size_t& tot, double& pct) {
        tot = judged.size();
        rel = 0;
        for (const auto& [g, ok] : judged) rel += ok;
        pct = tot ? 100.0 * static_cast<double>(rel) / static_cast<double>(tot) : 0.0;
    };
    tally(positive, r.positive_relevant, r.positive_judged, r.positive_pct);
    tally(negative, r.negative_relevant, r.negative_judged, r.negative_pct);
    r.average_count = 0.5 * static_cast<double>(r.positive_relevant + r.negative_relevant);
    r.average_pct = 0.5 * (r.positive_pct + r.negative_pct);
    return r;
}

// ---------------------------------------------------------------------------
// Per-document comparison
// ---------------------------------------------------------------------------

struct DocumentAgreement {
    std::string doc_id;
    std::optional<double> kappa, alpha, tau;
    SpanF1 spans;
};

/// Compares one document's explanation scores with its gold annotation.
inline DocumentAgreement document_agreement(const std::string& doc_id, const TokenSeq& doc,
                                            std::span<const double> scores, std::span<const AnnotationSpan> gold,
                                            int mode) {
    if (scores.size() != doc.size()) throw std::invalid_argument("document_agreement: score/token mismatch");
    const auto pred_tags = collapse_tags(scores_to_tags(scores), mode);
    const auto gold_tags = collapse_tags(spans_to_token_tags(doc, gold), mode);
    DocumentAgreement r;
    r.doc_id = doc_id;
    if (!doc.empty()) {
        r.kappa = cohen_kappa(pred_tags, gold_tags);
        r.alpha = krippendorff_alpha_ordinal(pred_tags, gold_tags);
    }
    if (doc.size() >= 2) r.tau = kendall_tau(scores, gold_tags);
    const auto pred_spans = token_tags_to_spans(doc, pred_tags, doc_id);
    std::vector<AnnotationSpan> gold_spans;
    for (const auto& g : gold) gold_spans.push_back(g);
    r.spans = lenient_span_f1(pred_spans, gold_spans, mode);
    return r;
}

}  // namespace hfphen
