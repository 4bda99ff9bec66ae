#pragma once

// Text normalization, thresholded n-gram vocabularies and the TF-IDF
// representation used by the bag-of-words baselines.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Sparse>

#include "util.hpp"

namespace hfphen {

inline constexpr const char* kNumberToken = "NUMBER";
inline constexpr std::size_t kMaxNgramOrder = 5;

struct TokenSeq {
    std::vector<std::string> tokens;
    std::vector<std::pair<std::size_t, std::size_t>> offsets;  // [start, end) in code points

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

namespace detail {

inline bool is_ascii_letter(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z'); }

/// Digits, optionally followed by a glued unit of at most four letters ("19", "195", "5mg").
inline bool is_numeric_core(std::u32string_view core) {
    std::size_t i = 0;
    while (i < core.size() && is_ascii_digit(core[i])) ++i;
    if (i == 0) return false;
    const std::size_t unit = core.size() - i;
    if (unit > 4) return false;
    for (; i < core.size(); ++i)
        if (!is_ascii_letter(core[i])) return false;
    return true;
}

}  // namespace detail

/// Whitespace tokenization after punctuation removal, lowercasing, and
/// NUMBER substitution. Punctuation inside a chunk is dropped and the halves
/// joined, so "matig-slechte" becomes "matigslechte". The placeholder
/// literals NUMBER and EFMASK survive unchanged so that normalization is a
/// fixpoint on its own output.
inline TokenSeq normalize(std::string_view text) {
    const std::u32string cps = utf8_decode(text);
    TokenSeq out;
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_space(cps[i])) ++i;
        if (i >= cps.size()) break;
        std::size_t j = i;
        while (j < cps.size() && !is_space(cps[j])) ++j;
        std::u32string core;
        std::size_t first = j, last = i;
        for (std::size_t k = i; k < j; ++k) {
            if (is_punct(cps[k])) continue;
            if (core.empty()) first = k;
            last = k + 1;
            core.push_back(cps[k]);
        }
        if (!core.empty()) {
            std::string token;
            if (core == U"NUMBER" || core == U"EFMASK") {
                token = utf8_encode(core);
            } else if (detail::is_numeric_core(core)) {
                token = kNumberToken;
            } else {
                for (char32_t c : core) utf8_append(token, to_lower(c));
            }
            out.tokens.push_back(std::move(token));
            out.offsets.emplace_back(first, last);
        }
        i = j;
    }
    return out;
}

inline std::string detokenize(const TokenSeq& seq) {
    std::string s;
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        if (i) s += ' ';
        s += seq.tokens[i];
    }
    return s;
}

inline std::string join_ngram(std::span<const std::string> tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += tokens[i];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

struct VocabEntry {
    std::size_t id = 0;
    std::size_t count = 0;
    std::size_t order = 0;
};

using Thresholds = std::map<std::size_t, std::size_t>;

inline Thresholds uniform_thresholds(std::size_t n_max, std::size_t k) {
    Thresholds t;
    for (std::size_t n = 1; n <= n_max; ++n) t[n] = k;
    return t;
}

/// Frequency-thresholded n-grams. Keys are tokens joined by single spaces;
/// ids are dense and ordered by (order, n-gram string).
class Vocabulary {
public:
    Vocabulary() = default;

    std::size_t size() const { return by_id_.size(); }
    bool empty() const { return by_id_.empty(); }
    std::size_t n_max() const { return n_max_; }
    const Thresholds& thresholds() const { return thresholds_; }

    const std::string& ngram(std::size_t id) const { return by_id_.at(id); }
    const VocabEntry& entry(std::size_t id) const { return entries_.at(by_id_.at(id)); }
    const VocabEntry* find(const std::string& ngram) const {
        auto it = entries_.find(ngram);
        return it == entries_.end() ? nullptr : &it->second;
    }
    const std::vector<std::string>& ngrams() const { return by_id_; }

    /// Order-independent fingerprint of the vocabulary contents.
    std::uint64_t hash() const {
        std::uint64_t h = fnv1a64("vocab");
        for (const auto& g : by_id_) {
            h = fnv1a64(g, h);
            h = fnv1a64("\n", h);
        }
        return h;
    }

    /// Builds from raw (ngram, order, count) triples; entries under threshold are dropped.
    static Vocabulary from_counts(const std::map<std::string, std::pair<std::size_t, std::size_t>>& counts,
                                  std::size_t n_max, Thresholds thresholds) {
        Vocabulary v;
        v.n_max_ = n_max;
        v.thresholds_ = std::move(thresholds);
        std::vector<std::pair<std::size_t, std::string>> keep;
        for (const auto& [g, oc] : counts) {
            const auto [order, count] = oc;
            if (order < 1 || order > n_max) continue;
            if (count >= v.thresholds_.at(order)) keep.emplace_back(order, g);
        }
        std::sort(keep.begin(), keep.end());
        for (const auto& [order, g] : keep) {
            v.entries_[g] = VocabEntry{v.by_id_.size(), counts.at(g).second, order};
            v.by_id_.push_back(g);
        }
        return v;
    }

    /// vocab.tsv: id<TAB>order<TAB>count<TAB>ngram
    std::string to_tsv() const {
        std::string s;
        for (std::size_t id = 0; id < by_id_.size(); ++id) {
            const auto& e = entries_.at(by_id_[id]);
            s += std::to_string(id) + '\t' + std::to_string(e.order) + '\t' + std::to_string(e.count) + '\t' +
                 by_id_[id] + '\n';
        }
        return s;
    }

    static Vocabulary from_tsv(std::string_view text, std::size_t n_max, Thresholds thresholds) {
        Vocabulary v;
        v.n_max_ = n_max;
        v.thresholds_ = std::move(thresholds);
        std::size_t line_no = 0;
        for (const auto& line : split(text, '\n')) {
            ++line_no;
            if (trim(line).empty()) continue;
            const auto cols = split(line, '\t');
            if (cols.size() != 4) throw std::runtime_error("vocab.tsv:" + std::to_string(line_no) + ": expected 4 columns");
            const std::size_t id = std::stoul(cols[0]);
            if (id != v.by_id_.size()) throw std::runtime_error("vocab.tsv:" + std::to_string(line_no) + ": ids not dense");
            const std::size_t order = std::stoul(cols[1]);
            if (order != split(cols[3], ' ').size())
                throw std::runtime_error("vocab.tsv:" + std::to_string(line_no) + ": order does not match n-gram");
            if (!v.entries_.emplace(cols[3], VocabEntry{id, std::stoul(cols[2]), order}).second)
                throw std::runtime_error("vocab.tsv:" + std::to_string(line_no) + ": duplicate n-gram");
            v.by_id_.push_back(cols[3]);
        }
        return v;
    }

private:
    std::size_t n_max_ = 0;
    Thresholds thresholds_;
    std::unordered_map<std::string, VocabEntry> entries_;
    std::vector<std::string> by_id_;
};

namespace detail {
using NgramCounts = std::map<std::string, std::pair<std::size_t, std::size_t>>;  // ngram -> (order, count)

inline void count_ngrams(const TokenSeq& doc, std::size_t n_max, NgramCounts& counts) {
    for (std::size_t n = 1; n <= n_max; ++n) {
        if (doc.size() < n) break;
        for (std::size_t i = 0; i + n <= doc.size(); ++i) {
            auto& slot = counts[join_ngram(std::span(doc.tokens).subspan(i, n))];
            slot.first = n;
            ++slot.second;
        }
    }
}
}  // namespace detail

/// Corpus-wide occurrence counts for every order up to n_max, filtered by
/// per-order thresholds. Counting is sharded across `jobs` workers and merged
/// in shard order, so the result does not depend on `jobs`.
inline Vocabulary build_vocabulary(std::span<const TokenSeq> corpus, std::size_t n_max, const Thresholds& thresholds,
                                   std::size_t jobs = 1) {
    if (n_max < 1 || n_max > kMaxNgramOrder) throw std::invalid_argument("build_vocabulary: n_max must be in [1, 5]");
    for (std::size_t n = 1; n <= n_max; ++n)
        if (!thresholds.count(n))
            throw std::invalid_argument("build_vocabulary: no threshold for order " + std::to_string(n));
    const std::size_t shards = std::max<std::size_t>(1, std::min(jobs, corpus.size()));
    std::vector<detail::NgramCounts> partial(shards);
    parallel_for(shards, shards, [&](std::size_t s) {
        for (std::size_t d = s; d < corpus.size(); d += shards) detail::count_ngrams(corpus[d], n_max, partial[s]);
    });
    detail::NgramCounts merged = std::move(partial[0]);
    for (std::size_t s = 1; s < shards; ++s)
        for (const auto& [g, oc] : partial[s]) {
            auto& slot = merged[g];
            slot.first = oc.first;
            slot.second += oc.second;
        }
    return Vocabulary::from_counts(merged, n_max, thresholds);
}

struct NgramOccurrence {
    std::size_t id = 0;
    std::size_t begin = 0;  // token index range [begin, end)
    std::size_t end = 0;

    friend bool operator==(const NgramOccurrence&, const NgramOccurrence&) = default;
};

/// Every in-vocabulary n-gram occurrence, ordered by start token then order.
inline std::vector<NgramOccurrence> doc_ngrams(const TokenSeq& doc, const Vocabulary& vocab) {
    std::vector<NgramOccurrence> out;
    for (std::size_t i = 0; i < doc.size(); ++i)
        for (std::size_t n = 1; n <= vocab.n_max() && i + n <= doc.size(); ++n)
            if (const auto* e = vocab.find(join_ngram(std::span(doc.tokens).subspan(i, n))))
                out.push_back({e->id, i, i + n});
    return out;
}

/// Code-point span in the original text covered by a token range.
inline std::pair<std::size_t, std::size_t> char_span(const TokenSeq& doc, std::size_t begin, std::size_t end) {
    if (begin >= end || end > doc.size()) throw std::out_of_range("char_span: bad token range");
    return {doc.offsets[begin].first, doc.offsets[end - 1].second};
}

// ---------------------------------------------------------------------------
// TF-IDF
// ---------------------------------------------------------------------------

/// A fixed list of common Dutch function words.
inline const std::vector<std::string>& dutch_stopwords() {
    static const std::vector<std::string> words = {
        "aan",   "al",     "alles", "als",   "altijd", "andere", "ben",   "bij",   "daar",  "dan",   "dat",
        "de",    "der",    "deze",  "die",   "dit",    "doch",   "doen",  "door",  "dus",   "een",   "eens",
        "en",    "er",     "ge",    "geen",  "geweest", "haar",  "had",   "heb",   "hebben", "heeft", "hem",
        "het",   "hier",   "hij",   "hoe",   "hun",    "iemand", "iets",  "ik",    "in",    "is",    "ja",
        "je",    "kan",    "kon",   "kunnen", "maar",  "me",     "meer",  "men",   "met",   "mij",   "mijn",
        "moet",  "na",     "naar",  "niet",  "niets",  "nog",    "nu",    "of",    "om",    "omdat", "onder",
        "ons",   "ook",    "op",    "over",  "reeds",  "te",     "tegen", "toch",  "toen",  "tot",   "u",
        "uit",   "uw",     "van",   "veel",  "voor",   "want",   "waren", "was",   "wat",   "werd",  "wezen",
        "wie",   "wil",    "worden", "wordt", "zal",   "ze",     "zelf",  "zich",  "zij",   "zijn",  "zo",
        "zonder", "zou"};
    return words;
}

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Fitted TF-IDF transform: term list and smoothed idf ln((1+N)/(1+df)) + 1.
struct TfidfModel {
    std::vector<std::string> terms;
    std::vector<double> idf;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return terms.size(); }

    void rebuild_index() {
        index.clear();
        for (std::size_t i = 0; i < terms.size(); ++i) index.emplace(terms[i], i);
    }

    /// L2-normalized tf*idf row; out-of-vocabulary and stop-words are ignored.
    std::vector<std::pair<std::size_t, double>> transform_row(const TokenSeq& doc) const {
        std::map<std::size_t, double> tf;
        for (const auto& t : doc.tokens)
            if (auto it = index.find(t); it != index.end()) tf[it->second] += 1.0;
        double norm2 = 0;
        std::vector<std::pair<std::size_t, double>> row;
        for (auto [j, c] : tf) {
            const double v = c * idf[j];
            row.emplace_back(j, v);
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (norm > 0)
            for (auto& [j, v] : row) v /= norm;
        return row;
    }

    SparseMatrix transform(std::span<const TokenSeq> docs) const {
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t i = 0; i < docs.size(); ++i)
            for (auto [j, v] : transform_row(docs[i]))
                trip.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
        SparseMatrix m(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(terms.size()));
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }
};

/// Fits unigram TF-IDF on `corpus`. When `max_features` is non-zero only the
/// terms with the highest document frequency are kept (ties by term string).
inline TfidfModel fit_tfidf(std::span<const TokenSeq> corpus, std::span<const std::string> stopwords,
                            std::size_t max_features = 0) {
    if (corpus.empty()) throw std::invalid_argument("tfidf: empty corpus");
    const std::unordered_set<std::string> stop(stopwords.begin(), stopwords.end());
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        std::set<std::string> seen;
        for (const auto& t : doc.tokens)
            if (!stop.count(t)) seen.insert(t);
        for (const auto& t : seen) ++df[t];
    }
    std::vector<std::pair<std::string, std::size_t>> terms(df.begin(), df.end());
    if (max_features && terms.size() > max_features) {
        std::stable_sort(terms.begin(), terms.end(), [](auto& a, auto& b) { return a.second > b.second; });
        terms.resize(max_features);
        std::sort(terms.begin(), terms.end());
    }
    TfidfModel m;
    const double N = static_cast<double>(corpus.size());
    for (const auto& [t, d] : terms) {
        m.terms.push_back(t);
        m.idf.push_back(std::log((1.0 + N) / (1.0 + static_cast<double>(d))) + 1.0);
    }
    m.rebuild_index();
    return m;
}

struct TfidfResult {
    TfidfModel model;
    SparseMatrix matrix;
};

inline TfidfResult tfidf_vectors(std::span<const TokenSeq> corpus, std::span<const std::string> stopwords,
                                 std::size_t max_features = 0) {
    TfidfResult r{fit_tfidf(corpus, stopwords, max_features), {}};
    r.matrix = r.model.transform(corpus);
    return r;
}

}  // namespace hfphen
