#pragma once

// Rule-based silver labels for HFrEF/HFpEF from diagnosis codes,
// echocardiography and letter text, plus LVEF masking and the label
// missingness/distribution audits.

#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "eval.hpp"
#include "logistic.hpp"

namespace hfphen {

/// Reduced below this LVEF (percent).
inline constexpr double kReducedBelow = 40.0;
/// Preserved at or above this LVEF (percent).
inline constexpr double kPreservedFrom = 50.0;
/// Echo results with a wider reported range are unreliable.
inline constexpr double kMaxEchoRange = 10.0;
/// Echo results are linked within this many days of the stay.
inline constexpr int kEchoWindowDays = 90;
/// Single alphabetic token that replaces masked LVEF expressions.
inline constexpr const char* kMaskToken = "EFMASK";

struct LvefMention {
    enum class Kind { Numeric, SystolicDysfunction, DiastolicDysfunction };

    std::size_t start = 0;  // code points
    std::size_t end = 0;
    double value_low = 0;
    double value_high = 0;
    Kind kind = Kind::Numeric;
    bool negated = false;  // dysfunction cues only
};

struct SilverLabel {
    LabelClass label = LabelClass::Unspecified;
    LabelSource source = LabelSource::None;
};

namespace detail {

inline const std::regex& lvef_regex() {
    // Verbatim LVEF expression; matched case-insensitively.
    static const std::regex re(
        R"((?:ejection fraction|ejectiefractie|(lv)?ef):?\s*((?:100|\d{1,2})(?:\.\d+)?(?:\s*-\s*(?:100|\d{1,2})(?:\.\d+))?))",
        std::regex::ECMAScript | std::regex::icase);
    return re;
}

inline const std::regex& dysfunction_regex() {
    static const std::regex re(R"(\b(systolic|diastolic) dysfunction\b|\b(systolische|diastolische) dysfunctie\b)",
                               std::regex::ECMAScript | std::regex::icase);
    return re;
}

inline const std::vector<std::string>& negation_cues() {
    static const std::vector<std::string> cues = {"geen", "niet", "zonder"};
    return cues;
}

inline constexpr std::size_t kNegationWindow = 3;

/// True when one of the `kNegationWindow` whitespace tokens before `byte_pos` is a negation cue.
inline bool preceded_by_negation(std::string_view text, std::size_t byte_pos) {
    const auto cps = utf8_decode(text.substr(0, byte_pos));
    std::vector<std::u32string> tokens;
    std::u32string cur;
    for (auto it = cps.rbegin(); it != cps.rend() && tokens.size() < kNegationWindow; ++it) {
        if (is_space(*it)) {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
        } else {
            cur.insert(cur.begin(), *it);
        }
    }
    if (!cur.empty() && tokens.size() < kNegationWindow) tokens.push_back(cur);
    for (const auto& t : tokens) {
        std::u32string core;
        for (char32_t c : t)
            if (!is_punct(c)) core.push_back(to_lower(c));
        const auto word = utf8_encode(core);
        for (const auto& cue : negation_cues())
            if (word == cue) return true;
    }
    return false;
}

inline std::pair<double, double> parse_lvef_value(const std::string& s) {
    const auto dash = s.find('-');
    if (dash == std::string::npos) {
        const double v = std::min(100.0, std::stod(s));
        return {v, v};
    }
    double a = std::min(100.0, std::stod(std::string(trim(s.substr(0, dash)))));
    double b = std::min(100.0, std::stod(std::string(trim(s.substr(dash + 1)))));
    if (a > b) std::swap(a, b);
    return {a, b};
}

}  // namespace detail

/// All numeric LVEF mentions and dysfunction cues in document order.
/// Negated dysfunction cues are reported with `negated = true`.
inline std::vector<LvefMention> scan_lvef_mentions(std::string_view text) {
    std::vector<LvefMention> out;
    const Utf8Index index(text);
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), detail::lvef_regex()); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        LvefMention mention;
        mention.start = index.cp_offset(static_cast<std::size_t>(m.position(0)));
        mention.end = index.cp_offset(static_cast<std::size_t>(m.position(0) + m.length(0)));
        std::tie(mention.value_low, mention.value_high) = detail::parse_lvef_value(m.str(2));
        out.push_back(mention);
    }
    for (auto it = std::sregex_iterator(s.begin(), s.end(), detail::dysfunction_regex()); it != std::sregex_iterator();
         ++it) {
        const auto& m = *it;
        LvefMention mention;
        mention.start = index.cp_offset(static_cast<std::size_t>(m.position(0)));
        mention.end = index.cp_offset(static_cast<std::size_t>(m.position(0) + m.length(0)));
        const auto first = m.str(1).empty() ? m.str(2) : m.str(1);
        const bool systolic = first[0] == 's' || first[0] == 'S';
        mention.kind = systolic ? LvefMention::Kind::SystolicDysfunction : LvefMention::Kind::DiastolicDysfunction;
        mention.negated = detail::preceded_by_negation(text, static_cast<std::size_t>(m.position(0)));
        out.push_back(mention);
    }
    std::stable_sort(out.begin(), out.end(), [](const LvefMention& a, const LvefMention& b) { return a.start < b.start; });
    return out;
}

/// Numeric LVEF mentions plus unnegated dysfunction cues.
inline std::vector<LvefMention> extract_lvef_mentions(std::string_view text) {
    auto all = scan_lvef_mentions(text);
    std::erase_if(all, [](const LvefMention& m) { return m.negated; });
    return all;
}

// ---------------------------------------------------------------------------
// Codes
// ---------------------------------------------------------------------------

struct CodeLabelResult {
    std::optional<LabelClass> label;
    bool conflict = false;  // both systolic and diastolic codes present
};

/// Label implied by a hospitalization's diagnosis codes. Conflicting codes abstain.
inline CodeLabelResult label_from_codes(std::span<const std::pair<CodeSystem, std::string>> codes,
                                        const std::vector<CodeEntry>& table) {
    bool systolic = false, diastolic = false;
    for (const auto& [system, code] : codes) {
        const auto t = trim(code);
        for (const auto& e : table) {
            if (e.system != system || e.code != t) continue;
            (e.implies == CodeImplies::Systolic ? systolic : diastolic) = true;
        }
    }
    if (systolic && diastolic) return {std::nullopt, true};
    if (systolic) return {LabelClass::HFrEF, false};
    if (diastolic) return {LabelClass::HFpEF, false};
    return {};
}

// ---------------------------------------------------------------------------
// Echocardiography
// ---------------------------------------------------------------------------

inline int method_priority(EchoMethod m) {
    switch (m) {
        case EchoMethod::Volumetric3D4D: return 0;
        case EchoMethod::Biplane: return 1;
        case EchoMethod::SinglePlane: return 2;
        default: return 3;
    }
}

/// LVEF for one examination date: ranges wider than 10 points are discarded,
/// the most reliable method wins and its lower bound is used. Ties within the
/// winning method take the lowest lower bound.
inline std::optional<double> select_echo_lvef(std::span<const EchoMeasurement> same_date) {
    std::optional<double> best;
    int best_priority = 99;
    for (const auto& m : same_date) {
        if (m.lvef_high - m.lvef_low > kMaxEchoRange) continue;
        const int p = method_priority(m.method);
        if (p < best_priority || (p == best_priority && m.lvef_low < *best)) {
            best_priority = p;
            best = m.lvef_low;
        }
    }
    return best;
}

inline std::optional<LabelClass> classify_lvef_values(std::span<const double> values) {
    bool preserved = false;
    for (double v : values) {
        if (v < kReducedBelow) return LabelClass::HFrEF;
        if (v >= kPreservedFrom) preserved = true;
    }
    if (preserved) return LabelClass::HFpEF;
    return std::nullopt;
}

/// Per-date selected LVEF values of `echos` inside the inclusive window
/// [admission - 90 days, discharge + 90 days] for the document's patient.
inline std::vector<double> echo_values_in_window(const Document& doc, std::span<const EchoMeasurement> echos) {
    const auto lo = doc.admission_date.plus_days(-kEchoWindowDays);
    const auto hi = doc.discharge_date.plus_days(kEchoWindowDays);
    std::map<std::int64_t, std::vector<EchoMeasurement>> by_date;
    for (const auto& e : echos) {
        if (e.patient_id != doc.patient_id) continue;
        if (e.date < lo || e.date > hi) continue;
        by_date[e.date.days()].push_back(e);
    }
    std::vector<double> values;
    for (const auto& [day, ms] : by_date)
        if (auto v = select_echo_lvef(ms)) values.push_back(*v);
    return values;
}

inline std::optional<LabelClass> label_from_echo(const Document& doc, std::span<const EchoMeasurement> echos) {
    const auto values = echo_values_in_window(doc, echos);
    return classify_lvef_values(values);
}

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

/// Numeric mentions decide first (range mentions contribute their lower
/// bound); otherwise an unnegated dysfunction cue decides.
inline std::optional<LabelClass> label_from_text(std::string_view text) {
    const auto mentions = extract_lvef_mentions(text);
    std::vector<double> values;
    for (const auto& m : mentions)
        if (m.kind == LvefMention::Kind::Numeric) values.push_back(m.value_low);
    if (auto c = classify_lvef_values(values)) return c;
    for (const auto& m : mentions)
        if (m.kind == LvefMention::Kind::SystolicDysfunction) return LabelClass::HFrEF;
    for (const auto& m : mentions)
        if (m.kind == LvefMention::Kind::DiastolicDysfunction) return LabelClass::HFpEF;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Precedence
// ---------------------------------------------------------------------------

/// What each stage said, for summaries and audits.
struct SilverTrace {
    std::optional<SilverLabel> result;
    CodeLabelResult codes;
    std::optional<LabelClass> echo;
    std::optional<LabelClass> text;
    bool boundary = false;  // a deciding LVEF value sat exactly on the preserved cut-off
};

inline SilverTrace trace_silver_label(const Document& doc, std::span<const std::pair<CodeSystem, std::string>> codes,
                                      std::span<const EchoMeasurement> echos, const std::vector<CodeEntry>& table) {
    SilverTrace t;
    t.codes = label_from_codes(codes, table);
    if (t.codes.label) {
        t.result = SilverLabel{*t.codes.label, LabelSource::Code};
        return t;
    }
    const auto echo_values = echo_values_in_window(doc, echos);
    t.echo = classify_lvef_values(echo_values);
    if (t.echo) {
        t.result = SilverLabel{*t.echo, LabelSource::Echo};
        t.boundary = *t.echo == LabelClass::HFpEF &&
                     std::find(echo_values.begin(), echo_values.end(), kPreservedFrom) != echo_values.end();
        return t;
    }
    t.text = label_from_text(doc.text);
    if (t.text) {
        t.result = SilverLabel{*t.text, LabelSource::Text};
        if (*t.text == LabelClass::HFpEF)
            for (const auto& m : extract_lvef_mentions(doc.text))
                if (m.kind == LvefMention::Kind::Numeric && m.value_low == kPreservedFrom) t.boundary = true;
    }
    return t;
}

/// First non-abstaining stage among codes, echocardiography and text.
inline std::optional<SilverLabel> assign_silver_label(const Document& doc,
                                                      std::span<const std::pair<CodeSystem, std::string>> codes,
                                                      std::span<const EchoMeasurement> echos,
                                                      const std::vector<CodeEntry>& table) {
    return trace_silver_label(doc, codes, echos, table).result;
}

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

/// Replaces every numeric LVEF mention and unnegated dysfunction cue with EFMASK.
inline std::string mask_lvef(std::string_view text) {
    std::string cur(text);
    // A single pass is normally a fixpoint; iterate to guarantee it.
    for (int pass = 0; pass < 16; ++pass) {
        const auto mentions = extract_lvef_mentions(cur);
        if (mentions.empty()) break;
        const Utf8Index index(cur);
        std::string out;
        std::size_t pos = 0;  // bytes
        for (const auto& m : mentions) {
            const auto b = index.byte_offset(m.start);
            const auto e = index.byte_offset(m.end);
            if (b < pos) continue;  // overlapping cue, already masked
            out.append(cur, pos, b - pos);
            out += kMaskToken;
            pos = e;
        }
        out.append(cur, pos, std::string::npos);
        if (out == cur) break;
        cur = std::move(out);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

/// Structured covariates with missing values zero-filled plus one missingness
/// indicator per nullable variable.
inline std::vector<double> missingness_features(const StructuredRecord& r) {
    std::vector<double> x;
    const auto vals = r.values();
    for (const auto& v : vals) x.push_back(v.value_or(0.0));
    for (std::size_t k = 0; k < StructuredRecord::kNullable; ++k) x.push_back(vals[k] ? 0.0 : 1.0);
    return x;
}

/// Cross-validated AUC of a logistic model predicting label presence from the
/// structured covariates. Around 0.5 is compatible with labels missing
/// completely at random.
inline double missingness_audit(std::span<const std::pair<StructuredRecord, bool>> records, std::size_t folds,
                                std::uint64_t seed) {
    std::vector<int> y;
    for (const auto& [r, has] : records) y.push_back(has ? 1 : 0);
    const auto n_pos = std::count(y.begin(), y.end(), 1);
    const auto n_neg = static_cast<std::ptrdiff_t>(y.size()) - n_pos;
    if (n_pos < 2 || n_neg < 2) throw std::invalid_argument("missingness_audit: need >= 2 records of each status");
    folds = std::min<std::size_t>(folds, static_cast<std::size_t>(std::min(n_pos, n_neg)));
    const auto plan = stratified_folds(y, folds, seed);
    const std::size_t d = StructuredRecord::kWidth + StructuredRecord::kNullable;
    Matrix X(records.size(), d);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto x = missingness_features(records[i].first);
        for (std::size_t j = 0; j < d; ++j) X(i, j) = x[j];
    }
    std::vector<double> oof(records.size(), 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        const auto [train, test] = plan.split(f);
        Matrix Xt = select_rows(X, train);
        std::vector<int> yt;
        for (auto i : train) yt.push_back(y[i]);
        const auto model = train_logistic(Xt, yt, LogisticOptions{.reg_c = 1.0});
        for (auto i : test) oof[i] = model.decision(X.row(static_cast<Eigen::Index>(i)));
    }
    return roc_auc(oof, y);
}

/// Jensen-Shannon divergence (base 2) between normalized `counts` and `reference`.
inline double label_distribution_divergence(std::span<const double> counts, std::span<const double> reference) {
    if (counts.size() != reference.size() || counts.empty())
        throw std::invalid_argument("label_distribution_divergence: class sets differ");
    double total = 0, ref_total = 0;
    for (double c : counts) {
        if (c < 0) throw std::invalid_argument("label_distribution_divergence: negative count");
        total += c;
    }
    for (double r : reference) {
        if (r < 0) throw std::invalid_argument("label_distribution_divergence: negative reference");
        ref_total += r;
    }
    if (total <= 0) throw std::invalid_argument("label_distribution_divergence: zero total count");
    if (std::abs(ref_total - 1.0) > 1e-9) throw std::invalid_argument("label_distribution_divergence: reference must sum to 1");
    auto kl_to_mid = [](double a, double m) { return a > 0 ? a * std::log2(a / m) : 0.0; };
    double js = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double p = counts[k] / total;
        const double q = reference[k];
        const double m = 0.5 * (p + q);
        js += 0.5 * kl_to_mid(p, m) + 0.5 * kl_to_mid(q, m);
    }
    return std::clamp(js, 0.0, 1.0);
}

}  // namespace hfphen
