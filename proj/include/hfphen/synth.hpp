#pragma once

// Seeded synthetic corpora: pseudo-Dutch letters with planted class
// n-grams, optional LVEF mentions, codes and echo records that agree with
// the true class, structured covariates, and ground-truth spans.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "json.hpp"
#include "silver_labeler.hpp"
#include "util.hpp"

namespace hfphen {

struct SynthConfig {
    std::size_t n_docs = 200;
    double positive_rate = 0.5;  // share of HFrEF documents
    std::size_t filler_vocab = 300;
    std::size_t min_words = 40;
    std::size_t max_words = 120;
    std::size_t planted_per_class = 10;
    std::size_t planted_order = 1;     // words per planted n-gram
    double signal_probability = 0.8;   // per planted n-gram, per document of its class
    double noise_rate = 0.0;           // per planted n-gram of the other class
    double lvef_mention_rate = 0.2;
    double dysfunction_rate = 0.1;
    double negated_cue_rate = 0.05;
    double code_rate = 0.3;
    double echo_rate = 0.3;
    double distractor_echo_rate = 0.2;  // unreliable or out-of-window echo records
    double missing_rate = 0.1;          // per nullable covariate
    double gold_rate = 0.0;             // documents shipped with their true label as Gold
    double site_b_rate = 0.2;
    std::uint64_t seed = 1;

    void validate() const {
        for (double p : {positive_rate, signal_probability, noise_rate, lvef_mention_rate, dysfunction_rate,
                         negated_cue_rate, code_rate, echo_rate, distractor_echo_rate, missing_rate, gold_rate,
                         site_b_rate})
            if (!(p >= 0 && p <= 1)) throw std::invalid_argument("synth: probabilities must lie in [0, 1]");
        if (n_docs == 0) throw std::invalid_argument("synth: n_docs must be positive");
        if (filler_vocab == 0) throw std::invalid_argument("synth: empty filler vocabulary");
        if (min_words == 0 || min_words > max_words) throw std::invalid_argument("synth: bad document length range");
        if (planted_order < 1 || planted_order > 5) throw std::invalid_argument("synth: planted_order must be in [1, 5]");
    }

    static SynthConfig from_json(const nlohmann::json& j) {
        SynthConfig c;
        static const std::set<std::string> known = {
            "n_docs",          "positive_rate", "filler_vocab",      "min_words",        "max_words",
            "planted_per_class", "planted_order", "signal_probability", "noise_rate",     "lvef_mention_rate",
            "dysfunction_rate", "negated_cue_rate", "code_rate",      "echo_rate",        "distractor_echo_rate",
            "missing_rate",    "gold_rate",     "site_b_rate",       "seed"};
        for (const auto& [k, v] : j.items())
            if (!known.count(k)) throw std::invalid_argument("synth config: unknown key '" + k + "'");
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("n_docs", c.n_docs);
        get("positive_rate", c.positive_rate);
        get("filler_vocab", c.filler_vocab);
        get("min_words", c.min_words);
        get("max_words", c.max_words);
        get("planted_per_class", c.planted_per_class);
        get("planted_order", c.planted_order);
        get("signal_probability", c.signal_probability);
        get("noise_rate", c.noise_rate);
        get("lvef_mention_rate", c.lvef_mention_rate);
        get("dysfunction_rate", c.dysfunction_rate);
        get("negated_cue_rate", c.negated_cue_rate);
        get("code_rate", c.code_rate);
        get("echo_rate", c.echo_rate);
        get("distractor_echo_rate", c.distractor_echo_rate);
        get("missing_rate", c.missing_rate);
        get("gold_rate", c.gold_rate);
        get("site_b_rate", c.site_b_rate);
        get("seed", c.seed);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        return {{"n_docs", n_docs},
                {"positive_rate", positive_rate},
                {"filler_vocab", filler_vocab},
                {"min_words", min_words},
                {"max_words", max_words},
                {"planted_per_class", planted_per_class},
                {"planted_order", planted_order},
                {"signal_probability", signal_probability},
                {"noise_rate", noise_rate},
                {"lvef_mention_rate", lvef_mention_rate},
                {"dysfunction_rate", dysfunction_rate},
                {"negated_cue_rate", negated_cue_rate},
                {"code_rate", code_rate},
                {"echo_rate", echo_rate},
                {"distractor_echo_rate", distractor_echo_rate},
                {"missing_rate", missing_rate},
                {"gold_rate", gold_rate},
                {"site_b_rate", site_b_rate},
                {"seed", seed}};
    }
};

/// What each document received, for checking the labeler against the truth.
struct Injection {
    bool code = false;
    bool echo = false;
    bool text = false;  // numeric LVEF mention or unnegated dysfunction cue
};

struct SynthOutput {
    std::vector<LabeledCase> cases;
    std::vector<LabelClass> truth;
    std::vector<Injection> injections;
    std::vector<EchoMeasurement> echo;
    std::vector<DiagnosisCode> codes;
    AnnotationSet annotations;  // annotator "truth"
    std::vector<std::string> planted_positive;  // HFrEF n-grams
    std::vector<std::string> planted_negative;  // HFpEF n-grams
};

inline constexpr const char* kTruthAnnotator = "truth";

/// Fixed pseudo-Dutch filler; none contains "ef", a negation cue, or a
/// trigger phrase.
inline const std::vector<std::string>& base_filler_words() {
    static const std::vector<std::string> words = {
        "patiënt",   "opname",     "klachten",  "dyspnoe",    "oedeem",    "enkels",     "controle",   "polikliniek",
        "huisarts",  "medicatie",  "dosering",  "verhoogd",   "verlaagd",  "stabiel",    "klinisch",   "beloop",
        "ontslag",   "afdeling",   "cardiologie", "longen",   "crepitaties", "auscultatie", "saturatie", "bloeddruk",
        "pols",      "ritme",      "sinusritme", "boezem",    "kamer",     "klep",       "insufficiëntie", "stenose",
        "nierfunctie", "kreatinine", "kalium",  "natrium",    "hemoglobine", "diurese",  "gewicht",    "toename",
        "afname",    "vocht",      "beperking", "zoutarm",    "dieet",     "advies",     "afspraak",   "weken",
        "maanden",   "dagen",      "opnieuw",   "gestart",    "gestopt",   "verhoging",  "verlaging",  "tijdens",
        "na",        "bij",        "met",       "voor",       "zonder",    "ook",        "echter",     "verder",
        "daarnaast", "goed",       "matig",     "slecht",     "licht",     "ernstig",    "chronisch",  "acuut",
        "thorax",    "foto",       "beeld",     "passend",    "bij",       "decompensatie", "cordis",  "links",
        "rechts",    "ventrikel",  "wand",      "dikte",      "dilatatie", "hypertrofie", "ischemie",  "infarct",
        "coronair",  "lijden",     "atriumfibrilleren", "anticoagulantia", "diuretica", "bètablokker", "start", "stop",
        "overleg",   "kliniek",    "status",    "anamnese",   "lichamelijk", "onderzoek", "conclusie", "beleid",
        "follow",    "up",         "telefonisch", "laboratorium", "waarden", "normaal",  "afwijkend",  "herstel",
        "mobilisatie", "fysiotherapie", "thuis",  "zorg",     "familie",   "partner",    "woont",      "zelfstandig",
        "rookt",     "alcohol",    "gebruik",   "allergie",   "bekend",    "voorgeschiedenis", "diabetes", "hypertensie",
        "copd",      "anemie",     "nier",      "lever",      "schildklier", "infectie", "koorts",     "hoest",
        "sputum",    "pijn",       "borst",     "druk",       "moeheid",   "duizelig",   "syncope",    "palpitaties"};
    return words;
}

namespace detail {

inline bool acceptable_filler(const std::string& w) {
    static const std::set<std::string> banned = {"geen", "niet", "zonder", "EFMASK", "NUMBER"};
    std::string lower;
    for (char c : w) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower.find("ef") == std::string::npos && !banned.count(lower) && lower.find("dysfunct") == std::string::npos;
}

/// Syllable-built pseudo-word of 2-3 syllables.
inline std::string pseudo_word(Rng& rng) {
    static const std::vector<std::string> onsets = {"b", "d", "g", "h", "k", "l", "m", "n", "p", "r",
                                                    "s", "t", "v", "w", "z", "st", "kl", "br", "gr", "sl"};
    static const std::vector<std::string> vowels = {"a", "o", "i", "u", "aa", "oo", "ie", "ui", "ij", "ou"};
    static const std::vector<std::string> codas = {"", "n", "r", "s", "l", "k", "t", "m"};
    std::string w;
    const std::size_t syl = 2 + uniform_index(rng, 2);
    for (std::size_t s = 0; s < syl; ++s) {
        w += onsets[uniform_index(rng, onsets.size())];
        w += vowels[uniform_index(rng, vowels.size())];
        w += codas[uniform_index(rng, codas.size())];
    }
    return w;
}

inline std::string lvef_phrase(LabelClass cls, Rng& rng) {
    const bool reduced = cls == LabelClass::HFrEF;
    const int lo = reduced ? 10 : 50, hi = reduced ? 39 : 75;
    const int v = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
    switch (uniform_index(rng, 5)) {
        case 0: return "LVEF " + std::to_string(v) + "%";
        case 1: return "EF: " + std::to_string(v);
        case 2: return "ejectiefractie " + std::to_string(v) + "%";
        case 3: return "ejection fraction " + std::to_string(v);
        default: {
            // Range form; the regex requires a decimal on the upper bound and the lower bound decides.
            const int up = std::min(v + 1 + static_cast<int>(uniform_index(rng, 5)), 100);
            return "LVEF " + std::to_string(v) + ".5-" + std::to_string(up) + ".5%";
        }
    }
}

}  // namespace detail

inline SynthOutput generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthOutput out;
    Rng vocab_rng(derive_seed(cfg.seed, "synth.vocab"));

    std::vector<std::string> filler;
    std::set<std::string> used;
    for (const auto& w : base_filler_words())
        if (filler.size() < cfg.filler_vocab && detail::acceptable_filler(w) && used.insert(w).second) filler.push_back(w);
    while (filler.size() < cfg.filler_vocab) {
        auto w = detail::pseudo_word(vocab_rng);
        if (detail::acceptable_filler(w) && used.insert(w).second) filler.push_back(w);
    }
    if (filler.empty()) throw std::invalid_argument("synth: empty filler vocabulary");

    auto make_planted = [&](std::vector<std::string>& dest) {
        for (std::size_t i = 0; i < cfg.planted_per_class; ++i) {
            std::string g;
            for (std::size_t k = 0; k < cfg.planted_order; ++k) {
                std::string w;
                do w = detail::pseudo_word(vocab_rng);
                while (!detail::acceptable_filler(w) || !used.insert(w).second);
                g += (k ? " " : "") + w;
            }
            dest.push_back(g);
        }
    };
    make_planted(out.planted_positive);
    make_planted(out.planted_negative);

    const auto table = default_code_table();
    std::vector<std::pair<CodeSystem, std::string>> systolic, diastolic;
    for (const auto& e : table) (e.implies == CodeImplies::Systolic ? systolic : diastolic).emplace_back(e.system, e.code);

    const std::size_t width = std::to_string(cfg.n_docs).size();
    auto pad = [&](std::size_t i) {
        std::string s = std::to_string(i);
        return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
    };
    const Date epoch = Date::parse("2015-01-01");

    for (std::size_t i = 0; i < cfg.n_docs; ++i) {
        Rng rng(derive_seed(cfg.seed, "synth.doc", i));
        const LabelClass cls = bernoulli(rng, cfg.positive_rate) ? LabelClass::HFrEF : LabelClass::HFpEF;
        const bool pos = cls == LabelClass::HFrEF;
        Injection inj;

        // Pieces of text in order; each piece remembers whether it is a gold span.
        struct Piece {
            std::string text;
            std::optional<SpanTag> tag;
        };
        std::vector<Piece> pieces;
        const std::size_t n_words = cfg.min_words + uniform_index(rng, cfg.max_words - cfg.min_words + 1);
        for (std::size_t w = 0; w < n_words; ++w) {
            const double r = uniform01(rng);
            if (r < 0.03) pieces.push_back({std::to_string(1 + uniform_index(rng, 200)), {}});
            else if (r < 0.05) pieces.push_back({filler[uniform_index(rng, filler.size())] + "-" + filler[uniform_index(rng, filler.size())], {}});
            else pieces.push_back({filler[uniform_index(rng, filler.size())], {}});
        }
        auto insert_at_random = [&](Piece p) {
            const std::size_t at = uniform_index(rng, pieces.size() + 1);
            pieces.insert(pieces.begin() + static_cast<std::ptrdiff_t>(at), std::move(p));
        };
        const auto& own = pos ? out.planted_positive : out.planted_negative;
        const auto& other = pos ? out.planted_negative : out.planted_positive;
        for (const auto& g : own)
            if (bernoulli(rng, cfg.signal_probability)) insert_at_random({g, SpanTag::Strong});
        for (const auto& g : other)
            if (bernoulli(rng, cfg.noise_rate)) insert_at_random({g, {}});
        if (bernoulli(rng, cfg.lvef_mention_rate)) {
            insert_at_random({detail::lvef_phrase(cls, rng), SpanTag::Giveaway});
            inj.text = true;
        }
        if (bernoulli(rng, cfg.dysfunction_rate)) {
            insert_at_random({pos ? "systolische dysfunctie" : "diastolische dysfunctie", SpanTag::Giveaway});
            inj.text = true;
        }
        if (bernoulli(rng, cfg.negated_cue_rate)) {
            // A negated cue for the other class, appended last so its negation
            // word cannot fall inside the window of a real cue.
            pieces.push_back({pos ? "geen diastolische dysfunctie" : "geen systolische dysfunctie", {}});
        }

        // Render with sentence and clause punctuation between pieces.
        std::string text;
        std::size_t cp = 0;
        std::vector<AnnotationSpan> spans;
        const std::string doc_id = "doc" + pad(i);
        std::size_t since_stop = 0;
        for (std::size_t k = 0; k < pieces.size(); ++k) {
            if (k > 0) {
                std::string sep = " ";
                if (since_stop >= 6 && uniform01(rng) < 0.15) {
                    sep = ". ";
                    since_stop = 0;
                } else if (uniform01(rng) < 0.06) {
                    sep = ", ";
                }
                text += sep;
                cp += sep.size();
            }
            if (pieces[k].tag) spans.push_back({doc_id, cp, cp + utf8_length(pieces[k].text), *pieces[k].tag});
            text += pieces[k].text;
            cp += utf8_length(pieces[k].text);
            ++since_stop;
        }
        text += ".";

        LabeledCase c;
        c.document.id = doc_id;
        c.document.patient_id = "pat" + pad(i);
        c.document.admission_date = epoch.plus_days(static_cast<int>(uniform_index(rng, 365 * 8)));
        c.document.discharge_date = c.document.admission_date.plus_days(1 + static_cast<int>(uniform_index(rng, 20)));
        c.document.text = text;
        c.document.site = bernoulli(rng, cfg.site_b_rate) ? Site::B : Site::A;
        if (bernoulli(rng, cfg.gold_rate)) {
            c.label = cls;
            c.source = LabelSource::Gold;
        }

        // Structured covariates with a mild class dependence.
        StructuredRecord s;
        auto maybe = [&](bool v) -> std::optional<bool> {
            if (bernoulli(rng, cfg.missing_rate)) return std::nullopt;
            return v;
        };
        auto maybe_band = [&](int v) -> std::optional<int> {
            if (bernoulli(rng, cfg.missing_rate)) return std::nullopt;
            return v;
        };
        s.age_gt_75 = maybe(bernoulli(rng, pos ? 0.35 : 0.55));
        s.gender_female = maybe(bernoulli(rng, pos ? 0.3 : 0.6));
        s.map_ge_90 = maybe(bernoulli(rng, pos ? 0.35 : 0.5));
        s.heart_rate_ge_70 = maybe(bernoulli(rng, pos ? 0.6 : 0.5));
        s.bmi_band = maybe_band(static_cast<int>(uniform_index(rng, 4)));
        s.egfr_band = maybe_band(static_cast<int>(std::min<std::uint64_t>(3, uniform_index(rng, 3) + (pos ? 1 : 0))));
        s.ischaemic_heart_disease = bernoulli(rng, pos ? 0.5 : 0.3);
        s.anaemia = bernoulli(rng, 0.25);
        s.atrial_fibrillation = bernoulli(rng, pos ? 0.35 : 0.5);
        s.diabetes = bernoulli(rng, 0.3);
        s.hypertension = bernoulli(rng, pos ? 0.5 : 0.7);
        s.copd = bernoulli(rng, 0.15);
        s.valvular_disease = bernoulli(rng, 0.2);
        s.cancer_3y = bernoulli(rng, 0.1);
        s.device_therapy = bernoulli(rng, pos ? 0.2 : 0.05);
        s.rasi = bernoulli(rng, pos ? 0.7 : 0.5);
        s.beta_blockers = bernoulli(rng, pos ? 0.8 : 0.6);
        s.mra = bernoulli(rng, pos ? 0.5 : 0.25);
        s.digoxin = bernoulli(rng, 0.1);
        s.loop_diuretics = bernoulli(rng, 0.7);
        c.structured = s;

        if (bernoulli(rng, cfg.code_rate)) {
            const auto& pool = pos ? systolic : diastolic;
            const std::size_t n_codes = 1 + uniform_index(rng, 2);
            for (std::size_t k = 0; k < n_codes; ++k) {
                const auto& [sys, code] = pool[uniform_index(rng, pool.size())];
                out.codes.push_back({doc_id, sys, code});
            }
            inj.code = true;
        }
        const Date adm = c.document.admission_date, dis = c.document.discharge_date;
        static const EchoMethod methods[] = {EchoMethod::Volumetric3D4D, EchoMethod::Biplane, EchoMethod::SinglePlane,
                                             EchoMethod::Teichholz};
        if (bernoulli(rng, cfg.echo_rate)) {
            const std::size_t n_echo = 1 + uniform_index(rng, 2);
            const int span_days = static_cast<int>(dis.days() - adm.days()) + 2 * kEchoWindowDays;
            for (std::size_t k = 0; k < n_echo; ++k) {
                EchoMeasurement e;
                e.patient_id = c.document.patient_id;
                e.date = adm.plus_days(-kEchoWindowDays + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(span_days + 1))));
                e.method = methods[uniform_index(rng, 4)];
                e.lvef_low = pos ? 15.0 + static_cast<double>(uniform_index(rng, 20)) : 50.0 + static_cast<double>(uniform_index(rng, 20));
                e.lvef_high = e.lvef_low + static_cast<double>(uniform_index(rng, 11));
                out.echo.push_back(e);
            }
            inj.echo = true;
        }
        if (bernoulli(rng, cfg.distractor_echo_rate)) {
            // Contradicting values that the rules must ignore: an unreliable
            // wide range, or a measurement outside the window.
            EchoMeasurement e;
            e.patient_id = c.document.patient_id;
            e.method = methods[uniform_index(rng, 4)];
            const double wrong = pos ? 60.0 : 20.0;
            if (bernoulli(rng, 0.5)) {
                e.date = adm;
                e.lvef_low = wrong;
                e.lvef_high = wrong + 15.0;
            } else {
                e.date = dis.plus_days(kEchoWindowDays + 1 + static_cast<int>(uniform_index(rng, 200)));
                e.lvef_low = e.lvef_high = wrong;
            }
            out.echo.push_back(e);
        }

        for (auto& sp : spans) out.annotations[doc_id][kTruthAnnotator].push_back(sp);
        out.cases.push_back(std::move(c));
        out.truth.push_back(cls);
        out.injections.push_back(inj);
    }
    return out;
}

inline void write_synth(const SynthOutput& s, const SynthConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_corpus(s.cases, dir / "corpus.jsonl");
    write_echo(s.echo, dir / "echo.jsonl");
    write_diagnoses(s.codes, dir / "diagnoses.jsonl");
    write_annotations(s.annotations, dir / "annotations.jsonl");
    std::vector<nlohmann::json> truth;
    for (std::size_t i = 0; i < s.cases.size(); ++i)
        truth.push_back({{"id", s.cases[i].document.id},
                         {"label", to_string(s.truth[i])},
                         {"code", s.injections[i].code},
                         {"echo", s.injections[i].echo},
                         {"text", s.injections[i].text}});
    write_file_atomic(dir / "truth.jsonl", to_jsonl(truth));
    const nlohmann::json planted = {{"HFrEF", s.planted_positive}, {"HFpEF", s.planted_negative}, {"config", cfg.to_json()}};
    write_file_atomic(dir / "planted.json", planted.dump(1) + "\n");
}

}  // namespace hfphen
