#pragma once

// Core record types and line-delimited JSON I/O for hospitalizations,
// echocardiography results, diagnosis codes and span annotations.
//
// Character offsets everywhere are Unicode code-point offsets into the
// UTF-8 letter text.

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "util.hpp"

namespace hfphen {

using json = nlohmann::json;

/// Error raised by the loaders; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

struct Date {
    std::chrono::year_month_day ymd{};

    static Date parse(std::string_view s) {
        int y = 0;
        unsigned m = 0, d = 0;
        char tail = 0;
        const std::string str(s);
        if (str.size() != 10 || std::sscanf(str.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || str[4] != '-' ||
            str[7] != '-')
            throw std::invalid_argument("not an ISO-8601 date: '" + str + "'");
        Date out{std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}};
        if (!out.ymd.ok()) throw std::invalid_argument("invalid calendar date: '" + str + "'");
        return out;
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()));
        return buf;
    }

    std::int64_t days() const { return std::chrono::sys_days{ymd}.time_since_epoch().count(); }

    Date plus_days(std::int64_t n) const {
        return Date{std::chrono::year_month_day{std::chrono::sys_days{ymd} + std::chrono::days{n}}};
    }

    friend bool operator==(const Date& a, const Date& b) { return a.ymd == b.ymd; }
    friend auto operator<=>(const Date& a, const Date& b) { return a.days() <=> b.days(); }
};

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Site { A, B };
enum class LabelClass { HFrEF, HFpEF, Unspecified };
enum class LabelSource { Gold, Code, Echo, Text, None };
enum class EchoMethod { Volumetric3D4D, Biplane, SinglePlane, Teichholz };
enum class SpanTag { Giveaway, Strong, Opposite };
enum class CodeSystem { ICD10CM, SNOMEDCT };
enum class CodeImplies { Systolic, Diastolic };

inline std::string to_string(Site s) { return s == Site::A ? "A" : "B"; }
inline std::string to_string(LabelClass c) {
    switch (c) {
        case LabelClass::HFrEF: return "HFrEF";
        case LabelClass::HFpEF: return "HFpEF";
        default: return "Unspecified";
    }
}
inline std::string to_string(LabelSource s) {
    switch (s) {
        case LabelSource::Gold: return "Gold";
        case LabelSource::Code: return "Code";
        case LabelSource::Echo: return "Echo";
        case LabelSource::Text: return "Text";
        default: return "None";
    }
}
inline std::string to_string(EchoMethod m) {
    switch (m) {
        case EchoMethod::Volumetric3D4D: return "Volumetric3D4D";
        case EchoMethod::Biplane: return "Biplane";
        case EchoMethod::SinglePlane: return "SinglePlane";
        default: return "Teichholz";
    }
}
inline std::string to_string(SpanTag t) {
    switch (t) {
        case SpanTag::Giveaway: return "Giveaway";
        case SpanTag::Strong: return "Strong";
        default: return "Opposite";
    }
}
inline std::string to_string(CodeSystem s) { return s == CodeSystem::ICD10CM ? "ICD10CM" : "SNOMEDCT"; }
inline std::string to_string(CodeImplies i) { return i == CodeImplies::Systolic ? "Systolic" : "Diastolic"; }

namespace detail {
template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& values, const char* what) {
    for (E v : values)
        if (to_string(v) == s) return v;
    throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}
}  // namespace detail

inline Site parse_site(std::string_view s) {
    return detail::parse_enum(s, std::array{Site::A, Site::B}, "site");
}
inline LabelClass parse_label(std::string_view s) {
    return detail::parse_enum(s, std::array{LabelClass::HFrEF, LabelClass::HFpEF, LabelClass::Unspecified}, "label");
}
inline LabelSource parse_source(std::string_view s) {
    return detail::parse_enum(s, std::array{LabelSource::Gold, LabelSource::Code, LabelSource::Echo, LabelSource::Text,
                                            LabelSource::None},
                              "source");
}
inline EchoMethod parse_method(std::string_view s) {
    return detail::parse_enum(
        s, std::array{EchoMethod::Volumetric3D4D, EchoMethod::Biplane, EchoMethod::SinglePlane, EchoMethod::Teichholz},
        "echo method");
}
inline SpanTag parse_tag(std::string_view s) {
    return detail::parse_enum(s, std::array{SpanTag::Giveaway, SpanTag::Strong, SpanTag::Opposite}, "tag");
}
inline CodeSystem parse_system(std::string_view s) {
    return detail::parse_enum(s, std::array{CodeSystem::ICD10CM, CodeSystem::SNOMEDCT}, "code system");
}
inline CodeImplies parse_implies(std::string_view s) {
    return detail::parse_enum(s, std::array{CodeImplies::Systolic, CodeImplies::Diastolic}, "implies");
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct Document {
    std::string id;
    std::string patient_id;
    Date admission_date;
    Date discharge_date;
    std::string text;  // UTF-8
    Site site = Site::A;

    friend bool operator==(const Document&, const Document&) = default;
};

/// The 20 covariates used by the structured-data baselines. The six
/// demographic/vital variables are nullable; comorbidities and medications
/// are never missing (an absent code counts as negative).
struct StructuredRecord {
    static constexpr int kBmiBands = 4;
    static constexpr int kEgfrBands = 4;

    std::optional<bool> age_gt_75;
    std::optional<bool> gender_female;
    std::optional<bool> map_ge_90;
    std::optional<bool> heart_rate_ge_70;
    std::optional<int> bmi_band;   // 0: <=18.5, 1: (18.5,25], 2: (25,30), 3: >=30
    std::optional<int> egfr_band;  // 0: >=90, 1: (60,90), 2: (30,60], 3: <=30

    bool ischaemic_heart_disease = false;
    bool anaemia = false;
    bool atrial_fibrillation = false;
    bool diabetes = false;
    bool hypertension = false;
    bool copd = false;
    bool valvular_disease = false;
    bool cancer_3y = false;
    bool device_therapy = false;

    bool rasi = false;
    bool beta_blockers = false;
    bool mra = false;
    bool digoxin = false;
    bool loop_diuretics = false;

    static constexpr std::size_t kWidth = 20;
    static constexpr std::size_t kNullable = 6;

    static const std::array<const char*, kWidth>& keys() {
        static const std::array<const char*, kWidth> k = {
            "age_gt_75",    "gender_female", "map_ge_90",          "heart_rate_ge_70", "bmi_band",
            "egfr_band",    "ischaemic_heart_disease", "anaemia",  "atrial_fibrillation", "diabetes",
            "hypertension", "copd",          "valvular_disease",   "cancer_3y",        "device_therapy",
            "rasi",         "beta_blockers", "mra",                "digoxin",          "loop_diuretics"};
        return k;
    }

    /// Values in key order; missing entries are nullopt.
    std::array<std::optional<double>, kWidth> values() const {
        auto b = [](std::optional<bool> v) -> std::optional<double> {
            return v ? std::optional<double>(*v ? 1.0 : 0.0) : std::nullopt;
        };
        auto i = [](std::optional<int> v) -> std::optional<double> {
            return v ? std::optional<double>(static_cast<double>(*v)) : std::nullopt;
        };
        auto f = [](bool v) -> std::optional<double> { return v ? 1.0 : 0.0; };
        return {b(age_gt_75),         b(gender_female), b(map_ge_90),        b(heart_rate_ge_70), i(bmi_band),
                i(egfr_band),         f(ischaemic_heart_disease), f(anaemia), f(atrial_fibrillation), f(diabetes),
                f(hypertension),      f(copd),          f(valvular_disease), f(cancer_3y),        f(device_therapy),
                f(rasi),              f(beta_blockers), f(mra),              f(digoxin),          f(loop_diuretics)};
    }

    void validate() const {
        if (bmi_band && (*bmi_band < 0 || *bmi_band >= kBmiBands)) throw std::invalid_argument("bmi_band out of range");
        if (egfr_band && (*egfr_band < 0 || *egfr_band >= kEgfrBands))
            throw std::invalid_argument("egfr_band out of range");
    }

    friend bool operator==(const StructuredRecord&, const StructuredRecord&) = default;
};

struct LabeledCase {
    Document document;
    LabelClass label = LabelClass::Unspecified;
    LabelSource source = LabelSource::None;
    std::optional<StructuredRecord> structured;

    friend bool operator==(const LabeledCase&, const LabeledCase&) = default;
};

struct EchoMeasurement {
    std::string patient_id;
    Date date;
    EchoMethod method = EchoMethod::Teichholz;
    double lvef_low = 0;
    double lvef_high = 0;

    friend bool operator==(const EchoMeasurement&, const EchoMeasurement&) = default;
};

struct AnnotationSpan {
    std::string doc_id;
    std::size_t start = 0;
    std::size_t end = 0;
    SpanTag tag = SpanTag::Strong;

    friend bool operator==(const AnnotationSpan&, const AnnotationSpan&) = default;
};

struct CodeEntry {
    CodeSystem system = CodeSystem::ICD10CM;
    std::string code;
    CodeImplies implies = CodeImplies::Systolic;
};

/// One diagnosis/past-history/problem-list code attached to a hospitalization.
struct DiagnosisCode {
    std::string id;  // hospitalization id
    CodeSystem system = CodeSystem::ICD10CM;
    std::string code;
};

// ---------------------------------------------------------------------------
// JSON conversion
// ---------------------------------------------------------------------------

inline json to_json(const StructuredRecord& r) {
    json j = json::object();
    const auto vals = r.values();
    const auto& keys = StructuredRecord::keys();
    for (std::size_t k = 0; k < StructuredRecord::kWidth; ++k) {
        if (!vals[k]) {
            j[keys[k]] = nullptr;
        } else if (k == 4 || k == 5) {
            j[keys[k]] = static_cast<int>(*vals[k]);
        } else {
            j[keys[k]] = *vals[k] != 0.0;
        }
    }
    return j;
}

inline StructuredRecord structured_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("structured: expected object");
    StructuredRecord r;
    auto opt_bool = [&](const char* key) -> std::optional<bool> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        if (!j[key].is_boolean()) throw std::invalid_argument(std::string("structured.") + key + ": expected boolean");
        return j[key].get<bool>();
    };
    auto opt_int = [&](const char* key) -> std::optional<int> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        if (!j[key].is_number_integer()) throw std::invalid_argument(std::string("structured.") + key + ": expected integer");
        return j[key].get<int>();
    };
    auto req_bool = [&](const char* key) -> bool {
        if (!j.contains(key) || j[key].is_null()) return false;  // absent code = negative
        if (!j[key].is_boolean()) throw std::invalid_argument(std::string("structured.") + key + ": expected boolean");
        return j[key].get<bool>();
    };
    r.age_gt_75 = opt_bool("age_gt_75");
    r.gender_female = opt_bool("gender_female");
    r.map_ge_90 = opt_bool("map_ge_90");
    r.heart_rate_ge_70 = opt_bool("heart_rate_ge_70");
    r.bmi_band = opt_int("bmi_band");
    r.egfr_band = opt_int("egfr_band");
    r.ischaemic_heart_disease = req_bool("ischaemic_heart_disease");
    r.anaemia = req_bool("anaemia");
    r.atrial_fibrillation = req_bool("atrial_fibrillation");
    r.diabetes = req_bool("diabetes");
    r.hypertension = req_bool("hypertension");
    r.copd = req_bool("copd");
    r.valvular_disease = req_bool("valvular_disease");
    r.cancer_3y = req_bool("cancer_3y");
    r.device_therapy = req_bool("device_therapy");
    r.rasi = req_bool("rasi");
    r.beta_blockers = req_bool("beta_blockers");
    r.mra = req_bool("mra");
    r.digoxin = req_bool("digoxin");
    r.loop_diuretics = req_bool("loop_diuretics");
    r.validate();
    return r;
}

inline json to_json(const LabeledCase& c) {
    const auto& d = c.document;
    json j = {{"id", d.id},
              {"patient_id", d.patient_id},
              {"admission_date", d.admission_date.str()},
              {"discharge_date", d.discharge_date.str()},
              {"text", d.text},
              {"site", to_string(d.site)},
              {"label", to_string(c.label)},
              {"source", to_string(c.source)}};
    if (c.structured) j["structured"] = to_json(*c.structured);
    return j;
}

namespace detail {
inline const json& field(const json& j, const char* key) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
    return j[key];
}
inline std::string string_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}
inline double number_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}
inline std::size_t index_field(const json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw std::invalid_argument(std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}
inline Date date_field(const json& j, const char* key) {
    try {
        return Date::parse(string_field(j, key));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("field '") + key + "': " + e.what());
    }
}
}  // namespace detail

inline LabeledCase case_from_json(const json& j) {
    using namespace detail;
    LabeledCase c;
    auto& d = c.document;
    d.id = string_field(j, "id");
    if (d.id.empty()) throw std::invalid_argument("field 'id' must be non-empty");
    d.patient_id = string_field(j, "patient_id");
    d.admission_date = date_field(j, "admission_date");
    d.discharge_date = date_field(j, "discharge_date");
    if (d.discharge_date < d.admission_date)
        throw std::invalid_argument("field 'discharge_date' precedes admission_date");
    d.text = string_field(j, "text");
    if (d.text.empty()) throw std::invalid_argument("field 'text' must be non-empty");
    try {
        d.site = parse_site(string_field(j, "site"));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("field 'site': ") + e.what());
    }
    if (j.contains("label") && !j["label"].is_null()) {
        try {
            c.label = parse_label(string_field(j, "label"));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("field 'label': ") + e.what());
        }
    }
    if (j.contains("source") && !j["source"].is_null()) {
        try {
            c.source = parse_source(string_field(j, "source"));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("field 'source': ") + e.what());
        }
    } else {
        c.source = c.label == LabelClass::Unspecified ? LabelSource::None : LabelSource::Gold;
    }
    if (c.source == LabelSource::None && c.label != LabelClass::Unspecified)
        throw std::invalid_argument("field 'source': None requires label Unspecified");
    if (c.label == LabelClass::Unspecified && c.source != LabelSource::None && c.source != LabelSource::Gold)
        throw std::invalid_argument("field 'source': silver source requires a specified label");
    if (j.contains("structured") && !j["structured"].is_null()) {
        try {
            c.structured = structured_from_json(j["structured"]);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("field 'structured': ") + e.what());
        }
    }
    return c;
}

inline json to_json(const EchoMeasurement& e) {
    return {{"patient_id", e.patient_id},
            {"date", e.date.str()},
            {"method", to_string(e.method)},
            {"lvef_low", e.lvef_low},
            {"lvef_high", e.lvef_high}};
}

inline EchoMeasurement echo_from_json(const json& j) {
    using namespace detail;
    EchoMeasurement e;
    e.patient_id = string_field(j, "patient_id");
    e.date = date_field(j, "date");
    e.method = parse_method(string_field(j, "method"));
    e.lvef_low = number_field(j, "lvef_low");
    e.lvef_high = number_field(j, "lvef_high");
    if (e.lvef_low < 0 || e.lvef_high > 100 || e.lvef_low > e.lvef_high)
        throw std::invalid_argument("fields 'lvef_low'/'lvef_high' must satisfy 0 <= low <= high <= 100");
    return e;
}

// ---------------------------------------------------------------------------
// JSONL plumbing
// ---------------------------------------------------------------------------

/// Calls fn(json, line_number) for each non-blank line; wraps errors with the line number.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string(), lineno, std::string("malformed JSON: ") + e.what());
        }
        try {
            fn(j, lineno);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(path.string(), lineno, e.what());
        }
    }
}

inline std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump(-1, ' ', false, json::error_handler_t::strict);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loaders and writers
// ---------------------------------------------------------------------------

/// Loads `corpus.jsonl`. Result is sorted by id; duplicate ids are an error.
inline std::vector<LabeledCase> load_corpus(const std::filesystem::path& path) {
    std::vector<LabeledCase> cases;
    std::map<std::string, std::size_t> seen;
    for_each_jsonl(path, [&](const json& j, std::size_t lineno) {
        auto c = case_from_json(j);
        if (auto it = seen.find(c.document.id); it != seen.end())
            throw ParseError(path.string(), lineno,
                             "duplicate id '" + c.document.id + "' (first on line " + std::to_string(it->second) + ")");
        seen.emplace(c.document.id, lineno);
        cases.push_back(std::move(c));
    });
    std::sort(cases.begin(), cases.end(),
              [](const LabeledCase& a, const LabeledCase& b) { return a.document.id < b.document.id; });
    return cases;
}

inline void write_corpus(const std::vector<LabeledCase>& cases, const std::filesystem::path& path) {
    std::vector<const LabeledCase*> sorted;
    for (const auto& c : cases) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(),
              [](const LabeledCase* a, const LabeledCase* b) { return a->document.id < b->document.id; });
    std::vector<json> rows;
    for (const auto* c : sorted) rows.push_back(to_json(*c));
    write_file_atomic(path, to_jsonl(rows));
}

inline std::vector<EchoMeasurement> load_echo(const std::filesystem::path& path) {
    std::vector<EchoMeasurement> out;
    for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(echo_from_json(j)); });
    return out;
}

inline void write_echo(const std::vector<EchoMeasurement>& echos, const std::filesystem::path& path) {
    std::vector<json> rows;
    for (const auto& e : echos) rows.push_back(to_json(e));
    write_file_atomic(path, to_jsonl(rows));
}

inline std::vector<DiagnosisCode> load_diagnoses(const std::filesystem::path& path) {
    std::vector<DiagnosisCode> out;
    for_each_jsonl(path, [&](const json& j, std::size_t) {
        out.push_back({detail::string_field(j, "id"), parse_system(detail::string_field(j, "system")),
                       detail::string_field(j, "code")});
    });
    return out;
}

inline void write_diagnoses(const std::vector<DiagnosisCode>& codes, const std::filesystem::path& path) {
    std::vector<json> rows;
    for (const auto& c : codes) rows.push_back({{"id", c.id}, {"system", to_string(c.system)}, {"code", c.code}});
    write_file_atomic(path, to_jsonl(rows));
}

/// doc_id -> annotator -> spans (sorted by start).
using AnnotationSet = std::map<std::string, std::map<std::string, std::vector<AnnotationSpan>>>;

/// Loads `annotations.jsonl`, validating offsets against the loaded documents.
inline AnnotationSet load_annotations(const std::filesystem::path& path, const std::vector<LabeledCase>& corpus) {
    std::map<std::string, std::size_t> lengths;
    for (const auto& c : corpus) lengths[c.document.id] = utf8_length(c.document.text);
    AnnotationSet out;
    for_each_jsonl(path, [&](const json& j, std::size_t) {
        AnnotationSpan s;
        s.doc_id = detail::string_field(j, "doc_id");
        const auto annotator = detail::string_field(j, "annotator");
        s.start = detail::index_field(j, "start");
        s.end = detail::index_field(j, "end");
        s.tag = parse_tag(detail::string_field(j, "tag"));
        auto it = lengths.find(s.doc_id);
        if (it == lengths.end()) throw std::invalid_argument("unknown doc_id '" + s.doc_id + "'");
        if (s.start >= s.end || s.end > it->second)
            throw std::invalid_argument("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                        ") out of bounds for document of length " + std::to_string(it->second));
        out[s.doc_id][annotator].push_back(s);
    });
    for (auto& [doc, by_annotator] : out) {
        for (auto& [annotator, spans] : by_annotator) {
            std::sort(spans.begin(), spans.end(),
                      [](const AnnotationSpan& a, const AnnotationSpan& b) { return a.start < b.start; });
            for (std::size_t i = 1; i < spans.size(); ++i)
                if (spans[i].start < spans[i - 1].end)
                    throw ParseError(path.string(), 0,
                                     "overlapping spans for annotator '" + annotator + "' in document '" + doc + "'");
        }
    }
    return out;
}

inline void write_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    std::vector<json> rows;
    for (const auto& [doc, by_annotator] : set)
        for (const auto& [annotator, spans] : by_annotator)
            for (const auto& s : spans)
                rows.push_back({{"doc_id", s.doc_id},
                                {"annotator", annotator},
                                {"start", s.start},
                                {"end", s.end},
                                {"tag", to_string(s.tag)}});
    write_file_atomic(path, to_jsonl(rows));
}

// ---------------------------------------------------------------------------
// Code tables
// ---------------------------------------------------------------------------

/// ICD-10-CM and SNOMED-CT codes that specify systolic or diastolic HF.
inline const std::string& default_codes_csv() {
    static const std::string csv =
        "system,code,implies\n"
        "ICD10CM,I50.20,Systolic\n"
        "ICD10CM,I50.21,Systolic\n"
        "ICD10CM,I50.22,Systolic\n"
        "ICD10CM,I50.23,Systolic\n"
        "ICD10CM,I50.30,Diastolic\n"
        "ICD10CM,I50.31,Diastolic\n"
        "ICD10CM,I50.32,Diastolic\n"
        "ICD10CM,I50.33,Diastolic\n"
        "SNOMEDCT,417996009,Systolic\n"
        "SNOMEDCT,418304008,Diastolic\n"
        "SNOMEDCT,426263006,Systolic\n"
        "SNOMEDCT,441481004,Systolic\n"
        "SNOMEDCT,441530006,Diastolic\n"
        "SNOMEDCT,443254009,Systolic\n"
        "SNOMEDCT,443253003,Systolic\n"
        "SNOMEDCT,443343001,Diastolic\n"
        "SNOMEDCT,443344007,Diastolic\n"
        "SNOMEDCT,120851000119104,Systolic\n"
        "SNOMEDCT,120861000119102,Systolic\n"
        "SNOMEDCT,120871000119108,Systolic\n"
        "SNOMEDCT,120881000119106,Diastolic\n"
        "SNOMEDCT,120891000119109,Diastolic\n"
        "SNOMEDCT,120901000119108,Diastolic\n"
        "SNOMEDCT,15629641000119107,Systolic\n"
        "SNOMEDCT,15629741000119102,Systolic\n";
    return csv;
}

inline std::vector<CodeEntry> parse_codes_csv(std::string_view text, const std::string& origin = "codes.csv") {
    std::vector<CodeEntry> out;
    std::set<std::pair<CodeSystem, std::string>> seen;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        const auto line = trim(raw);
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (lineno == 1 && cols.size() == 3 && trim(cols[0]) == "system") continue;
        if (cols.size() != 3) throw ParseError(origin, lineno, "expected 3 columns system,code,implies");
        try {
            CodeEntry e{parse_system(trim(cols[0])), std::string(trim(cols[1])), parse_implies(trim(cols[2]))};
            if (!seen.emplace(e.system, e.code).second)
                throw std::invalid_argument("duplicate code '" + e.code + "' for system " + to_string(e.system));
            out.push_back(std::move(e));
        } catch (const std::invalid_argument& e) {
            throw ParseError(origin, lineno, e.what());
        }
    }
    return out;
}

inline std::vector<CodeEntry> default_code_table() { return parse_codes_csv(default_codes_csv()); }

inline std::vector<CodeEntry> load_codes(const std::filesystem::path& path) {
    return parse_codes_csv(read_file(path), path.string());
}

}  // namespace hfphen
