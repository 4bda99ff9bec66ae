#pragma once

// Random inputs for property tests: labeling cases and texts with LVEF mentions.

#include <string>
#include <vector>

#include "hfphen/corpus.hpp"
#include "hfphen/util.hpp"

namespace hfphen::testing {

inline std::string pick(Rng& rng, const std::vector<std::string>& v) { return v[uniform_index(rng, v.size())]; }

inline std::string random_lvef_number(Rng& rng) {
    std::string s = std::to_string(uniform_index(rng, 101));
    if (bernoulli(rng, 0.3)) s += "." + std::to_string(uniform_index(rng, 10));
    return s;
}

/// One trigger fragment, numeric or cue, in one of many surface forms.
inline std::string random_mention(Rng& rng) {
    static const std::vector<std::string> keys = {"LVEF", "lvef", "EF", "ef", "Ef", "ejection fraction",
                                                  "Ejection Fraction", "ejectiefractie", "EJECTIEFRACTIE", "LvEf"};
    static const std::vector<std::string> seps = {" ", "", ": ", ":", "  ", " :"};
    static const std::vector<std::string> cues = {"systolische dysfunctie", "diastolische dysfunctie",
                                                  "Systolic dysfunction", "DIASTOLIC DYSFUNCTION",
                                                  "geen systolische dysfunctie", "niet diastolische dysfunctie"};
    if (bernoulli(rng, 0.2)) return pick(rng, cues);
    std::string s = pick(rng, keys) + pick(rng, seps) + random_lvef_number(rng);
    if (bernoulli(rng, 0.3)) s += pick(rng, {"-", " - ", "-"}) + std::to_string(uniform_index(rng, 101)) + "." +
                                  std::to_string(uniform_index(rng, 10));
    if (bernoulli(rng, 0.4)) s += pick(rng, {"%", " %", "."});
    return s;
}

inline std::string random_filler(Rng& rng) {
    static const std::vector<std::string> words = {"patiënt", "opname", "echo", "toont", "matige", "functie",
                                                   "linker", "kamer", "NUMBER", "geen", "niet", "zonder",
                                                   "met", "42", "3.5", "enz.", "(", ")", "-", "graad", "II", "ß"};
    return pick(rng, words);
}

/// Filler with 1-4 injected mentions, sometimes glued to neighbours.
inline std::string random_text_with_mentions(Rng& rng) {
    std::string t;
    const std::size_t n_mentions = 1 + uniform_index(rng, 4);
    for (std::size_t m = 0; m < n_mentions; ++m) {
        const std::size_t n_fill = uniform_index(rng, 6);
        for (std::size_t k = 0; k < n_fill; ++k) t += random_filler(rng) + " ";
        t += random_mention(rng);
        t += bernoulli(rng, 0.8) ? " " : "";
    }
    return t;
}

struct RandomLabelingCase {
    Document doc;
    std::vector<std::pair<CodeSystem, std::string>> codes;
    std::vector<EchoMeasurement> echo;
};

inline RandomLabelingCase random_labeling_case(Rng& rng, std::size_t i) {
    static const std::vector<std::pair<CodeSystem, std::string>> code_pool = {
        {CodeSystem::ICD10CM, "I50.21"}, {CodeSystem::ICD10CM, "I50.31"}, {CodeSystem::ICD10CM, "I50.9"},
        {CodeSystem::SNOMEDCT, "417996009"}, {CodeSystem::SNOMEDCT, "418304008"}, {CodeSystem::SNOMEDCT, "84114007"},
        {CodeSystem::SNOMEDCT, "I50.21"}};
    static const EchoMethod methods[] = {EchoMethod::Volumetric3D4D, EchoMethod::Biplane, EchoMethod::SinglePlane,
                                         EchoMethod::Teichholz};
    RandomLabelingCase c;
    c.doc.id = "r" + std::to_string(i);
    c.doc.patient_id = "p" + std::to_string(i);
    c.doc.admission_date = Date::parse("2019-01-01").plus_days(static_cast<int>(uniform_index(rng, 700)));
    c.doc.discharge_date = c.doc.admission_date.plus_days(static_cast<int>(uniform_index(rng, 30)));
    c.doc.text = bernoulli(rng, 0.5) ? random_text_with_mentions(rng) : "opname wegens dyspnoe";
    const std::size_t n_codes = uniform_index(rng, 3);
    for (std::size_t k = 0; k < n_codes; ++k) c.codes.push_back(code_pool[uniform_index(rng, code_pool.size())]);
    const std::size_t n_echo = uniform_index(rng, 4);
    for (std::size_t k = 0; k < n_echo; ++k) {
        EchoMeasurement e;
        e.patient_id = bernoulli(rng, 0.9) ? c.doc.patient_id : "other";
        e.date = c.doc.admission_date.plus_days(static_cast<int>(uniform_index(rng, 260)) - 120);
        e.method = methods[uniform_index(rng, 4)];
        e.lvef_low = static_cast<double>(uniform_index(rng, 80) + 10);
        e.lvef_high = std::min(100.0, e.lvef_low + static_cast<double>(uniform_index(rng, 16)));
        c.echo.push_back(e);
    }
    return c;
}

}  // namespace hfphen::testing
