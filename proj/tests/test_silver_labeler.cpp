#include <gtest/gtest.h>

#include <cmath>

#include "fixture.hpp"
#include "generators.hpp"
#include "hfphen/silver_labeler.hpp"

using namespace hfphen;
using namespace hfphen::testing;

namespace {

std::vector<double> numeric_values(const std::vector<LvefMention>& ms) {
    std::vector<double> out;
    for (const auto& m : ms)
        if (m.kind == LvefMention::Kind::Numeric) out.push_back(m.value_low);
    return out;
}

Document doc_with_dates(const char* adm, const char* dis, std::string text = "tekst") {
    Document d;
    d.id = "d";
    d.patient_id = "p";
    d.admission_date = Date::parse(adm);
    d.discharge_date = Date::parse(dis);
    d.text = std::move(text);
    return d;
}

EchoMeasurement echo(const char* date, EchoMethod m, double lo, double hi, std::string pid = "p") {
    return {std::move(pid), Date::parse(date), m, lo, hi};
}

}  // namespace

TEST(ExtractLvef, PlainPercentage) {
    const auto ms = extract_lvef_mentions("LVEF 19%.");
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].kind, LvefMention::Kind::Numeric);
    EXPECT_EQ(ms[0].value_low, 19);
    EXPECT_EQ(ms[0].value_high, 19);
    EXPECT_EQ(ms[0].start, 0u);
    EXPECT_EQ(ms[0].end, 7u);
}

TEST(ExtractLvef, IntegerRangeFollowsTheExpressionLiterally) {
    // The second bound of a range needs a decimal part, so "35-40" stops at 35.
    const auto ms = extract_lvef_mentions("ejectiefractie: 35-40");
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].value_low, 35);
    EXPECT_EQ(ms[0].value_high, 35);
}

TEST(ExtractLvef, DecimalRange) {
    const auto ms = extract_lvef_mentions("ejectiefractie: 35-40.0");
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].value_low, 35);
    EXPECT_EQ(ms[0].value_high, 40);
    const auto sp = extract_lvef_mentions("EF 30.5 - 35.5");
    ASSERT_EQ(sp.size(), 1u);
    EXPECT_DOUBLE_EQ(sp[0].value_low, 30.5);
    EXPECT_DOUBLE_EQ(sp[0].value_high, 35.5);
}

TEST(ExtractLvef, NegatedCueIsDropped) {
    EXPECT_TRUE(extract_lvef_mentions("geen diastolische dysfunctie").empty());
    EXPECT_TRUE(extract_lvef_mentions("niet een systolische dysfunctie").empty());
    EXPECT_TRUE(extract_lvef_mentions("zonder duidelijke diastolische dysfunctie").empty());
}

TEST(ExtractLvef, NegationWindowIsThreeTokens) {
    const auto ms = extract_lvef_mentions("geen a b c systolische dysfunctie");
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].kind, LvefMention::Kind::SystolicDysfunction);
    EXPECT_TRUE(extract_lvef_mentions("geen a b systolische dysfunctie").empty());
}

TEST(ExtractLvef, OffsetsAreCodePoints) {
    const std::string text = "Patiënt: LVEF 30";
    const auto ms = extract_lvef_mentions(text);
    ASSERT_EQ(ms.size(), 1u);
    EXPECT_EQ(ms[0].start, 9u);
    EXPECT_EQ(ms[0].end, 16u);
}

TEST(LabelFromCodes, Examples) {
    const auto table = default_code_table();
    const std::vector<std::pair<CodeSystem, std::string>> sys = {{CodeSystem::ICD10CM, "I50.21"}};
    EXPECT_EQ(label_from_codes(sys, table).label, LabelClass::HFrEF);
    const std::vector<std::pair<CodeSystem, std::string>> dia = {{CodeSystem::SNOMEDCT, "418304008"}};
    EXPECT_EQ(label_from_codes(dia, table).label, LabelClass::HFpEF);
    const std::vector<std::pair<CodeSystem, std::string>> both = {{CodeSystem::ICD10CM, "I50.21"},
                                                                  {CodeSystem::ICD10CM, "I50.31"}};
    const auto r = label_from_codes(both, table);
    EXPECT_FALSE(r.label.has_value());
    EXPECT_TRUE(r.conflict);
}

TEST(LabelFromCodes, SystemMustMatch) {
    const auto table = default_code_table();
    const std::vector<std::pair<CodeSystem, std::string>> wrong = {{CodeSystem::SNOMEDCT, "I50.21"}};
    EXPECT_FALSE(label_from_codes(wrong, table).label.has_value());
}

TEST(SelectEcho, Examples) {
    const std::vector<EchoMeasurement> a = {echo("2020-01-01", EchoMethod::Teichholz, 55, 55),
                                            echo("2020-01-01", EchoMethod::Biplane, 38, 38)};
    EXPECT_EQ(select_echo_lvef(a), 38.0);
    const std::vector<EchoMeasurement> b = {echo("2020-01-01", EchoMethod::SinglePlane, 35, 50)};
    EXPECT_FALSE(select_echo_lvef(b).has_value());
    const std::vector<EchoMeasurement> c = {echo("2020-01-01", EchoMethod::Biplane, 40, 48)};
    EXPECT_EQ(select_echo_lvef(c), 40.0);
    const std::vector<EchoMeasurement> d = {echo("2020-01-01", EchoMethod::Biplane, 30, 40)};
    EXPECT_EQ(select_echo_lvef(d), 30.0);  // range exactly 10 is kept
}

TEST(LabelFromEcho, ThresholdRules) {
    const auto doc = doc_with_dates("2020-03-10", "2020-03-20");
    auto run = [&](std::vector<double> values) {
        std::vector<EchoMeasurement> es;
        int k = 0;
        for (double v : values) es.push_back(echo(("2020-03-1" + std::to_string(k++)).c_str(), EchoMethod::Biplane, v, v));
        return label_from_echo(doc, es);
    };
    EXPECT_EQ(run({38, 52}), LabelClass::HFrEF);
    EXPECT_EQ(run({52, 55}), LabelClass::HFpEF);
    EXPECT_FALSE(run({45}).has_value());
    EXPECT_EQ(run({50}), LabelClass::HFpEF);
    EXPECT_FALSE(run({}).has_value());
}

TEST(LabelFromEcho, WindowAndPatient) {
    const auto doc = doc_with_dates("2020-03-10", "2020-03-20");
    const std::vector<EchoMeasurement> other = {echo("2020-03-12", EchoMethod::Biplane, 30, 30, "q")};
    EXPECT_FALSE(label_from_echo(doc, other).has_value());
    const std::vector<EchoMeasurement> edge = {echo("2019-12-11", EchoMethod::Biplane, 30, 30)};
    EXPECT_EQ(label_from_echo(doc, edge), LabelClass::HFrEF);
    const std::vector<EchoMeasurement> before = {echo("2019-12-10", EchoMethod::Biplane, 30, 30)};
    EXPECT_FALSE(label_from_echo(doc, before).has_value());
    const std::vector<EchoMeasurement> end = {echo("2020-06-18", EchoMethod::Biplane, 30, 30)};
    EXPECT_EQ(label_from_echo(doc, end), LabelClass::HFrEF);
}

TEST(LabelFromEcho, AddingReducedValueKeepsHFrEF) {
    Rng rng(11);
    for (int it = 0; it < 500; ++it) {
        auto c = random_labeling_case(rng, static_cast<std::size_t>(it));
        if (label_from_echo(c.doc, c.echo) != LabelClass::HFrEF) continue;
        c.echo.push_back(echo(c.doc.admission_date.str().c_str(), EchoMethod::Teichholz, 20, 25));
        c.echo.back().patient_id = c.doc.patient_id;
        EXPECT_EQ(label_from_echo(c.doc, c.echo), LabelClass::HFrEF);
    }
}

TEST(LabelFromText, Examples) {
    EXPECT_EQ(label_from_text("LVEF 19%"), LabelClass::HFrEF);
    EXPECT_EQ(label_from_text("diastolische dysfunctie graad II"), LabelClass::HFpEF);
    EXPECT_FALSE(label_from_text("ejectiefractie 45").has_value());
    EXPECT_EQ(label_from_text("LVEF 55 en systolische dysfunctie"), LabelClass::HFpEF);  // numbers decide first
    EXPECT_EQ(label_from_text("EF 45, systolische dysfunctie"), LabelClass::HFrEF);
}

TEST(LabelFromText, CaseInsensitiveTriggers) {
    for (const char* t : {"lvef 19", "LVEF 19", "LvEf 19", "EJECTION FRACTION 19", "Ejectiefractie 19"})
        EXPECT_EQ(label_from_text(t), LabelClass::HFrEF) << t;
    EXPECT_EQ(label_from_text("SYSTOLISCHE DYSFUNCTIE"), LabelClass::HFrEF);
    EXPECT_EQ(label_from_text("Diastolic Dysfunction"), LabelClass::HFpEF);
}

TEST(AssignSilver, Precedence) {
    const auto table = default_code_table();
    auto doc = doc_with_dates("2020-03-10", "2020-03-20", "LVEF 55");
    const std::vector<std::pair<CodeSystem, std::string>> sys = {{CodeSystem::ICD10CM, "I50.21"}};
    const std::vector<EchoMeasurement> pres = {echo("2020-03-12", EchoMethod::Biplane, 60, 60)};
    auto r = assign_silver_label(doc, sys, pres, table);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->label, LabelClass::HFrEF);
    EXPECT_EQ(r->source, LabelSource::Code);

    const std::vector<EchoMeasurement> red = {echo("2020-03-12", EchoMethod::Biplane, 38, 38)};
    r = assign_silver_label(doc, {}, red, table);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->label, LabelClass::HFrEF);
    EXPECT_EQ(r->source, LabelSource::Echo);

    r = assign_silver_label(doc, {}, {}, table);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->label, LabelClass::HFpEF);
    EXPECT_EQ(r->source, LabelSource::Text);
}

TEST(AssignSilver, GoldenFixture) {
    const auto table = default_code_table();
    const auto cases = load_labeling_fixture(data_dir() / "labeling_fixture.jsonl");
    ASSERT_EQ(cases.size(), 40u);
    for (const auto& c : cases) {
        const auto got = label_or_none(c, table);
        EXPECT_EQ(got.label, c.expected_label) << c.name;
        EXPECT_EQ(got.source, c.expected_source) << c.name;
    }
}

TEST(AssignSilver, FixtureCoversEveryCode) {
    const auto cases = load_labeling_fixture(data_dir() / "labeling_fixture.jsonl");
    for (const auto& e : default_code_table()) {
        bool found = false;
        for (const auto& c : cases)
            if (c.codes.size() == 1 && c.codes[0].first == e.system && c.codes[0].second == e.code) found = true;
        EXPECT_TRUE(found) << e.code;
    }
}

TEST(AssignSilver, FirstNonAbstainingStageOnRandomCases) {
    const auto table = default_code_table();
    Rng rng(5);
    for (std::size_t i = 0; i < 2000; ++i) {
        const auto c = random_labeling_case(rng, i);
        const auto got = assign_silver_label(c.doc, c.codes, c.echo, table);
        std::optional<SilverLabel> want;
        if (auto l = label_from_codes(c.codes, table).label) want = SilverLabel{*l, LabelSource::Code};
        else if (auto e = label_from_echo(c.doc, c.echo)) want = SilverLabel{*e, LabelSource::Echo};
        else if (auto t = label_from_text(c.doc.text)) want = SilverLabel{*t, LabelSource::Text};
        ASSERT_EQ(got.has_value(), want.has_value());
        if (got) {
            EXPECT_EQ(got->label, want->label);
            EXPECT_EQ(got->source, want->source);
        }
    }
}

TEST(MaskLvef, Examples) {
    const auto m = mask_lvef("LVEF 19%.");
    EXPECT_EQ(m, "EFMASK%.");
    EXPECT_TRUE(numeric_values(extract_lvef_mentions(m)).empty());
    EXPECT_EQ(mask_lvef("geen bijzonderheden"), "geen bijzonderheden");
    EXPECT_EQ(mask_lvef("systolische dysfunctie en geen diastolische dysfunctie"),
              "EFMASK en geen diastolische dysfunctie");
}

TEST(MaskLvef, RandomTextsAreCleanAndIdempotent) {
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        const auto t = random_text_with_mentions(rng);
        const auto m = mask_lvef(t);
        EXPECT_TRUE(numeric_values(extract_lvef_mentions(m)).empty()) << t;
        EXPECT_EQ(mask_lvef(m), m) << t;
    }
}

TEST(MissingnessAudit, FairCoinIsNearHalf) {
    Rng rng(3);
    std::vector<std::pair<StructuredRecord, bool>> recs;
    for (int i = 0; i < 2000; ++i) {
        StructuredRecord r;
        r.age_gt_75 = bernoulli(rng, 0.5);
        r.gender_female = bernoulli(rng, 0.5);
        if (bernoulli(rng, 0.8)) r.bmi_band = static_cast<int>(uniform_index(rng, 4));
        r.diabetes = bernoulli(rng, 0.3);
        recs.emplace_back(r, bernoulli(rng, 0.5));
    }
    const double auc = missingness_audit(recs, 5, 1);
    EXPECT_GE(auc, 0.45);
    EXPECT_LE(auc, 0.55);
}

TEST(MissingnessAudit, DeterministicDependence) {
    Rng rng(4);
    std::vector<std::pair<StructuredRecord, bool>> recs;
    for (int i = 0; i < 400; ++i) {
        StructuredRecord r;
        r.age_gt_75 = bernoulli(rng, 0.5);
        r.diabetes = bernoulli(rng, 0.3);
        recs.emplace_back(r, *r.age_gt_75);
    }
    EXPECT_GE(missingness_audit(recs, 5, 1), 0.9);
    std::vector<std::pair<StructuredRecord, bool>> one(5, {StructuredRecord{}, true});
    EXPECT_THROW(missingness_audit(one, 5, 1), std::invalid_argument);
}

TEST(Divergence, Examples) {
    const std::vector<double> same = {10, 30}, ref = {0.25, 0.75};
    EXPECT_NEAR(label_distribution_divergence(same, ref), 0.0, 1e-15);
    const std::vector<double> a = {5, 0}, b = {0.0, 1.0};
    EXPECT_NEAR(label_distribution_divergence(a, b), 1.0, 1e-15);
    // p = (0.5, 0.5), q = (0.25, 0.75), m = (0.375, 0.625)
    const std::vector<double> p = {1, 1};
    const double hand = 0.5 * (0.5 * std::log2(0.5 / 0.375) + 0.5 * std::log2(0.5 / 0.625)) +
                        0.5 * (0.25 * std::log2(0.25 / 0.375) + 0.75 * std::log2(0.75 / 0.625));
    EXPECT_NEAR(label_distribution_divergence(p, ref), hand, 1e-15);
    const std::vector<double> zero = {0, 0};
    EXPECT_THROW(label_distribution_divergence(zero, ref), std::invalid_argument);
}
