#include <gtest/gtest.h>

#include <map>
#include <string>
#include <vector>

#include "fixture.hpp"
#include "hfphen/eval.hpp"
#include "hfphen/models.hpp"
#include "hfphen/synth.hpp"

using namespace hfphen;
using hfphen::testing::temp_dir;

namespace {

std::map<std::string, std::vector<std::pair<CodeSystem, std::string>>> codes_by_doc(const SynthOutput& s) {
    std::map<std::string, std::vector<std::pair<CodeSystem, std::string>>> m;
    for (const auto& c : s.codes) m[c.id].emplace_back(c.system, c.code);
    return m;
}

double held_out_auc(const SynthConfig& cfg) {
    const auto s = generate(cfg);
    TrainingData train;
    std::vector<TokenSeq> test_docs;
    std::vector<int> test_labels;
    for (std::size_t i = 0; i < s.cases.size(); ++i) {
        const int y = s.truth[i] == LabelClass::HFrEF;
        if (i % 2 == 0) {
            train.docs.push_back(normalize(s.cases[i].document.text));
            train.structured.push_back(std::nullopt);
            train.labels.push_back(y);
        } else {
            test_docs.push_back(normalize(s.cases[i].document.text));
            test_labels.push_back(y);
        }
    }
    ModelConfig mc;
    mc.variant = Variant::TfidfLR;
    const auto model = train_text_model(train, mc, nullptr);
    std::vector<double> scores;
    for (const auto& d : test_docs) scores.push_back(model.probability(d, std::nullopt));
    return roc_auc(scores, test_labels);
}

}  // namespace

TEST(Synth, DeterministicBytes) {
    SynthConfig cfg;
    cfg.n_docs = 60;
    const auto a = temp_dir("synth_a"), b = temp_dir("synth_b");
    write_synth(generate(cfg), cfg, a);
    write_synth(generate(cfg), cfg, b);
    for (const char* f : {"corpus.jsonl", "echo.jsonl", "diagnoses.jsonl", "annotations.jsonl", "truth.jsonl", "planted.json"})
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    cfg.seed = 2;
    write_synth(generate(cfg), cfg, b);
    EXPECT_NE(read_file(a / "corpus.jsonl"), read_file(b / "corpus.jsonl"));
}

TEST(Synth, CorpusRoundTripsThroughLoader) {
    SynthConfig cfg;
    cfg.n_docs = 30;
    const auto s = generate(cfg);
    const auto dir = temp_dir("synth_rt");
    write_synth(s, cfg, dir);
    EXPECT_EQ(load_corpus(dir / "corpus.jsonl"), s.cases);
}

TEST(Synth, SilverLabelerRecoversInjectedClass) {
    SynthConfig cfg;
    cfg.n_docs = 600;
    cfg.lvef_mention_rate = 0.3;
    cfg.dysfunction_rate = 0.2;
    cfg.negated_cue_rate = 0.3;
    const auto s = generate(cfg);
    const auto table = default_code_table();
    const auto codes = codes_by_doc(s);
    std::size_t injected = 0;
    for (std::size_t i = 0; i < s.cases.size(); ++i) {
        const auto& doc = s.cases[i].document;
        auto it = codes.find(doc.id);
        const std::vector<std::pair<CodeSystem, std::string>> none;
        const auto label = assign_silver_label(doc, it == codes.end() ? none : it->second, s.echo, table);
        const auto& inj = s.injections[i];
        if (inj.code || inj.echo || inj.text) {
            ++injected;
            ASSERT_TRUE(label.has_value()) << doc.id;
            EXPECT_EQ(label->label, s.truth[i]) << doc.id << ": " << doc.text;
        } else {
            EXPECT_FALSE(label.has_value()) << doc.id << ": " << doc.text;
        }
    }
    EXPECT_GT(injected, 200u);
}

TEST(Synth, SpansSelectPlantedText) {
    SynthConfig cfg;
    cfg.n_docs = 100;
    cfg.planted_order = 2;
    cfg.lvef_mention_rate = 0.5;
    const auto s = generate(cfg);
    std::size_t strong = 0, giveaway = 0;
    for (std::size_t i = 0; i < s.cases.size(); ++i) {
        const auto& doc = s.cases[i].document;
        const auto cps = utf8_decode(doc.text);
        const auto& own = s.truth[i] == LabelClass::HFrEF ? s.planted_positive : s.planted_negative;
        auto it = s.annotations.find(doc.id);
        if (it == s.annotations.end()) continue;
        for (const auto& sp : it->second.at(kTruthAnnotator)) {
            ASSERT_LE(sp.end, cps.size());
            const auto piece = utf8_encode(std::u32string_view(cps).substr(sp.start, sp.end - sp.start));
            if (sp.tag == SpanTag::Strong) {
                ++strong;
                EXPECT_NE(std::find(own.begin(), own.end(), piece), own.end()) << piece;
            } else {
                ++giveaway;
                EXPECT_EQ(label_from_text(piece), s.truth[i]) << piece;
            }
        }
    }
    EXPECT_GT(strong, 100u);
    EXPECT_GT(giveaway, 10u);
}

TEST(Synth, LowLvefMentionIsReduced) {
    SynthConfig cfg;
    cfg.n_docs = 300;
    cfg.lvef_mention_rate = 1.0;
    cfg.dysfunction_rate = 0;
    cfg.negated_cue_rate = 0;
    const auto s = generate(cfg);
    for (std::size_t i = 0; i < s.cases.size(); ++i) {
        const auto mentions = extract_lvef_mentions(s.cases[i].document.text);
        ASSERT_FALSE(mentions.empty());
        for (const auto& m : mentions) {
            ASSERT_EQ(m.kind, LvefMention::Kind::Numeric);
            EXPECT_EQ(m.value_low < kReducedBelow, s.truth[i] == LabelClass::HFrEF);
        }
    }
}

TEST(Synth, FillerAvoidsTriggers) {
    SynthConfig cfg;
    cfg.n_docs = 100;
    cfg.lvef_mention_rate = 0;
    cfg.dysfunction_rate = 0;
    cfg.negated_cue_rate = 0;
    for (const auto& c : generate(cfg).cases) {
        EXPECT_TRUE(extract_lvef_mentions(c.document.text).empty());
        EXPECT_FALSE(label_from_text(c.document.text).has_value());
    }
}

TEST(Synth, SignalStrengthControlsSeparability) {
    SynthConfig cfg;
    cfg.n_docs = 400;
    cfg.lvef_mention_rate = 0;
    cfg.dysfunction_rate = 0;
    cfg.negated_cue_rate = 0;
    EXPECT_GT(held_out_auc(cfg), 0.9);
    cfg.signal_probability = 0;
    cfg.noise_rate = 0;
    const double auc = held_out_auc(cfg);
    EXPECT_GT(auc, 0.35);
    EXPECT_LT(auc, 0.65);
}

TEST(SynthConfig, Validation) {
    SynthConfig c;
    c.signal_probability = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.min_words = 50;
    c.max_words = 10;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.n_docs = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_THROW(SynthConfig::from_json({{"n_docz", 3}}), std::invalid_argument);
    EXPECT_THROW(SynthConfig::from_json({{"planted_order", 6}}), std::invalid_argument);
    const auto j = SynthConfig::from_json({{"n_docs", 12}, {"seed", 9}});
    EXPECT_EQ(j.n_docs, 12u);
    EXPECT_EQ(SynthConfig::from_json(j.to_json()).to_json(), j.to_json());
}

TEST(SynthConfig, ShippedConfigParses) {
    const auto j = nlohmann::json::parse(read_file(std::filesystem::path(HFPHEN_TEST_DATA) / ".." / ".." / "configs" / "synth.json"));
    EXPECT_NO_THROW(SynthConfig::from_json(j));
}
