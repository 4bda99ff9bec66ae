#pragma once

// Shared loaders and small oracles for the unit tests and the acceptance binary.

#include <filesystem>
#include <string>
#include <vector>

#include "hfphen/corpus.hpp"
#include "hfphen/silver_labeler.hpp"

namespace hfphen::testing {

struct LabelingCase {
    std::string name;
    Document document;
    std::vector<std::pair<CodeSystem, std::string>> codes;
    std::vector<EchoMeasurement> echo;
    LabelClass expected_label = LabelClass::Unspecified;
    LabelSource expected_source = LabelSource::None;
};

inline std::vector<LabelingCase> load_labeling_fixture(const std::filesystem::path& path) {
    std::vector<LabelingCase> out;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
        LabelingCase c;
        c.name = j.at("name").get<std::string>();
        nlohmann::json doc = j.at("document");
        c.document = case_from_json(doc).document;
        for (const auto& code : j.at("codes"))
            c.codes.emplace_back(parse_system(code.at("system").get<std::string>()), code.at("code").get<std::string>());
        for (const auto& e : j.at("echo")) c.echo.push_back(echo_from_json(e));
        c.expected_label = parse_label(j.at("expected").at("label").get<std::string>());
        c.expected_source = parse_source(j.at("expected").at("source").get<std::string>());
        out.push_back(std::move(c));
    });
    return out;
}

/// Label and source as assigned, with abstention mapped to (Unspecified, None).
inline SilverLabel label_or_none(const LabelingCase& c, const std::vector<CodeEntry>& table) {
    return assign_silver_label(c.document, c.codes, c.echo, table).value_or(SilverLabel{});
}

inline std::filesystem::path data_dir() { return HFPHEN_TEST_DATA; }

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("hfphen_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace hfphen::testing
