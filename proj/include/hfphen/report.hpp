#pragma once

// Self-contained HTML rendering of local explanations, with a JSON sidecar
// of the per-token scores.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "agreement.hpp"
#include "corpus.hpp"
#include "explainers.hpp"
#include "features.hpp"
#include "json.hpp"
#include "util.hpp"

namespace hfphen {

inline std::string html_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

inline const char* tag_css_class(TokenTag t) {
    switch (t) {
        case TokenTag::Giveaway: return "giveaway";
        case TokenTag::Strong: return "strong";
        case TokenTag::Opposite: return "opposite";
        default: return "";
    }
}

/// Sidecar path for a report: `report.html` -> `report.scores.json`.
inline std::filesystem::path report_sidecar(const std::filesystem::path& html) {
    auto p = html;
    p.replace_extension(".scores.json");
    return p;
}

/// Renders every explanation whose document is in `cases`, in the order
/// given. Scores must line up with the document's normalized tokens.
inline void write_report(const std::vector<LabeledCase>& cases, const std::vector<LocalExplanation>& explanations,
                         const std::filesystem::path& path) {
    std::map<std::string, const LabeledCase*> by_id;
    for (const auto& c : cases) by_id[c.document.id] = &c;

    std::string html =
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Explanations</title>\n<style>\n"
        "body{font-family:sans-serif;max-width:60em;margin:2em auto}\n"
        ".doc{border-top:1px solid #ccc;padding:1em 0}\n.text{white-space:pre-wrap;line-height:1.6}\n"
        ".hl.giveaway{background:#2e7d32;color:#fff}\n.hl.strong{background:#a5d6a7}\n.hl.opposite{background:#ef9a9a}\n"
        "</style></head><body>\n<h1>Local explanations</h1>\n"
        "<p><span class=\"legend giveaway\">giveaway</span> <span class=\"legend strong\">strong</span> "
        "<span class=\"legend opposite\">opposite</span></p>\n";
    nlohmann::json sidecar = nlohmann::json::array();

    for (const auto& e : explanations) {
        auto it = by_id.find(e.doc_id);
        if (it == by_id.end()) throw std::invalid_argument("write_report: unknown document '" + e.doc_id + "'");
        const auto& doc = it->second->document;
        const auto tokens = normalize(doc.text);
        if (tokens.size() != e.scores.size())
            throw std::invalid_argument("write_report: " + std::to_string(e.scores.size()) + " scores for " +
                                        std::to_string(tokens.size()) + " tokens in document '" + e.doc_id + "'");
        const auto cps = utf8_decode(doc.text);
        const auto tags = scores_to_tags(e.scores);

        html += "<div class=\"doc\" id=\"" + html_escape(e.doc_id) + "\">\n<h2>" + html_escape(e.doc_id) + " (" +
                html_escape(e.method) + ", " + to_string(it->second->label) + ")</h2>\n<div class=\"text\">";
        nlohmann::json rows = nlohmann::json::array();
        std::size_t pos = 0;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            const auto [a, b] = tokens.offsets[t];
            if (a < pos || b > cps.size() || a >= b)
                throw std::invalid_argument("write_report: token offsets misaligned in document '" + e.doc_id + "'");
            html += html_escape(utf8_encode(std::u32string_view(cps).substr(pos, a - pos)));
            const auto piece = html_escape(utf8_encode(std::u32string_view(cps).substr(a, b - a)));
            if (tags[t] == TokenTag::NoIndication) {
                html += piece;
            } else {
                html += std::string("<span class=\"hl ") + tag_css_class(tags[t]) + "\" title=\"" +
                        format_fixed(e.scores[t], 4) + "\">" + piece + "</span>";
            }
            rows.push_back({{"start", a}, {"end", b}, {"token", tokens.tokens[t]}, {"score", e.scores[t]},
                            {"tag", to_string(tags[t])}});
            pos = b;
        }
        html += html_escape(utf8_encode(std::u32string_view(cps).substr(pos)));
        html += "</div>\n</div>\n";
        sidecar.push_back({{"doc_id", e.doc_id}, {"method", e.method}, {"tokens", rows}});
    }
    html += "</body></html>\n";
    write_file_atomic(path, html);
    write_file_atomic(report_sidecar(path), sidecar.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// explanations.jsonl
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LocalExplanation& e) {
    return {{"doc_id", e.doc_id}, {"method", e.method}, {"scores", e.scores}};
}

inline void write_explanations(const std::vector<LocalExplanation>& ex, const std::filesystem::path& path) {
    std::vector<nlohmann::json> rows;
    for (const auto& e : ex) rows.push_back(to_json(e));
    write_file_atomic(path, to_jsonl(rows));
}

inline std::vector<LocalExplanation> load_explanations(const std::filesystem::path& path) {
    std::vector<LocalExplanation> out;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
        LocalExplanation e;
        e.doc_id = detail::string_field(j, "doc_id");
        e.method = detail::string_field(j, "method");
        e.scores = detail::field(j, "scores").get<std::vector<double>>();
        out.push_back(std::move(e));
    });
    return out;
}

}  // namespace hfphen
