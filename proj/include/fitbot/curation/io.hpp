#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fitbot/curation/curation.hpp"
#include "fitbot/text.hpp"

namespace fitbot::curation {

inline nlohmann::json to_json(const CurationSample& s) {
    return {{"id", s.id}, {"features", s.features}, {"soft_label", s.soft_label}};
}

inline CurationSample sample_from_json(const nlohmann::json& j) {
    try {
        CurationSample s;
        s.id = j.at("id").get<std::string>();
        s.features = j.at("features").get<std::vector<double>>();
        const auto label = j.at("soft_label").get<std::vector<double>>();
        if (label.size() != emotion::kClassCount) throw FormatError("soft_label must have 21 entries");
        std::copy(label.begin(), label.end(), s.soft_label.begin());
        return s;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed curation sample: ") + ex.what());
    }
}

/// One JSON object per line; blank lines are skipped.
inline std::vector<CurationSample> samples_from_jsonl(const std::string& contents) {
    std::vector<CurationSample> out;
    std::size_t line_no = 0;
    for (const auto& line : text::lines(contents)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError("line " + std::to_string(line_no) + ": " + ex.what());
        } catch (const FormatError& ex) {
            throw FormatError("line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

inline std::string samples_to_jsonl(const std::vector<CurationSample>& samples) {
    std::string out;
    for (const auto& s : samples) out += to_json(s).dump() + '\n';
    return out;
}

inline CurationDataset dataset_from_jsonl(const std::string& contents) {
    CurationDataset d;
    for (auto& s : samples_from_jsonl(contents)) d.add(std::move(s));
    return d;
}

inline std::string dataset_to_jsonl(const CurationDataset& d) { return samples_to_jsonl(d.samples()); }

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace detail

inline std::string decisions_to_csv(const std::vector<AdmissionRecord>& records) {
    std::string out = "id,admitted,reason,similarity,purity_before,purity_after\n";
    for (const auto& r : records) {
        const auto& d = r.decision;
        out += detail::csv_field(r.id) + ',' + (d.admitted ? "true" : "false") + ',' + std::string(to_string(d.reason)) + ',' +
               text::format_double(d.similarity) + ',' + text::format_double(d.purity_before) + ',' +
               text::format_double(d.purity_after) + '\n';
    }
    return out;
}

} // namespace fitbot::curation
