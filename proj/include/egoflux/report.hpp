#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoflux/classifier.hpp"
#include "egoflux/csv.hpp"
#include "egoflux/granger.hpp"
#include "egoflux/topics.hpp"
#include "egoflux/version.hpp"

namespace egoflux {

inline constexpr int kRunReportSchemaVersion = 1;
inline constexpr const char* kDefaultGroup = "default";

struct ReportBundle {
    CausalityMatrix matrix;
    std::vector<TopicSummary> topics;
    std::optional<EvalReport> classifier_eval;
    std::map<std::size_t, double> silhouette;  // k -> score
    nlohmann::json configuration = nlohmann::json::object();
    nlohmann::json metrics = nlohmann::json::object();  // per-stage counts
    std::map<std::string, std::string> grouping;        // alter -> group label
};

inline std::string group_of(const std::map<std::string, std::string>& grouping, const std::string& alter) {
    auto it = grouping.find(alter);
    return it == grouping.end() ? kDefaultGroup : it->second;
}

/// Alters ordered by (group, handle).
inline std::vector<std::string> ordered_alters(const CausalityMatrix& m, const std::map<std::string, std::string>& grouping) {
    std::vector<std::string> alters = m.alters;
    std::sort(alters.begin(), alters.end(), [&](const std::string& a, const std::string& b) {
        const auto ga = group_of(grouping, a), gb = group_of(grouping, b);
        return ga != gb ? ga < gb : a < b;
    });
    return alters;
}

inline std::string format_p(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", p);
    return buf;
}

/// "p (lag)" with a trailing "*" when significant; skipped pairs render as
/// "—(CODE)".
inline std::string format_cell(const PairResult& p) {
    if (p.skip_reason || !p.best_lag) return "—(" + p.skip_reason.value_or(skip::missing) + ")";
    std::string cell = format_p(p.best_p) + " (" + std::to_string(*p.best_lag) + ")";
    if (p.significant) cell += "*";
    return cell;
}

inline std::string topic_label(const std::vector<TopicSummary>& topics, std::size_t t) {
    for (const auto& s : topics) {
        if (s.topic == t) return s.label;
    }
    return "topic_" + std::to_string(t);
}

/// Wide matrix: group, alter, then one column per topic.
inline void emit_matrix_csv(std::ostream& out, const CausalityMatrix& m, const std::map<std::string, std::string>& grouping,
                            const std::vector<TopicSummary>& topics = {}) {
    csv::Record header{"group", "alter"};
    for (std::size_t t = 0; t < m.topics; ++t) header.push_back(topic_label(topics, t));
    csv::write_record(out, header);
    for (const auto& alter : ordered_alters(m, grouping)) {
        csv::Record row{group_of(grouping, alter), alter};
        for (std::size_t t = 0; t < m.topics; ++t) {
            const PairResult* p = m.find(alter, static_cast<int>(t));
            row.push_back(p ? format_cell(*p) : "—(" + std::string(skip::missing) + ")");
        }
        csv::write_record(out, row);
    }
}

inline constexpr double kMinReportedP = 1e-16;

inline double minus_log10_p(double p) { return -std::log10(std::max(p, kMinReportedP)); }

/// Long format: alter, topic, minus_log10_p, best_lag (empty for skipped pairs).
inline void emit_heatmap_data(std::ostream& out, const CausalityMatrix& m) {
    csv::write_record(out, {"alter", "topic", "minus_log10_p", "best_lag"});
    for (const auto& alter : m.alters) {
        for (std::size_t t = 0; t < m.topics; ++t) {
            const PairResult* p = m.find(alter, static_cast<int>(t));
            csv::Record row{alter, std::to_string(t), "", ""};
            if (p && p->best_lag && !p->skip_reason) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6f", minus_log10_p(p->best_p));
                row[2] = buf;
                row[3] = std::to_string(*p->best_lag);
            }
            csv::write_record(out, row);
        }
    }
}

inline nlohmann::json topics_to_json(const std::vector<TopicSummary>& topics) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : topics) {
        nlohmann::json words = nlohmann::json::array();
        for (const auto& [w, score] : s.top_words) words.push_back({w, score});
        j.push_back({{"topic", s.topic}, {"label", s.label}, {"top_words", std::move(words)}});
    }
    return j;
}

inline std::vector<TopicSummary> topics_from_json(const nlohmann::json& j) {
    std::vector<TopicSummary> out;
    for (const auto& s : j) {
        TopicSummary t;
        t.topic = s.at("topic").get<std::size_t>();
        t.label = s.at("label").get<std::string>();
        for (const auto& w : s.at("top_words")) t.top_words.emplace_back(w.at(0).get<std::string>(), w.at(1).get<double>());
        out.push_back(std::move(t));
    }
    return out;
}

inline nlohmann::json run_report_to_json(const ReportBundle& b) {
    nlohmann::json j;
    j["format"] = "egoflux.run_report";
    j["schema_version"] = kRunReportSchemaVersion;
    j["egoflux_version"] = kVersion;
    j["configuration"] = b.configuration;
    nlohmann::json sil = nlohmann::json::object();
    for (const auto& [k, s] : b.silhouette) sil[std::to_string(k)] = s;
    nlohmann::json metrics = b.metrics;
    metrics["silhouette"] = sil;
    metrics["weighted_f1"] = b.classifier_eval ? nlohmann::json(b.classifier_eval->weighted_f1) : nlohmann::json(nullptr);
    std::map<std::string, std::size_t> skips;
    for (const auto& p : b.matrix.pairs) {
        if (p.skip_reason) ++skips[*p.skip_reason];
    }
    metrics["skip_counts"] = skips;
    j["metrics"] = std::move(metrics);
    j["classifier_eval"] = b.classifier_eval ? eval_report_to_json(*b.classifier_eval) : nlohmann::json(nullptr);
    j["topics"] = topics_to_json(b.topics);
    j["grouping"] = b.grouping;
    j["matrix"] = causality_to_json(b.matrix);
    return j;
}

inline ReportBundle run_report_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "egoflux.run_report") throw ParseError("not a run report");
    if (j.value("schema_version", 0) != kRunReportSchemaVersion) throw ParseError("unsupported run report schema version");
    ReportBundle b;
    b.configuration = j.at("configuration");
    b.metrics = j.at("metrics");
    for (const auto& [k, s] : b.metrics.at("silhouette").items()) b.silhouette[std::stoul(k)] = s.get<double>();
    b.metrics.erase("silhouette");
    b.metrics.erase("weighted_f1");
    b.metrics.erase("skip_counts");
    if (!j.at("classifier_eval").is_null()) b.classifier_eval = eval_report_from_json(j.at("classifier_eval"));
    b.topics = topics_from_json(j.at("topics"));
    b.grouping = j.at("grouping").get<std::map<std::string, std::string>>();
    b.matrix = causality_from_json(j.at("matrix"));
    return b;
}

/// Pretty-printed JSON with sorted keys and shortest round-trip numbers.
inline std::string dump_stable(const nlohmann::json& j) {
    return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

inline void emit_run_report(std::ostream& out, const ReportBundle& b) { out << dump_stable(run_report_to_json(b)); }

/// group,alter rows (header optional); handles are canonicalized.
inline std::map<std::string, std::string> read_groups_csv(std::istream& in) {
    std::map<std::string, std::string> out;
    csv::Reader reader(in);
    bool first = true;
    while (auto rec = reader.next()) {
        if (rec->size() == 1 && rec->front().empty()) continue;
        if (rec->size() < 2) throw ParseError("groups CSV rows need 'alter,group'");
        if (first && (*rec)[0] == "alter" && (*rec)[1] == "group") {
            first = false;
            continue;
        }
        first = false;
        out[canonical_handle((*rec)[0])] = (*rec)[1];
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << contents;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace egoflux
