#pragma once

#include <string>

#include <json.hpp>

#include "fitbot/emotion/io.hpp"
#include "fitbot/protocol/simulator.hpp"
#include "fitbot/text.hpp"

namespace fitbot::protocol {

inline nlohmann::json to_json(NodeId n) { return {{"kind", to_string(n.kind)}, {"index", n.index}}; }

inline NodeId node_from_json(const nlohmann::json& j) {
    const auto index = j.at("index").get<int>();
    if (index < 0 || index > 255) throw ConfigError("node index must be in [0, 255]");
    return {node_kind_from_string(j.at("kind").get<std::string>()), static_cast<std::uint8_t>(index)};
}

/// {"nodes": [{kind, index}], "links": [{a, b, base_latency_ms, jitter_ms,
///  drop_probability, up}], "link_events": [{time_ms, a, b, up}]}
inline Topology topology_from_json(const nlohmann::json& j) {
    try {
        Topology t;
        for (const auto& n : j.at("nodes")) t.nodes.push_back(node_from_json(n));
        for (const auto& l : j.at("links")) {
            LinkModel link;
            link.a = node_from_json(l.at("a"));
            link.b = node_from_json(l.at("b"));
            link.base_latency_ms = l.value("base_latency_ms", 0.0);
            link.jitter_ms = l.value("jitter_ms", 0.0);
            link.drop_probability = l.value("drop_probability", 0.0);
            link.up = l.value("up", true);
            t.links.push_back(link);
        }
        if (j.contains("link_events"))
            for (const auto& e : j.at("link_events"))
                t.link_events.push_back(
                    {e.at("time_ms").get<double>(), node_from_json(e.at("a")), node_from_json(e.at("b")), e.at("up").get<bool>()});
        return t;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed topology JSON: ") + ex.what());
    }
}

inline nlohmann::json to_json(const Topology& t) {
    nlohmann::json nodes = nlohmann::json::array(), links = nlohmann::json::array(), events = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back(to_json(n));
    for (const auto& l : t.links)
        links.push_back({{"a", to_json(l.a)},
                         {"b", to_json(l.b)},
                         {"base_latency_ms", l.base_latency_ms},
                         {"jitter_ms", l.jitter_ms},
                         {"drop_probability", l.drop_probability},
                         {"up", l.up}});
    for (const auto& e : t.link_events)
        events.push_back({{"time_ms", e.time_ms}, {"a", to_json(e.a)}, {"b", to_json(e.b)}, {"up", e.up}});
    return {{"nodes", nodes}, {"links", links}, {"link_events", events}};
}

/// {"requests": [{send_time_ms, device: {kind, index}, quality, utterance: FrameSequence}]}
inline Workload workload_from_json(const nlohmann::json& j) {
    try {
        Workload w;
        for (const auto& r : j.at("requests")) {
            WorkItem item;
            item.send_time_ms = r.at("send_time_ms").get<double>();
            item.device = node_from_json(r.at("device"));
            item.quality = quality_from_string(r.value("quality", std::string("STANDARD")));
            item.features = emotion::sequence_from_json(r.at("utterance"));
            w.push_back(std::move(item));
        }
        return w;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed workload JSON: ") + ex.what());
    } catch (const FormatError& ex) {
        throw ConfigError(std::string("malformed workload JSON: ") + ex.what());
    }
}

inline nlohmann::json to_json(const Workload& w) {
    nlohmann::json requests = nlohmann::json::array();
    for (const auto& item : w)
        requests.push_back({{"send_time_ms", item.send_time_ms},
                            {"device", to_json(item.device)},
                            {"quality", to_string(item.quality)},
                            {"utterance", emotion::to_json(item.features)}});
    return {{"requests", requests}};
}

inline nlohmann::json to_json(const SimReport& r) {
    nlohmann::json modes = nlohmann::json::object();
    for (auto route : {RouteMode::ViaEdge, RouteMode::DirectCloud, RouteMode::Offline}) {
        const auto& m = r.mode(route);
        nlohmann::json hist = nlohmann::json::array();
        for (const auto& [bucket, count] : m.latency_histogram)
            hist.push_back({{"from_ms", static_cast<double>(bucket) * r.histogram_bucket_ms}, {"count", count}});
        modes[std::string(to_string(route))] = {
            {"requests", m.requests}, {"completed", m.completed}, {"latency_histogram", hist}};
    }
    nlohmann::json requests = nlohmann::json::array();
    for (const auto& o : r.requests) {
        nlohmann::json entry = {{"request", o.request},
                                {"device", o.device.to_string()},
                                {"route", to_string(o.route)},
                                {"send_time_ms", o.send_time_ms},
                                {"completed", o.completed()},
                                {"latency_ms", nullptr},
                                {"argmax", nullptr}};
        if (o.latency_ms) entry["latency_ms"] = *o.latency_ms;
        if (o.result) entry["argmax"] = o.result->argmax;
        requests.push_back(std::move(entry));
    }
    return {{"latency_budget_ms", r.latency_budget_ms},
            {"sent", r.sent},
            {"delivered", r.delivered},
            {"dropped", r.dropped},
            {"in_flight", r.in_flight},
            {"budget_violations", r.budget_violations},
            {"edge_annotations", r.edge_annotations.size()},
            {"modes", modes},
            {"requests", requests}};
}

inline std::string event_log_to_csv(const SimReport& r) {
    std::string out = "time_ms,event,msg_type,seq,source,dest,route,request,sent,delivered,dropped,in_flight\n";
    for (const auto& e : r.event_log) {
        out += text::format_double(e.time_ms) + ',' + e.event + ',';
        out += e.type ? std::string(to_string(*e.type)) : std::string();
        out += ',' + (e.type ? std::to_string(e.seq) : std::string());
        out += ',' + e.source.to_string() + ',' + e.dest.to_string() + ',';
        out += e.route ? std::string(to_string(*e.route)) : std::string();
        out += ',' + (e.request ? std::to_string(*e.request) : std::string());
        out += ',' + std::to_string(e.sent) + ',' + std::to_string(e.delivered) + ',' + std::to_string(e.dropped) +
               ',' + std::to_string(e.in_flight) + '\n';
    }
    return out;
}

} // namespace fitbot::protocol
