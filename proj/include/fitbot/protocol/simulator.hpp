#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "fitbot/emotion/types.hpp"
#include "fitbot/error.hpp"
#include "fitbot/protocol/message.hpp"
#include "fitbot/protocol/routing.hpp"
#include "fitbot/random.hpp"

namespace fitbot::protocol {

/// Bidirectional link between two nodes.
struct LinkModel {
    NodeId a;
    NodeId b;
    double base_latency_ms = 0.0;
    double jitter_ms = 0.0;        // per-hop extra delay ~ uniform[0, jitter_ms]
    double drop_probability = 0.0; // per hop
    bool up = true;

    bool connects(NodeId x, NodeId y) const { return (a == x && b == y) || (a == y && b == x); }
};

/// Scheduled change of a link's up/down state.
struct LinkEvent {
    double time_ms = 0.0;
    NodeId a;
    NodeId b;
    bool up = false;
};

struct Topology {
    std::vector<NodeId> nodes;
    std::vector<LinkModel> links;
    std::vector<LinkEvent> link_events;
};

struct WorkItem {
    double send_time_ms = 0.0;
    NodeId device;
    ServiceQuality quality = ServiceQuality::Standard;
    emotion::FrameSequence features;
};

using Workload = std::vector<WorkItem>;
using ClassifyFn = std::function<emotion::EmotionScore(const emotion::FrameSequence&)>;

struct Classifiers {
    ClassifyFn local; // on-device recognizer, used for OFFLINE
    ClassifyFn cloud;
};

struct SimOptions {
    double latency_budget_ms = 100.0;
    double histogram_bucket_ms = 10.0;
    std::uint64_t seed = 0;
};

struct RequestOutcome {
    std::size_t request = 0;
    NodeId device;
    RouteMode route = RouteMode::ViaEdge;
    double send_time_ms = 0.0;
    std::optional<double> latency_ms; // set once the result reaches the device
    std::optional<ResultPayload> result;

    bool completed() const { return latency_ms.has_value(); }
};

struct ModeStats {
    std::size_t requests = 0;
    std::size_t completed = 0;
    std::map<std::int64_t, std::size_t> latency_histogram; // bucket index -> count

    bool operator==(const ModeStats&) const = default;
};

/// A completed result observed by the edge on its way back to the device; the
/// edge keeps it as a soft-labeled sample for dataset curation.
struct EdgeAnnotation {
    NodeId edge;
    std::string utterance_id;
    std::vector<double> mean_features;
    std::array<double, emotion::kClassCount> soft_label{};

    bool operator==(const EdgeAnnotation&) const = default;
};

struct LogEntry {
    double time_ms = 0.0;
    std::string event; // SEND DELIVER DROP LINK_UP LINK_DOWN COMPLETE
    std::optional<MessageType> type;
    std::uint32_t seq = 0;
    NodeId source;
    NodeId dest;
    std::optional<RouteMode> route;
    std::optional<std::size_t> request;
    // Transmission counters after this event.
    std::size_t sent = 0, delivered = 0, dropped = 0, in_flight = 0;

    bool operator==(const LogEntry&) const = default;
};

/// Counters count hop transmissions (an OFFLINE answer is one transmission
/// from the device to itself with zero latency).
struct SimReport {
    double latency_budget_ms = 100.0;
    double histogram_bucket_ms = 10.0;
    std::vector<RequestOutcome> requests;
    std::size_t sent = 0;
    std::size_t delivered = 0;
    std::size_t dropped = 0;
    std::size_t in_flight = 0;
    std::size_t budget_violations = 0;
    std::array<ModeStats, 3> per_mode; // indexed by RouteMode value - 1
    std::vector<EdgeAnnotation> edge_annotations;
    std::vector<LogEntry> event_log;

    const ModeStats& mode(RouteMode r) const { return per_mode[static_cast<std::size_t>(r) - 1]; }
};

namespace detail {

class Simulation {
public:
    Simulation(const Topology& topology, const Workload& workload, const Classifiers& classifiers,
               const SimOptions& options)
        : topology_(topology), workload_(workload), classifiers_(classifiers), options_(options), rng_(options.seed) {
        validate();
        report_.latency_budget_ms = options.latency_budget_ms;
        report_.histogram_bucket_ms = options.histogram_bucket_ms;
    }

    SimReport run() {
        for (std::size_t i = 0; i < topology_.link_events.size(); ++i)
            push({topology_.link_events[i].time_ms, 0, {}, static_cast<std::uint64_t>(i), Kind::LinkChange, i, {}});
        for (std::size_t r = 0; r < workload_.size(); ++r) {
            const auto& w = workload_[r];
            report_.requests.push_back({r, w.device, RouteMode::Offline, w.send_time_ms, std::nullopt, std::nullopt});
            push({w.send_time_ms, 1, w.device, static_cast<std::uint64_t>(r), Kind::Send, r, {}});
        }

        while (!queue_.empty()) {
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.time;
            switch (ev.kind) {
            case Kind::LinkChange: apply_link_change(ev.index); break;
            case Kind::Send: start_request(ev.index); break;
            case Kind::Arrival: arrive(ev); break;
            }
        }
        finish();
        return std::move(report_);
    }

private:
    enum class Kind { LinkChange, Send, Arrival };

    struct Event {
        double time;
        int priority; // link changes first at equal times
        NodeId source;
        std::uint64_t order; // seq for arrivals, workload index for sends
        Kind kind;
        std::size_t index; // link event or request index
        std::vector<std::uint8_t> bytes;
        std::uint64_t insertion = 0;

        auto key() const { return std::tie(time, priority, source, order, insertion); }
        bool operator>(const Event& o) const { return key() > o.key(); }
    };

    void push(Event ev) {
        ev.insertion = next_insertion_++;
        queue_.push(std::move(ev));
    }

    void validate() const {
        std::set<NodeId> nodes;
        for (const auto& n : topology_.nodes)
            if (!nodes.insert(n).second) throw ConfigError("duplicate node " + n.to_string());
        if (std::none_of(nodes.begin(), nodes.end(), [](NodeId n) { return n.kind == NodeKind::Device; }))
            throw ConfigError("topology needs at least one DEVICE node");
        for (const auto& l : topology_.links) {
            if (!nodes.count(l.a) || !nodes.count(l.b))
                throw ConfigError("link " + l.a.to_string() + "-" + l.b.to_string() + " references an unknown node");
            if (l.a == l.b) throw ConfigError("link endpoints must differ");
            if (!(l.base_latency_ms >= 0.0) || !(l.jitter_ms >= 0.0) || !std::isfinite(l.base_latency_ms) ||
                !std::isfinite(l.jitter_ms))
                throw ConfigError("link latency and jitter must be finite and non-negative");
            if (!(l.drop_probability >= 0.0 && l.drop_probability <= 1.0))
                throw ConfigError("drop_probability must be in [0, 1]");
        }
        for (const auto& e : topology_.link_events)
            if (!find_link(e.a, e.b))
                throw ConfigError("link event references unknown link " + e.a.to_string() + "-" + e.b.to_string());
        for (const auto& w : workload_) {
            if (w.device.kind != NodeKind::Device || !nodes.count(w.device))
                throw ConfigError("workload targets unknown device " + w.device.to_string());
            if (!(w.send_time_ms >= 0.0) || !std::isfinite(w.send_time_ms))
                throw ConfigError("send_time_ms must be finite and non-negative");
            if (w.features.length() == 0) throw ConfigError("workload request has no frames");
        }
        if (!classifiers_.local || !classifiers_.cloud) throw ConfigError("both classifiers must be provided");
        if (!(options_.latency_budget_ms > 0.0)) throw ConfigError("latency_budget_ms must be positive");
        if (!(options_.histogram_bucket_ms > 0.0)) throw ConfigError("histogram_bucket_ms must be positive");
    }

    const LinkModel* find_link(NodeId x, NodeId y) const {
        for (const auto& l : topology_.links)
            if (l.connects(x, y)) return &l;
        return nullptr;
    }

    bool link_up(NodeId x, NodeId y) const {
        const LinkModel* l = find_link(x, y);
        if (!l) return false;
        const auto it = link_state_.find(l);
        return it == link_state_.end() ? l->up : it->second;
    }

    // First linked node of the given kind, in topology link order.
    std::optional<NodeId> neighbour(NodeId from, NodeKind kind) const {
        for (const auto& l : topology_.links) {
            if (l.a == from && l.b.kind == kind) return l.b;
            if (l.b == from && l.a.kind == kind) return l.a;
        }
        return std::nullopt;
    }

    std::optional<NodeId> cloud_for(NodeId from) const { return neighbour(from, NodeKind::Cloud); }

    LinkStatus status_for(NodeId device) const {
        LinkStatus s;
        if (const auto edge = neighbour(device, NodeKind::Edge)) {
            s.device_edge = link_up(device, *edge);
            if (const auto cloud = cloud_for(*edge)) s.edge_cloud = link_up(*edge, *cloud);
        }
        if (const auto cloud = cloud_for(device)) s.device_cloud = link_up(device, *cloud);
        return s;
    }

    std::uint32_t next_seq(NodeId node) { return seq_[node]++; }

    void log(std::string event, const EmotionMessage* msg, std::optional<std::size_t> request) {
        LogEntry e;
        e.time_ms = now_;
        e.event = std::move(event);
        if (msg) {
            e.type = msg->type();
            e.seq = msg->seq;
            e.source = msg->source;
            e.dest = msg->dest;
            e.route = msg->route;
        }
        e.request = request;
        e.sent = report_.sent;
        e.delivered = report_.delivered;
        e.dropped = report_.dropped;
        e.in_flight = report_.in_flight;
        if (e.delivered + e.dropped + e.in_flight != e.sent)
            throw InvalidState("message conservation violated at t=" + std::to_string(now_));
        report_.event_log.push_back(std::move(e));
    }

    EmotionMessage make_message(NodeId from, NodeId to, RouteMode route, Payload payload) {
        EmotionMessage m;
        m.seq = next_seq(from);
        m.timestamp_ms = static_cast<std::uint64_t>(std::floor(now_));
        m.source = from;
        m.dest = to;
        m.route = route;
        m.payload = std::move(payload);
        return m;
    }

    void apply_link_change(std::size_t index) {
        const auto& e = topology_.link_events[index];
        link_state_[find_link(e.a, e.b)] = e.up;
        log(e.up ? "LINK_UP" : "LINK_DOWN", nullptr, std::nullopt);
        report_.event_log.back().source = e.a;
        report_.event_log.back().dest = e.b;
    }

    void transmit(const EmotionMessage& msg, std::size_t request) {
        ++report_.sent;
        ++report_.in_flight;
        log("SEND", &msg, request);

        const LinkModel* link = find_link(msg.source, msg.dest);
        bool lost = !link || !link_up(msg.source, msg.dest);
        double delay = 0.0;
        if (!lost) {
            const double jitter = rng_.uniform();
            const double drop = rng_.uniform();
            delay = link->base_latency_ms + jitter * link->jitter_ms;
            lost = drop < link->drop_probability;
        }
        if (lost) {
            --report_.in_flight;
            ++report_.dropped;
            log("DROP", &msg, request);
            return;
        }
        push({now_ + delay, 1, msg.source, msg.seq, Kind::Arrival, request, encode(msg)});
    }

    void start_request(std::size_t r) {
        const auto& w = workload_[r];
        auto& outcome = report_.requests[r];
        outcome.route = choose_route(status_for(w.device), w.quality);
        auto& stats = report_.per_mode[static_cast<std::size_t>(outcome.route) - 1];
        ++stats.requests;

        if (outcome.route == RouteMode::Offline) {
            // Answered on the device: a zero-latency self-addressed RESULT.
            const auto result = ResultPayload::from_score(classifiers_.local(w.features));
            const auto msg = make_message(w.device, w.device, RouteMode::Offline, result);
            ++report_.sent;
            ++report_.in_flight;
            log("SEND", &msg, r);
            deliver(decode(encode(msg)), r);
            return;
        }
        const NodeId next = outcome.route == RouteMode::ViaEdge ? *neighbour(w.device, NodeKind::Edge)
                                                                : *cloud_for(w.device);
        transmit(make_message(w.device, next, outcome.route, make_request_payload(w.features)), r);
    }

    void arrive(const Event& ev) { deliver(decode(ev.bytes), ev.index); }

    void deliver(const EmotionMessage& msg, std::size_t r) {
        --report_.in_flight;
        ++report_.delivered;
        log("DELIVER", &msg, r);

        const auto& w = workload_[r];
        const NodeId here = msg.dest;
        switch (here.kind) {
        case NodeKind::Edge:
            if (msg.type() == MessageType::Request) {
                transmit(make_message(here, *cloud_for(here), msg.route, msg.payload), r);
            } else {
                annotate(here, w.features, std::get<ResultPayload>(msg.payload));
                transmit(make_message(here, w.device, msg.route, msg.payload), r);
            }
            break;
        case NodeKind::Cloud:
            if (msg.type() == MessageType::Request) {
                const auto result = ResultPayload::from_score(classifiers_.cloud(w.features));
                transmit(make_message(here, msg.source, msg.route, result), r);
            }
            break;
        case NodeKind::Device:
            if (msg.type() == MessageType::Result) complete(r, std::get<ResultPayload>(msg.payload), msg);
            break;
        }
    }

    void annotate(NodeId edge, const emotion::FrameSequence& features, const ResultPayload& result) {
        EdgeAnnotation a;
        a.edge = edge;
        a.utterance_id = features.utterance_id;
        const Eigen::VectorXd mean = features.frames.colwise().mean().transpose();
        a.mean_features.assign(mean.data(), mean.data() + mean.size());
        for (std::size_t k = 0; k < emotion::kClassCount; ++k) a.soft_label[k] = result.probabilities[k];
        double sum = 0.0;
        for (double p : a.soft_label) sum += p;
        for (double& p : a.soft_label) p /= sum; // renormalize the binary32 rounding
        report_.edge_annotations.push_back(std::move(a));
    }

    void complete(std::size_t r, const ResultPayload& result, const EmotionMessage& msg) {
        auto& outcome = report_.requests[r];
        outcome.latency_ms = now_ - outcome.send_time_ms;
        outcome.result = result;
        auto& stats = report_.per_mode[static_cast<std::size_t>(outcome.route) - 1];
        ++stats.completed;
        const auto bucket = static_cast<std::int64_t>(std::floor(*outcome.latency_ms / options_.histogram_bucket_ms));
        ++stats.latency_histogram[bucket];
        log("COMPLETE", &msg, r);
    }

    void finish() {
        for (const auto& o : report_.requests)
            if (!o.completed() || *o.latency_ms > options_.latency_budget_ms) ++report_.budget_violations;
    }

    const Topology& topology_;
    const Workload& workload_;
    const Classifiers& classifiers_;
    SimOptions options_;
    Rng rng_;
    double now_ = 0.0;
    std::uint64_t next_insertion_ = 0;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::map<const LinkModel*, bool> link_state_;
    std::map<NodeId, std::uint32_t> seq_;
    SimReport report_;
};

} // namespace detail

/// `count` requests from one device, one every `period_ms`, each carrying
/// 4 to 8 frames of uniform[-1, 1) features.
inline Workload periodic_workload(std::size_t count, double period_ms, ServiceQuality quality, Eigen::Index dim,
                                  std::uint64_t seed, NodeId device = {}) {
    if (dim < 1) throw ConfigError("workload feature dimension must be positive");
    if (!(period_ms >= 0.0) || !std::isfinite(period_ms)) throw ConfigError("period_ms must be finite and >= 0");
    Rng rng(seed);
    Workload w;
    w.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        WorkItem item{static_cast<double>(i) * period_ms, device, quality, {}};
        const auto length = 4 + static_cast<Eigen::Index>(rng.below(5));
        item.features.frames.resize(length, dim);
        for (Eigen::Index t = 0; t < length; ++t)
            for (Eigen::Index d = 0; d < dim; ++d) item.features.frames(t, d) = rng.uniform(-1.0, 1.0);
        item.features.utterance_id = "req_" + std::to_string(i);
        w.push_back(std::move(item));
    }
    return w;
}

/// Deterministic discrete-event run of the device/edge/cloud exchange.
///
/// Events are processed in (time, link-changes-first, source node, seq)
/// order. Each hop adds base latency plus seeded uniform jitter and is lost
/// with the link's drop probability or when the link is down at departure.
/// Lost requests are not retried. Every message crosses the wire codec.
/// Throws ConfigError before simulating when the topology or workload is
/// inconsistent.
inline SimReport run_simulation(const Topology& topology, const Workload& workload, const Classifiers& classifiers,
                                const SimOptions& options = {}) {
    return detail::Simulation(topology, workload, classifiers, options).run();
}

} // namespace fitbot::protocol
