#pragma once

#include <string>
#include <string_view>

#include "fitbot/protocol/message.hpp"

namespace fitbot::protocol {

enum class ServiceQuality { Standard, High };

inline ServiceQuality quality_from_string(std::string_view s) {
    if (s == "STANDARD") return ServiceQuality::Standard;
    if (s == "HIGH") return ServiceQuality::High;
    throw ConfigError("unknown service quality '" + std::string(s) + "'");
}

inline std::string_view to_string(ServiceQuality q) { return q == ServiceQuality::High ? "HIGH" : "STANDARD"; }

/// High-quality requests bypass the edge when the cloud is reachable;
/// everything else goes through the edge, and with no path the device
/// answers on its own.
constexpr RouteMode choose_route(bool cloud_up, bool edge_up, ServiceQuality quality) {
    if (quality == ServiceQuality::High && cloud_up) return RouteMode::DirectCloud;
    if (edge_up && cloud_up) return RouteMode::ViaEdge;
    return RouteMode::Offline;
}

/// Link availability as seen by one device.
struct LinkStatus {
    bool device_edge = false;
    bool edge_cloud = false;
    bool device_cloud = false;
};

/// Route for a concrete topology. The direct path needs the device-cloud
/// link; the edge path needs both device-edge and edge-cloud.
constexpr RouteMode choose_route(const LinkStatus& links, ServiceQuality quality) {
    if (quality == ServiceQuality::High &&
        choose_route(links.device_cloud, links.device_edge, quality) == RouteMode::DirectCloud)
        return RouteMode::DirectCloud;
    return choose_route(links.edge_cloud, links.device_edge, ServiceQuality::Standard);
}

} // namespace fitbot::protocol
