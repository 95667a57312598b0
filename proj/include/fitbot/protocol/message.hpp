#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fitbot/emotion/types.hpp"
#include "fitbot/error.hpp"
#include "fitbot/protocol/crc32.hpp"

namespace fitbot::protocol {

// Wire layout, all integers little-endian:
//
//   off  size  field
//     0     2  magic 0x41 0x57 ("AW")
//     2     1  version (1)
//     3     1  msg_type (1 REQUEST, 2 RESULT, 3 ACK)
//     4     4  seq
//     8     8  timestamp_ms
//    16     1  source kind     17  1  source index
//    18     1  dest kind       19  1  dest index
//    20     1  route (1 VIA_EDGE, 2 DIRECT_CLOUD, 3 OFFLINE)
//    21     1  reserved (0)
//    22     4  payload_len
//    26     n  payload
//  26+n     4  CRC-32 of bytes [0, 26+n)
//
// Payloads:
//   REQUEST  id_len u16, utterance id bytes, frame_count u32, frame_dim u32, frame digest u32
//   RESULT   class_count u8 (21), class_count x f32 probabilities, argmax u8
//   ACK      acked seq u32

inline constexpr std::uint8_t kMagic0 = 0x41;
inline constexpr std::uint8_t kMagic1 = 0x57;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kHeaderSize = 26;
inline constexpr std::size_t kCrcSize = 4;

enum class NodeKind : std::uint8_t { Device = 1, Edge = 2, Cloud = 3 };
enum class MessageType : std::uint8_t { Request = 1, Result = 2, Ack = 3 };
enum class RouteMode : std::uint8_t { ViaEdge = 1, DirectCloud = 2, Offline = 3 };

inline std::string_view to_string(NodeKind k) {
    switch (k) {
    case NodeKind::Device: return "DEVICE";
    case NodeKind::Edge: return "EDGE";
    case NodeKind::Cloud: return "CLOUD";
    }
    return "?";
}

inline std::string_view to_string(MessageType t) {
    switch (t) {
    case MessageType::Request: return "EMOTION_REQUEST";
    case MessageType::Result: return "EMOTION_RESULT";
    case MessageType::Ack: return "ACK";
    }
    return "?";
}

inline std::string_view to_string(RouteMode r) {
    switch (r) {
    case RouteMode::ViaEdge: return "VIA_EDGE";
    case RouteMode::DirectCloud: return "DIRECT_CLOUD";
    case RouteMode::Offline: return "OFFLINE";
    }
    return "?";
}

inline NodeKind node_kind_from_string(std::string_view s) {
    if (s == "DEVICE") return NodeKind::Device;
    if (s == "EDGE") return NodeKind::Edge;
    if (s == "CLOUD") return NodeKind::Cloud;
    throw ConfigError("unknown node kind '" + std::string(s) + "'");
}

inline RouteMode route_from_string(std::string_view s) {
    if (s == "VIA_EDGE") return RouteMode::ViaEdge;
    if (s == "DIRECT_CLOUD") return RouteMode::DirectCloud;
    if (s == "OFFLINE") return RouteMode::Offline;
    throw ConfigError("unknown route mode '" + std::string(s) + "'");
}

struct NodeId {
    NodeKind kind = NodeKind::Device;
    std::uint8_t index = 0;

    auto operator<=>(const NodeId&) const = default;

    std::string to_string() const { return std::string(protocol::to_string(kind)) + std::to_string(index); }
};

struct RequestPayload {
    std::string utterance_id;
    std::uint32_t frame_count = 0;
    std::uint32_t frame_dim = 0;
    std::uint32_t digest = 0;

    bool operator==(const RequestPayload&) const = default;
};

/// Class probabilities travel as IEEE-754 binary32, so a result is the
/// float rounding of the classifier's EmotionScore.
struct ResultPayload {
    std::array<float, emotion::kClassCount> probabilities{};
    std::uint8_t argmax = 0;

    bool operator==(const ResultPayload& o) const {
        // Bitwise, so that round trips are checked exactly (and NaN never sneaks through as equal).
        return argmax == o.argmax &&
               std::memcmp(probabilities.data(), o.probabilities.data(), sizeof(float) * probabilities.size()) == 0;
    }

    static ResultPayload from_score(const emotion::EmotionScore& score) {
        ResultPayload r;
        for (std::size_t k = 0; k < emotion::kClassCount; ++k)
            r.probabilities[k] = static_cast<float>(score.probabilities[k]);
        r.argmax = static_cast<std::uint8_t>(emotion::argmax(r.probabilities));
        return r;
    }
};

struct AckPayload {
    std::uint32_t acked_seq = 0;

    bool operator==(const AckPayload&) const = default;
};

using Payload = std::variant<RequestPayload, ResultPayload, AckPayload>;

struct EmotionMessage {
    std::uint8_t version = kProtocolVersion;
    std::uint32_t seq = 0;
    std::uint64_t timestamp_ms = 0;
    NodeId source;
    NodeId dest;
    RouteMode route = RouteMode::ViaEdge;
    Payload payload = AckPayload{};

    MessageType type() const {
        switch (payload.index()) {
        case 0: return MessageType::Request;
        case 1: return MessageType::Result;
        default: return MessageType::Ack;
        }
    }

    bool operator==(const EmotionMessage&) const = default;
};

/// Tolerance on the probability sum of a RESULT payload. Binary32 rounding of
/// 21 probabilities moves the sum by up to ~1e-6.
inline constexpr double kResultSumTolerance = 1e-5;

/// Empty string when the result payload is valid, else the reason.
inline std::string result_payload_problem(const ResultPayload& r) {
    double sum = 0.0;
    for (float p : r.probabilities) {
        if (!(p >= 0.0f && p <= 1.0f)) return "probability outside [0, 1]";
        sum += p;
    }
    if (std::abs(sum - 1.0) > kResultSumTolerance) return "probabilities do not sum to 1";
    if (r.argmax >= emotion::kClassCount) return "argmax outside [0, 21)";
    if (r.argmax != emotion::argmax(r.probabilities)) return "argmax inconsistent with probabilities";
    return {};
}

/// CRC-32 of the frames serialized row-major as little-endian binary64.
inline std::uint32_t frame_digest(const emotion::FrameSequence& seq) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(static_cast<std::size_t>(seq.frames.size()) * 8);
    for (Eigen::Index t = 0; t < seq.frames.rows(); ++t)
        for (Eigen::Index d = 0; d < seq.frames.cols(); ++d) {
            const auto bits = std::bit_cast<std::uint64_t>(seq.frames(t, d));
            for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
        }
    return crc32(bytes);
}

inline RequestPayload make_request_payload(const emotion::FrameSequence& seq) {
    return {seq.utterance_id, static_cast<std::uint32_t>(seq.frames.rows()),
            static_cast<std::uint32_t>(seq.frames.cols()), frame_digest(seq)};
}

namespace detail {

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + at_), n);
        at_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - at_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw FormatError("payload shorter than its fields");
    }
    std::uint64_t get(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[at_++]) << (8 * i);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t at_ = 0;
};

inline NodeId read_node(std::uint8_t kind, std::uint8_t index) {
    if (kind < 1 || kind > 3) throw FormatError("unknown node kind " + std::to_string(kind));
    return {static_cast<NodeKind>(kind), index};
}

} // namespace detail

inline std::vector<std::uint8_t> encode(const EmotionMessage& msg) {
    detail::Writer payload;
    if (const auto* req = std::get_if<RequestPayload>(&msg.payload)) {
        if (req->utterance_id.size() > std::numeric_limits<std::uint16_t>::max())
            throw TooLarge("utterance id longer than 65535 bytes");
        payload.u16(static_cast<std::uint16_t>(req->utterance_id.size()));
        payload.raw(req->utterance_id);
        payload.u32(req->frame_count);
        payload.u32(req->frame_dim);
        payload.u32(req->digest);
    } else if (const auto* res = std::get_if<ResultPayload>(&msg.payload)) {
        if (const auto problem = result_payload_problem(*res); !problem.empty())
            throw InvalidArgument("invalid result payload: " + problem);
        payload.u8(static_cast<std::uint8_t>(emotion::kClassCount));
        for (float p : res->probabilities) payload.f32(p);
        payload.u8(res->argmax);
    } else {
        payload.u32(std::get<AckPayload>(msg.payload).acked_seq);
    }
    const auto& body = payload.bytes();
    if (body.size() > std::numeric_limits<std::uint32_t>::max()) throw TooLarge("payload exceeds 2^32-1 bytes");

    detail::Writer out;
    out.bytes().reserve(kHeaderSize + body.size() + kCrcSize);
    out.u8(kMagic0);
    out.u8(kMagic1);
    out.u8(msg.version);
    out.u8(static_cast<std::uint8_t>(msg.type()));
    out.u32(msg.seq);
    out.u64(msg.timestamp_ms);
    out.u8(static_cast<std::uint8_t>(msg.source.kind));
    out.u8(msg.source.index);
    out.u8(static_cast<std::uint8_t>(msg.dest.kind));
    out.u8(msg.dest.index);
    out.u8(static_cast<std::uint8_t>(msg.route));
    out.u8(0);
    out.u32(static_cast<std::uint32_t>(body.size()));
    out.bytes().insert(out.bytes().end(), body.begin(), body.end());
    out.u32(crc32(out.bytes()));
    return std::move(out.bytes());
}

/// Checks run in this order: minimum size (TruncationError), CRC
/// (ChecksumError), magic (FormatError), declared length (TruncationError),
/// version and msg_type (UnsupportedError), then field values (FormatError).
/// The CRC goes first so that any corruption of a well-sized frame surfaces
/// as a checksum failure.
inline EmotionMessage decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize + kCrcSize)
        throw TruncationError("message of " + std::to_string(bytes.size()) + " bytes is shorter than the minimum " +
                              std::to_string(kHeaderSize + kCrcSize));

    const std::size_t body_end = bytes.size() - kCrcSize;
    detail::Reader trailer(bytes.subspan(body_end));
    if (crc32(bytes.first(body_end)) != trailer.u32()) throw ChecksumError("CRC-32 mismatch");

    detail::Reader in(bytes.first(body_end));
    if (in.u8() != kMagic0 || in.u8() != kMagic1) throw FormatError("bad magic");
    const std::uint8_t version = in.u8();
    const std::uint8_t type = in.u8();
    EmotionMessage msg;
    msg.seq = in.u32();
    msg.timestamp_ms = in.u64();
    const std::uint8_t src_kind = in.u8(), src_index = in.u8();
    const std::uint8_t dst_kind = in.u8(), dst_index = in.u8();
    const std::uint8_t route = in.u8();
    const std::uint8_t reserved = in.u8();
    const std::uint32_t payload_len = in.u32();
    if (static_cast<std::uint64_t>(payload_len) != in.remaining())
        throw TruncationError("declared payload length " + std::to_string(payload_len) + " but " +
                              std::to_string(in.remaining()) + " bytes present");
    if (version != kProtocolVersion) throw UnsupportedError("unsupported protocol version " + std::to_string(version));
    if (type < 1 || type > 3) throw UnsupportedError("unknown msg_type " + std::to_string(type));

    msg.version = version;
    msg.source = detail::read_node(src_kind, src_index);
    msg.dest = detail::read_node(dst_kind, dst_index);
    if (route < 1 || route > 3) throw FormatError("unknown route " + std::to_string(route));
    msg.route = static_cast<RouteMode>(route);
    if (reserved != 0) throw FormatError("reserved byte must be zero");

    switch (static_cast<MessageType>(type)) {
    case MessageType::Request: {
        RequestPayload req;
        req.utterance_id = in.raw(in.u16());
        req.frame_count = in.u32();
        req.frame_dim = in.u32();
        req.digest = in.u32();
        msg.payload = std::move(req);
        break;
    }
    case MessageType::Result: {
        if (in.u8() != emotion::kClassCount) throw FormatError("result class_count must be 21");
        ResultPayload res;
        for (auto& p : res.probabilities) p = in.f32();
        res.argmax = in.u8();
        if (const auto problem = result_payload_problem(res); !problem.empty())
            throw FormatError("invalid result payload: " + problem);
        msg.payload = res;
        break;
    }
    case MessageType::Ack: msg.payload = AckPayload{in.u32()}; break;
    }
    if (in.remaining() != 0) throw FormatError("trailing bytes after payload");
    return msg;
}

} // namespace fitbot::protocol
