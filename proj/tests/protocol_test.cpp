#include <gtest/gtest.h>

#include <cstring>

#include "fitbot/protocol/io.hpp"
#include "support.hpp"

using namespace fitbot;
using namespace fitbot::protocol;
using fitbot::testing::cloud;
using fitbot::testing::device;
using fitbot::testing::edge;

namespace {

// Bit-at-a-time CRC-32 (reflected 0xEDB88320).
std::uint32_t reference_crc32(const std::vector<std::uint8_t>& bytes) {
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::uint8_t b : bytes) {
        crc ^= b;
        for (int k = 0; k < 8; ++k) crc = (crc & 1u) ? (crc >> 1) ^ 0xEDB88320u : crc >> 1;
    }
    return ~crc;
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Replaces the trailing CRC so that a hand-edited frame passes the checksum.
void reseal(std::vector<std::uint8_t>& bytes) {
    bytes.resize(bytes.size() - 4);
    put_le(bytes, reference_crc32(bytes), 4);
}

EmotionMessage minimal_ack() {
    EmotionMessage m;
    m.source = device();
    m.dest = edge();
    m.route = RouteMode::ViaEdge;
    m.payload = AckPayload{0};
    return m;
}

} // namespace

TEST(Crc32, StandardCheckValue) {
    const std::string s = "123456789";
    const std::vector<std::uint8_t> bytes(s.begin(), s.end());
    EXPECT_EQ(crc32(bytes), 0xCBF43926u);
    EXPECT_EQ(reference_crc32(bytes), 0xCBF43926u);
    EXPECT_EQ(crc32({}), 0u);
}

TEST(Crc32, MatchesBitwiseLoop) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::uint8_t> bytes(rng.below(300));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
        EXPECT_EQ(crc32(bytes), reference_crc32(bytes));
    }
}

TEST(Codec, MinimalAckLayout) {
    std::vector<std::uint8_t> expected = {0x41, 0x57, 0x01, 0x03};
    put_le(expected, 0, 4);              // seq
    put_le(expected, 0, 8);              // timestamp
    expected.insert(expected.end(), {1, 0, 2, 0, 1, 0});
    put_le(expected, 4, 4);              // payload_len
    put_le(expected, 0, 4);              // acked seq
    put_le(expected, reference_crc32(expected), 4);

    const auto bytes = encode(minimal_ack());
    EXPECT_EQ(bytes.size(), 34u);
    EXPECT_EQ(bytes, expected);
    EXPECT_EQ(decode(bytes), minimal_ack());
}

TEST(Codec, HeaderFieldsAreLittleEndian) {
    EmotionMessage m = minimal_ack();
    m.seq = 0x01020304;
    m.timestamp_ms = 0x1122334455667788ull;
    m.source = cloud(7);
    m.dest = device(200);
    m.route = RouteMode::Offline;
    m.payload = AckPayload{0xA1B2C3D4};
    const auto b = encode(m);
    EXPECT_EQ(std::vector<std::uint8_t>(b.begin() + 4, b.begin() + 8), (std::vector<std::uint8_t>{4, 3, 2, 1}));
    EXPECT_EQ(b[8], 0x88);
    EXPECT_EQ(b[15], 0x11);
    EXPECT_EQ(std::vector<std::uint8_t>(b.begin() + 16, b.begin() + 22),
              (std::vector<std::uint8_t>{3, 7, 1, 200, 3, 0}));
    EXPECT_EQ(std::vector<std::uint8_t>(b.begin() + 26, b.begin() + 30),
              (std::vector<std::uint8_t>{0xD4, 0xC3, 0xB2, 0xA1}));
}

TEST(Codec, ResultPayloadLayout) {
    Rng rng(11);
    EmotionMessage m = minimal_ack();
    const auto result = fitbot::testing::random_result(rng);
    m.payload = result;
    const auto b = encode(m);
    ASSERT_EQ(b.size(), 26u + 1 + 21 * 4 + 1 + 4);
    EXPECT_EQ(b[3], 2);
    EXPECT_EQ(b[22], 86);
    EXPECT_EQ(b[26], 21);
    for (std::size_t k = 0; k < 21; ++k) {
        float f;
        std::memcpy(&f, b.data() + 27 + 4 * k, 4); // host is little-endian
        EXPECT_EQ(std::bit_cast<std::uint32_t>(f), std::bit_cast<std::uint32_t>(result.probabilities[k]));
    }
    EXPECT_EQ(b[27 + 84], result.argmax);
}

TEST(Codec, RoundTripSeededMessages) {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const auto m = fitbot::testing::random_message(rng);
        const auto bytes = encode(m);
        EXPECT_EQ(decode(bytes), m) << "message " << i;
        EXPECT_EQ(encode(decode(bytes)), bytes);
    }
}

TEST(Codec, EverySingleBitFlipIsAChecksumError) {
    Rng rng(5);
    for (int i = 0; i < 6; ++i) {
        const auto bytes = encode(fitbot::testing::random_message(rng));
        for (std::size_t bit = 0; bit < bytes.size() * 8; ++bit) {
            auto corrupt = bytes;
            corrupt[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            EXPECT_THROW(decode(corrupt), ChecksumError) << "bit " << bit;
        }
    }
}

TEST(Codec, BadMagicIsAFormatError) {
    auto bytes = encode(minimal_ack());
    bytes[1] = 0x58;
    reseal(bytes);
    EXPECT_THROW(decode(bytes), FormatError);
}

TEST(Codec, LengthMismatchIsATruncationError) {
    auto bytes = encode(minimal_ack());
    bytes[22] = 8; // claims 8 payload bytes, 4 present
    reseal(bytes);
    EXPECT_THROW(decode(bytes), TruncationError);

    std::vector<std::uint8_t> shortened(bytes.begin(), bytes.begin() + 29);
    EXPECT_THROW(decode(shortened), TruncationError);
    EXPECT_THROW(decode({}), TruncationError);
}

TEST(Codec, ShortResultPayloadIsAFormatError) {
    Rng rng(1);
    EmotionMessage m = minimal_ack();
    m.payload = fitbot::testing::random_result(rng);
    auto bytes = encode(m);
    bytes.erase(bytes.begin() + 40, bytes.begin() + 44);
    bytes[22] = 82; // consistent length, too few fields
    reseal(bytes);
    EXPECT_THROW(decode(bytes), FormatError);
}

TEST(Codec, UnknownTypeOrVersionIsUnsupported) {
    auto bytes = encode(minimal_ack());
    bytes[3] = 9;
    reseal(bytes);
    EXPECT_THROW(decode(bytes), UnsupportedError);

    bytes = encode(minimal_ack());
    bytes[2] = 2;
    reseal(bytes);
    EXPECT_THROW(decode(bytes), UnsupportedError);
}

TEST(Codec, InvalidFieldValuesAreFormatErrors) {
    for (std::size_t offset : {16u, 18u, 20u, 21u}) {
        auto bytes = encode(minimal_ack());
        bytes[offset] = 9;
        reseal(bytes);
        EXPECT_THROW(decode(bytes), FormatError) << "offset " << offset;
    }
}

TEST(Codec, ResultPayloadIsValidated) {
    Rng rng(8);
    EmotionMessage m = minimal_ack();
    auto result = fitbot::testing::random_result(rng);
    result.argmax = static_cast<std::uint8_t>((result.argmax + 1) % 21);
    m.payload = result;
    EXPECT_THROW(encode(m), InvalidArgument);

    m.payload = fitbot::testing::random_result(rng);
    auto bytes = encode(m);
    bytes[26] = 20;
    reseal(bytes);
    EXPECT_THROW(decode(bytes), FormatError);

    ResultPayload unnormalized;
    unnormalized.probabilities.fill(0.5f);
    m.payload = unnormalized;
    EXPECT_THROW(encode(m), InvalidArgument);
}

TEST(Codec, OversizedUtteranceIdIsTooLarge) {
    EmotionMessage m = minimal_ack();
    m.payload = RequestPayload{std::string(70000, 'x'), 1, 1, 0};
    EXPECT_THROW(encode(m), TooLarge);
}

TEST(Codec, RequestDigestTracksFrames) {
    Rng rng(4);
    auto seq = fitbot::testing::random_sequence(rng, 5, 3, "u1");
    const auto a = make_request_payload(seq);
    EXPECT_EQ(a.frame_count, 5u);
    EXPECT_EQ(a.frame_dim, 3u);
    seq.frames(2, 1) = std::nextafter(seq.frames(2, 1), 2.0);
    EXPECT_NE(make_request_payload(seq).digest, a.digest);
}

TEST(Routing, Examples) {
    EXPECT_EQ(choose_route(true, true, ServiceQuality::High), RouteMode::DirectCloud);
    EXPECT_EQ(choose_route(false, false, ServiceQuality::Standard), RouteMode::Offline);
    EXPECT_EQ(choose_route(true, true, ServiceQuality::Standard), RouteMode::ViaEdge);
    EXPECT_EQ(choose_route(true, false, ServiceQuality::Standard), RouteMode::Offline);
    EXPECT_EQ(choose_route(false, true, ServiceQuality::High), RouteMode::Offline);
    EXPECT_EQ(choose_route(true, false, ServiceQuality::High), RouteMode::DirectCloud);
}

TEST(Routing, NeverPicksARouteWithADownLink) {
    for (int bits = 0; bits < 8; ++bits)
        for (auto q : {ServiceQuality::Standard, ServiceQuality::High}) {
            const LinkStatus s{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0};
            const auto r = choose_route(s, q);
            if (r == RouteMode::ViaEdge) { EXPECT_TRUE(s.device_edge && s.edge_cloud); }
            if (r == RouteMode::DirectCloud) { EXPECT_TRUE(s.device_cloud && q == ServiceQuality::High); }
            if (s.device_edge && s.edge_cloud && q == ServiceQuality::Standard) { EXPECT_EQ(r, RouteMode::ViaEdge); }
        }
}

namespace {

struct SimFixture : ::testing::Test {
    fitbot::testing::ClassifierPair models = fitbot::testing::make_classifiers(4, 77);
    Classifiers classifiers = models.classifiers();

    Workload workload(std::size_t n, double period, ServiceQuality q = ServiceQuality::Standard, std::uint64_t seed = 1) {
        return fitbot::testing::periodic_workload(n, period, q, 4, seed);
    }

    static void expect_conservation(const SimReport& r) {
        for (const auto& e : r.event_log) EXPECT_EQ(e.delivered + e.dropped + e.in_flight, e.sent);
        EXPECT_EQ(r.delivered + r.dropped + r.in_flight, r.sent);
        EXPECT_EQ(r.in_flight, 0u);
    }
};

} // namespace

TEST_F(SimFixture, ZeroLatencyNetworkGivesZeroLatency) {
    const auto r = run_simulation(fitbot::testing::chain_topology(0, 0), workload(12, 3.0), classifiers);
    ASSERT_EQ(r.requests.size(), 12u);
    for (const auto& o : r.requests) {
        EXPECT_EQ(o.route, RouteMode::ViaEdge);
        ASSERT_TRUE(o.completed());
        EXPECT_EQ(*o.latency_ms, 0.0);
    }
    EXPECT_EQ(r.sent, 48u);
    EXPECT_EQ(r.budget_violations, 0u);
    expect_conservation(r);
}

TEST_F(SimFixture, FourHopRoundTripIsThirtyMilliseconds) {
    const auto r = run_simulation(fitbot::testing::chain_topology(5, 10), workload(5, 40.0), classifiers);
    for (const auto& o : r.requests) {
        ASSERT_TRUE(o.completed());
        EXPECT_EQ(*o.latency_ms, 30.0);
    }
    EXPECT_EQ(r.mode(RouteMode::ViaEdge).latency_histogram, (std::map<std::int64_t, std::size_t>{{3, 5}}));
}

TEST_F(SimFixture, DirectCloudSkipsTheEdge) {
    const auto r = run_simulation(fitbot::testing::chain_topology(5, 10, 7), workload(3, 50.0, ServiceQuality::High),
                                  classifiers);
    for (const auto& o : r.requests) {
        EXPECT_EQ(o.route, RouteMode::DirectCloud);
        EXPECT_EQ(*o.latency_ms, 14.0);
    }
    EXPECT_TRUE(r.edge_annotations.empty());
    for (const auto& e : r.event_log) {
        EXPECT_NE(e.source, edge());
        EXPECT_NE(e.dest, edge());
    }
}

TEST_F(SimFixture, ZeroJitterLatencyIsTheHopSum) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = static_cast<double>(rng.below(50)), b = static_cast<double>(rng.below(50));
        const auto r = run_simulation(fitbot::testing::chain_topology(a, b), workload(4, 7.0), classifiers);
        for (const auto& o : r.requests) EXPECT_EQ(*o.latency_ms, 2 * a + 2 * b);
    }
}

TEST_F(SimFixture, JitterStaysWithinBounds) {
    auto topo = fitbot::testing::chain_topology(5, 10);
    for (auto& l : topo.links) l.jitter_ms = 3.0;
    const auto r = run_simulation(topo, workload(50, 2.0), classifiers, {100.0, 10.0, 42});
    bool varied = false;
    for (const auto& o : r.requests) {
        ASSERT_TRUE(o.completed());
        EXPECT_GE(*o.latency_ms, 30.0);
        EXPECT_LT(*o.latency_ms, 42.0);
        varied = varied || *o.latency_ms != 30.0;
    }
    EXPECT_TRUE(varied);
}

TEST_F(SimFixture, CloudDownMidRunFallsBackToOffline) {
    auto topo = fitbot::testing::chain_topology(5, 10, 5);
    topo.link_events = {{90.0, edge(), cloud(), false}, {90.0, device(), cloud(), false}};
    const auto w = workload(10, 20.0);
    const auto r = run_simulation(topo, w, classifiers);
    expect_conservation(r);
    for (const auto& o : r.requests) {
        if (o.send_time_ms < 90.0) continue;
        EXPECT_EQ(o.route, RouteMode::Offline);
        ASSERT_TRUE(o.completed());
        EXPECT_EQ(*o.latency_ms, 0.0);
        EXPECT_EQ(*o.result, ResultPayload::from_score(emotion::classify(models.local, w[o.request].features)));
    }
    EXPECT_EQ(r.mode(RouteMode::Offline).requests, 5u);
    EXPECT_EQ(r.mode(RouteMode::Offline).completed, 5u);
    // The request sent at 80 ms reaches the cloud at 95 ms; its result finds the
    // cloud-edge link down.
    EXPECT_EQ(r.dropped, 1u);
    EXPECT_EQ(r.budget_violations, 1u);
}

TEST_F(SimFixture, FullyLossyLinksDropEverything) {
    auto topo = fitbot::testing::chain_topology(5, 10);
    for (auto& l : topo.links) l.drop_probability = 1.0;
    const auto r = run_simulation(topo, workload(8, 5.0), classifiers, {100.0, 10.0, 3});
    EXPECT_EQ(r.dropped, 8u);
    EXPECT_EQ(r.delivered, 0u);
    EXPECT_EQ(r.budget_violations, 8u);
    expect_conservation(r);
}

TEST_F(SimFixture, DeterministicPerSeed) {
    auto topo = fitbot::testing::chain_topology(5, 10, 4);
    for (auto& l : topo.links) {
        l.jitter_ms = 6.0;
        l.drop_probability = 0.1;
    }
    topo.link_events = {{120.0, edge(), cloud(), false}, {260.0, edge(), cloud(), true}};
    const auto w = workload(40, 9.0);
    const auto a = run_simulation(topo, w, classifiers, {100.0, 10.0, 17});
    const auto b = run_simulation(topo, w, classifiers, {100.0, 10.0, 17});
    EXPECT_EQ(a.event_log, b.event_log);
    EXPECT_EQ(to_json(a), to_json(b));
    EXPECT_EQ(event_log_to_csv(a), event_log_to_csv(b));
    expect_conservation(a);
    const auto c = run_simulation(topo, w, classifiers, {100.0, 10.0, 18});
    EXPECT_NE(event_log_to_csv(a), event_log_to_csv(c));
}

TEST_F(SimFixture, EventsAreOrderedAndSeqIncreasesPerSource) {
    auto topo = fitbot::testing::chain_topology(5, 10, 4);
    for (auto& l : topo.links) l.jitter_ms = 20.0;
    const auto r = run_simulation(topo, workload(30, 3.0, ServiceQuality::Standard), classifiers, {100.0, 10.0, 5});
    std::map<NodeId, std::int64_t> last;
    double t = 0.0;
    for (const auto& e : r.event_log) {
        EXPECT_GE(e.time_ms, t);
        t = e.time_ms;
        if (e.event != "SEND") continue;
        const auto it = last.find(e.source);
        if (it != last.end()) { EXPECT_GT(static_cast<std::int64_t>(e.seq), it->second); }
        last[e.source] = e.seq;
    }
}

TEST_F(SimFixture, EdgeAnnotatesForwardedResults) {
    const auto w = workload(6, 10.0);
    const auto r = run_simulation(fitbot::testing::chain_topology(1, 2), w, classifiers);
    ASSERT_EQ(r.edge_annotations.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& a = r.edge_annotations[i];
        EXPECT_EQ(a.utterance_id, w[i].features.utterance_id);
        ASSERT_EQ(a.mean_features.size(), 4u);
        EXPECT_NEAR(a.mean_features[0], w[i].features.frames.col(0).mean(), 1e-15);
        double sum = 0.0;
        for (double p : a.soft_label) sum += p;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST_F(SimFixture, InconsistentConfigurationIsRejected) {
    auto w = workload(2, 1.0);
    w[1].device = device(3);
    EXPECT_THROW(run_simulation(fitbot::testing::chain_topology(1, 1), w, classifiers), ConfigError);

    auto topo = fitbot::testing::chain_topology(1, 1);
    topo.links.push_back({device(), cloud(9), 1, 0, 0, true});
    EXPECT_THROW(run_simulation(topo, workload(1, 1), classifiers), ConfigError);

    topo = fitbot::testing::chain_topology(1, 1);
    topo.link_events = {{5.0, device(), edge(4), false}};
    EXPECT_THROW(run_simulation(topo, workload(1, 1), classifiers), ConfigError);

    topo = fitbot::testing::chain_topology(1, 1);
    topo.links[0].drop_probability = 1.5;
    EXPECT_THROW(run_simulation(topo, workload(1, 1), classifiers), ConfigError);

    topo = fitbot::testing::chain_topology(1, 1);
    topo.nodes.push_back(edge());
    EXPECT_THROW(run_simulation(topo, workload(1, 1), classifiers), ConfigError);

    EXPECT_THROW(run_simulation(fitbot::testing::chain_topology(1, 1), workload(1, 1), classifiers, {0.0, 10.0, 0}),
                 ConfigError);
}

TEST(ProtocolIo, TopologyRoundTrip) {
    auto topo = fitbot::testing::chain_topology(5, 10, 2.5);
    topo.links[1].jitter_ms = 1.25;
    topo.links[2].drop_probability = 0.5;
    topo.link_events = {{40.0, edge(), cloud(), false}};
    const auto j = to_json(topo);
    const auto back = topology_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.links[1].jitter_ms, 1.25);
    EXPECT_EQ(back.link_events[0].b, cloud());
}

TEST(ProtocolIo, MalformedTopologyIsAConfigError) {
    EXPECT_THROW(topology_from_json(nlohmann::json::parse(R"({"nodes": 3})")), ConfigError);
    EXPECT_THROW(topology_from_json(nlohmann::json::parse(R"({"nodes": [{"kind": "ROBOT", "index": 0}], "links": []})")),
                 ConfigError);
    EXPECT_THROW(topology_from_json(nlohmann::json::parse(R"({"nodes": [{"kind": "EDGE", "index": 300}], "links": []})")),
                 ConfigError);
}

TEST(ProtocolIo, WorkloadRoundTrip) {
    const auto w = fitbot::testing::periodic_workload(3, 12.5, ServiceQuality::High, 2, 6);
    const auto back = workload_from_json(nlohmann::json::parse(to_json(w).dump()));
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].send_time_ms, w[i].send_time_ms);
        EXPECT_EQ(back[i].quality, ServiceQuality::High);
        EXPECT_EQ(back[i].features, w[i].features);
    }
    EXPECT_THROW(workload_from_json(nlohmann::json::parse(R"({"requests": [{"send_time_ms": 0}]})")), ConfigError);
}

TEST(ProtocolIo, EventLogCsv) {
    const auto models = fitbot::testing::make_classifiers(2, 1);
    const auto r = run_simulation(fitbot::testing::chain_topology(5, 10),
                                  fitbot::testing::periodic_workload(1, 1.0, ServiceQuality::Standard, 2, 1),
                                  models.classifiers());
    const auto lines = text::lines(event_log_to_csv(r));
    ASSERT_EQ(lines.size(), r.event_log.size() + 1);
    EXPECT_EQ(lines[0], "time_ms,event,msg_type,seq,source,dest,route,request,sent,delivered,dropped,in_flight");
    EXPECT_EQ(lines[1], "0,SEND,EMOTION_REQUEST,0,DEVICE0,EDGE0,VIA_EDGE,0,1,0,0,1");
    EXPECT_EQ(lines.back(), "30,COMPLETE,EMOTION_RESULT,1,EDGE0,DEVICE0,VIA_EDGE,0,4,4,0,0");
}
