#include <gtest/gtest.h>

#include <cmath>
#include <thread>
#include <vector>

#include "advpose/attack.hpp"
#include "advpose/remote.hpp"
#include "advpose/stub_server.hpp"
#include "advpose/wire.hpp"

using namespace advpose;

namespace {

Raster test_image() {
    Raster img(16, 16, 30, 60, 90);
    img.at(3, 4)[0] = 250;
    img.at(12, 9)[2] = 11;
    return img;
}

double vec_norm(const Embedding& e) {
    double n = 0.0;
    for (double v : e) n += v * v;
    return std::sqrt(n);
}

}  // namespace

TEST(Base64, RoundTripAndErrors) {
    std::string data = "any carnal pleasure.";
    for (std::size_t len = 0; len <= data.size(); ++len) {
        std::string part = data.substr(0, len);
        EXPECT_EQ(wire::base64_decode(wire::base64_encode(part)), part);
    }
    EXPECT_EQ(wire::base64_encode("Man"), "TWFu");
    EXPECT_EQ(wire::base64_encode("Ma"), "TWE=");
    EXPECT_EQ(wire::base64_encode("M"), "TQ==");
    EXPECT_THROW(wire::base64_decode("abc"), ProtocolError);      // bad length
    EXPECT_THROW(wire::base64_decode("a=bc"), ProtocolError);     // misplaced padding
    EXPECT_THROW(wire::base64_decode("ab!c"), ProtocolError);     // bad character
}

TEST(Wire, ImagePayloadRoundTrip) {
    Raster img = test_image();
    Raster back = wire::decode_image_payload(wire::encode_image_payload(img));
    EXPECT_TRUE(back == img);
}

TEST(ParseEndpoint, FormsAndErrors) {
    RemoteConfig c = parse_endpoint("http://127.0.0.1:9031");
    EXPECT_EQ(c.host, "127.0.0.1");
    EXPECT_EQ(c.port, 9031);
    c = parse_endpoint("localhost:80");
    EXPECT_EQ(c.host, "localhost");
    EXPECT_EQ(c.port, 80);
    EXPECT_THROW(parse_endpoint("http://nohost"), InvalidInput);
    EXPECT_THROW(parse_endpoint("https://x:1"), InvalidInput);
    EXPECT_THROW(parse_endpoint("host:notaport"), InvalidInput);
}

TEST(StubConformance, EmbedRoundTripsAreDeterministic) {
    StubServer server;
    int port = server.start();
    RemoteConfig cfg;
    cfg.port = port;
    cfg.retries = 0;
    RemoteScorer client(cfg);

    Raster img = test_image();
    Embedding e1 = client.embed_image(img);
    Embedding e2 = client.embed_image(img);
    ASSERT_EQ(e1.size(), 64u);
    ASSERT_EQ(e1, e2);    // content-addressed: bit-exact round trip
    EXPECT_NEAR(vec_norm(e1), 1.0, 1e-9);

    Embedding t1 = client.embed_text("a photo of a box");
    Embedding t2 = client.embed_text("a photo of a box");
    Embedding t3 = client.embed_text("a photo of a crate");
    ASSERT_EQ(t1, t2);
    EXPECT_NE(t1, t3);
    EXPECT_EQ(client.pinned_dimension(), 64);

    auto [r, p] = client.score(img, PoseParams{});
    EXPECT_GE(r, 1.0);
    EXPECT_LE(r, 5.0);
    EXPECT_GE(p, 1.0);
    EXPECT_LE(p, 5.0);
    auto [r2, p2] = client.score(img, PoseParams{});
    EXPECT_EQ(r, r2);
    EXPECT_EQ(p, p2);
    EXPECT_EQ(client.normalized_responses(), 0);
}

TEST(StubConformance, DimensionMismatchIsRejected) {
    StubServerOptions opt;
    opt.embed_dim = 64;
    opt.text_dim = 32;    // deliberately inconsistent
    StubServer server(opt);
    int port = server.start();
    RemoteConfig cfg;
    cfg.port = port;
    cfg.retries = 0;
    RemoteScorer client(cfg);

    Embedding img = client.embed_image(test_image());
    ASSERT_EQ(img.size(), 64u);
    try {
        client.embed_text("anything");
        FAIL() << "expected ProtocolError";
    } catch (const ProtocolError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("64"), std::string::npos) << msg;
        EXPECT_NE(msg.find("32"), std::string::npos) << msg;
    }
}

TEST(StubConformance, NonUnitVectorsAreNormalizedClientSide) {
    StubServerOptions opt;
    opt.norm_scale = 2.0;
    StubServer server(opt);
    int port = server.start();
    RemoteConfig cfg;
    cfg.port = port;
    cfg.retries = 0;
    RemoteScorer client(cfg);

    Embedding e = client.embed_image(test_image());
    EXPECT_NEAR(vec_norm(e), 1.0, 1e-9);
    EXPECT_EQ(client.normalized_responses(), 1);
}

TEST(StubConformance, MalformedRequestsGet400WithError) {
    StubServer server;
    int port = server.start();
    httplib::Client raw("127.0.0.1", port);

    auto res = raw.Post("/v1/embed_image", "this is not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    auto j = nlohmann::json::parse(res->body);
    EXPECT_TRUE(j.contains("error"));

    nlohmann::json bad;
    bad["id"] = "x";
    bad["format"] = "png";    // unsupported
    bad["data"] = "aaaa";
    res = raw.Post("/v1/embed_image", bad.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);

    bad["format"] = "adpr-base64";
    bad["data"] = wire::base64_encode("not an adpr blob");
    res = raw.Post("/v1/embed_image", bad.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST(RemoteClient, ProtocolErrorsSurfaceServerMessage) {
    StubServer server;
    int port = server.start();
    RemoteConfig cfg;
    cfg.port = port;
    cfg.retries = 0;
    RemoteScorer client(cfg);
    // The client itself always sends well-formed bodies, so drive the 4xx
    // path with an empty text (stub accepts) versus a missing endpoint.
    httplib::Client raw("127.0.0.1", port);
    auto res = raw.Post("/v1/does_not_exist", "{}", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 404);
}

TEST(RemoteClient, UnreachableEndpointExhaustsRetries) {
    RemoteConfig cfg;
    cfg.port = 1;    // nothing listens here
    cfg.retries = 2;
    cfg.backoff_ms = 1;
    cfg.timeout_sec = 1;
    RemoteScorer client(cfg);
    try {
        client.embed_text("hello");
        FAIL() << "expected ProviderUnavailable";
    } catch (const ProviderUnavailable& e) {
        EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos) << e.what();
    }
}

TEST(StubConformance, MissingNaturalnessEndpointIsDistinguishable) {
    StubServerOptions opt;
    opt.naturalness = false;
    StubServer server(opt);
    RemoteConfig cfg;
    cfg.port = server.start();
    cfg.retries = 0;
    RemoteScorer client(cfg);
    EXPECT_NO_THROW(client.embed_image(test_image()));
    EXPECT_THROW(client.score(test_image(), PoseParams{}), EndpointMissing);
}

TEST(RemoteClient, ConcurrentCallsMatchSequentialResults) {
    StubServer server;
    int port = server.start();
    RemoteConfig cfg;
    cfg.port = port;
    cfg.retries = 0;
    RemoteScorer client(cfg);

    std::vector<std::string> texts;
    for (int i = 0; i < 12; ++i) texts.push_back("label number " + std::to_string(i));

    std::vector<Embedding> sequential;
    for (const auto& t : texts) sequential.push_back(client.embed_text(t));

    std::vector<Embedding> concurrent(texts.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < texts.size(); ++i)
        threads.emplace_back([&, i] { concurrent[i] = client.embed_text(texts[i]); });
    for (auto& t : threads) t.join();

    for (std::size_t i = 0; i < texts.size(); ++i) ASSERT_EQ(concurrent[i], sequential[i]);
}

namespace {

AttackConfig remote_config(int port) {
    AttackConfig cfg;
    cfg.scene_path = std::string(ADVPOSE_ASSETS_DIR) + "/cube.scene";
    cfg.labels.labels = {"box", "crate"};
    cfg.labels.truth_index = 0;
    cfg.provider = ProviderKind::Remote;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.budget = 2;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST(RemoteAttack, EndToEndAgainstStubIsDeterministic) {
    StubServer server;
    int port = server.start();
    AttackConfig cfg = remote_config(port);
    Victim victim = make_victim(cfg);

    AttackOutcome a = run_attack(cfg, victim);
    AttackOutcome b = run_attack(cfg, victim);
    EXPECT_EQ(report_to_json(a.report).dump(), report_to_json(b.report).dump());
    EXPECT_EQ(a.run.log.size(), 2u);
    EXPECT_GE(a.report.asr_random, 0.0);
    EXPECT_LE(a.report.asr_random, 1.0);
}

TEST(RemoteAttack, FallsBackToHeuristicWhenNaturalnessAbsent) {
    StubServerOptions opt;
    opt.naturalness = false;
    StubServer server(opt);
    int port = server.start();
    AttackConfig cfg = remote_config(port);
    Victim victim = make_victim(cfg);

    auto* fallback = dynamic_cast<RemoteNaturalnessFallback*>(victim.naturalness.get());
    ASSERT_NE(fallback, nullptr);
    EXPECT_FALSE(fallback->using_heuristic());

    AttackOutcome out = run_attack(cfg, victim);
    EXPECT_TRUE(fallback->using_heuristic());
    EXPECT_EQ(out.run.log.size(), 2u);
}
