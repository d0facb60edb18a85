#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "refine/cassette.hpp"
#include "refine/remote_backend.hpp"
#include "refine/scripted_backend.hpp"
#include "support/stub_server.hpp"
#include "support/temp_dir.hpp"

namespace refine {
namespace {

GenerationRequest make_request(const std::string& question, std::string stage = "initial") {
  GenerationRequest req;
  req.messages.push_back({Role::user, {Segment::image("img/1.png"), Segment::text(question)}});
  req.stage = std::move(stage);
  return req;
}

TEST(ScriptedBackend, ReturnsRepliesThenExhausts) {
  ScriptedBackend b(std::vector<std::string>{"A cat."});
  const auto req = make_request("What is it?");
  EXPECT_EQ(b.generate(req).text, "A cat.");
  try {
    b.generate(req);
    FAIL() << "expected ScriptExhausted";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::script_exhausted);
    EXPECT_EQ(e.request_hash(), canonical_request_hash(req));
  }
}

TEST(ScriptedBackend, StageQueuesTakePriority) {
  auto b = ScriptedBackend::from_json(json::parse(R"({
    "replies": ["shared-1", "shared-2"],
    "stages": {"critique": ["fb-1"], "decide": [{"error": "Timeout"}]}
  })"));
  EXPECT_EQ(b.generate(make_request("q", "initial")).text, "shared-1");
  EXPECT_EQ(b.generate(make_request("q", "critique")).text, "fb-1");
  EXPECT_EQ(b.generate(make_request("q", "critique")).text, "shared-2");
  try {
    b.generate(make_request("q", "decide"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::timeout);
  }
  EXPECT_EQ(b.remaining(), 0u);
}

TEST(ScriptedBackend, SameScriptSameOutputs) {
  const std::vector<std::string> script = {"a", "b", "c"};
  ScriptedBackend x(script), y(script);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(x.generate(make_request("q")).text, y.generate(make_request("q")).text);
}

TEST(CanonicalHash, DeterministicAndExcludesTimeoutAndStage) {
  auto a = make_request("What color is the pot?");
  auto b = make_request("What color is the pot?");
  const auto h = canonical_request_hash(a);
  EXPECT_EQ(h.size(), 64u);
  EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(h, canonical_request_hash(b));
  b.timeout = std::chrono::milliseconds(5);
  b.stage = "decide";
  EXPECT_EQ(h, canonical_request_hash(b));
  b.decode.max_tokens = 100;
  EXPECT_NE(h, canonical_request_hash(b));
  auto c = make_request("What color is the pot?");
  c.decode.greedy = false;
  EXPECT_NE(h, canonical_request_hash(c));
}

TEST(CanonicalHash, SingleCharacterPerturbationsNeverCollide) {
  const std::string base = "What color is the pot on the left side of the table?";
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pos(0, base.size() - 1);
  std::uniform_int_distribution<int> ch(32, 126);
  std::set<std::string> seen{canonical_request_hash(make_request(base))};
  std::set<std::string> texts{base};
  int distinct_texts = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string q = base;
    q[pos(rng)] = static_cast<char>(ch(rng));
    // a second character too, so the perturbed set is large
    q[pos(rng)] = static_cast<char>(ch(rng));
    if (!texts.insert(q).second) continue;
    ++distinct_texts;
    EXPECT_TRUE(seen.insert(canonical_request_hash(make_request(q))).second) << q;
  }
  EXPECT_GT(distinct_texts, 9000);
}

TEST(GenerationRequest, Validation) {
  GenerationRequest empty;
  EXPECT_THROW(empty.validate(), ValidationError);
  auto two_images = make_request("q");
  two_images.messages[0].content.push_back(Segment::image("b.png"));
  EXPECT_THROW(two_images.validate(), ValidationError);
  auto zero_tokens = make_request("q");
  zero_tokens.decode.max_tokens = 0;
  EXPECT_THROW(zero_tokens.validate(), ValidationError);
}

TEST(CountingBackend, CountsPerStage) {
  ScriptedBackend inner(std::vector<std::string>{"a", "b", "c"});
  CountingBackend counting(inner);
  counting.generate(make_request("q", "initial"));
  counting.generate(make_request("q", "critique"));
  counting.generate(make_request("q", "critique"));
  EXPECT_EQ(counting.calls(), 3u);
  EXPECT_EQ(counting.calls("critique"), 2u);
  EXPECT_EQ(counting.stage_sequence(), (std::vector<std::string>{"initial", "critique", "critique"}));
}

TEST(RemoteBackend, ReturnsStubBodyAndSendsGreedyRequest) {
  testing_support::StubServer stub([](const json&) { return "The pot is silver."; });
  RemoteBackend backend({stub.url(), "sk-secret", "test-model"});
  GenerationRequest req;
  req.messages.push_back({Role::user, {Segment::image("https://example.com/a.png"), Segment::text("Color?")}});
  const auto result = backend.generate(req);
  EXPECT_EQ(result.text, "The pot is silver.");
  EXPECT_GE(result.latency_ms, 0.0);

  const auto body = json::parse(stub.bodies().at(0));
  EXPECT_EQ(body.at("model"), "test-model");
  EXPECT_EQ(body.at("temperature"), 0);
  EXPECT_EQ(body.at("max_tokens"), 512);
  const auto& content = body.at("messages").at(0).at("content");
  EXPECT_EQ(content.at(0).at("type"), "image_url");
  EXPECT_EQ(content.at(0).at("image_url").at("url"), "https://example.com/a.png");
  EXPECT_EQ(content.at(1).at("text"), "Color?");
  EXPECT_EQ(stub.auth_headers().at(0), "Bearer sk-secret");
}

TEST(RemoteBackend, InlinesLocalImagesAsDataUrl) {
  testing_support::TempDir dir;
  const auto img = dir / "tiny.png";
  std::ofstream(img, std::ios::binary) << "PNGDATA";
  EXPECT_EQ(image_to_url(img.string()), "data:image/png;base64," + base64_encode("PNGDATA"));
  EXPECT_EQ(base64_encode("Man"), "TWFu");
  EXPECT_EQ(base64_encode("Ma"), "TWE=");
  EXPECT_EQ(base64_encode(""), "");
}

TEST(RemoteBackend, RetriesTransportOnce) {
  testing_support::StubServer stub([](const json&) { return "ok"; });
  RemoteBackend backend({stub.url(), "", "m"});
  auto req = make_request("q");
  req.messages[0].content.erase(req.messages[0].content.begin());
  stub.fail_next(1);
  EXPECT_EQ(backend.generate(req).text, "ok");
  EXPECT_EQ(stub.hits(), 2);

  stub.fail_next(2);
  try {
    backend.generate(req);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::transport);
  }
  EXPECT_EQ(stub.hits(), 4);
}

TEST(RemoteBackend, TimeoutIsNotRetried) {
  testing_support::StubServer stub([](const json&) { return "late"; });
  stub.set_delay_ms(600);
  RemoteBackend backend({stub.url(), "", "m"});
  auto req = make_request("q");
  req.messages[0].content.erase(req.messages[0].content.begin());  // no image file to read
  req.timeout = std::chrono::milliseconds(150);
  try {
    backend.generate(req);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::timeout);
    EXPECT_EQ(e.request_hash(), canonical_request_hash(req));
  }
  EXPECT_EQ(stub.hits(), 1);
}

TEST(RemoteBackend, ConnectionFailureIsTransportAndRedactsKey) {
  // Port 1 on localhost refuses connections.
  RemoteBackend backend({"http://127.0.0.1:1", "sk-secret", "m"});
  GenerationRequest req;
  req.messages.push_back({Role::user, {Segment::text("sk-secret should not leak")}});
  try {
    backend.generate(req);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::transport);
    EXPECT_EQ(std::string(e.what()).find("sk-secret"), std::string::npos);
  }
  EXPECT_EQ(redact("key=abc and abc", "abc"), "key=[REDACTED] and [REDACTED]");
}

TEST(RemoteBackend, ParsesContentPartsArray) {
  const auto body = json::parse(R"({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})");
  EXPECT_EQ(parse_chat_completion(body), "ab");
  EXPECT_THROW(parse_chat_completion(json::parse(R"({"choices":[]})")), std::exception);
}

TEST(Cassette, RecordThenReplayWithoutNetwork) {
  testing_support::TempDir dir;
  const auto cassette = dir / "session.jsonl";
  std::vector<std::string> recorded;
  {
    testing_support::StubServer stub([](const json& body) {
      return "echo: " + body.at("messages").at(0).at("content").at(0).at("text").get<std::string>();
    });
    RemoteBackend remote({stub.url(), "sk-secret", "m"});
    RecordingBackend recorder(remote, cassette, true);
    for (int i = 0; i < 5; ++i) {
      GenerationRequest req;
      req.messages.push_back({Role::user, {Segment::text("question " + std::to_string(i))}});
      recorded.push_back(recorder.generate(req).text);
    }
  }  // server gone

  std::ifstream in(cassette);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(all.find("sk-secret"), std::string::npos);

  ReplayBackend replay(cassette);
  EXPECT_EQ(replay.size(), 5u);
  // Lookup is by hash, so order does not matter.
  for (int i = 4; i >= 0; --i) {
    GenerationRequest req;
    req.messages.push_back({Role::user, {Segment::text("question " + std::to_string(i))}});
    EXPECT_EQ(replay.generate(req).text, recorded[static_cast<std::size_t>(i)]);
  }
  GenerationRequest unknown;
  unknown.messages.push_back({Role::user, {Segment::text("never asked")}});
  try {
    replay.generate(unknown);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendErrorKind::replay_miss);
    EXPECT_EQ(e.request_hash(), canonical_request_hash(unknown));
  }
}

TEST(Cassette, CanonicalJsonRoundTrips) {
  auto req = make_request("round trip");
  req.decode.max_tokens = 64;
  const auto back = request_from_canonical_json(canonical_request_json(req));
  EXPECT_EQ(canonical_request_hash(back), canonical_request_hash(req));
}

TEST(BackendError, AnnotationKeepsKindAndHash) {
  BackendError e(BackendErrorKind::transport, std::string(64, 'a'), "boom");
  const auto annotated = e.annotated("critique", 2);
  EXPECT_EQ(annotated.kind(), BackendErrorKind::transport);
  EXPECT_EQ(annotated.stage(), "critique");
  EXPECT_EQ(annotated.iteration(), 2u);
  EXPECT_NE(std::string(annotated.what()).find("critique"), std::string::npos);
}

}  // namespace
}  // namespace refine
