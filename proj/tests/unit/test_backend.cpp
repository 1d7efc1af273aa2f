#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "educhat/http_util.hpp"
#include "educhat/mock_backend.hpp"
#include "educhat/remote_backend.hpp"
#include "test_support.hpp"

using namespace educhat;
using educhat::testing::StubHttpServer;
using nlohmann::json;

namespace {

BackendRequest simple_request(std::string text = "Hello?") {
  BackendRequest r;
  r.system_prompt = "sys";
  r.messages.push_back({"m-1", Role::User, std::move(text), 0});
  r.params.deadline_ms = 5000;
  return r;
}

BackendError::Kind error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const BackendError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected BackendError";
  return BackendError::Kind::MalformedReply;
}

}  // namespace

TEST(Message, JsonRoundTrip) {
  Message m{"m-3", Role::SystemContext, "ctx", 1700000000000};
  json j = m;
  EXPECT_EQ(j["role"], "system-context");
  EXPECT_EQ(j.get<Message>(), m);
}

TEST(MockBackend, FirstMatchingRuleWins) {
  MockBackend mock({MockRule::when_contains({"Hello"}, "Hi there"), MockRule::always([](const auto&) { return "fallback"; })});
  EXPECT_EQ(mock.generate(simple_request()).content, "Hi there");
  EXPECT_EQ(mock.generate(simple_request("bye")).content, "fallback");
  EXPECT_EQ(mock.call_count(), 2u);
  EXPECT_EQ(mock.count_calls_containing("bye"), 1u);
}

TEST(MockBackend, DefaultReplyAndFailures) {
  MockBackend mock({MockRule::failing_when_contains({"boom"}, BackendError::Kind::Unavailable)});
  EXPECT_EQ(mock.generate(simple_request()).content, "OK");
  EXPECT_EQ(error_kind([&] { mock.generate(simple_request("boom")); }), BackendError::Kind::Unavailable);
  EXPECT_EQ(mock.call_count(), 2u);
}

TEST(MockBackend, StreamConcatenationEqualsReply) {
  MockBackend mock({MockRule::always([](const auto&) { return std::string("数学很有趣, isn't it?"); })});
  mock.set_stream_chunk_chars(3);
  std::string joined;
  std::size_t deltas = 0;
  auto m = mock.generate_stream(simple_request(), [&](std::string_view d) {
    joined += d;
    ++deltas;
  });
  EXPECT_EQ(joined, m.content);
  EXPECT_EQ(m.content, "数学很有趣, isn't it?");
  EXPECT_GT(deltas, 1u);
}

TEST(MockBackend, LatencyBeyondDeadlineTimesOut) {
  MockBackend mock;
  mock.set_latency(std::chrono::milliseconds(50));
  auto r = simple_request();
  r.params.deadline_ms = 10;
  EXPECT_EQ(error_kind([&] { mock.generate(r); }), BackendError::Kind::Timeout);
}

TEST(MockBackend, CallLogIsThreadSafe) {
  MockBackend mock;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) mock.generate(simple_request());
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(mock.call_count(), 400u);
}

TEST(DefaultStream, EmitsSingleDelta) {
  struct Fixed : ChatBackend {
    Message generate(const BackendRequest&) override { return {"a-1", Role::Assistant, "whole", 0}; }
  } fixed;
  std::vector<std::string> deltas;
  auto m = fixed.generate_stream(simple_request(), [&](std::string_view d) { deltas.emplace_back(d); });
  ASSERT_EQ(deltas.size(), 1u);
  EXPECT_EQ(deltas[0], m.content);
}

TEST(Sse, FormatAndParse) {
  std::vector<SseEvent> events;
  SseParser parser([&](const SseEvent& e) { events.push_back(e); });
  auto wire = format_sse("delta", "{\"content\":\"a\"}") + format_sse("note", "line1\nline2") + ": comment\n\n" +
              "data: plain\n\n";
  for (char c : wire) parser.feed(std::string_view(&c, 1));
  parser.finish();
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[0], (SseEvent{"delta", "{\"content\":\"a\"}"}));
  EXPECT_EQ(events[1].data, "line1\nline2");
  EXPECT_EQ(events[2], (SseEvent{"message", "plain"}));
}

TEST(Sse, HandlesCrLfAndUnterminatedEvent) {
  std::vector<SseEvent> events;
  SseParser parser([&](const SseEvent& e) { events.push_back(e); });
  parser.feed("event: x\r\ndata: 1\r\n\r\ndata: tail");
  parser.finish();
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0], (SseEvent{"x", "1"}));
  EXPECT_EQ(events[1].data, "tail");
}

TEST(Endpoint, Parse) {
  auto e = parse_endpoint("http://127.0.0.1:8000/v1/generate");
  EXPECT_EQ(e.origin, "http://127.0.0.1:8000");
  EXPECT_EQ(e.path, "/v1/generate");
  EXPECT_EQ(parse_endpoint("http://host").path, "/");
  EXPECT_THROW(parse_endpoint("not a url"), std::invalid_argument);
}

TEST(RemoteBackend, RequestBodySchema) {
  auto r = simple_request();
  r.params.locale = Locale::Zh;
  auto body = RemoteBackend::request_body(r, "edu-7b", false);
  EXPECT_EQ(body["model"], "edu-7b");
  EXPECT_EQ(body["system_prompt"], "sys");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "Hello?");
  EXPECT_EQ(body["params"]["locale"], "zh");
  EXPECT_EQ(body["stream"], false);
}

TEST(RemoteBackend, EchoServer) {
  StubHttpServer stub;
  std::string seen_auth;
  stub.server().Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    res.set_content(json{{"content", "echo: " + body["messages"].back()["content"].get<std::string>()}}.dump(),
                    "application/json");
  });
  stub.start();
  RemoteBackend backend({stub.url("/generate"), "secret", "m"});
  auto m = backend.generate(simple_request("ping"));
  EXPECT_EQ(m.content, "echo: ping");
  EXPECT_EQ(m.role, Role::Assistant);
  EXPECT_EQ(seen_auth, "Bearer secret");
}

TEST(RemoteBackend, ServerErrorIsUnavailable) {
  StubHttpServer stub;
  stub.server().Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("overloaded", "text/plain");
  });
  stub.start();
  RemoteBackend backend({stub.url("/generate"), "", ""});
  try {
    backend.generate(simple_request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::Unavailable);
    EXPECT_TRUE(e.retriable());
  }
}

TEST(RemoteBackend, MalformedReplies) {
  StubHttpServer stub;
  stub.server().Post("/nojson", [](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
  stub.server().Post("/empty", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"content": ""})", "application/json");
  });
  stub.server().Post("/wrong", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text": "hi"})", "application/json");
  });
  stub.start();
  for (const char* path : {"/nojson", "/empty", "/wrong"}) {
    RemoteBackend backend({stub.url(path), "", ""});
    EXPECT_EQ(error_kind([&] { backend.generate(simple_request()); }), BackendError::Kind::MalformedReply) << path;
  }
}

TEST(RemoteBackend, StreamingDeltas) {
  StubHttpServer stub;
  stub.server().Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
    ASSERT_TRUE(json::parse(req.body)["stream"].get<bool>());
    res.set_chunked_content_provider("text/event-stream", [](std::size_t, httplib::DataSink& sink) {
      for (const char* part : {"Hel", "lo"}) {
        auto ev = "data: " + json{{"delta", part}}.dump() + "\n\n";
        sink.write(ev.data(), ev.size());
      }
      std::string done = "data: [DONE]\n\n";
      sink.write(done.data(), done.size());
      sink.done();
      return true;
    });
  });
  stub.start();
  RemoteBackend backend({stub.url("/generate"), "", ""});
  std::vector<std::string> deltas;
  auto m = backend.generate_stream(simple_request(), [&](std::string_view d) { deltas.emplace_back(d); });
  EXPECT_EQ(deltas, (std::vector<std::string>{"Hel", "lo"}));
  EXPECT_EQ(m.content, "Hello");
}

TEST(RemoteBackend, TruncatedStreamIsMalformed) {
  StubHttpServer stub;
  stub.server().Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("data: {\"delta\": \"Hel\"}\n\n", "text/event-stream");
  });
  stub.start();
  RemoteBackend backend({stub.url("/generate"), "", ""});
  EXPECT_EQ(error_kind([&] { backend.generate_stream(simple_request(), [](std::string_view) {}); }),
            BackendError::Kind::MalformedReply);
}

TEST(RemoteBackend, SlowServerTimesOut) {
  StubHttpServer stub;
  stub.server().Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(R"({"content": "late"})", "application/json");
  });
  stub.start();
  RemoteBackend backend({stub.url("/generate"), "", ""});
  auto r = simple_request();
  r.params.deadline_ms = 300;
  auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(error_kind([&] { backend.generate(r); }), BackendError::Kind::Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(1400));
}

TEST(RemoteBackend, UnreachableIsConnectionError) {
  RemoteBackend backend({"http://127.0.0.1:9/generate", "", ""});
  EXPECT_EQ(error_kind([&] { backend.generate(simple_request()); }), BackendError::Kind::Connection);
}
