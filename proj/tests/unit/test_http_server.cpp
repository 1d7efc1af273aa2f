#include <gtest/gtest.h>

#include <httplib.h>

#include "educhat/http_server.hpp"
#include "educhat/mock_backend.hpp"
#include "test_support.hpp"

using namespace educhat;
using nlohmann::json;

namespace {

struct Server {
  Server() : backend({MockRule::when_contains({"slow"}, "zzz")}, "Hello from the mock backend.") {
    service = std::make_unique<ChatService>(ChatServiceDeps{&backend, &search, &store, nullptr, nullptr, nullptr});
    http = std::make_unique<ChatHttpServer>(*service);
    http->bind("127.0.0.1", 0);
    http->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", http->port());
  }

  json post(const std::string& path, const json& body, int expect_status) {
    auto res = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expect_status) << res->body;
    return res->body.empty() ? json() : json::parse(res->body);
  }

  MockBackend backend;
  educhat::testing::StubSearchProvider search;
  InMemoryConversationStore store;
  std::unique_ptr<ChatService> service;
  std::unique_ptr<ChatHttpServer> http;
  std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST(HttpApi, HealthAndScenes) {
  Server s;
  auto res = s.client->Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto scenes = json::parse(s.client->Get("/scenes")->body)["scenes"];
  ASSERT_EQ(scenes.size(), 5u);
  EXPECT_EQ(scenes[0]["scene"], "RetrievalQA");
  bool essay_overridable = false;
  for (const auto& sc : scenes) {
    if (sc["scene"] == "EssayAssessment") essay_overridable = sc["tools"][0]["overridable"].get<bool>();
  }
  EXPECT_TRUE(essay_overridable);
}

TEST(HttpApi, ConversationLifecycle) {
  Server s;
  auto created = s.post("/conversations", {{"scene", "RetrievalQA"}}, 201);
  const auto id = created["id"].get<std::string>();
  EXPECT_EQ(created["system_prompt"], compose(scene_defaults(FunctionScene::RetrievalQA)));

  auto reply = s.post("/conversations/" + id + "/messages", {{"text", "hi"}}, 200);
  EXPECT_EQ(reply["message"]["role"], "assistant");
  EXPECT_EQ(reply["message"]["content"], "Hello from the mock backend.");
  EXPECT_FALSE(reply["annotations"]["degraded"].get<bool>());

  auto got = json::parse(s.client->Get("/conversations/" + id)->body);
  EXPECT_EQ(got["messages"].size(), 2u);
  auto list = json::parse(s.client->Get("/conversations")->body);
  EXPECT_EQ(list["conversations"].size(), 1u);

  EXPECT_EQ(s.client->Delete("/conversations/" + id)->status, 204);
  EXPECT_EQ(s.client->Delete("/conversations/" + id)->status, 204);
  EXPECT_EQ(s.client->Get("/conversations/" + id)->status, 404);
}

TEST(HttpApi, ErrorMapping) {
  Server s;
  auto err = s.post("/conversations", {{"scene", "EmotionalSupport"}, {"overrides", {{"retrieval", true}}}}, 400);
  EXPECT_EQ(err["error"]["code"], "illegal_override");
  EXPECT_NE(err["error"]["message"].get<std::string>().find("EmotionalSupport"), std::string::npos);
  s.post("/conversations", {{"scene", "Debate"}}, 400);
  s.post("/conversations", {{"nothing", 1}}, 400);
  s.post("/conversations/c-missing/messages", {{"text", "x"}}, 404);
  auto id = s.post("/conversations", {{"scene", "GeneralChat"}}, 201)["id"].get<std::string>();
  s.post("/conversations/" + id + "/messages", {{"text", ""}}, 400);
  s.post("/conversations/" + id + "/messages", {{"nope", ""}}, 400);
  auto bad = s.client->Post("/conversations", "{not json", "application/json");
  EXPECT_EQ(bad->status, 400);
}

TEST(HttpApi, BackendErrorsAreRetriable) {
  Server s;
  s.backend.set_latency(std::chrono::milliseconds(100));
  ChatServiceConfig cfg;
  cfg.deadline_ms = 10;
  ChatService slow({&s.backend, nullptr, &s.store, nullptr, nullptr, nullptr}, cfg);
  ChatHttpServer http(slow);
  http.bind("127.0.0.1", 0);
  http.start();
  httplib::Client client("127.0.0.1", http.port());
  auto id = json::parse(client.Post("/conversations", R"({"scene": "GeneralChat"})", "application/json")->body)["id"]
                .get<std::string>();
  auto res = client.Post("/conversations/" + id + "/messages", R"({"text": "hi"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 504);
  EXPECT_TRUE(json::parse(res->body)["error"]["retriable"].get<bool>());
}

TEST(HttpApi, StreamingEvents) {
  Server s;
  s.backend.set_stream_chunk_chars(5);
  auto id = s.post("/conversations", {{"scene", "SocraticTeaching"}}, 201)["id"].get<std::string>();
  auto res = s.client->Post("/conversations/" + id + "/messages", json{{"text", "hi"}, {"stream", true}}.dump(),
                            "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->get_header_value("Content-Type").find("text/event-stream"), std::string::npos);
  auto events = educhat::testing::parse_event_stream(res->body);
  ASSERT_GE(events.size(), 3u);
  std::string joined;
  std::size_t i = 0;
  for (; i < events.size() && events[i].event == "delta"; ++i) joined += json::parse(events[i].data)["content"].get<std::string>();
  ASSERT_EQ(events.size(), i + 2);
  EXPECT_EQ(events[i].event, "annotations");
  EXPECT_EQ(json::parse(events[i].data)["socratic_lint"].size(), 1u);
  EXPECT_EQ(events[i + 1].event, "done");
  auto done = json::parse(events[i + 1].data);
  EXPECT_EQ(done["message"]["content"], joined);
  EXPECT_EQ(joined, "Hello from the mock backend.");
}

TEST(HttpApi, StreamingErrorEvent) {
  Server s;
  auto id = s.post("/conversations", {{"scene", "GeneralChat"}}, 201)["id"].get<std::string>();
  MockBackend failing({MockRule::always_failing(BackendError::Kind::Unavailable)});
  ChatService service({&failing, nullptr, &s.store, nullptr, nullptr, nullptr});
  ChatHttpServer http(service);
  http.bind("127.0.0.1", 0);
  http.start();
  httplib::Client client("127.0.0.1", http.port());
  auto res = client.Post("/conversations/" + id + "/messages", R"({"text": "hi", "stream": true})", "application/json");
  ASSERT_TRUE(res);
  auto events = educhat::testing::parse_event_stream(res->body);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].event, "error");
  EXPECT_EQ(json::parse(events[0].data)["error"]["code"], "backend_unavailable");
  auto missing = client.Post("/conversations/c-0/messages", R"({"text": "hi", "stream": true})", "application/json");
  EXPECT_EQ(missing->status, 404);
}

TEST(HttpApi, ServesStaticClient) {
  educhat::testing::TempDir dir;
  educhat::testing::write_file(dir / "index.html", "<html>ui</html>");
  MockBackend backend;
  InMemoryConversationStore store;
  ChatService service({&backend, nullptr, &store, nullptr, nullptr, nullptr});
  ChatHttpServer http(service, HttpServerOptions{4, dir.path()});
  http.bind("127.0.0.1", 0);
  http.start();
  httplib::Client client("127.0.0.1", http.port());
  auto res = client.Get("/index.html");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, "<html>ui</html>");
  EXPECT_EQ(client.Get("/health")->status, 200);
}
