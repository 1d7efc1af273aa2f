#include <gtest/gtest.h>

#include <httplib.h>

#include <random>

#include "educhat/mock_backend.hpp"
#include "educhat/retrieval.hpp"
#include "educhat/text.hpp"
#include "test_support.hpp"

using namespace educhat;
using educhat::testing::StubSearchProvider;
using nlohmann::json;

namespace {

Snippet snip(std::string name, std::string text) {
  return Snippet{"https://example.org/" + name, "Title " + name, std::move(text), std::nullopt};
}

std::vector<Snippet> numbered(std::size_t n) {
  std::vector<Snippet> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(snip(std::to_string(i), "text " + std::to_string(i)));
  return out;
}

class ThrowingProvider final : public SearchProvider {
 public:
  explicit ThrowingProvider(ProviderError::Kind kind) : kind_(kind) {}
  std::vector<Snippet> search(std::string_view, std::size_t) override { throw ProviderError(kind_, "provider timed out"); }

 private:
  ProviderError::Kind kind_;
};

}  // namespace

TEST(Retrieve, FewerThanK) {
  StubSearchProvider provider(numbered(3));
  auto r = retrieve("q", provider, 5);
  ASSERT_EQ(r.snippets.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.snippets[i].text, "text " + std::to_string(i));
  EXPECT_FALSE(r.degraded);
}

TEST(Retrieve, TruncatesToK) {
  class Greedy final : public SearchProvider {
   public:
    std::vector<Snippet> search(std::string_view, std::size_t) override { return numbered(10); }
  } provider;
  auto r = retrieve("q", provider, 4);
  ASSERT_EQ(r.snippets.size(), 4u);
  EXPECT_EQ(r.snippets[3].text, "text 3");
}

TEST(Retrieve, ProviderTimeoutDegrades) {
  ThrowingProvider provider(ProviderError::Kind::Timeout);
  auto r = retrieve("q", provider, 5);
  EXPECT_TRUE(r.degraded);
  EXPECT_TRUE(r.snippets.empty());
  ASSERT_TRUE(r.error.has_value());
  EXPECT_NE(r.error->find("timed out"), std::string::npos);
}

TEST(Retrieve, LongTextTruncatedAndFlagged) {
  std::string long_text;
  for (int i = 0; i < 3000; ++i) long_text += "学";
  StubSearchProvider provider({snip("a", long_text), snip("b", "short"), snip("c", "")});
  auto r = retrieve("q", provider, 5, 2000);
  ASSERT_EQ(r.snippets.size(), 2u);
  EXPECT_EQ(text::utf8_length(r.snippets[0].text), 2000u);
  EXPECT_EQ(r.truncated, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.dropped_empty, 1u);
}

TEST(Retrieve, ClearsProviderVerdicts) {
  auto s = snip("a", "x");
  s.verdict = Verdict::Helpful;
  StubSearchProvider provider({s});
  EXPECT_FALSE(retrieve("q", provider).snippets[0].verdict.has_value());
}

TEST(Retrieve, RejectsBadArguments) {
  StubSearchProvider provider;
  EXPECT_THROW(retrieve("  ", provider), std::invalid_argument);
  EXPECT_THROW(retrieve("q", provider, 0), std::invalid_argument);
}

TEST(SelfCheck, YesAndNo) {
  MockBackend mock({MockRule::when_contains({"apples"}, "Yes"), MockRule::always([](const auto&) { return "No"; })});
  auto in = snip("a", "apples are fruit");
  auto out = self_check("What are apples?", in, mock);
  EXPECT_EQ(out.verdict, Verdict::Helpful);
  EXPECT_FALSE(in.verdict.has_value());
  EXPECT_EQ(out.text, in.text);
  EXPECT_EQ(self_check("q", snip("b", "bananas"), mock).verdict, Verdict::NotHelpful);
}

TEST(SelfCheck, RequestQuotesTheHelpfulnessQuestion) {
  auto req = self_check_request("What is 2+2?", snip("a", "Four."), {});
  auto flat = flatten(req);
  EXPECT_NE(flat.find("Is this helpful for answering the question?"), std::string::npos);
  EXPECT_NE(flat.find("What is 2+2?"), std::string::npos);
  EXPECT_NE(flat.find("Four."), std::string::npos);
}

TEST(SelfCheck, BackendErrorFailsClosed) {
  MockBackend mock({MockRule::always_failing(BackendError::Kind::Timeout)});
  EXPECT_EQ(self_check("q", snip("a", "x"), mock).verdict, Verdict::NotHelpful);
}

TEST(SelfCheck, RejectsAlreadyCheckedSnippet) {
  MockBackend mock;
  auto s = snip("a", "x");
  s.verdict = Verdict::Helpful;
  EXPECT_THROW(self_check("q", s, mock), std::invalid_argument);
}

TEST(Affirmative, FirstTokenOnly) {
  EXPECT_TRUE(is_affirmative("Yes", Locale::En));
  EXPECT_TRUE(is_affirmative("  yes, clearly.", Locale::En));
  EXPECT_TRUE(is_affirmative("YES!", Locale::En));
  EXPECT_FALSE(is_affirmative("No, but yes in part", Locale::En));
  EXPECT_FALSE(is_affirmative("Yesterday it rained", Locale::En));
  EXPECT_FALSE(is_affirmative("", Locale::En));
  EXPECT_TRUE(is_affirmative("是的，有帮助。", Locale::Zh));
  EXPECT_TRUE(is_affirmative("Yes", Locale::Zh));
  EXPECT_FALSE(is_affirmative("否", Locale::Zh));
  EXPECT_FALSE(is_affirmative("不是", Locale::Zh));
}

TEST(Filter, KeywordExample) {
  auto mock = educhat::testing::keyword_mock();
  std::vector<Snippet> in = {snip("A", std::string("A ") + std::string(educhat::testing::kRelevantMarker)), snip("B", "B"),
                             snip("C", std::string("C ") + std::string(educhat::testing::kRelevantMarker))};
  auto out = filter_snippets("q", in, *mock, true);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].title, "Title A");
  EXPECT_EQ(out[1].title, "Title C");
  EXPECT_EQ(out[0].verdict, Verdict::Helpful);
  EXPECT_EQ(mock->call_count(), 3u);
}

TEST(Filter, PassthroughWhenDisabled) {
  auto mock = educhat::testing::keyword_mock();
  auto in = numbered(4);
  EXPECT_EQ(filter_snippets("q", in, *mock, false), in);
  EXPECT_EQ(mock->call_count(), 0u);
  EXPECT_TRUE(filter_snippets("q", {}, *mock, true).empty());
}

TEST(Filter, MatchesBruteForceOnRandomLists) {
  std::mt19937_64 rng(7);
  auto mock = educhat::testing::keyword_mock();
  for (int i = 0; i < 100; ++i) {
    auto in = educhat::testing::random_snippets(rng, std::uniform_int_distribution<std::size_t>(0, 12)(rng));
    SelfCheckOptions opts;
    opts.max_concurrency = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    opts.locale = i % 2 ? Locale::Zh : Locale::En;
    ASSERT_EQ(filter_snippets("question", in, *mock, true, opts), educhat::testing::brute_force_helpful(in));
  }
}

TEST(Filter, OrderSurvivesOutOfOrderCompletion) {
  // Earlier snippets answer slower, so completions arrive in reverse.
  std::vector<MockRule> rules;
  MockBackend mock({MockRule::always([](const BackendRequest& r) {
    auto flat = flatten(r);
    auto pos = flat.find("slow-");
    int delay = pos == std::string::npos ? 0 : flat[pos + 5] - '0';
    std::this_thread::sleep_for(std::chrono::milliseconds(10 * (9 - delay)));
    return std::string("Yes");
  })});
  std::vector<Snippet> in;
  for (int i = 0; i < 8; ++i) in.push_back(snip(std::to_string(i), "slow-" + std::to_string(i)));
  SelfCheckOptions opts;
  opts.max_concurrency = 8;
  auto out = filter_snippets("q", in, mock, true, opts);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out[i].text, in[i].text);
}

TEST(Inject, ContextMessagesPrecedeHistory) {
  std::vector<Snippet> s = {snip("1", "one"), snip("2", "two")};
  std::vector<Message> h = {{"m-1", Role::User, "hi", 0}, {"m-2", Role::Assistant, "hello", 0}, {"m-3", Role::User, "q", 0}};
  auto out = inject(s, h);
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0].role, Role::SystemContext);
  EXPECT_NE(out[0].content.find("Title 1"), std::string::npos);
  EXPECT_NE(out[0].content.find("one"), std::string::npos);
  EXPECT_NE(out[0].content.find("https://example.org/1"), std::string::npos);
  EXPECT_NE(out[1].content.find("two"), std::string::npos);
  EXPECT_TRUE(std::equal(h.begin(), h.end(), out.begin() + 2));
  EXPECT_EQ(inject({}, h), h);
}

TEST(HttpSearchProvider, ContractAndErrors) {
  educhat::testing::StubHttpServer stub;
  stub.server().Post("/search", [](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    json out = json::array();
    for (int i = 0; i < body["k"].get<int>(); ++i) {
      out.push_back({{"url", "u" + std::to_string(i)}, {"title", "t"}, {"text", body["query"].get<std::string>()}});
    }
    res.set_content(out.dump(), "application/json");
  });
  stub.server().Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 502; });
  stub.start();
  HttpSearchProvider ok({stub.url("/search"), "", 2000});
  auto r = ok.search("photosynthesis", 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[2].source_url, "u2");
  EXPECT_EQ(r[0].text, "photosynthesis");

  HttpSearchProvider broken({stub.url("/broken"), "", 2000});
  EXPECT_THROW(broken.search("q", 1), ProviderError);
  auto degraded = retrieve("q", broken);
  EXPECT_TRUE(degraded.degraded);
}
