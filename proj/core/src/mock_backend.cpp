#include "educhat/mock_backend.hpp"

#include <thread>

#include "educhat/text.hpp"

namespace educhat {

MockRule MockRule::when_contains(std::vector<std::string> needles, std::string reply) {
  return MockRule{
      [needles](const BackendRequest& req) {
        auto flat = flatten(req);
        for (const auto& n : needles) {
          if (!text::contains(flat, n)) return false;
        }
        return true;
      },
      [reply = std::move(reply)](const BackendRequest&) { return reply; },
      std::nullopt,
  };
}

MockRule MockRule::failing_when_contains(std::vector<std::string> needles, BackendError::Kind kind) {
  auto rule = when_contains(std::move(needles), "");
  rule.failure = kind;
  return rule;
}

MockRule MockRule::always(std::function<std::string(const BackendRequest&)> reply) {
  return MockRule{[](const BackendRequest&) { return true; }, std::move(reply), std::nullopt};
}

MockRule MockRule::always_failing(BackendError::Kind kind) {
  return MockRule{[](const BackendRequest&) { return true; }, nullptr, kind};
}

MockBackend::MockBackend(std::vector<MockRule> rules, std::string default_reply)
    : rules_(std::move(rules)), default_reply_(std::move(default_reply)) {
  if (default_reply_.empty()) throw std::invalid_argument("mock default reply must not be empty");
}

std::string MockBackend::resolve(const BackendRequest& request) {
  {
    std::lock_guard lock(mu_);
    log_.push_back(request);
  }
  if (latency_.count() > 0) {
    if (latency_.count() > request.params.deadline_ms) {
      std::this_thread::sleep_for(std::chrono::milliseconds(request.params.deadline_ms));
      throw BackendError(BackendError::Kind::Timeout, "mock backend exceeded the request deadline");
    }
    std::this_thread::sleep_for(latency_);
  }
  for (const auto& rule : rules_) {
    if (!rule.matches || !rule.matches(request)) continue;
    if (rule.failure) {
      throw BackendError(*rule.failure, "scripted mock failure (" + std::string(to_string(*rule.failure)) + ")");
    }
    auto reply = rule.reply ? rule.reply(request) : default_reply_;
    if (reply.empty()) throw BackendError(BackendError::Kind::MalformedReply, "scripted mock reply is empty");
    return reply;
  }
  return default_reply_;
}

Message MockBackend::generate(const BackendRequest& request) {
  auto content = resolve(request);
  return Message{"mock-" + std::to_string(next_id_++), Role::Assistant, std::move(content), now_ms()};
}

Message MockBackend::generate_stream(const BackendRequest& request, const DeltaSink& on_delta) {
  auto reply = generate(request);
  std::string_view rest = reply.content;
  while (!rest.empty()) {
    auto chunk = text::utf8_prefix(rest, chunk_chars_);
    if (on_delta) on_delta(chunk);
    rest.remove_prefix(chunk.size());
  }
  return reply;
}

std::vector<BackendRequest> MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::size_t MockBackend::count_calls_containing(std::string_view needle) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& req : log_) {
    if (text::contains(flatten(req), needle)) ++n;
  }
  return n;
}

void MockBackend::clear_calls() {
  std::lock_guard lock(mu_);
  log_.clear();
}

}  // namespace educhat
