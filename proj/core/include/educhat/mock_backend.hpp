#pragma once

#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "educhat/backend.hpp"

namespace educhat {

/// One scripted behavior: if `matches` accepts the request, answer with `reply` (or fail with
/// `failure`). Rules are tried in order; the first match wins.
struct MockRule {
  std::function<bool(const BackendRequest&)> matches;
  std::function<std::string(const BackendRequest&)> reply;
  std::optional<BackendError::Kind> failure;

  /// Matches when every needle occurs somewhere in the flattened request.
  static MockRule when_contains(std::vector<std::string> needles, std::string reply);
  static MockRule failing_when_contains(std::vector<std::string> needles, BackendError::Kind kind);
  static MockRule always(std::function<std::string(const BackendRequest&)> reply);
  static MockRule always_failing(BackendError::Kind kind);
};

/// Deterministic scripted backend for tests and offline runs. Every request is recorded in a
/// call log guarded by an internal mutex.
class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(std::vector<MockRule> rules = {}, std::string default_reply = "OK");

  Message generate(const BackendRequest& request) override;
  Message generate_stream(const BackendRequest& request, const DeltaSink& on_delta) override;

  /// Size of the deltas produced by generate_stream, in code points.
  void set_stream_chunk_chars(std::size_t n) { chunk_chars_ = n == 0 ? 1 : n; }
  /// Simulated latency; a latency beyond the request deadline yields a Timeout error.
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

  std::vector<BackendRequest> calls() const;
  std::size_t call_count() const;
  /// Number of logged requests whose flattened text contains `needle`.
  std::size_t count_calls_containing(std::string_view needle) const;
  void clear_calls();

 private:
  std::string resolve(const BackendRequest& request);

  std::vector<MockRule> rules_;
  std::string default_reply_;
  std::size_t chunk_chars_ = 4;
  std::chrono::milliseconds latency_{0};
  std::atomic<std::uint64_t> next_id_{1};
  mutable std::mutex mu_;
  std::vector<BackendRequest> log_;
};

}  // namespace educhat
