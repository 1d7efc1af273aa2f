#pragma once

#include <string>

#include "educhat/backend.hpp"

namespace educhat {

struct RemoteBackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/generate
  std::string api_key;
  std::string model;
};

/// Speaks the minimal vendor-neutral chat schema over HTTP.
///
/// Request (POST, JSON):
///   {"model": str, "system_prompt": str, "messages": [{"role": str, "content": str}],
///    "params": {"max_new_tokens": int, "temperature": num, "locale": "en"|"zh"}, "stream": bool}
/// Reply: {"content": str}, or with "stream": true an event stream of
///   `data: {"delta": str}` events terminated by `data: [DONE]`.
///
/// Connection failures are retried once; timeouts never are.
class RemoteBackend final : public ChatBackend {
 public:
  explicit RemoteBackend(RemoteBackendConfig config);

  Message generate(const BackendRequest& request) override;
  Message generate_stream(const BackendRequest& request, const DeltaSink& on_delta) override;

  static nlohmann::json request_body(const BackendRequest& request, const std::string& model, bool stream);

 private:
  Message call(const BackendRequest& request, const DeltaSink* on_delta);

  RemoteBackendConfig config_;
};

}  // namespace educhat
