#include "educhat/embedding.hpp"

#include <cstdint>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "educhat/http_util.hpp"
#include "educhat/text.hpp"

namespace educhat {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void add_feature(Embedding& v, std::string_view feature, std::uint64_t seed, double weight) {
  auto h = fnv1a(feature, seed);
  auto idx = static_cast<std::size_t>(h % v.size());
  double sign = ((h >> 63) & 1U) ? -1.0 : 1.0;
  v[idx] += sign * weight;
}

}  // namespace

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

std::vector<Embedding> HashingEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    Embedding v(dimension_, 0.0);
    auto lowered = text::ascii_lower(t);
    std::string_view s = lowered;
    // Word tokens.
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n')) ++i;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\n') ++j;
      if (j > i) add_feature(v, s.substr(i, j - i), 0x9e3779b97f4a7c15ULL, 1.0);
      i = j;
    }
    // Character trigrams over the raw bytes.
    if (s.size() < 3) {
      add_feature(v, s, 0x51ed270b27ULL, 1.0);
    } else {
      for (std::size_t k = 0; k + 3 <= s.size(); ++k) add_feature(v, s.substr(k, 3), 0x51ed270b27ULL, 0.5);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Embedding> TableEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto it = table_.find(t);
    if (it == table_.end()) throw EmbeddingError("no embedding for text '" + t + "'");
    out.push_back(it->second);
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {
  (void)parse_endpoint(config_.endpoint);
}

std::vector<Embedding> HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
  auto ep = parse_endpoint(config_.endpoint);
  httplib::Client cli(ep.origin);
  auto secs = config_.timeout_ms / 1000;
  auto usecs = (config_.timeout_ms % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) throw EmbeddingError("embedding request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw EmbeddingError("embedding endpoint returned HTTP " + std::to_string(res->status));
  }
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("embeddings") || !j["embeddings"].is_array()) {
    throw EmbeddingError("embedding reply lacks an 'embeddings' array");
  }
  std::vector<Embedding> out;
  try {
    out = j["embeddings"].get<std::vector<Embedding>>();
  } catch (const nlohmann::json::exception& e) {
    throw EmbeddingError(std::string("embedding reply is malformed: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw EmbeddingError("embedding endpoint returned " + std::to_string(out.size()) + " vectors for " +
                         std::to_string(texts.size()) + " texts");
  }
  return out;
}

}  // namespace educhat
