#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace educhat {

using Embedding = std::vector<double>;

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sentence embedding model. Output has one vector per input, same order, fixed dimension;
/// identical strings get identical vectors within a run.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

/// Offline stand-in for a sentence encoder: signed feature hashing of lowercased word tokens and
/// character trigrams. Texts sharing most of their wording land close together.
class HashingEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashingEmbeddingProvider(std::size_t dimension = 256);
  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
};

/// Looks every text up in a fixed table. Unknown texts raise EmbeddingError.
class TableEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit TableEmbeddingProvider(std::map<std::string, Embedding, std::less<>> table) : table_(std::move(table)) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  std::map<std::string, Embedding, std::less<>> table_;
};

struct HttpEmbeddingConfig {
  std::string endpoint;  // POST target
  std::string api_key;
  std::int64_t timeout_ms = 60'000;
};

/// POST {"texts": [str]} -> {"embeddings": [[num]]}
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  HttpEmbeddingConfig config_;
};

}  // namespace educhat
