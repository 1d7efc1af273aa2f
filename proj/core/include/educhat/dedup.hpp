#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "educhat/embedding.hpp"

namespace educhat {

class SimilarityError : public std::invalid_argument {
 public:
  enum class Kind { DimensionMismatch, ZeroNorm };
  SimilarityError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// dot(a, b) / (|a| |b|), clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);

inline constexpr double kDefaultDedupThreshold = 0.7;

struct DatasetRecord {
  std::string id;
  std::string text;
  std::optional<Embedding> embedding;

  bool operator==(const DatasetRecord&) const = default;
};

struct RemovedRecord {
  std::string removed_id;
  std::string kept_id;
  double similarity = 0.0;

  bool operator==(const RemovedRecord&) const = default;
};

struct DedupReport {
  std::vector<std::string> kept_ids;
  std::vector<RemovedRecord> removed;
  double threshold = kDefaultDedupThreshold;
  /// Similarities evaluated between a record and the records kept before it.
  std::uint64_t pairs_compared = 0;
  bool aborted = false;
  std::optional<std::string> error;
};

void to_json(nlohmann::json& j, const DedupReport& r);
void from_json(const nlohmann::json& j, DedupReport& r);

struct DedupOptions {
  double threshold = kDefaultDedupThreshold;
  /// Records per embedding call and per comparison block.
  std::size_t batch_size = 64;
  /// Worker threads for the similarity blocks; 0 picks the hardware concurrency.
  std::size_t workers = 0;
};

/// Greedy earliest-wins deduplication over a stream of blocks.
///
/// A record is removed iff some earlier *kept* record has cosine similarity strictly above the
/// threshold; its partner in the report is the most similar such record (earliest on ties).
/// Embeddings are L2-normalized on entry so each similarity is a single dot product. Within a
/// block, similarities are computed in parallel and the keep/remove decisions are then applied
/// by one sequential pass in input order, so the result does not depend on the worker count.
class Deduplicator {
 public:
  explicit Deduplicator(DedupOptions options = {});

  /// Decides one block, in order. Returns a keep flag per record.
  std::vector<bool> add_block(std::span<const std::string> ids, std::span<const Embedding> embeddings);

  const DedupReport& report() const { return report_; }
  DedupReport& mutable_report() { return report_; }
  std::size_t dimension() const { return dim_; }

 private:
  std::vector<double> normalized(std::span<const double> v) const;

  DedupOptions options_;
  std::size_t dim_ = 0;
  std::vector<double> kept_matrix_;  // kept_ids.size() rows of dim_ values
  DedupReport report_;
};

/// Provider failure; carries the decisions made before the failing batch.
class DedupAborted : public std::runtime_error {
 public:
  DedupAborted(const std::string& what, DedupReport partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const DedupReport& partial_report() const { return partial_; }

 private:
  DedupReport partial_;
};

struct DedupResult {
  std::vector<DatasetRecord> kept;
  DedupReport report;
};

/// In-memory deduplication. Records that already carry an embedding are not sent to the
/// provider. Throws std::invalid_argument on duplicate ids, empty text or a bad threshold.
DedupResult dedup(std::span<const DatasetRecord> records, EmbeddingProvider& provider, const DedupOptions& options = {});

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path report;
  DedupOptions options;
};

struct PipelineSummary {
  std::size_t input_count = 0;
  std::size_t kept = 0;
  std::size_t removed = 0;
  std::uint64_t pairs_compared = 0;
  double wall_seconds = 0.0;
};

class PipelineError : public std::runtime_error {
 public:
  PipelineError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(what), line_(line) {}
  /// 1-based input line, when the error is tied to one.
  std::optional<std::size_t> line() const { return line_; }

 private:
  std::optional<std::size_t> line_;
};

/// JSONL -> JSONL deduplication. The input is validated in a first pass (schema, duplicate ids),
/// then streamed in batches; kept lines are copied verbatim to the output and the report is
/// written as JSON. Throws PipelineError for input/output problems and DedupAborted (after
/// writing the partial report) when the provider fails.
PipelineSummary dedup_jsonl(const PipelineConfig& config, EmbeddingProvider& provider);

/// CLI wrapper around dedup_jsonl: prints a summary or the error and returns the exit status
/// (0 success, 1 input/output error, 2 provider failure).
int run_pipeline(const PipelineConfig& config, EmbeddingProvider& provider, std::ostream& out, std::ostream& err);

}  // namespace educhat
