#include "educhat/dedup.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>
#include <unordered_set>

#include "educhat/parallel.hpp"
#include "educhat/text.hpp"

namespace educhat {

namespace {

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Largest magnitude, used to rescale before squaring so tiny or huge vectors neither underflow nor overflow.
double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested != 0) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

void validate_options(const DedupOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold <= 1.0)) {
    throw std::invalid_argument("dedup threshold must be in (0, 1]");
  }
  if (options.batch_size == 0) throw std::invalid_argument("dedup batch size must be positive");
}

struct Candidate {
  std::size_t kept_row = 0;
  double similarity = 0.0;
  bool found = false;
};

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw SimilarityError(SimilarityError::Kind::DimensionMismatch,
                          "dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw SimilarityError(SimilarityError::Kind::DimensionMismatch, "vectors must have dimension >= 1");
  const double sa = max_abs(a);
  const double sb = max_abs(b);
  if (sa == 0.0 || sb == 0.0) throw SimilarityError(SimilarityError::Kind::ZeroNorm, "zero-norm vector");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] / sa;
    const double y = b[i] / sb;
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  return clamp_unit(ab / (std::sqrt(aa) * std::sqrt(bb)));
}

void to_json(nlohmann::json& j, const DedupReport& r) {
  nlohmann::json removed = nlohmann::json::array();
  for (const auto& x : r.removed) {
    removed.push_back({{"removed_id", x.removed_id}, {"kept_id", x.kept_id}, {"similarity", x.similarity}});
  }
  j = nlohmann::json{{"kept_ids", r.kept_ids},
                     {"removed", removed},
                     {"threshold", r.threshold},
                     {"pairs_compared", r.pairs_compared},
                     {"aborted", r.aborted}};
  if (r.error) j["error"] = *r.error;
}

void from_json(const nlohmann::json& j, DedupReport& r) {
  r.kept_ids = j.at("kept_ids").get<std::vector<std::string>>();
  r.removed.clear();
  for (const auto& x : j.at("removed")) {
    r.removed.push_back({x.at("removed_id").get<std::string>(), x.at("kept_id").get<std::string>(),
                         x.at("similarity").get<double>()});
  }
  r.threshold = j.at("threshold").get<double>();
  r.pairs_compared = j.at("pairs_compared").get<std::uint64_t>();
  r.aborted = j.value("aborted", false);
  r.error.reset();
  if (j.contains("error")) r.error = j["error"].get<std::string>();
}

Deduplicator::Deduplicator(DedupOptions options) : options_(options) {
  validate_options(options_);
  options_.workers = resolve_workers(options_.workers);
  report_.threshold = options_.threshold;
}

std::vector<double> Deduplicator::normalized(std::span<const double> v) const {
  if (v.size() != dim_) {
    throw SimilarityError(SimilarityError::Kind::DimensionMismatch,
                          "embedding dimension " + std::to_string(v.size()) + " differs from " + std::to_string(dim_));
  }
  const double scale = max_abs(v);
  if (scale == 0.0) throw SimilarityError(SimilarityError::Kind::ZeroNorm, "zero-norm embedding");
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) x /= scale;
  const double norm = std::sqrt(dot(out.data(), out.data(), out.size()));
  for (auto& x : out) x /= norm;
  return out;
}

std::vector<bool> Deduplicator::add_block(std::span<const std::string> ids, std::span<const Embedding> embeddings) {
  if (ids.size() != embeddings.size()) throw std::invalid_argument("ids and embeddings differ in length");
  const std::size_t m = ids.size();
  if (m == 0) return {};
  if (dim_ == 0) {
    if (embeddings.front().empty()) {
      throw SimilarityError(SimilarityError::Kind::DimensionMismatch, "embeddings must have dimension >= 1");
    }
    dim_ = embeddings.front().size();
  }

  std::vector<double> block(m * dim_);
  for (std::size_t j = 0; j < m; ++j) {
    auto n = normalized(embeddings[j]);
    std::copy(n.begin(), n.end(), block.begin() + static_cast<std::ptrdiff_t>(j * dim_));
  }

  const std::size_t prior_rows = report_.kept_ids.size();
  const double threshold = options_.threshold;
  std::vector<Candidate> best_prior(m);
  std::vector<std::vector<std::pair<std::size_t, double>>> intra(m);

  parallel_for(m, options_.workers, [&](std::size_t j) {
    const double* bj = block.data() + j * dim_;
    auto& best = best_prior[j];
    for (std::size_t r = 0; r < prior_rows; ++r) {
      double s = clamp_unit(dot(kept_matrix_.data() + r * dim_, bj, dim_));
      if (s > threshold && (!best.found || s > best.similarity)) best = {r, s, true};
    }
    for (std::size_t i = 0; i < j; ++i) {
      double s = clamp_unit(dot(block.data() + i * dim_, bj, dim_));
      if (s > threshold) intra[j].emplace_back(i, s);
    }
  });

  std::vector<bool> keep(m, false);
  std::vector<std::size_t> row_of(m, 0);
  std::size_t kept_in_block = 0;
  for (std::size_t j = 0; j < m; ++j) {
    report_.pairs_compared += prior_rows + kept_in_block;
    Candidate best = best_prior[j];
    for (const auto& [i, s] : intra[j]) {
      if (keep[i] && (!best.found || s > best.similarity)) best = {row_of[i], s, true};
    }
    if (best.found) {
      report_.removed.push_back({ids[j], report_.kept_ids[best.kept_row], best.similarity});
      continue;
    }
    keep[j] = true;
    row_of[j] = report_.kept_ids.size();
    report_.kept_ids.push_back(ids[j]);
    const double* bj = block.data() + j * dim_;
    kept_matrix_.insert(kept_matrix_.end(), bj, bj + dim_);
    ++kept_in_block;
  }
  return keep;
}

DedupResult dedup(std::span<const DatasetRecord> records, EmbeddingProvider& provider, const DedupOptions& options) {
  validate_options(options);
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw std::invalid_argument("duplicate record id '" + r.id + "'");
    if (r.text.empty()) throw std::invalid_argument("record '" + r.id + "' has empty text");
  }

  Deduplicator dd(options);
  DedupResult result;
  for (std::size_t start = 0; start < records.size(); start += options.batch_size) {
    auto batch = records.subspan(start, std::min(options.batch_size, records.size() - start));
    std::vector<std::string> ids;
    std::vector<std::string> to_embed;
    for (const auto& r : batch) {
      ids.push_back(r.id);
      if (!r.embedding) to_embed.push_back(r.text);
    }
    std::vector<Embedding> fresh;
    if (!to_embed.empty()) {
      try {
        fresh = provider.embed(to_embed);
      } catch (const std::exception& e) {
        auto partial = dd.report();
        partial.aborted = true;
        partial.error = e.what();
        throw DedupAborted(std::string("embedding provider failed: ") + e.what(), std::move(partial));
      }
      if (fresh.size() != to_embed.size()) {
        auto partial = dd.report();
        partial.aborted = true;
        partial.error = "provider returned the wrong number of embeddings";
        throw DedupAborted(*partial.error, std::move(partial));
      }
    }
    std::vector<Embedding> embeddings;
    std::size_t next_fresh = 0;
    for (const auto& r : batch) embeddings.push_back(r.embedding ? *r.embedding : fresh[next_fresh++]);

    auto keep = dd.add_block(ids, embeddings);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (keep[i]) result.kept.push_back(batch[i]);
    }
  }
  result.report = dd.report();
  return result;
}

namespace {

struct ParsedLine {
  std::string id;
  std::string text;
};

ParsedLine parse_record_line(std::string_view line, std::size_t line_no) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  auto fail = [&](const std::string& why) {
    return PipelineError("line " + std::to_string(line_no) + ": " + why, line_no);
  };
  if (j.is_discarded()) throw fail("malformed JSON");
  if (!j.is_object()) throw fail("record must be a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) throw fail("record needs a string 'id'");
  if (!j.contains("text") || !j["text"].is_string()) throw fail("record needs a string 'text'");
  ParsedLine out{j["id"].get<std::string>(), j["text"].get<std::string>()};
  if (out.id.empty()) throw fail("record 'id' is empty");
  if (out.text.empty()) throw fail("record 'text' is empty");
  return out;
}

bool is_blank(std::string_view line) { return text::trim(line).empty(); }

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

void write_report(const std::filesystem::path& path, const DedupReport& report, std::size_t input_count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot write report file " + path.string());
  nlohmann::json j = report;
  j["input_count"] = input_count;
  out << j.dump(2) << '\n';
  if (!out) throw PipelineError("failed writing report file " + path.string());
}

}  // namespace

PipelineSummary dedup_jsonl(const PipelineConfig& config, EmbeddingProvider& provider) {
  validate_options(config.options);
  const auto started = std::chrono::steady_clock::now();

  // Pass 1: schema and id uniqueness.
  std::size_t input_count = 0;
  {
    std::ifstream in(config.input, std::ios::binary);
    if (!in) throw PipelineError("cannot open input file " + config.input.string());
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      strip_cr(line);
      if (is_blank(line)) continue;
      auto rec = parse_record_line(line, line_no);
      if (!ids.insert(rec.id).second) {
        throw PipelineError("line " + std::to_string(line_no) + ": duplicate id '" + rec.id + "'", line_no);
      }
      ++input_count;
    }
  }

  std::ofstream out(config.output, std::ios::binary | std::ios::trunc);
  if (!out) throw PipelineError("cannot write output file " + config.output.string());
  {
    std::ofstream probe(config.report, std::ios::binary | std::ios::app);
    if (!probe) throw PipelineError("cannot write report file " + config.report.string());
  }

  // Pass 2: batched embedding and block-wise decisions.
  Deduplicator dd(config.options);
  std::ifstream in(config.input, std::ios::binary);
  if (!in) throw PipelineError("cannot reopen input file " + config.input.string());
  std::vector<std::string> lines;
  std::vector<std::string> ids;
  std::vector<std::string> texts;

  auto flush = [&] {
    if (ids.empty()) return;
    std::vector<Embedding> embeddings;
    try {
      embeddings = provider.embed(texts);
      if (embeddings.size() != texts.size()) throw EmbeddingError("provider returned the wrong number of embeddings");
    } catch (const std::exception& e) {
      out.flush();
      auto& partial = dd.mutable_report();
      partial.aborted = true;
      partial.error = e.what();
      write_report(config.report, partial, input_count);
      throw DedupAborted(std::string("embedding provider failed: ") + e.what(), partial);
    }
    auto keep = dd.add_block(ids, embeddings);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i]) out << lines[i] << '\n';
    }
    lines.clear();
    ids.clear();
    texts.clear();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    auto rec = parse_record_line(line, line_no);
    lines.push_back(line);
    ids.push_back(std::move(rec.id));
    texts.push_back(std::move(rec.text));
    if (ids.size() == config.options.batch_size) flush();
  }
  flush();
  out.flush();
  if (!out) throw PipelineError("failed writing output file " + config.output.string());

  write_report(config.report, dd.report(), input_count);

  PipelineSummary summary;
  summary.input_count = input_count;
  summary.kept = dd.report().kept_ids.size();
  summary.removed = dd.report().removed.size();
  summary.pairs_compared = dd.report().pairs_compared;
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return summary;
}

int run_pipeline(const PipelineConfig& config, EmbeddingProvider& provider, std::ostream& out, std::ostream& err) {
  try {
    auto s = dedup_jsonl(config, provider);
    out << "input: " << s.input_count << "\nkept: " << s.kept << "\nremoved: " << s.removed
        << "\npairs compared: " << s.pairs_compared << "\nwall time: " << s.wall_seconds << " s\n";
    return 0;
  } catch (const DedupAborted& e) {
    err << "dedup aborted: " << e.what() << " (partial report written to " << config.report.string() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    err << "dedup failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace educhat
