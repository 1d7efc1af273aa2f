#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "educhat/backend.hpp"
#include "educhat/templates.hpp"

namespace educhat {

enum class Verdict { Helpful, NotHelpful };

std::string_view to_string(Verdict v);

/// One retrieved web result. `verdict` is empty until the self-check has run.
struct Snippet {
  std::string source_url;
  std::string title;
  std::string text;
  std::optional<Verdict> verdict;

  bool operator==(const Snippet&) const = default;
};

void to_json(nlohmann::json& j, const Snippet& s);
void from_json(const nlohmann::json& j, Snippet& s);

class ProviderError : public std::runtime_error {
 public:
  enum class Kind { Timeout, Failure };
  ProviderError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Web search adapter. Returns at most k results in provider relevance order; throws
/// ProviderError on failure.
class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::vector<Snippet> search(std::string_view query, std::size_t k) = 0;
};

struct HttpSearchConfig {
  std::string endpoint;  // POST target, e.g. http://127.0.0.1:9000/search
  std::string api_key;
  std::int64_t timeout_ms = 10'000;
};

/// POST {"query": str, "k": int} -> [{"url": str, "title": str, "text": str}, ...]
class HttpSearchProvider final : public SearchProvider {
 public:
  explicit HttpSearchProvider(HttpSearchConfig config);
  std::vector<Snippet> search(std::string_view query, std::size_t k) override;

 private:
  HttpSearchConfig config_;
};

inline constexpr std::size_t kDefaultRetrievalK = 5;
inline constexpr std::size_t kDefaultMaxSnippetChars = 2000;
inline constexpr std::size_t kDefaultSelfCheckConcurrency = 4;

struct RetrievalResult {
  std::vector<Snippet> snippets;
  /// Indices into `snippets` whose text was cut to max_snippet_chars.
  std::vector<std::size_t> truncated;
  /// Provider results skipped because their text was empty.
  std::size_t dropped_empty = 0;
  /// Set when the provider failed; `snippets` is then empty.
  bool degraded = false;
  std::optional<std::string> error;
};

/// Runs the provider and normalizes its output: at most k snippets, verdicts cleared, text
/// truncated on a code point boundary. Provider failures degrade instead of throwing.
RetrievalResult retrieve(std::string_view question, SearchProvider& provider, std::size_t k = kDefaultRetrievalK,
                         std::size_t max_snippet_chars = kDefaultMaxSnippetChars);

struct SelfCheckOptions {
  Locale locale = Locale::En;
  std::size_t max_concurrency = kDefaultSelfCheckConcurrency;
  std::int64_t deadline_ms = 30'000;
  const TemplateSet* templates = nullptr;  // null means TemplateSet::builtin()
};

/// Builds the yes/no helpfulness question sent to the backend for one snippet.
BackendRequest self_check_request(std::string_view question, const Snippet& snippet, const SelfCheckOptions& options);

/// True if the first non-whitespace token of `reply` is affirmative for `locale`. English
/// affirmatives are accepted in every locale.
bool is_affirmative(std::string_view reply, Locale locale, const TemplateSet& templates = TemplateSet::builtin());

/// Asks the backend whether the snippet helps answer the question. Returns a new snippet with
/// the verdict set; backend failures yield NotHelpful.
Snippet self_check(std::string_view question, const Snippet& snippet, ChatBackend& backend,
                   const SelfCheckOptions& options = {});

/// With self-check disabled the input is returned unchanged. Otherwise returns the Helpful
/// subsequence, in input order, with up to `max_concurrency` checks in flight.
std::vector<Snippet> filter_snippets(std::string_view question, std::span<const Snippet> snippets,
                                     ChatBackend& backend, bool self_check_enabled,
                                     const SelfCheckOptions& options = {});

/// One system-context message per snippet, in order, followed by the history unchanged.
std::vector<Message> inject(std::span<const Snippet> snippets, std::span<const Message> history,
                            Locale locale = Locale::En, const TemplateSet& templates = TemplateSet::builtin());

}  // namespace educhat
