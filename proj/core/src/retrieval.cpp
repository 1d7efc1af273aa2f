#include "educhat/retrieval.hpp"

#include <array>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "educhat/http_util.hpp"
#include "educhat/parallel.hpp"
#include "educhat/text.hpp"

namespace educhat {

namespace {

// Punctuation that may follow an affirmative word ("yes," / "是的，").
constexpr std::array<std::string_view, 8> kCjkPunctuation = {"，", "。", "！", "、", "；", "：", "…", "）"};

bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool affirmative_boundary(std::string_view rest) {
  if (rest.empty()) return true;
  auto c = static_cast<unsigned char>(rest.front());
  if (c < 0x80) return !is_ascii_alnum(rest.front());
  for (auto p : kCjkPunctuation) {
    if (rest.substr(0, p.size()) == p) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(Verdict v) { return v == Verdict::Helpful ? "Helpful" : "NotHelpful"; }

void to_json(nlohmann::json& j, const Snippet& s) {
  j = nlohmann::json{{"url", s.source_url}, {"title", s.title}, {"text", s.text}};
  j["verdict"] = s.verdict ? nlohmann::json(to_string(*s.verdict)) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Snippet& s) {
  s.source_url = j.value("url", std::string{});
  s.title = j.value("title", std::string{});
  s.text = j.at("text").get<std::string>();
  s.verdict.reset();
  if (auto it = j.find("verdict"); it != j.end() && it->is_string()) {
    s.verdict = it->get<std::string>() == "Helpful" ? Verdict::Helpful : Verdict::NotHelpful;
  }
}

HttpSearchProvider::HttpSearchProvider(HttpSearchConfig config) : config_(std::move(config)) {
  (void)parse_endpoint(config_.endpoint);
}

std::vector<Snippet> HttpSearchProvider::search(std::string_view query, std::size_t k) {
  auto ep = parse_endpoint(config_.endpoint);
  httplib::Client cli(ep.origin);
  auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                             (config_.timeout_ms % 1000) * 1000);
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                       (config_.timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  nlohmann::json body = {{"query", query}, {"k", k}};
  auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    auto err = res.error();
    auto kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) ? ProviderError::Kind::Timeout
                                                                                          : ProviderError::Kind::Failure;
    throw ProviderError(kind, "search provider request failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderError(ProviderError::Kind::Failure, "search provider returned HTTP " + std::to_string(res->status));
  }
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    throw ProviderError(ProviderError::Kind::Failure, "search provider reply is not a JSON array");
  }
  std::vector<Snippet> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("text") || !item["text"].is_string()) {
      throw ProviderError(ProviderError::Kind::Failure, "search result lacks a string 'text' field");
    }
    out.push_back(Snippet{item.value("url", std::string{}), item.value("title", std::string{}),
                          item["text"].get<std::string>(), std::nullopt});
  }
  return out;
}

RetrievalResult retrieve(std::string_view question, SearchProvider& provider, std::size_t k,
                         std::size_t max_snippet_chars) {
  if (text::trim(question).empty()) throw std::invalid_argument("retrieval question must not be empty");
  if (k == 0) throw std::invalid_argument("retrieval k must be at least 1");
  if (max_snippet_chars == 0) throw std::invalid_argument("max_snippet_chars must be at least 1");

  RetrievalResult result;
  std::vector<Snippet> raw;
  try {
    raw = provider.search(question, k);
  } catch (const ProviderError& e) {
    result.degraded = true;
    result.error = std::string(e.kind() == ProviderError::Kind::Timeout ? "timeout: " : "failure: ") + e.what();
    spdlog::warn("search provider failed, answering without retrieval: {}", e.what());
    return result;
  } catch (const std::exception& e) {
    result.degraded = true;
    result.error = std::string("failure: ") + e.what();
    spdlog::warn("search provider failed, answering without retrieval: {}", e.what());
    return result;
  }

  for (auto& s : raw) {
    if (result.snippets.size() == k) break;
    if (s.text.empty()) {
      ++result.dropped_empty;
      continue;
    }
    s.verdict.reset();
    auto prefix = text::utf8_prefix(s.text, max_snippet_chars);
    if (prefix.size() < s.text.size()) {
      s.text.resize(prefix.size());
      result.truncated.push_back(result.snippets.size());
    }
    result.snippets.push_back(std::move(s));
  }
  return result;
}

BackendRequest self_check_request(std::string_view question, const Snippet& snippet, const SelfCheckOptions& options) {
  const auto& templates = options.templates ? *options.templates : TemplateSet::builtin();
  const auto& t = templates.get(options.locale);
  BackendRequest req;
  req.system_prompt = t.profile;
  req.messages.push_back(Message{"self-check", Role::User,
                                 text::render(t.self_check, {{"question", std::string(question)},
                                                             {"snippet", snippet.text}}),
                                 0});
  req.params.temperature = 0.0;
  req.params.max_new_tokens = 8;
  req.params.deadline_ms = options.deadline_ms;
  req.params.locale = options.locale;
  return req;
}

bool is_affirmative(std::string_view reply, Locale locale, const TemplateSet& templates) {
  auto trimmed = text::trim(reply);
  auto end = trimmed.find_first_of(" \t\r\n");
  auto token = trimmed.substr(0, end);
  // Strip leading ASCII punctuation such as quotes or brackets.
  while (!token.empty() && static_cast<unsigned char>(token.front()) < 0x80 && !is_ascii_alnum(token.front())) {
    token.remove_prefix(1);
  }
  if (token.empty()) return false;
  auto lowered = text::ascii_lower(token);

  auto matches = [&](const std::vector<std::string>& words) {
    for (const auto& w : words) {
      auto lw = text::ascii_lower(w);
      if (lowered.size() >= lw.size() && lowered.compare(0, lw.size(), lw) == 0 &&
          affirmative_boundary(std::string_view(lowered).substr(lw.size()))) {
        return true;
      }
    }
    return false;
  };
  if (matches(templates.get(Locale::En).affirmatives)) return true;
  return locale != Locale::En && matches(templates.get(locale).affirmatives);
}

Snippet self_check(std::string_view question, const Snippet& snippet, ChatBackend& backend,
                   const SelfCheckOptions& options) {
  if (snippet.verdict) throw std::invalid_argument("snippet already carries a self-check verdict");
  Snippet out = snippet;
  try {
    auto reply = backend.generate(self_check_request(question, snippet, options));
    const auto& templates = options.templates ? *options.templates : TemplateSet::builtin();
    out.verdict = is_affirmative(reply.content, options.locale, templates) ? Verdict::Helpful : Verdict::NotHelpful;
  } catch (const std::exception& e) {
    spdlog::warn("self-check failed for snippet '{}', treating it as not helpful: {}", snippet.source_url, e.what());
    out.verdict = Verdict::NotHelpful;
  }
  return out;
}

std::vector<Snippet> filter_snippets(std::string_view question, std::span<const Snippet> snippets,
                                     ChatBackend& backend, bool self_check_enabled, const SelfCheckOptions& options) {
  if (!self_check_enabled) return {snippets.begin(), snippets.end()};
  std::vector<Snippet> checked(snippets.size());
  parallel_for(snippets.size(), options.max_concurrency, [&](std::size_t i) {
    Snippet input = snippets[i];
    input.verdict.reset();
    checked[i] = self_check(question, input, backend, options);
  });
  std::vector<Snippet> out;
  for (auto& s : checked) {
    if (s.verdict == Verdict::Helpful) out.push_back(std::move(s));
  }
  return out;
}

std::vector<Message> inject(std::span<const Snippet> snippets, std::span<const Message> history, Locale locale,
                            const TemplateSet& templates) {
  const auto& t = templates.get(locale);
  std::vector<Message> out;
  out.reserve(snippets.size() + history.size());
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    const auto& s = snippets[i];
    out.push_back(Message{"context-" + std::to_string(i + 1), Role::SystemContext,
                          text::render(t.context_message, {{"title", s.title}, {"text", s.text}, {"url", s.source_url}}),
                          0});
  }
  out.insert(out.end(), history.begin(), history.end());
  return out;
}

}  // namespace educhat
