#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "educhat/backend.hpp"
#include "educhat/conversation.hpp"
#include "educhat/prompt.hpp"
#include "educhat/retrieval.hpp"
#include "educhat/skills.hpp"

namespace educhat {

class ServiceError : public std::runtime_error {
 public:
  enum class Kind { NotFound, InvalidArgument, IllegalOverride, BackendUnavailable, BackendTimeout };

  ServiceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }
  bool retriable() const { return kind_ == Kind::BackendUnavailable || kind_ == Kind::BackendTimeout; }

 private:
  Kind kind_;
};

std::string_view to_string(ServiceError::Kind kind);

struct EssayAnnotation {
  std::optional<EssayFeedback> feedback;
  std::optional<EssayValidationError::Code> error_code;
  std::string error_field;
  std::string error_message;
  std::string raw_text;  // set when validation failed
};

/// Side information produced while answering one user turn.
struct Annotations {
  bool retrieval_enabled = false;
  bool self_check_enabled = false;
  bool degraded = false;
  std::optional<std::string> degraded_reason;
  std::size_t retrieved = 0;
  std::vector<Snippet> snippets;  // injected into the prompt
  std::optional<EssayAnnotation> essay;
  std::vector<LintWarning> socratic_lint;
  std::optional<CounselingStage> counseling_stage;
};

void to_json(nlohmann::json& j, const Annotations& a);

struct PostResult {
  Message message;
  Annotations annotations;
};

/// Appends one JSON line per answered turn for later curation and fine-tuning.
class InteractionLog {
 public:
  explicit InteractionLog(std::filesystem::path path);
  void record(const Conversation& conversation, const Message& user, const Message& assistant);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

struct ChatServiceConfig {
  std::size_t retrieval_k = kDefaultRetrievalK;
  std::size_t max_snippet_chars = kDefaultMaxSnippetChars;
  std::size_t self_check_concurrency = kDefaultSelfCheckConcurrency;
  /// Budget for prior dialogue turns sent to the backend; the current turn is always sent.
  std::size_t history_budget_chars = 12'000;
  Locale default_locale = Locale::En;
  int max_new_tokens = 512;
  double temperature = 0.7;
  std::int64_t deadline_ms = 30'000;
  /// Prepend the skill's guidance text (Psychology, Socrates) as a context message.
  bool skill_guidance = true;
  EssaySchema essay_schema;
};

struct ChatServiceDeps {
  ChatBackend* backend = nullptr;          // required
  SearchProvider* search = nullptr;        // optional; retrieval degrades without it
  ConversationStore* store = nullptr;      // required
  const TemplateSet* templates = nullptr;  // null means TemplateSet::builtin()
  InteractionLog* interaction_log = nullptr;
  std::function<std::int64_t()> clock;     // null means now_ms
};

/// Conversation lifecycle and the per-turn pipeline:
/// compose -> retrieve -> self-check -> inject -> generate -> validate -> persist.
///
/// Turns on different conversations run concurrently; turns on the same conversation are
/// serialized.
class ChatService {
 public:
  ChatService(ChatServiceDeps deps, ChatServiceConfig config = {});

  Conversation create_conversation(FunctionScene scene, const ToolOverrides& overrides = {},
                                   std::optional<Locale> locale = std::nullopt);

  /// Runs one turn. When `on_delta` is given the reply is streamed through it. On backend
  /// failure the user message stays persisted and a retriable ServiceError is thrown.
  PostResult post_message(std::string_view conversation_id, std::string_view user_text,
                          const DeltaSink* on_delta = nullptr);

  Conversation get_conversation(std::string_view id) const;
  std::vector<ConversationSummary> list_conversations() const;
  /// Idempotent.
  void delete_conversation(std::string_view id);

  SystemPromptSpec effective_spec(const Conversation& conversation) const;
  std::string system_prompt(const Conversation& conversation) const;

  /// Dialogue history as sent to the backend: oldest turns are dropped until the prior turns
  /// fit the character budget. The last message is always kept.
  static std::vector<Message> truncate_history(std::vector<Message> history, std::size_t budget_chars);

  const ChatServiceConfig& config() const { return config_; }

 private:
  std::shared_ptr<std::mutex> lock_for(std::string_view id);
  std::string new_conversation_id();

  ChatServiceDeps deps_;
  ChatServiceConfig config_;
  PromptComposer composer_;

  std::mutex locks_mu_;
  std::unordered_map<std::string, std::shared_ptr<std::mutex>> locks_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

}  // namespace educhat
