#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "educhat/backend.hpp"
#include "educhat/prompt.hpp"
#include "educhat/retrieval.hpp"

namespace educhat {

struct Conversation {
  std::string id;
  FunctionScene scene = FunctionScene::GeneralChat;
  Locale locale = Locale::En;
  ToolOverrides overrides;
  std::vector<Message> messages;  // append-only
  std::map<std::string, std::vector<Snippet>> snippets_by_message;
  std::int64_t created_at_ms = 0;

  bool operator==(const Conversation&) const = default;
};

void to_json(nlohmann::json& j, const Conversation& c);
void from_json(const nlohmann::json& j, Conversation& c);

struct ConversationSummary {
  std::string id;
  FunctionScene scene = FunctionScene::GeneralChat;
  Locale locale = Locale::En;
  std::int64_t created_at_ms = 0;
  std::size_t message_count = 0;
  std::string title;  // first user message, shortened
};

void to_json(nlohmann::json& j, const ConversationSummary& s);

class ConversationNotFound : public std::out_of_range {
 public:
  explicit ConversationNotFound(const std::string& id) : std::out_of_range("conversation '" + id + "' not found") {}
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conversation persistence. Appends are atomic per conversation and immediately visible to
/// later reads.
class ConversationStore {
 public:
  virtual ~ConversationStore() = default;

  /// Throws StoreError if the id exists.
  virtual void create(const Conversation& conversation) = 0;
  virtual std::optional<Conversation> get(std::string_view id) const = 0;
  /// Newest first.
  virtual std::vector<ConversationSummary> list() const = 0;
  /// Throws ConversationNotFound, or StoreError when the message would break the append-only
  /// rules (duplicate id, assistant message not following a user message).
  virtual void append(std::string_view id, const Message& message, std::vector<Snippet> snippets = {}) = 0;
  /// Returns false if nothing was deleted.
  virtual bool remove(std::string_view id) = 0;
};

class InMemoryConversationStore : public ConversationStore {
 public:
  void create(const Conversation& conversation) override;
  std::optional<Conversation> get(std::string_view id) const override;
  std::vector<ConversationSummary> list() const override;
  void append(std::string_view id, const Message& message, std::vector<Snippet> snippets = {}) override;
  bool remove(std::string_view id) override;

 protected:
  /// Called under the store lock before the in-memory state changes. Throwing aborts the change.
  virtual void persist(const nlohmann::json& event) { (void)event; }
  /// Applies a create/append/delete event without persisting it.
  void apply(const nlohmann::json& event);

 private:
  struct Entry {
    Conversation conversation;
    std::uint64_t sequence = 0;
  };

  void apply_locked(const nlohmann::json& event);

  mutable std::mutex mu_;
  std::unordered_map<std::string, Entry> conversations_;
  std::uint64_t next_sequence_ = 0;
};

/// Single-node append-log store. Every change is one JSON line appended to the log and flushed
/// before it becomes visible; opening the store replays the log. A torn final line (crash during
/// a write) is dropped.
class FileConversationStore final : public InMemoryConversationStore {
 public:
  explicit FileConversationStore(std::filesystem::path log_path);

  const std::filesystem::path& path() const { return path_; }

 protected:
  void persist(const nlohmann::json& event) override;

 private:
  std::filesystem::path path_;
  std::ofstream log_;
};

}  // namespace educhat
