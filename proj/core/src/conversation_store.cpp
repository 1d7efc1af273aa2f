#include "educhat/conversation.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include <spdlog/spdlog.h>

#include "educhat/text.hpp"

namespace educhat {

namespace {

constexpr std::size_t kTitleChars = 48;

void check_append(const Conversation& c, const Message& m) {
  for (const auto& existing : c.messages) {
    if (existing.id == m.id) throw StoreError("message id '" + m.id + "' already exists in conversation " + c.id);
  }
  if (m.role == Role::Assistant && (c.messages.empty() || c.messages.back().role != Role::User)) {
    throw StoreError("assistant message must follow a user message in conversation " + c.id);
  }
}

}  // namespace

void InMemoryConversationStore::create(const Conversation& conversation) {
  std::lock_guard lock(mu_);
  if (conversation.id.empty()) throw StoreError("conversation id must not be empty");
  if (conversations_.contains(conversation.id)) throw StoreError("conversation '" + conversation.id + "' exists");
  nlohmann::json event = {{"op", "create"}, {"conversation", conversation}};
  persist(event);
  apply_locked(event);
}

std::optional<Conversation> InMemoryConversationStore::get(std::string_view id) const {
  std::lock_guard lock(mu_);
  auto it = conversations_.find(std::string(id));
  if (it == conversations_.end()) return std::nullopt;
  return it->second.conversation;
}

std::vector<ConversationSummary> InMemoryConversationStore::list() const {
  std::vector<std::pair<std::uint64_t, ConversationSummary>> rows;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, entry] : conversations_) {
      const auto& c = entry.conversation;
      ConversationSummary s{c.id, c.scene, c.locale, c.created_at_ms, c.messages.size(), {}};
      for (const auto& m : c.messages) {
        if (m.role == Role::User) {
          s.title = std::string(text::utf8_prefix(m.content, kTitleChars));
          break;
        }
      }
      rows.emplace_back(entry.sequence, std::move(s));
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second.created_at_ms != b.second.created_at_ms) return a.second.created_at_ms > b.second.created_at_ms;
    return a.first > b.first;
  });
  std::vector<ConversationSummary> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(r.second));
  return out;
}

void InMemoryConversationStore::append(std::string_view id, const Message& message, std::vector<Snippet> snippets) {
  std::lock_guard lock(mu_);
  auto it = conversations_.find(std::string(id));
  if (it == conversations_.end()) throw ConversationNotFound(std::string(id));
  check_append(it->second.conversation, message);
  for (const auto& s : snippets) {
    if (s.verdict == Verdict::NotHelpful) throw StoreError("snippets judged not helpful must not be stored");
  }
  if (!snippets.empty() && message.role != Role::Assistant) {
    throw StoreError("snippets can only be attached to assistant messages");
  }
  nlohmann::json event = {{"op", "append"}, {"id", id}, {"message", message}, {"snippets", snippets}};
  persist(event);
  apply_locked(event);
}

bool InMemoryConversationStore::remove(std::string_view id) {
  std::lock_guard lock(mu_);
  if (!conversations_.contains(std::string(id))) return false;
  nlohmann::json event = {{"op", "delete"}, {"id", id}};
  persist(event);
  apply_locked(event);
  return true;
}

void InMemoryConversationStore::apply(const nlohmann::json& event) {
  std::lock_guard lock(mu_);
  apply_locked(event);
}

void InMemoryConversationStore::apply_locked(const nlohmann::json& event) {
  const auto op = event.at("op").get<std::string>();
  if (op == "create") {
    auto c = event.at("conversation").get<Conversation>();
    auto id = c.id;
    if (conversations_.contains(id)) throw StoreError("conversation '" + id + "' created twice");
    conversations_.emplace(std::move(id), Entry{std::move(c), next_sequence_++});
  } else if (op == "append") {
    auto id = event.at("id").get<std::string>();
    auto it = conversations_.find(id);
    if (it == conversations_.end()) throw ConversationNotFound(id);
    auto message = event.at("message").get<Message>();
    auto& c = it->second.conversation;
    check_append(c, message);
    auto snippets = event.value("snippets", std::vector<Snippet>{});
    if (!snippets.empty()) c.snippets_by_message[message.id] = std::move(snippets);
    c.messages.push_back(std::move(message));
  } else if (op == "delete") {
    conversations_.erase(event.at("id").get<std::string>());
  } else {
    throw StoreError("unknown store event '" + op + "'");
  }
}

FileConversationStore::FileConversationStore(std::filesystem::path log_path) : path_(std::move(log_path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::vector<std::string> lines;
  bool ends_with_newline = true;
  {
    std::ifstream in(path_, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ends_with_newline = content.empty() || content.back() == '\n';
    std::istringstream ss(content);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
  }
  std::size_t valid_bytes = 0;
  bool torn_tail = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) {
      valid_bytes += lines[i].size() + 1;
      continue;
    }
    auto event = nlohmann::json::parse(lines[i], nullptr, false);
    if (event.is_discarded()) {
      if (i + 1 == lines.size()) {
        spdlog::warn("dropping torn final record in conversation log {}", path_.string());
        torn_tail = true;
        break;
      }
      throw StoreError("conversation log " + path_.string() + " is corrupt at line " + std::to_string(i + 1));
    }
    try {
      apply(event);
    } catch (const std::exception& e) {
      throw StoreError("conversation log " + path_.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
    valid_bytes += lines[i].size() + 1;
  }
  if (torn_tail) std::filesystem::resize_file(path_, valid_bytes);
  log_.open(path_, std::ios::binary | std::ios::app);
  if (!log_) throw StoreError("cannot open conversation log " + path_.string());
  // A complete final record whose newline never reached the disk.
  if (!torn_tail && !ends_with_newline) log_ << '\n' << std::flush;
}

void FileConversationStore::persist(const nlohmann::json& event) {
  log_ << event.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  log_.flush();
  if (!log_) throw StoreError("failed to append to conversation log " + path_.string());
}

}  // namespace educhat
