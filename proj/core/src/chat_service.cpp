#include "educhat/chat_service.hpp"

#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "educhat/text.hpp"

namespace educhat {

std::string_view to_string(ServiceError::Kind kind) {
  switch (kind) {
    case ServiceError::Kind::NotFound: return "not_found";
    case ServiceError::Kind::InvalidArgument: return "invalid_argument";
    case ServiceError::Kind::IllegalOverride: return "illegal_override";
    case ServiceError::Kind::BackendUnavailable: return "backend_unavailable";
    case ServiceError::Kind::BackendTimeout: return "backend_timeout";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const Annotations& a) {
  j = nlohmann::json{{"retrieval_enabled", a.retrieval_enabled},
                     {"self_check_enabled", a.self_check_enabled},
                     {"degraded", a.degraded},
                     {"degraded_reason", a.degraded_reason ? nlohmann::json(*a.degraded_reason) : nlohmann::json()},
                     {"retrieved", a.retrieved},
                     {"snippets", a.snippets}};
  if (a.essay) {
    nlohmann::json essay = {{"valid", a.essay->feedback.has_value()}};
    if (a.essay->feedback) {
      essay["feedback"] = *a.essay->feedback;
    } else {
      essay["error"] = {{"code", a.essay->error_code ? to_string(*a.essay->error_code) : "unknown"},
                        {"field", a.essay->error_field},
                        {"message", a.essay->error_message}};
      essay["raw_text"] = a.essay->raw_text;
    }
    j["essay"] = essay;
  } else {
    j["essay"] = nullptr;
  }
  nlohmann::json lint = nlohmann::json::array();
  for (const auto& w : a.socratic_lint) lint.push_back({{"code", w.code}, {"message", w.message}});
  j["socratic_lint"] = lint;
  j["counseling_stage"] = a.counseling_stage ? nlohmann::json(to_string(*a.counseling_stage)) : nlohmann::json();
}

InteractionLog::InteractionLog(std::filesystem::path path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw std::runtime_error("cannot open interaction log " + path.string());
}

void InteractionLog::record(const Conversation& conversation, const Message& user, const Message& assistant) {
  nlohmann::json line = {{"conversation_id", conversation.id}, {"scene", to_string(conversation.scene)},
                         {"locale", to_string(conversation.locale)}, {"user", user.content},
                         {"assistant", assistant.content}, {"at", assistant.created_at_ms}};
  std::lock_guard lock(mu_);
  out_ << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  out_.flush();
}

ChatService::ChatService(ChatServiceDeps deps, ChatServiceConfig config)
    : deps_(std::move(deps)),
      config_(config),
      composer_(deps_.templates ? *deps_.templates : TemplateSet::builtin()),
      rng_(std::random_device{}()) {
  if (!deps_.backend) throw std::invalid_argument("chat service needs a backend");
  if (!deps_.store) throw std::invalid_argument("chat service needs a conversation store");
  if (!deps_.clock) deps_.clock = now_ms;
  if (config_.retrieval_k == 0) throw std::invalid_argument("retrieval k must be at least 1");
}

std::string ChatService::new_conversation_id() {
  std::lock_guard lock(rng_mu_);
  std::ostringstream os;
  os << "c-" << std::hex << std::setfill('0') << std::setw(16) << rng_();
  return os.str();
}

std::shared_ptr<std::mutex> ChatService::lock_for(std::string_view id) {
  std::lock_guard lock(locks_mu_);
  auto& slot = locks_[std::string(id)];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

SystemPromptSpec ChatService::effective_spec(const Conversation& conversation) const {
  return apply_overrides(composer_.scene_defaults(conversation.scene, conversation.locale), conversation.overrides);
}

std::string ChatService::system_prompt(const Conversation& conversation) const {
  return composer_.compose(effective_spec(conversation));
}

Conversation ChatService::create_conversation(FunctionScene scene, const ToolOverrides& overrides,
                                              std::optional<Locale> locale) {
  Conversation c;
  c.scene = scene;
  c.locale = locale.value_or(config_.default_locale);
  try {
    (void)apply_overrides(composer_.scene_defaults(scene, c.locale), overrides);
  } catch (const OverrideError& e) {
    throw ServiceError(ServiceError::Kind::IllegalOverride, e.what());
  }
  for (const auto& [name, value] : overrides) c.overrides[canonical_tool_name(name)] = value;
  c.created_at_ms = deps_.clock();
  for (int attempt = 0;; ++attempt) {
    c.id = new_conversation_id();
    try {
      deps_.store->create(c);
      return c;
    } catch (const StoreError&) {
      if (attempt >= 3) throw;
    }
  }
}

std::vector<Message> ChatService::truncate_history(std::vector<Message> history, std::size_t budget_chars) {
  if (history.size() <= 1) return history;
  std::size_t used = 0;
  std::size_t first_kept = history.size() - 1;
  for (std::size_t i = history.size() - 1; i-- > 0;) {
    used += text::utf8_length(history[i].content);
    if (used > budget_chars) break;
    first_kept = i;
  }
  history.erase(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(first_kept));
  return history;
}

PostResult ChatService::post_message(std::string_view conversation_id, std::string_view user_text,
                                     const DeltaSink* on_delta) {
  if (text::trim(user_text).empty()) throw ServiceError(ServiceError::Kind::InvalidArgument, "message text is empty");

  auto conv_lock = lock_for(conversation_id);
  std::lock_guard guard(*conv_lock);

  auto found = deps_.store->get(conversation_id);
  if (!found) throw ServiceError(ServiceError::Kind::NotFound, "conversation '" + std::string(conversation_id) + "' not found");
  Conversation conv = std::move(*found);
  const auto spec = effective_spec(conv);
  const auto& templates = composer_.templates();

  std::optional<EssayRequest> essay_request;
  if (conv.scene == FunctionScene::EssayAssessment) {
    try {
      essay_request = build_essay_request(user_text, conv.locale, config_.essay_schema, templates);
    } catch (const std::exception& e) {
      throw ServiceError(ServiceError::Kind::InvalidArgument, e.what());
    }
  }

  Message user{"m-" + std::to_string(conv.messages.size() + 1), Role::User, std::string(user_text), deps_.clock()};
  try {
    deps_.store->append(conv.id, user);
  } catch (const ConversationNotFound& e) {
    throw ServiceError(ServiceError::Kind::NotFound, e.what());
  }
  conv.messages.push_back(user);

  auto history = truncate_history(conv.messages, config_.history_budget_chars);
  if (essay_request) history.back().content = essay_request->user_message;

  Annotations notes;
  notes.retrieval_enabled = spec.tools.is_enabled(kWebSearch);
  notes.self_check_enabled = spec.tools.is_enabled(kSelfCheck);
  std::vector<Snippet> snippets;
  if (notes.retrieval_enabled) {
    if (deps_.search == nullptr) {
      notes.degraded = true;
      notes.degraded_reason = "no search provider configured";
    } else {
      auto retrieved = retrieve(user_text, *deps_.search, config_.retrieval_k, config_.max_snippet_chars);
      notes.retrieved = retrieved.snippets.size();
      if (retrieved.degraded) {
        notes.degraded = true;
        notes.degraded_reason = retrieved.error;
      }
      SelfCheckOptions sc;
      sc.locale = conv.locale;
      sc.max_concurrency = config_.self_check_concurrency;
      sc.deadline_ms = config_.deadline_ms;
      sc.templates = &templates;
      snippets = filter_snippets(user_text, retrieved.snippets, *deps_.backend, notes.self_check_enabled, sc);
    }
  }

  std::vector<Message> prefix;
  const auto& guidance = templates.get(conv.locale).guidance(spec.skill);
  if (config_.skill_guidance && !guidance.empty()) {
    prefix.push_back(Message{"guidance", Role::SystemContext, guidance, 0});
  }
  auto messages = inject(snippets, history, conv.locale, templates);
  messages.insert(messages.begin(), prefix.begin(), prefix.end());

  BackendRequest request{composer_.compose(spec), std::move(messages), {}};
  request.params.max_new_tokens = config_.max_new_tokens;
  request.params.temperature = config_.temperature;
  request.params.deadline_ms = config_.deadline_ms;
  request.params.locale = conv.locale;

  Message reply;
  try {
    reply = on_delta ? deps_.backend->generate_stream(request, *on_delta) : deps_.backend->generate(request);
  } catch (const BackendError& e) {
    auto kind = e.kind() == BackendError::Kind::Timeout ? ServiceError::Kind::BackendTimeout
                                                        : ServiceError::Kind::BackendUnavailable;
    throw ServiceError(kind, e.what());
  }

  switch (conv.scene) {
    case FunctionScene::EssayAssessment: {
      EssayAnnotation essay;
      try {
        essay.feedback = parse_essay_feedback(reply.content, user_text, config_.essay_schema);
      } catch (const EssayValidationError& e) {
        essay.error_code = e.code();
        essay.error_field = e.field();
        essay.error_message = e.what();
        essay.raw_text = reply.content;
      }
      notes.essay = std::move(essay);
      break;
    }
    case FunctionScene::SocraticTeaching: notes.socratic_lint = socratic_turn_lint(reply.content); break;
    case FunctionScene::EmotionalSupport: notes.counseling_stage = tag_counseling_stage(conv.messages); break;
    case FunctionScene::RetrievalQA:
    case FunctionScene::GeneralChat: break;
  }

  Message assistant{"m-" + std::to_string(conv.messages.size() + 1), Role::Assistant, reply.content, deps_.clock()};
  deps_.store->append(conv.id, assistant, snippets);
  conv.messages.push_back(assistant);
  notes.snippets = std::move(snippets);

  if (deps_.interaction_log) {
    try {
      deps_.interaction_log->record(conv, user, assistant);
    } catch (const std::exception& e) {
      spdlog::warn("interaction log write failed: {}", e.what());
    }
  }
  return PostResult{std::move(assistant), std::move(notes)};
}

Conversation ChatService::get_conversation(std::string_view id) const {
  auto c = deps_.store->get(id);
  if (!c) throw ServiceError(ServiceError::Kind::NotFound, "conversation '" + std::string(id) + "' not found");
  return *c;
}

std::vector<ConversationSummary> ChatService::list_conversations() const { return deps_.store->list(); }

void ChatService::delete_conversation(std::string_view id) {
  auto conv_lock = lock_for(id);
  {
    std::lock_guard guard(*conv_lock);
    deps_.store->remove(id);
  }
  std::lock_guard lock(locks_mu_);
  locks_.erase(std::string(id));
}

}  // namespace educhat
