#include "educhat/conversation.hpp"

namespace educhat {

void to_json(nlohmann::json& j, const Conversation& c) {
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [name, value] : c.overrides) overrides[name] = value;
  nlohmann::json snippets = nlohmann::json::object();
  for (const auto& [mid, list] : c.snippets_by_message) snippets[mid] = list;
  j = nlohmann::json{{"id", c.id},
                     {"scene", to_string(c.scene)},
                     {"locale", to_string(c.locale)},
                     {"overrides", overrides},
                     {"messages", c.messages},
                     {"snippets_by_message", snippets},
                     {"created_at", c.created_at_ms}};
}

void from_json(const nlohmann::json& j, Conversation& c) {
  c.id = j.at("id").get<std::string>();
  auto scene = scene_from_string(j.at("scene").get<std::string>());
  if (!scene) throw std::invalid_argument("unknown scene '" + j.at("scene").get<std::string>() + "'");
  c.scene = *scene;
  auto locale = locale_from_string(j.value("locale", std::string("en")));
  if (!locale) throw std::invalid_argument("unknown locale");
  c.locale = *locale;
  c.overrides.clear();
  if (auto it = j.find("overrides"); it != j.end()) {
    for (const auto& [name, value] : it->items()) c.overrides[name] = value.get<bool>();
  }
  c.messages = j.value("messages", std::vector<Message>{});
  c.snippets_by_message.clear();
  if (auto it = j.find("snippets_by_message"); it != j.end()) {
    for (const auto& [mid, list] : it->items()) c.snippets_by_message[mid] = list.get<std::vector<Snippet>>();
  }
  c.created_at_ms = j.value("created_at", std::int64_t{0});
}

void to_json(nlohmann::json& j, const ConversationSummary& s) {
  j = nlohmann::json{{"id", s.id},
                     {"scene", to_string(s.scene)},
                     {"locale", to_string(s.locale)},
                     {"created_at", s.created_at_ms},
                     {"message_count", s.message_count},
                     {"title", s.title}};
}

}  // namespace educhat
