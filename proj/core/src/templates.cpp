#include "educhat/templates.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace educhat {

namespace detail {
extern const std::string_view kBuiltinTemplatesJson;
}

namespace {

using nlohmann::json;

std::size_t count_placeholders(std::string_view s, std::string_view name) {
  std::string token = "{" + std::string(name) + "}";
  std::size_t n = 0;
  for (auto pos = s.find(token); pos != std::string_view::npos; pos = s.find(token, pos + token.size())) ++n;
  return n;
}

void read_string(const json& obj, const char* key, std::string& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    if (!it->is_string()) throw TemplateError(std::string("template key '") + key + "' must be a string");
    out = it->get<std::string>();
  }
}

void require_nonempty_line(const std::string& value, const char* key) {
  if (value.empty()) throw TemplateError(std::string("template '") + key + "' is empty");
  if (value.find('\n') != std::string::npos || value.find('\r') != std::string::npos) {
    throw TemplateError(std::string("template '") + key + "' must be a single line");
  }
}

void validate(const LocaleTemplates& t, Locale locale) {
  const std::string where = std::string(" (locale ") + std::string(to_string(locale)) + ")";
  try {
    require_nonempty_line(t.profile, "profile");
    require_nonempty_line(t.tools_header, "tools_header");
    require_nonempty_line(t.tool_enabled, "tool_enabled");
    require_nonempty_line(t.tool_disabled, "tool_disabled");
    require_nonempty_line(t.scene_line, "scene_line");
    require_nonempty_line(t.skill_line, "skill_line");
    if (t.tool_enabled == t.tool_disabled) throw TemplateError("tool_enabled and tool_disabled must differ");
    if (t.tool_enabled.find(": ") != std::string::npos || t.tool_disabled.find(": ") != std::string::npos) {
      throw TemplateError("tool state words must not contain ': '");
    }
    if (count_placeholders(t.scene_line, "scene") != 1) throw TemplateError("scene_line needs exactly one {scene}");
    if (count_placeholders(t.skill_line, "skill") != 1) throw TemplateError("skill_line needs exactly one {skill}");
    std::set<std::string> names;
    for (const auto& name : t.scene_names) {
      require_nonempty_line(name, "scene_names");
      if (!names.insert(name).second) throw TemplateError("duplicate scene name '" + name + "'");
    }
    if (count_placeholders(t.self_check, "question") == 0 || count_placeholders(t.self_check, "snippet") == 0) {
      throw TemplateError("self_check needs {question} and {snippet}");
    }
    if (t.affirmatives.empty()) throw TemplateError("affirmatives must not be empty");
    if (count_placeholders(t.essay_request, "essay") != 1) throw TemplateError("essay_request needs exactly one {essay}");
    if (count_placeholders(t.eval_question, "question") != 1 || count_placeholders(t.eval_question, "choices") != 1) {
      throw TemplateError("eval_question needs {question} and {choices}");
    }
  } catch (const TemplateError& e) {
    throw TemplateError(e.what() + where);
  }
}

void merge_locale(const json& obj, LocaleTemplates& t) {
  if (!obj.is_object()) throw TemplateError("locale entry must be an object");
  read_string(obj, "profile", t.profile);
  read_string(obj, "tools_header", t.tools_header);
  read_string(obj, "tool_enabled", t.tool_enabled);
  read_string(obj, "tool_disabled", t.tool_disabled);
  read_string(obj, "scene_line", t.scene_line);
  read_string(obj, "skill_line", t.skill_line);
  read_string(obj, "self_check", t.self_check);
  read_string(obj, "context_message", t.context_message);
  read_string(obj, "essay_request", t.essay_request);
  read_string(obj, "eval_question", t.eval_question);
  if (auto it = obj.find("scene_names"); it != obj.end()) {
    for (auto scene : kAllScenes) {
      read_string(*it, std::string(to_string(scene)).c_str(), t.scene_names[static_cast<std::size_t>(scene)]);
    }
  }
  if (auto it = obj.find("skill_guidance"); it != obj.end()) {
    for (auto skill : kAllSkills) {
      read_string(*it, std::string(to_string(skill)).c_str(), t.skill_guidance[static_cast<std::size_t>(skill)]);
    }
  }
  if (auto it = obj.find("affirmatives"); it != obj.end()) {
    if (!it->is_array()) throw TemplateError("affirmatives must be an array");
    t.affirmatives.clear();
    for (const auto& a : *it) {
      if (!a.is_string() || a.get<std::string>().empty()) throw TemplateError("affirmatives must be non-empty strings");
      t.affirmatives.push_back(a.get<std::string>());
    }
  }
}

TemplateSet parse_over(TemplateSet base, std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw TemplateError(std::string("template file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw TemplateError("template file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    auto locale = locale_from_string(key);
    if (!locale) throw TemplateError("unknown locale '" + key + "' in template file");
    merge_locale(value, base.mutable_get(*locale));
  }
  for (auto locale : kAllLocales) validate(base.get(locale), locale);
  return base;
}

}  // namespace

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet instance = parse_over(TemplateSet{}, detail::kBuiltinTemplatesJson);
  return instance;
}

TemplateSet TemplateSet::from_json_text(std::string_view json_text) { return parse_over(builtin(), json_text); }

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError("cannot open template file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string TemplateSet::to_json_text() const {
  json doc = json::object();
  for (auto locale : kAllLocales) {
    const auto& t = get(locale);
    json scenes = json::object();
    for (auto scene : kAllScenes) scenes[std::string(to_string(scene))] = t.scene_name(scene);
    json guidance = json::object();
    for (auto skill : kAllSkills) guidance[std::string(to_string(skill))] = t.guidance(skill);
    doc[std::string(to_string(locale))] = {
        {"profile", t.profile},
        {"tools_header", t.tools_header},
        {"tool_enabled", t.tool_enabled},
        {"tool_disabled", t.tool_disabled},
        {"scene_line", t.scene_line},
        {"skill_line", t.skill_line},
        {"scene_names", scenes},
        {"self_check", t.self_check},
        {"affirmatives", t.affirmatives},
        {"context_message", t.context_message},
        {"essay_request", t.essay_request},
        {"eval_question", t.eval_question},
        {"skill_guidance", guidance},
    };
  }
  return doc.dump(2);
}

}  // namespace educhat
