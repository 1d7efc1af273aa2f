#include "educhat/prompt.hpp"

#include <set>

#include "educhat/text.hpp"

namespace educhat {

namespace {

constexpr std::string_view kToolSeparator = ": ";

bool has_line_break(std::string_view s) {
  return s.find('\n') != std::string_view::npos || s.find('\r') != std::string_view::npos;
}

/// Matches `line` against a template holding exactly one `{name}` placeholder.
std::optional<std::string_view> match_line(std::string_view tmpl, std::string_view name, std::string_view line) {
  std::string token = "{" + std::string(name) + "}";
  auto pos = tmpl.find(token);
  if (pos == std::string_view::npos) return std::nullopt;
  auto prefix = tmpl.substr(0, pos);
  auto suffix = tmpl.substr(pos + token.size());
  if (line.size() < prefix.size() + suffix.size()) return std::nullopt;
  if (line.substr(0, prefix.size()) != prefix) return std::nullopt;
  if (line.substr(line.size() - suffix.size()) != suffix) return std::nullopt;
  return line.substr(prefix.size(), line.size() - prefix.size() - suffix.size());
}

std::string dquote(std::string_view s) { return "\"" + std::string(s) + "\""; }

}  // namespace

ToolConfig::ToolConfig(std::initializer_list<ToolEntry> entries) {
  for (const auto& e : entries) add(e.name, e.enabled);
}

void ToolConfig::add(std::string name, bool enabled) {
  if (this->enabled(name)) throw std::invalid_argument("duplicate tool name '" + name + "'");
  entries_.push_back({std::move(name), enabled});
}

void ToolConfig::set(std::string_view name, bool enabled) {
  for (auto& e : entries_) {
    if (e.name == name) {
      e.enabled = enabled;
      return;
    }
  }
  entries_.push_back({std::string(name), enabled});
}

std::optional<bool> ToolConfig::enabled(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.enabled;
  }
  return std::nullopt;
}

PromptParseError::PromptParseError(int section, std::size_t line, const std::string& what)
    : std::runtime_error("prompt parse error (section " + std::to_string(section) + ", line " +
                         std::to_string(line) + "): " + what),
      section_(section),
      line_(line) {}

void validate(const SystemPromptSpec& spec) {
  if (spec.profile_text.empty()) throw PromptSpecError("profile_text must not be empty");
  if (has_line_break(spec.profile_text)) throw PromptSpecError("profile_text must be a single line");
  std::set<std::string_view> seen;
  for (const auto& tool : spec.tools.entries()) {
    if (tool.name.empty()) throw PromptSpecError("tool names must not be empty");
    if (has_line_break(tool.name)) throw PromptSpecError("tool name '" + tool.name + "' contains a line break");
    if (!seen.insert(tool.name).second) throw PromptSpecError("duplicate tool name '" + tool.name + "'");
  }
}

SystemPromptSpec PromptComposer::scene_defaults(FunctionScene scene, Locale locale) const {
  SystemPromptSpec spec;
  spec.profile_text = templates_->get(locale).profile;
  spec.scene = scene;
  spec.locale = locale;
  const bool retrieval = scene == FunctionScene::RetrievalQA;
  spec.tools = ToolConfig{
      {std::string(kWebSearch), retrieval},
      {std::string(kCalculator), false},
      {std::string(kSelfCheck), retrieval},
  };
  switch (scene) {
    case FunctionScene::EmotionalSupport: spec.skill = Skill::Psychology; break;
    case FunctionScene::SocraticTeaching: spec.skill = Skill::Socrates; break;
    case FunctionScene::RetrievalQA:
    case FunctionScene::EssayAssessment:
    case FunctionScene::GeneralChat: spec.skill = Skill::General; break;
  }
  return spec;
}

std::string PromptComposer::compose(const SystemPromptSpec& spec) const {
  validate(spec);
  const auto& t = templates_->get(spec.locale);
  std::string out;
  out += spec.profile_text;
  out += '\n';
  out += t.tools_header;
  out += '\n';
  for (const auto& tool : spec.tools.entries()) {
    out += tool.name;
    out += kToolSeparator;
    out += tool.enabled ? t.tool_enabled : t.tool_disabled;
    out += '\n';
  }
  out += text::render(t.scene_line, {{"scene", t.scene_name(spec.scene)}});
  out += '\n';
  out += text::render(t.skill_line, {{"skill", std::string(to_string(spec.skill))}});
  out += '\n';
  return out;
}

SystemPromptSpec PromptComposer::parse(std::string_view prompt_text) const {
  auto lines = text::split_lines(prompt_text);
  // A composed prompt ends with '\n', so the split yields a trailing empty element.
  if (lines.back().empty() && lines.size() > 1) {
    lines.pop_back();
  } else {
    throw PromptParseError(3, lines.size(), "prompt must end with a newline");
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::contains(lines[i], "\r")) throw PromptParseError(i < 1 ? 1 : 2, i + 1, "carriage return in line");
  }

  SystemPromptSpec spec;
  if (lines[0].empty()) throw PromptParseError(1, 1, "missing profile line");
  spec.profile_text = std::string(lines[0]);

  std::optional<Locale> locale;
  if (lines.size() >= 2) {
    for (auto l : kAllLocales) {
      if (lines[1] == templates_->get(l).tools_header) {
        locale = l;
        break;
      }
    }
  }
  if (!locale) {
    throw PromptParseError(2, 2, "missing tools header " + dquote(templates_->get(Locale::En).tools_header));
  }
  spec.locale = *locale;
  const auto& t = templates_->get(*locale);

  if (lines.size() < 4) {
    throw PromptParseError(3, lines.size() + 1, "missing function and skill lines after the tool list");
  }
  const std::size_t scene_idx = lines.size() - 2;
  const std::size_t skill_idx = lines.size() - 1;

  for (std::size_t i = 2; i < scene_idx; ++i) {
    auto line = lines[i];
    auto sep = line.rfind(kToolSeparator);
    std::optional<bool> state;
    if (sep != std::string_view::npos && sep > 0) {
      auto word = line.substr(sep + kToolSeparator.size());
      if (word == t.tool_enabled) state = true;
      if (word == t.tool_disabled) state = false;
    }
    if (!state) {
      if (match_line(t.scene_line, "scene", line) || match_line(t.skill_line, "skill", line)) {
        throw PromptParseError(3, i + 1, "function/skill selection must follow the tool list");
      }
      throw PromptParseError(2, i + 1,
                             "malformed tool line, expected \"<name>: " + t.tool_enabled + "|" + t.tool_disabled + "\"");
    }
    auto name = line.substr(0, sep);
    if (spec.tools.enabled(name)) throw PromptParseError(2, i + 1, "duplicate tool " + dquote(name));
    spec.tools.add(std::string(name), *state);
  }

  auto scene_name = match_line(t.scene_line, "scene", lines[scene_idx]);
  if (!scene_name) throw PromptParseError(3, scene_idx + 1, "expected function line");
  std::optional<FunctionScene> scene;
  for (auto sc : kAllScenes) {
    if (t.scene_name(sc) == *scene_name) scene = sc;
  }
  if (!scene) throw PromptParseError(3, scene_idx + 1, "unknown function " + dquote(*scene_name));
  spec.scene = *scene;

  auto skill_name = match_line(t.skill_line, "skill", lines[skill_idx]);
  if (!skill_name) throw PromptParseError(3, skill_idx + 1, "expected skill line");
  auto skill = skill_from_string(*skill_name);
  if (!skill) throw PromptParseError(3, skill_idx + 1, "unknown skill " + dquote(*skill_name));
  spec.skill = *skill;
  return spec;
}

SystemPromptSpec scene_defaults(FunctionScene scene, Locale locale) {
  return PromptComposer{}.scene_defaults(scene, locale);
}

std::string compose(const SystemPromptSpec& spec) { return PromptComposer{}.compose(spec); }

SystemPromptSpec parse(std::string_view prompt_text) { return PromptComposer{}.parse(prompt_text); }

bool tool_overridable(FunctionScene scene, std::string_view tool) {
  return scene == FunctionScene::EssayAssessment && (tool == kWebSearch || tool == kSelfCheck);
}

std::string canonical_tool_name(std::string_view name) {
  if (name == "retrieval" || name == "web_search") return std::string(kWebSearch);
  if (name == "self_check") return std::string(kSelfCheck);
  if (name == "calculator") return std::string(kCalculator);
  return std::string(name);
}

SystemPromptSpec apply_overrides(SystemPromptSpec spec, const ToolOverrides& overrides) {
  std::map<std::string, bool, std::less<>> requested;
  for (const auto& [raw_name, value] : overrides) {
    auto name = canonical_tool_name(raw_name);
    auto [it, inserted] = requested.emplace(name, value);
    if (!inserted && it->second != value) throw OverrideError("conflicting overrides for tool '" + name + "'");
  }
  for (const auto& [raw_name, value] : overrides) {
    auto name = canonical_tool_name(raw_name);
    auto current = spec.tools.enabled(name);
    if (!current) throw OverrideError("unknown tool '" + raw_name + "'");
    if (*current == value) continue;
    if (!tool_overridable(spec.scene, name)) {
      throw OverrideError("tool '" + name + "' is fixed to " + (*current ? "Enable" : "Disable") + " for scene " +
                          std::string(to_string(spec.scene)) +
                          "; only EssayAssessment may toggle Web search and Self-check");
    }
    spec.tools.set(name, value);
  }
  return spec;
}

}  // namespace educhat
