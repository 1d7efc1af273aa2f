#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "educhat/templates.hpp"
#include "educhat/types.hpp"

namespace educhat {

inline constexpr std::string_view kWebSearch = "Web search";
inline constexpr std::string_view kCalculator = "Calculator";
inline constexpr std::string_view kSelfCheck = "Self-check";

struct ToolEntry {
  std::string name;
  bool enabled = false;

  bool operator==(const ToolEntry&) const = default;
};

/// Ordered tool list. Names are unique; insertion order is the rendering order.
class ToolConfig {
 public:
  ToolConfig() = default;
  ToolConfig(std::initializer_list<ToolEntry> entries);

  /// Appends a new tool. Throws std::invalid_argument if the name is already registered.
  void add(std::string name, bool enabled);
  /// Updates an existing tool in place or appends it.
  void set(std::string_view name, bool enabled);

  std::optional<bool> enabled(std::string_view name) const;
  bool is_enabled(std::string_view name) const { return enabled(name).value_or(false); }

  const std::vector<ToolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const ToolConfig&) const = default;

 private:
  std::vector<ToolEntry> entries_;
};

struct SystemPromptSpec {
  std::string profile_text;
  ToolConfig tools;
  Skill skill = Skill::General;
  FunctionScene scene = FunctionScene::GeneralChat;
  Locale locale = Locale::En;

  bool operator==(const SystemPromptSpec&) const = default;
};

class PromptSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parse failure. `section` is 1 (profile), 2 (tools) or 3 (function/skill selection).
class PromptParseError : public std::runtime_error {
 public:
  PromptParseError(int section, std::size_t line, const std::string& what);

  int section() const { return section_; }
  std::size_t line() const { return line_; }

 private:
  int section_;
  std::size_t line_;
};

/// Renders and parses the three-part system prompt:
///
///   <profile sentence>
///   <tools header>
///   <tool name>: <Enable|Disable>      (one line per tool, ToolConfig order)
///   <function line naming the scene>
///   <skill line naming the active skill>
///
/// Every line ends with '\n'. Wording comes from the locale's templates.
class PromptComposer {
 public:
  explicit PromptComposer(const TemplateSet& templates = TemplateSet::builtin()) : templates_(&templates) {}

  SystemPromptSpec scene_defaults(FunctionScene scene, Locale locale = Locale::En) const;
  std::string compose(const SystemPromptSpec& spec) const;
  SystemPromptSpec parse(std::string_view prompt_text) const;

  const TemplateSet& templates() const { return *templates_; }

 private:
  const TemplateSet* templates_;
};

SystemPromptSpec scene_defaults(FunctionScene scene, Locale locale = Locale::En);
std::string compose(const SystemPromptSpec& spec);
SystemPromptSpec parse(std::string_view prompt_text);

/// Throws PromptSpecError when the spec cannot be rendered unambiguously.
void validate(const SystemPromptSpec& spec);

/// Partial tool configuration requested by a client, keyed by tool name.
using ToolOverrides = std::map<std::string, bool, std::less<>>;

/// Rejected override, carrying the scene rule that forbids it.
class OverrideError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// True if `tool` may be toggled by a client in `scene`. Only Essay Assessment leaves
/// web search and self-check open; every other cell of the scene table is fixed.
bool tool_overridable(FunctionScene scene, std::string_view tool);

/// Accepts "retrieval" and "self_check" as aliases of the canonical tool names.
std::string canonical_tool_name(std::string_view name);

/// scene defaults merged with overrides. Setting a fixed tool to its default value is a no-op;
/// changing it throws OverrideError.
SystemPromptSpec apply_overrides(SystemPromptSpec spec, const ToolOverrides& overrides);

}  // namespace educhat
