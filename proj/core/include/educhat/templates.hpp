#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "educhat/types.hpp"

namespace educhat {

/// Every user-facing string the service renders for one locale.
///
/// Line templates carry exactly one named placeholder (`{scene}`, `{skill}`) so they can be
/// matched back when parsing a rendered prompt. Multi-line templates (`self_check`,
/// `essay_request`, ...) use several placeholders and are render-only.
struct LocaleTemplates {
  std::string profile;
  std::string tools_header;
  std::string tool_enabled;
  std::string tool_disabled;
  std::string scene_line;
  std::string skill_line;
  std::array<std::string, kAllScenes.size()> scene_names;

  std::string self_check;  // {question} {snippet}
  std::vector<std::string> affirmatives;
  std::string context_message;  // {title} {text} {url}
  std::string essay_request;    // {essay} {schema}
  std::string eval_question;    // {question} {choices}
  std::array<std::string, kAllSkills.size()> skill_guidance;

  const std::string& scene_name(FunctionScene scene) const {
    return scene_names[static_cast<std::size_t>(scene)];
  }
  const std::string& guidance(Skill skill) const { return skill_guidance[static_cast<std::size_t>(skill)]; }
};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TemplateSet {
 public:
  /// Templates compiled into the library; identical to the shipped educhat_templates.json.
  static const TemplateSet& builtin();

  /// Loads a JSON template file with one object per locale ("en", "zh"). Missing keys fall
  /// back to the built-in text; placeholders are validated.
  static TemplateSet load(const std::filesystem::path& path);
  static TemplateSet from_json_text(std::string_view json_text);

  const LocaleTemplates& get(Locale locale) const { return locales_[static_cast<std::size_t>(locale)]; }
  LocaleTemplates& mutable_get(Locale locale) { return locales_[static_cast<std::size_t>(locale)]; }

  std::string to_json_text() const;

 private:
  std::array<LocaleTemplates, kAllLocales.size()> locales_;
};

}  // namespace educhat
