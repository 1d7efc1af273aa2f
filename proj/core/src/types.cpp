#include "educhat/types.hpp"

namespace educhat {

std::string_view to_string(Locale locale) {
  switch (locale) {
    case Locale::En: return "en";
    case Locale::Zh: return "zh";
  }
  return "en";
}

std::string_view to_string(Skill skill) {
  switch (skill) {
    case Skill::General: return "General";
    case Skill::Psychology: return "Psychology";
    case Skill::Socrates: return "Socrates";
  }
  return "General";
}

std::string_view to_string(FunctionScene scene) {
  switch (scene) {
    case FunctionScene::RetrievalQA: return "RetrievalQA";
    case FunctionScene::EssayAssessment: return "EssayAssessment";
    case FunctionScene::EmotionalSupport: return "EmotionalSupport";
    case FunctionScene::SocraticTeaching: return "SocraticTeaching";
    case FunctionScene::GeneralChat: return "GeneralChat";
  }
  return "GeneralChat";
}

std::optional<Locale> locale_from_string(std::string_view s) {
  for (auto l : kAllLocales) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

std::optional<Skill> skill_from_string(std::string_view s) {
  for (auto k : kAllSkills) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<FunctionScene> scene_from_string(std::string_view s) {
  for (auto sc : kAllScenes) {
    if (to_string(sc) == s) return sc;
  }
  return std::nullopt;
}

}  // namespace educhat
