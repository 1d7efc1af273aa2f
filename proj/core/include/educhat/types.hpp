#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace educhat {

enum class Locale { En, Zh };

/// Behavioral mode named on the final line of the system prompt.
enum class Skill { General, Psychology, Socrates };

/// User-selectable function. Each scene binds a fixed tool/skill configuration.
enum class FunctionScene { RetrievalQA, EssayAssessment, EmotionalSupport, SocraticTeaching, GeneralChat };

inline constexpr std::array<FunctionScene, 5> kAllScenes = {
    FunctionScene::RetrievalQA, FunctionScene::EssayAssessment, FunctionScene::EmotionalSupport,
    FunctionScene::SocraticTeaching, FunctionScene::GeneralChat};

inline constexpr std::array<Skill, 3> kAllSkills = {Skill::General, Skill::Psychology, Skill::Socrates};

inline constexpr std::array<Locale, 2> kAllLocales = {Locale::En, Locale::Zh};

std::string_view to_string(Locale locale);
std::string_view to_string(Skill skill);
std::string_view to_string(FunctionScene scene);

std::optional<Locale> locale_from_string(std::string_view s);
std::optional<Skill> skill_from_string(std::string_view s);
std::optional<FunctionScene> scene_from_string(std::string_view s);

}  // namespace educhat
