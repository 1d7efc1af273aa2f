#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "educhat/backend.hpp"
#include "educhat/prompt.hpp"

namespace educhat {

// ---------------------------------------------------------------------------
// Essay assessment

enum class EssayAspect { Content, Expression, Paragraph, OverallEvaluation };

inline constexpr std::array<EssayAspect, 4> kAllAspects = {EssayAspect::Content, EssayAspect::Expression,
                                                           EssayAspect::Paragraph, EssayAspect::OverallEvaluation};

/// JSON key of an aspect: "content", "expression", "paragraph", "overall_evaluation".
std::string_view to_string(EssayAspect aspect);

struct AspectAssessment {
  int rating = 0;
  std::string comment;

  bool operator==(const AspectAssessment&) const = default;
};

struct StandoutSentence {
  std::string sentence;
  std::string remark;

  bool operator==(const StandoutSentence&) const = default;
};

struct EssayFeedback {
  int overall_score = 0;
  std::array<AspectAssessment, kAllAspects.size()> aspects;
  std::vector<StandoutSentence> standout_sentences;

  const AspectAssessment& aspect(EssayAspect a) const { return aspects[static_cast<std::size_t>(a)]; }
  AspectAssessment& aspect(EssayAspect a) { return aspects[static_cast<std::size_t>(a)]; }

  bool operator==(const EssayFeedback&) const = default;
};

void to_json(nlohmann::json& j, const EssayFeedback& f);

/// Score scales and limits for one deployment schema version.
struct EssaySchema {
  int overall_min = 0;
  int overall_max = 100;
  int rating_min = 1;
  int rating_max = 5;
  std::size_t max_essay_chars = 8000;
};

class EssayValidationError : public std::runtime_error {
 public:
  enum class Code {
    NoJson,        // no parseable JSON object in the output
    DuplicateKey,  // a key occurs twice in one object
    MissingField,
    UnknownField,  // e.g. a fifth aspect
    WrongType,
    OutOfRange,
    EmptyComment,
    NotSubstring,  // standout sentence not found verbatim in the essay
  };

  EssayValidationError(Code code, std::string field, const std::string& what)
      : std::runtime_error(what), code_(code), field_(std::move(field)) {}

  Code code() const { return code_; }
  /// Dotted path of the offending field, e.g. "aspects.content.rating". Empty for NoJson.
  const std::string& field() const { return field_; }

 private:
  Code code_;
  std::string field_;
};

std::string_view to_string(EssayValidationError::Code code);

class EssayTooLongError : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct EssayRequest {
  SystemPromptSpec spec;
  std::string user_message;
};

/// Output format example embedded in the essay instruction.
std::string essay_output_format(const EssaySchema& schema = {});

/// Essay Assessment scene spec plus a user message holding the instruction and the essay.
EssayRequest build_essay_request(std::string_view essay, Locale locale = Locale::En, const EssaySchema& schema = {},
                                 const TemplateSet& templates = TemplateSet::builtin());

/// Position and length of the first balanced `{...}` block that parses as a JSON object.
std::optional<std::pair<std::size_t, std::size_t>> find_json_object(std::string_view s);

/// Extracts the first JSON object in the model output and validates it against the schema and
/// the essay. Throws EssayValidationError naming the first violated field.
EssayFeedback parse_essay_feedback(std::string_view model_output, std::string_view essay,
                                   const EssaySchema& schema = {});

// ---------------------------------------------------------------------------
// Socratic teaching

struct LintWarning {
  std::string code;
  std::string message;

  bool operator==(const LintWarning&) const = default;
};

inline constexpr std::string_view kNoQuestionAsked = "no-question-asked";

/// Advisory only. Warns when the turn asks no question (neither '?' nor U+FF1F).
std::vector<LintWarning> socratic_turn_lint(std::string_view assistant_message);

// ---------------------------------------------------------------------------
// Emotional support

enum class CounselingStage { Exploration, Comfort, Suggestion };

std::string_view to_string(CounselingStage stage);

/// Up to 2 user turns: Exploration; up to 4: Comfort; beyond: Suggestion.
CounselingStage tag_counseling_stage(std::span<const Message> history);

}  // namespace educhat
