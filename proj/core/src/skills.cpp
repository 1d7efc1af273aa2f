#include "educhat/skills.hpp"

#include <set>

#include "educhat/text.hpp"

namespace educhat {

namespace {

using nlohmann::json;
using Code = EssayValidationError::Code;

std::string field_path(const std::string& parent, std::string_view key) {
  return parent.empty() ? std::string(key) : parent + "." + std::string(key);
}

/// Balanced-brace end of the block starting at `start`, skipping braces inside strings.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::nullopt;
}

/// Path of the first key that repeats within one object, if any.
std::optional<std::string> find_duplicate_key(std::string_view object_text) {
  struct Frame {
    bool is_array = false;
    std::string path;
    std::set<std::string> keys;
    std::string last_key;
    std::size_t next_index = 0;
  };
  std::vector<Frame> frames;
  std::optional<std::string> duplicate;

  auto child_path = [&]() -> std::string {
    if (frames.empty()) return {};
    auto& top = frames.back();
    if (top.is_array) return top.path + "[" + std::to_string(top.next_index++) + "]";
    return field_path(top.path, top.last_key);
  };

  json::parser_callback_t cb = [&](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start: {
        auto path = child_path();
        frames.push_back(Frame{false, std::move(path), {}, {}, 0});
        break;
      }
      case json::parse_event_t::array_start: {
        auto path = child_path();
        frames.push_back(Frame{true, std::move(path), {}, {}, 0});
        break;
      }
      case json::parse_event_t::key: {
        auto& top = frames.back();
        top.last_key = parsed.get<std::string>();
        if (!top.keys.insert(top.last_key).second && !duplicate) duplicate = field_path(top.path, top.last_key);
        break;
      }
      case json::parse_event_t::value:
        if (!frames.empty() && frames.back().is_array) (void)child_path();
        break;
      case json::parse_event_t::object_end:
      case json::parse_event_t::array_end:
        frames.pop_back();
        break;
    }
    return true;
  };
  (void)json::parse(object_text, cb, false);
  return duplicate;
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw EssayValidationError(Code::MissingField, path, "missing field '" + path + "'");
  return *it;
}

int require_int(const json& value, const std::string& path, int lo, int hi) {
  if (!value.is_number_integer()) {
    throw EssayValidationError(Code::WrongType, path, "field '" + path + "' must be an integer");
  }
  auto v = value.get<long long>();
  if (v < lo || v > hi) {
    throw EssayValidationError(Code::OutOfRange, path,
                               "field '" + path + "' = " + std::to_string(v) + " is outside [" + std::to_string(lo) +
                                   ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

std::string require_string(const json& value, const std::string& path) {
  if (!value.is_string()) throw EssayValidationError(Code::WrongType, path, "field '" + path + "' must be a string");
  return value.get<std::string>();
}

const json& require_object(const json& value, const std::string& path) {
  if (!value.is_object()) throw EssayValidationError(Code::WrongType, path, "field '" + path + "' must be an object");
  return value;
}

}  // namespace

std::string_view to_string(EssayAspect aspect) {
  switch (aspect) {
    case EssayAspect::Content: return "content";
    case EssayAspect::Expression: return "expression";
    case EssayAspect::Paragraph: return "paragraph";
    case EssayAspect::OverallEvaluation: return "overall_evaluation";
  }
  return "content";
}

std::string_view to_string(EssayValidationError::Code code) {
  switch (code) {
    case Code::NoJson: return "no_json";
    case Code::DuplicateKey: return "duplicate_key";
    case Code::MissingField: return "missing_field";
    case Code::UnknownField: return "unknown_field";
    case Code::WrongType: return "wrong_type";
    case Code::OutOfRange: return "out_of_range";
    case Code::EmptyComment: return "empty_comment";
    case Code::NotSubstring: return "not_substring";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const EssayFeedback& f) {
  json aspects = json::object();
  for (auto a : kAllAspects) {
    aspects[std::string(to_string(a))] = {{"rating", f.aspect(a).rating}, {"comment", f.aspect(a).comment}};
  }
  json standouts = json::array();
  for (const auto& s : f.standout_sentences) standouts.push_back({{"sentence", s.sentence}, {"remark", s.remark}});
  j = json{{"overall_score", f.overall_score}, {"aspects", aspects}, {"standout_sentences", standouts}};
}

std::string essay_output_format(const EssaySchema& schema) {
  const std::string rating = "<integer " + std::to_string(schema.rating_min) + "-" + std::to_string(schema.rating_max) + ">";
  std::string out = "{\"overall_score\": <integer " + std::to_string(schema.overall_min) + "-" +
                    std::to_string(schema.overall_max) + ">, \"aspects\": {";
  bool first = true;
  for (auto a : kAllAspects) {
    if (!first) out += ", ";
    first = false;
    out += "\"" + std::string(to_string(a)) + "\": {\"rating\": " + rating + ", \"comment\": \"<text>\"}";
  }
  out += "}, \"standout_sentences\": [{\"sentence\": \"<sentence copied verbatim from the essay>\", \"remark\": \"<text>\"}]}";
  return out;
}

EssayRequest build_essay_request(std::string_view essay, Locale locale, const EssaySchema& schema,
                                 const TemplateSet& templates) {
  if (text::trim(essay).empty()) throw std::invalid_argument("essay must not be empty");
  auto length = text::utf8_length(essay);
  if (length > schema.max_essay_chars) {
    throw EssayTooLongError("essay has " + std::to_string(length) + " characters; the limit is " +
                            std::to_string(schema.max_essay_chars));
  }
  EssayRequest req;
  req.spec = PromptComposer(templates).scene_defaults(FunctionScene::EssayAssessment, locale);
  req.user_message = text::render(templates.get(locale).essay_request,
                                  {{"essay", std::string(essay)}, {"schema", essay_output_format(schema)}});
  return req;
}

std::optional<std::pair<std::size_t, std::size_t>> find_json_object(std::string_view s) {
  for (auto start = s.find('{'); start != std::string_view::npos; start = s.find('{', start + 1)) {
    auto end = balanced_end(s, start);
    if (!end) continue;
    auto candidate = s.substr(start, *end - start + 1);
    auto parsed = json::parse(candidate, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return std::pair{start, candidate.size()};
  }
  return std::nullopt;
}

EssayFeedback parse_essay_feedback(std::string_view model_output, std::string_view essay, const EssaySchema& schema) {
  auto located = find_json_object(model_output);
  if (!located) throw EssayValidationError(Code::NoJson, "", "model output contains no JSON object");
  auto object_text = model_output.substr(located->first, located->second);
  if (auto dup = find_duplicate_key(object_text)) {
    throw EssayValidationError(Code::DuplicateKey, *dup, "key '" + *dup + "' occurs more than once");
  }
  const json root = json::parse(object_text);

  EssayFeedback out;
  out.overall_score = require_int(require(root, "overall_score", "overall_score"), "overall_score",
                                  schema.overall_min, schema.overall_max);

  const auto& aspects = require_object(require(root, "aspects", "aspects"), "aspects");
  for (const auto& [key, _] : aspects.items()) {
    bool known = false;
    for (auto a : kAllAspects) known = known || to_string(a) == key;
    if (!known) throw EssayValidationError(Code::UnknownField, "aspects." + key, "unknown aspect 'aspects." + key + "'");
  }
  for (auto a : kAllAspects) {
    const std::string path = "aspects." + std::string(to_string(a));
    const auto& entry = require_object(require(aspects, to_string(a), path), path);
    auto& dst = out.aspect(a);
    dst.rating = require_int(require(entry, "rating", path + ".rating"), path + ".rating", schema.rating_min,
                             schema.rating_max);
    dst.comment = require_string(require(entry, "comment", path + ".comment"), path + ".comment");
    if (text::trim(dst.comment).empty()) {
      throw EssayValidationError(Code::EmptyComment, path + ".comment", "field '" + path + ".comment' is empty");
    }
  }

  const auto& standouts = require(root, "standout_sentences", "standout_sentences");
  if (!standouts.is_array()) {
    throw EssayValidationError(Code::WrongType, "standout_sentences", "field 'standout_sentences' must be an array");
  }
  for (std::size_t i = 0; i < standouts.size(); ++i) {
    const std::string path = "standout_sentences[" + std::to_string(i) + "]";
    const auto& item = require_object(standouts[i], path);
    StandoutSentence s;
    s.sentence = require_string(require(item, "sentence", path + ".sentence"), path + ".sentence");
    s.remark = require_string(require(item, "remark", path + ".remark"), path + ".remark");
    if (s.sentence.empty() || essay.find(s.sentence) == std::string_view::npos) {
      throw EssayValidationError(Code::NotSubstring, path + ".sentence",
                                 "standout sentence '" + path + ".sentence' does not occur verbatim in the essay");
    }
    out.standout_sentences.push_back(std::move(s));
  }
  return out;
}

std::vector<LintWarning> socratic_turn_lint(std::string_view assistant_message) {
  if (text::contains(assistant_message, "?") || text::contains(assistant_message, "\xEF\xBC\x9F")) return {};
  return {LintWarning{std::string(kNoQuestionAsked),
                      "the turn asks no question, so it does not continue the question-and-answer progression"}};
}

std::string_view to_string(CounselingStage stage) {
  switch (stage) {
    case CounselingStage::Exploration: return "Exploration";
    case CounselingStage::Comfort: return "Comfort";
    case CounselingStage::Suggestion: return "Suggestion";
  }
  return "Exploration";
}

CounselingStage tag_counseling_stage(std::span<const Message> history) {
  std::size_t user_turns = 0;
  for (const auto& m : history) {
    if (m.role == Role::User) ++user_turns;
  }
  if (user_turns <= 2) return CounselingStage::Exploration;
  if (user_turns <= 4) return CounselingStage::Comfort;
  return CounselingStage::Suggestion;
}

}  // namespace educhat
