#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "educhat/backend.hpp"
#include "educhat/retrieval.hpp"
#include "educhat/templates.hpp"

namespace educhat {

enum class Category { STEM, SocialScience, Humanities, Others };
enum class Choice { A, B, C, D };

inline constexpr std::array<Category, 4> kAllCategories = {Category::STEM, Category::SocialScience,
                                                           Category::Humanities, Category::Others};

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);
char to_char(Choice c);

struct EvalQuestion {
  std::string id;
  Category category = Category::Others;
  bool hard = false;
  std::string stem_text;
  std::array<std::string, 4> choices;
  Choice answer_key = Choice::A;

  bool operator==(const EvalQuestion&) const = default;
};

class QuestionSchemaError : public std::runtime_error {
 public:
  QuestionSchemaError(const std::string& what, std::size_t line) : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// JSONL, one question per line:
///   {"id": str, "category": "STEM"|"SocialScience"|"Humanities"|"Others", "hard": bool,
///    "question": str, "choices": [str, str, str, str], "answer": "A"|"B"|"C"|"D"}
std::vector<EvalQuestion> parse_questions(std::istream& in);
std::vector<EvalQuestion> load_questions(const std::filesystem::path& path);

/// First standalone letter A-D (case-insensitive) in the output. A letter is standalone when
/// neither neighbour is an ASCII letter or digit, so "(B)", "B." and "答案是C" all qualify.
std::optional<Choice> extract_choice(std::string_view model_output);

struct CategoryTally {
  std::size_t total = 0;
  std::size_t correct = 0;

  bool operator==(const CategoryTally&) const = default;
};

struct EvalReport {
  std::map<Category, double> per_category_accuracy;  // only categories present in the run
  std::map<Category, CategoryTally> per_category;
  double avg = 0.0;                  // over all questions
  std::optional<double> avg_hard;    // over the hard subset; empty when there is none
  std::size_t n_total = 0;
  std::size_t n_hard = 0;
  std::size_t n_correct = 0;
  std::size_t n_correct_hard = 0;
  std::size_t n_unparseable = 0;
  std::size_t n_backend_failures = 0;
  bool retrieval_enabled = false;

  bool operator==(const EvalReport&) const = default;
};

void to_json(nlohmann::json& j, const EvalReport& r);

struct EvalRetrieval {
  SearchProvider* provider = nullptr;
  bool self_check = true;
  std::size_t k = kDefaultRetrievalK;
  std::size_t max_snippet_chars = kDefaultMaxSnippetChars;
};

struct EvalOptions {
  Locale locale = Locale::En;
  std::size_t workers = 4;
  int max_new_tokens = 16;
  std::int64_t deadline_ms = 30'000;
  /// The run aborts once backend failures exceed this fraction of the questions.
  double max_failure_fraction = 0.10;
  const TemplateSet* templates = nullptr;
};

class EvalAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero-shot user message for one question.
std::string format_question(const EvalQuestion& q, Locale locale = Locale::En,
                            const TemplateSet& templates = TemplateSet::builtin());

/// Asks the backend every question at temperature 0 and scores the extracted letter. With
/// retrieval, the question stem is the search query and filtered snippets precede the question.
/// Unparseable answers and backend failures count as incorrect.
EvalReport run_eval(std::span<const EvalQuestion> questions, ChatBackend& backend,
                    const std::optional<EvalRetrieval>& retrieval = std::nullopt, const EvalOptions& options = {});

}  // namespace educhat
