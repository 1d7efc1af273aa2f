#include "educhat/eval.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "educhat/parallel.hpp"
#include "educhat/prompt.hpp"
#include "educhat/text.hpp"

namespace educhat {

namespace {

bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

EvalQuestion parse_question(const nlohmann::json& j, std::size_t line_no) {
  auto fail = [&](const std::string& why) {
    return QuestionSchemaError("line " + std::to_string(line_no) + ": " + why, line_no);
  };
  if (!j.is_object()) throw fail("question must be a JSON object");
  auto str_field = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
      throw fail(std::string("field '") + key + "' must be a non-empty string");
    }
    return j[key].get<std::string>();
  };
  EvalQuestion q;
  q.id = str_field("id");
  auto category = category_from_string(str_field("category"));
  if (!category) throw fail("unknown category '" + j["category"].get<std::string>() + "'");
  q.category = *category;
  if (j.contains("hard")) {
    if (!j["hard"].is_boolean()) throw fail("field 'hard' must be a boolean");
    q.hard = j["hard"].get<bool>();
  }
  q.stem_text = str_field("question");
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].size() != 4) {
    throw fail("field 'choices' must be an array of exactly 4 strings");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j["choices"][i].is_string()) throw fail("field 'choices' must be an array of exactly 4 strings");
    q.choices[i] = j["choices"][i].get<std::string>();
  }
  auto answer = str_field("answer");
  if (answer.size() != 1 || answer[0] < 'A' || answer[0] > 'D') throw fail("field 'answer' must be one of A, B, C, D");
  q.answer_key = static_cast<Choice>(answer[0] - 'A');
  return q;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::STEM: return "STEM";
    case Category::SocialScience: return "SocialScience";
    case Category::Humanities: return "Humanities";
    case Category::Others: return "Others";
  }
  return "Others";
}

std::optional<Category> category_from_string(std::string_view s) {
  for (auto c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

char to_char(Choice c) { return static_cast<char>('A' + static_cast<int>(c)); }

std::vector<EvalQuestion> parse_questions(std::istream& in) {
  std::vector<EvalQuestion> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw QuestionSchemaError("line " + std::to_string(line_no) + ": malformed JSON", line_no);
    auto q = parse_question(j, line_no);
    if (!ids.insert(q.id).second) {
      throw QuestionSchemaError("line " + std::to_string(line_no) + ": duplicate question id '" + q.id + "'", line_no);
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<EvalQuestion> load_questions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open question file " + path.string());
  return parse_questions(in);
}

std::optional<Choice> extract_choice(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    char upper = (c >= 'a' && c <= 'd') ? static_cast<char>(c - 'a' + 'A') : c;
    if (upper < 'A' || upper > 'D') continue;
    bool left_ok = i == 0 || !is_ascii_alnum(s[i - 1]);
    bool right_ok = i + 1 == s.size() || !is_ascii_alnum(s[i + 1]);
    if (left_ok && right_ok) return static_cast<Choice>(upper - 'A');
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json acc = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [c, a] : r.per_category_accuracy) acc[std::string(to_string(c))] = a;
  for (const auto& [c, t] : r.per_category) {
    counts[std::string(to_string(c))] = {{"total", t.total}, {"correct", t.correct}};
  }
  j = nlohmann::json{{"per_category_accuracy", acc},
                     {"per_category_counts", counts},
                     {"avg", r.avg},
                     {"avg_hard", r.avg_hard ? nlohmann::json(*r.avg_hard) : nlohmann::json(nullptr)},
                     {"n_total", r.n_total},
                     {"n_hard", r.n_hard},
                     {"n_correct", r.n_correct},
                     {"n_correct_hard", r.n_correct_hard},
                     {"n_unparseable", r.n_unparseable},
                     {"n_backend_failures", r.n_backend_failures},
                     {"retrieval_enabled", r.retrieval_enabled}};
}

std::string format_question(const EvalQuestion& q, Locale locale, const TemplateSet& templates) {
  std::string choices;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) choices += '\n';
    choices += static_cast<char>('A' + i);
    choices += ". ";
    choices += q.choices[i];
  }
  return text::render(templates.get(locale).eval_question, {{"question", q.stem_text}, {"choices", choices}});
}

EvalReport run_eval(std::span<const EvalQuestion> questions, ChatBackend& backend,
                    const std::optional<EvalRetrieval>& retrieval, const EvalOptions& options) {
  if (questions.empty()) throw std::invalid_argument("evaluation needs at least one question");
  if (retrieval && retrieval->provider == nullptr) throw std::invalid_argument("retrieval requires a search provider");
  const auto& templates = options.templates ? *options.templates : TemplateSet::builtin();
  const PromptComposer composer(templates);
  const auto scene = retrieval ? FunctionScene::RetrievalQA : FunctionScene::GeneralChat;
  auto spec = composer.scene_defaults(scene, options.locale);
  if (retrieval) spec.tools.set(kSelfCheck, retrieval->self_check);
  const auto system_prompt = composer.compose(spec);

  enum class Outcome { Correct, Wrong, Unparseable, Failed };
  std::vector<Outcome> outcomes(questions.size(), Outcome::Failed);
  const auto too_many = [&](std::size_t failed) {
    return static_cast<double>(failed) > options.max_failure_fraction * static_cast<double>(questions.size());
  };
  std::atomic<std::size_t> failures{0};

  parallel_for(questions.size(), options.workers, [&](std::size_t i) {
    const auto& q = questions[i];
    std::vector<Message> history{Message{"q-" + q.id, Role::User, format_question(q, options.locale, templates), 0}};
    std::vector<Message> messages = history;
    if (retrieval) {
      auto found = retrieve(q.stem_text, *retrieval->provider, retrieval->k, retrieval->max_snippet_chars);
      SelfCheckOptions sc;
      sc.locale = options.locale;
      sc.deadline_ms = options.deadline_ms;
      sc.templates = &templates;
      sc.max_concurrency = 1;
      auto kept = filter_snippets(q.stem_text, found.snippets, backend, retrieval->self_check, sc);
      messages = inject(kept, history, options.locale, templates);
    }
    BackendRequest req{system_prompt, std::move(messages), {}};
    req.params.temperature = 0.0;
    req.params.max_new_tokens = options.max_new_tokens;
    req.params.deadline_ms = options.deadline_ms;
    req.params.locale = options.locale;
    try {
      auto reply = backend.generate(req);
      auto choice = extract_choice(reply.content);
      if (!choice) {
        outcomes[i] = Outcome::Unparseable;
      } else {
        outcomes[i] = *choice == q.answer_key ? Outcome::Correct : Outcome::Wrong;
      }
    } catch (const BackendError& e) {
      outcomes[i] = Outcome::Failed;
      spdlog::warn("backend failed on question {}: {}", q.id, e.what());
      if (too_many(failures.fetch_add(1) + 1)) {
        throw EvalAborted("backend failures exceeded " + std::to_string(options.max_failure_fraction * 100.0) +
                          "% of " + std::to_string(questions.size()) + " questions");
      }
    }
  });

  EvalReport report;
  report.retrieval_enabled = retrieval.has_value();
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& q = questions[i];
    const bool correct = outcomes[i] == Outcome::Correct;
    auto& tally = report.per_category[q.category];
    ++tally.total;
    ++report.n_total;
    if (correct) {
      ++tally.correct;
      ++report.n_correct;
    }
    if (q.hard) {
      ++report.n_hard;
      if (correct) ++report.n_correct_hard;
    }
    if (outcomes[i] == Outcome::Unparseable) ++report.n_unparseable;
    if (outcomes[i] == Outcome::Failed) ++report.n_backend_failures;
  }
  for (const auto& [c, t] : report.per_category) {
    report.per_category_accuracy[c] = static_cast<double>(t.correct) / static_cast<double>(t.total);
  }
  report.avg = static_cast<double>(report.n_correct) / static_cast<double>(report.n_total);
  if (report.n_hard > 0) report.avg_hard = static_cast<double>(report.n_correct_hard) / static_cast<double>(report.n_hard);
  return report;
}

}  // namespace educhat
