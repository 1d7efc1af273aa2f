#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include "educhat/config.hpp"
#include "educhat/dedup.hpp"
#include "educhat/embedding.hpp"
#include "educhat/eval.hpp"
#include "educhat/http_server.hpp"
#include "educhat/mock_backend.hpp"
#include "educhat/prompt.hpp"
#include "educhat/remote_backend.hpp"

using namespace educhat;

namespace {

ChatHttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::unique_ptr<ChatBackend> make_backend(const std::string& endpoint, const std::string& api_key,
                                          const std::string& model, const std::string& mock_reply) {
  if (endpoint == "mock") return std::make_unique<MockBackend>(std::vector<MockRule>{}, mock_reply);
  return std::make_unique<RemoteBackend>(RemoteBackendConfig{endpoint, api_key, model});
}

int cmd_prompt(const std::string& scene_name, const std::string& locale_name) {
  auto scene = scene_from_string(scene_name);
  auto locale = locale_from_string(locale_name);
  if (!scene || !locale) {
    std::cerr << "unknown scene or locale\n";
    return 1;
  }
  std::cout << compose(scene_defaults(*scene, *locale));
  return 0;
}

int cmd_dedup(const PipelineConfig& config, const std::string& provider, const std::string& api_key,
              std::size_t dimension) {
  std::unique_ptr<EmbeddingProvider> embedder;
  if (provider == "stub" || provider == "hashing") {
    embedder = std::make_unique<HashingEmbeddingProvider>(dimension);
  } else {
    embedder = std::make_unique<HttpEmbeddingProvider>(HttpEmbeddingConfig{provider, api_key});
  }
  return run_pipeline(config, *embedder, std::cout, std::cerr);
}

int cmd_eval(const std::string& questions_path, const std::string& backend_endpoint, const std::string& api_key,
             const std::string& model, bool retrieval, bool self_check, const std::string& provider_endpoint,
             const std::string& report_path, EvalOptions options) {
  std::vector<EvalQuestion> questions;
  try {
    questions = load_questions(questions_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  auto backend = make_backend(backend_endpoint, api_key, model, "A");
  std::unique_ptr<SearchProvider> provider;
  std::optional<EvalRetrieval> eval_retrieval;
  if (retrieval) {
    if (provider_endpoint.empty()) {
      std::cerr << "error: --retrieval on requires --provider\n";
      return 1;
    }
    provider = std::make_unique<HttpSearchProvider>(HttpSearchConfig{provider_endpoint, ""});
    eval_retrieval = EvalRetrieval{provider.get(), self_check};
  }
  try {
    auto report = run_eval(questions, *backend, eval_retrieval, options);
    nlohmann::json j = report;
    if (!report_path.empty()) {
      std::ofstream out(report_path);
      out << j.dump(2) << "\n";
      if (!out) {
        std::cerr << "error: cannot write " << report_path << "\n";
        return 1;
      }
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  } catch (const EvalAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_serve(const std::string& config_path, int port_override) {
  ServiceConfig config;
  try {
    if (!config_path.empty()) config = load_service_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (port_override >= 0) config.port = port_override;

  TemplateSet templates = config.template_path.empty() ? TemplateSet::builtin() : TemplateSet::load(config.template_path);
  auto backend = make_backend(config.backend_endpoint, config.backend_api_key, config.backend_model, "OK");
  std::unique_ptr<SearchProvider> search;
  if (!config.provider_endpoint.empty()) {
    search = std::make_unique<HttpSearchProvider>(HttpSearchConfig{config.provider_endpoint, config.provider_api_key});
  }
  FileConversationStore store(config.store_path);
  std::unique_ptr<InteractionLog> log;
  if (!config.export_path.empty()) log = std::make_unique<InteractionLog>(config.export_path);

  ChatService service({backend.get(), search.get(), &store, &templates, log.get(), nullptr}, config.chat);
  ChatHttpServer server(service, HttpServerOptions{32, config.ui_dir});
  int port = server.bind(config.host, config.port);
  spdlog::info("listening on http://{}:{} (backend: {}, retrieval provider: {})", config.host, port,
               config.backend_endpoint, search ? config.provider_endpoint : "none");
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("educhat"));
  CLI::App app{"EduChat service and offline tools"};
  app.require_subcommand(1);

  std::string scene = "GeneralChat", locale = "en";
  auto* prompt = app.add_subcommand("prompt", "Print the default system prompt for a scene");
  prompt->add_option("--scene", scene, "RetrievalQA, EssayAssessment, EmotionalSupport, SocraticTeaching, GeneralChat");
  prompt->add_option("--locale", locale, "en or zh");

  PipelineConfig dedup_config;
  std::string embed_provider = "stub", embed_key;
  std::size_t dimension = 256;
  auto* dedup = app.add_subcommand("dedup", "Remove near-duplicate records from a JSONL dataset");
  dedup->add_option("--input", dedup_config.input, "JSONL with {id, text}")->required();
  dedup->add_option("--output", dedup_config.output, "Kept records")->required();
  dedup->add_option("--report", dedup_config.report, "JSON report")->required();
  dedup->add_option("--threshold", dedup_config.options.threshold, "Cosine similarity threshold")
      ->check(CLI::Range(0.0, 1.0));
  dedup->add_option("--batch-size", dedup_config.options.batch_size)->check(CLI::PositiveNumber);
  dedup->add_option("--workers", dedup_config.options.workers, "0 uses all cores");
  dedup->add_option("--provider", embed_provider, "Embedding endpoint URL, or 'stub' for the local hashing embedder");
  dedup->add_option("--api-key", embed_key);
  dedup->add_option("--dimension", dimension, "Dimension of the hashing provider")->check(CLI::PositiveNumber);

  std::string questions, eval_backend = "mock", eval_key, eval_model, retrieval = "off", eval_provider, report;
  bool self_check = true;
  EvalOptions eval_options;
  auto* eval = app.add_subcommand("eval", "Score a backend on a multiple-choice benchmark");
  eval->add_option("--questions", questions, "JSONL questions")->required();
  eval->add_option("--backend", eval_backend, "Backend endpoint URL or 'mock'");
  eval->add_option("--api-key", eval_key);
  eval->add_option("--model", eval_model);
  eval->add_option("--retrieval", retrieval)->check(CLI::IsMember({"on", "off"}));
  eval->add_option("--self-check", self_check);
  eval->add_option("--provider", eval_provider, "Search provider endpoint");
  eval->add_option("--report", report, "Write the JSON report here");
  eval->add_option("--workers", eval_options.workers)->check(CLI::PositiveNumber);
  eval->add_option("--deadline-ms", eval_options.deadline_ms)->check(CLI::PositiveNumber);

  std::string config_path;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Run the chat HTTP service");
  serve->add_option("--config", config_path, "JSON configuration file");
  serve->add_option("--port", port, "Override the listen port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prompt) return cmd_prompt(scene, locale);
    if (*dedup) return cmd_dedup(dedup_config, embed_provider, embed_key, dimension);
    if (*eval) {
      return cmd_eval(questions, eval_backend, eval_key, eval_model, retrieval == "on", self_check, eval_provider,
                      report, eval_options);
    }
    if (*serve) return cmd_serve(config_path, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
