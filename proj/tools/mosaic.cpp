#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "mosaic/catalog.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/promptgen.hpp"
#include "mosaic/rewriter.hpp"
#include "mosaic/runner.hpp"

namespace {

using namespace mosaic;

// Exit codes, also documented in the README:
// 0 ok, 2 config, 3 validation, 4 integrity, 5 backend.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kValidationError = 3;
constexpr int kIntegrityError = 4;
constexpr int kBackendError = 5;

struct BackendOptions {
  std::string kind = "mock";  // mock | echo | http
  std::string base_url;
  std::string model;
  std::string api_key_env = "MOSAIC_API_KEY";
  std::string script_path;  // mock script file
  std::string default_response;
};

void add_backend_flags(CLI::App* cmd, BackendOptions& opts,
                       const std::string& prefix) {
  cmd->add_option("--" + prefix + "-backend", opts.kind,
                  "Backend kind: mock, echo or http")
      ->check(CLI::IsMember({"mock", "echo", "http"}));
  cmd->add_option("--" + prefix + "-url", opts.base_url,
                  "Base URL for the http backend");
  cmd->add_option("--" + prefix + "-model", opts.model, "Model name");
  cmd->add_option("--" + prefix + "-key-env", opts.api_key_env,
                  "Environment variable holding the API key");
  cmd->add_option("--" + prefix + "-script", opts.script_path,
                  "Mock script file (JSONL fingerprint/response records)");
}

std::shared_ptr<ChatBackend> make_backend(const BackendOptions& opts) {
  if (opts.kind == "echo") return std::make_shared<EchoBackend>();
  if (opts.kind == "mock") {
    std::shared_ptr<MockBackend> mock =
        opts.script_path.empty()
            ? std::make_shared<MockBackend>()
            : MockBackend::from_script_file(opts.script_path);
    if (!opts.default_response.empty())
      mock->set_default_response(opts.default_response);
    return mock;
  }
  if (opts.base_url.empty())
    throw InvalidConfigError("http backend needs --*-url");
  HttpBackendConfig config;
  config.base_url = opts.base_url;
  config.model = opts.model;
  if (const char* key = std::getenv(opts.api_key_env.c_str()))
    config.api_key = key;
  return std::make_shared<HttpBackend>(config);
}

void print_distribution(const DatasetManifest& manifest) {
  const DistributionReport report = distribution_report(manifest);
  std::map<std::string, int> per_spec;
  for (const auto& [key, count] : report.by_list_size)
    per_spec[key.first] += count;
  std::cout << "Constraint appearances:\n";
  for (const auto& [spec_id, count] : per_spec)
    std::cout << "  " << spec_id << ": " << count << "\n";
}

int cmd_generate(int total, std::uint64_t seed, int max_size, int shuffles,
                 const std::string& out_path, const std::string& manifest_path) {
  GenerationConfig config{shuffles, max_size, seed};
  DatasetManifest manifest =
      stratified_sample(Catalog::builtin(), config, total, seed);
  save_dataset(manifest, out_path, manifest_path);
  std::cout << "Wrote " << manifest.prompts.size() << " prompts to " << out_path
            << "\n";
  std::cout << "Strata: " << manifest.strata_counts.size() << "\n";
  print_distribution(manifest);
  return kOk;
}

int cmd_run(const std::string& dataset_path, const std::string& log_path,
            const BackendOptions& backend_opts, RunConfig run_config) {
  DatasetManifest manifest = load_dataset(dataset_path);
  auto backend = make_backend(backend_opts);
  auto records = run_generation(manifest, *backend, run_config, log_path);
  int failed = 0;
  for (const auto& r : records)
    if (r.failed) ++failed;
  std::cout << "Generation log holds " << records.size() << " records ("
            << failed << " failed)\n";
  return kOk;
}

int cmd_evaluate(const std::string& dataset_path, const std::string& log_path,
                 const std::string& records_path, BackendOptions judge_opts,
                 EvaluateConfig config) {
  DatasetManifest manifest = load_dataset(dataset_path);
  auto generation = load_generation_records(log_path);
  if (judge_opts.kind == "mock" && judge_opts.default_response.empty())
    judge_opts.default_response =
        R"json({"reasoning": "scripted default", "score": 8})json";
  auto judge = make_backend(judge_opts);
  RecordStore store = evaluate_dataset(generation, manifest,
                                       Catalog::builtin(), *judge, config,
                                       records_path);
  std::cout << "Record store holds " << store.size() << " compliance records\n";
  return kOk;
}

int cmd_metrics(const std::string& records_path, double r_min, double alpha,
                const std::string& out_dir) {
  RecordStore store = load_records(records_path);
  MetricsReport report =
      compute_report(store, Catalog::builtin(), r_min, alpha);
  std::cout << "Mean PA: " << report.pa_mean << "\n";
  std::cout << "SCC per constraint:\n";
  for (const auto& [spec_id, rate] : report.scc)
    std::cout << "  " << spec_id << ": " << rate << "\n";
  std::cout << "SCC per category:\n";
  for (const auto& [cat, rate] : report.scc_by_category)
    std::cout << "  " << cat << ": " << rate << "\n";
  std::cout << "Significant correlations (|r| > " << r_min << ", p < " << alpha
            << "): " << report.correlations.size() << "\n";
  for (const auto& e : report.correlations)
    std::cout << "  " << e.spec_i << " x " << e.spec_j << ": r=" << e.pearson_r
              << " p=" << e.p_value << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (const auto& path :
         write_report_files(report, store, Catalog::builtin(), out_dir))
      std::cout << "wrote " << path << "\n";
  }
  return kOk;
}

int cmd_report(const std::string& records_path, double r_min, double alpha,
               const std::string& out_dir) {
  RecordStore store = load_records(records_path);
  MetricsReport report =
      compute_report(store, Catalog::builtin(), r_min, alpha);
  std::filesystem::create_directories(out_dir);
  for (const auto& path :
       write_report_files(report, store, Catalog::builtin(), out_dir))
    std::cout << "wrote " << path << "\n";
  return kOk;
}

int cmd_refine(const std::string& task_id, const std::string& product_id,
               const std::vector<std::string>& constraint_ids,
               std::uint64_t seed, RewriteConfig config,
               BackendOptions gen_opts, BackendOptions judge_opts,
               BackendOptions planner_opts, BackendOptions editor_opts,
               const std::string& transcript_path) {
  const Catalog& catalog = Catalog::builtin();
  const TaskSpec& task = catalog.task(task_id);
  const ProductSpec& product = catalog.product(product_id);
  Rng rng(seed);
  auto instances =
      catalog.instantiate_constraints(constraint_ids, product, rng);

  if (judge_opts.kind == "mock" && judge_opts.default_response.empty())
    judge_opts.default_response =
        R"json({"reasoning": "scripted default", "score": 8})json";
  if (planner_opts.kind == "mock" && planner_opts.default_response.empty())
    planner_opts.default_response =
        R"json({"action": "rephrase", "targets": [1], "instruction": "Rephrase the constraint for clarity."})json";
  if (editor_opts.kind == "mock" && editor_opts.default_response.empty())
    editor_opts.default_response =
        R"json({"constraints": ["(constraint rewritten for clarity)"]})json";

  auto generator = make_backend(gen_opts);
  auto judge = make_backend(judge_opts);
  auto planner = make_backend(planner_opts);
  auto editor = make_backend(editor_opts);

  SessionBackends backends{generator.get(), judge.get(), planner.get(),
                           editor.get()};
  SessionResult result =
      run_session(task, product, std::move(instances), catalog, backends,
                  config);

  if (!transcript_path.empty()) {
    std::ofstream out(transcript_path);
    for (const auto& line : result.transcript) out << line << '\n';
  }
  std::cout << "Session " << result.status << " after "
            << result.state.iteration << " iterations; best global score "
            << result.state.best_global << "\n";
  std::cout << "Final constraints:\n";
  for (const auto& tc : result.state.current)
    std::cout << "- " << tc.current_text << "\n";
  return result.status == "Succeeded" ? kOk : kBackendError;
}

int cmd_validate_catalog(const std::string& path) {
  if (path.empty()) {
    Catalog::builtin().validate();
    std::cout << "built-in catalog OK\n";
  } else {
    Catalog::load(path).validate();
    std::cout << path << " OK\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modular instruction-compliance benchmark toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate",
                                 "Sample a stratified prompt dataset");
  int total = 4000, max_size = 20, shuffles = 3;
  std::uint64_t seed = 0;
  std::string dataset_path = "dataset.jsonl";
  std::string manifest_path = "manifest.json";
  gen->add_option("--total", total, "Number of prompts to sample");
  gen->add_option("--seed", seed, "Generation/sampling seed");
  gen->add_option("--max-size", max_size, "Largest constraint list size");
  gen->add_option("--shuffles", shuffles, "Random shuffles per combination "
                                          "for sizes > 3");
  gen->add_option("--out", dataset_path, "Output prompt file (JSONL)");
  gen->add_option("--manifest", manifest_path, "Output manifest summary");

  // run
  auto* run = app.add_subcommand("run", "Generate responses for a dataset");
  std::string log_path = "generations.jsonl";
  BackendOptions gen_backend;
  RunConfig run_config;
  run->add_option("--dataset", dataset_path, "Prompt file")->required();
  run->add_option("--log", log_path, "Generation log (resumable)");
  run->add_option("--workers", run_config.max_in_flight, "Max in-flight calls");
  run->add_option("--retries", run_config.retries, "Retry budget per prompt");
  run->add_option("--temperature", run_config.temperature,
                  "Sampling temperature");
  run->add_option("--max-tokens", run_config.max_tokens, "Max output tokens");
  run->add_option("--model-id", run_config.model_id, "Model id for the log");
  run->add_flag("--deterministic", run_config.deterministic_timestamps,
                "Fixed timestamps/latency for byte-stable output");
  add_backend_flags(run, gen_backend, "gen");

  // evaluate
  auto* eval = app.add_subcommand("evaluate",
                                  "Score responses against their constraints");
  std::string records_path = "records.jsonl";
  BackendOptions judge_backend;
  EvaluateConfig eval_config;
  eval->add_option("--dataset", dataset_path, "Prompt file")->required();
  eval->add_option("--log", log_path, "Generation log")->required();
  eval->add_option("--records", records_path, "Compliance record store");
  eval->add_option("--workers", eval_config.max_in_flight,
                   "Max in-flight judge calls");
  eval->add_flag("--force", eval_config.force, "Re-evaluate scored pairs");
  add_backend_flags(eval, judge_backend, "judge");

  // metrics
  auto* met = app.add_subcommand("metrics", "Compute compliance metrics");
  double r_min = 0.2, alpha = 0.05;
  std::string out_dir;
  met->add_option("--records", records_path, "Compliance record store")
      ->required();
  met->add_option("--r-min", r_min, "Correlation magnitude threshold");
  met->add_option("--alpha", alpha, "p-value threshold");
  met->add_option("--out-dir", out_dir, "Also write report files here");

  // report
  auto* rep = app.add_subcommand("report", "Emit CSV/Markdown report files");
  std::string report_dir = "report";
  rep->add_option("--records", records_path, "Compliance record store")
      ->required();
  rep->add_option("--r-min", r_min, "Correlation magnitude threshold");
  rep->add_option("--alpha", alpha, "p-value threshold");
  rep->add_option("--out-dir", report_dir, "Report directory");

  // refine
  auto* ref = app.add_subcommand("refine",
                                 "Run a constraint-rewriting session");
  std::string task_id = "marketing_email";
  std::string product_id = "smartphone";
  std::vector<std::string> constraint_ids;
  RewriteConfig rewrite_config;
  std::string transcript_path = "transcript.jsonl";
  BackendOptions ref_gen, ref_judge, ref_planner, ref_editor;
  ref->add_option("--task", task_id, "Task id");
  ref->add_option("--product", product_id, "Product id");
  ref->add_option("--constraints", constraint_ids,
                  "Constraint spec ids (ordered)")
      ->delimiter(',');
  ref->add_option("--seed", seed, "Instantiation seed");
  ref->add_option("--n-max", rewrite_config.n_max, "Max iterations");
  ref->add_option("--p-max", rewrite_config.p_max, "Patience");
  ref->add_option("--epsilon", rewrite_config.epsilon,
                  "Minimum score delta treated as change");
  ref->add_option("--transcript", transcript_path, "Transcript output path");
  add_backend_flags(ref, ref_gen, "gen");
  add_backend_flags(ref, ref_judge, "judge");
  add_backend_flags(ref, ref_planner, "planner");
  add_backend_flags(ref, ref_editor, "editor");

  // validate-catalog
  auto* val = app.add_subcommand("validate-catalog",
                                 "Check catalog invariants");
  std::string catalog_path;
  val->add_option("--catalog", catalog_path,
                  "Catalog override file (defaults to built-in)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_generate(total, seed, max_size, shuffles, dataset_path,
                          manifest_path);
    if (run->parsed())
      return cmd_run(dataset_path, log_path, gen_backend, run_config);
    if (eval->parsed())
      return cmd_evaluate(dataset_path, log_path, records_path, judge_backend,
                          eval_config);
    if (met->parsed()) return cmd_metrics(records_path, r_min, alpha, out_dir);
    if (rep->parsed())
      return cmd_report(records_path, r_min, alpha, report_dir);
    if (ref->parsed()) {
      if (constraint_ids.empty())
        constraint_ids = {"keep_body_short", "include_boc_token",
                          "use_given_tone"};
      return cmd_refine(task_id, product_id, constraint_ids, seed,
                        rewrite_config, ref_gen, ref_judge, ref_planner,
                        ref_editor, transcript_path);
    }
    if (val->parsed()) return cmd_validate_catalog(catalog_path);
  } catch (const InvalidConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ShortfallError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return kIntegrityError;
  } catch (const InvalidInputError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const InvalidFilterError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const CatalogError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationError;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kBackendError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
