#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "mosaic/runner.hpp"

using namespace mosaic;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DatasetManifest small_dataset(int total = 32) {
  const Catalog reduced = Catalog::builtin().with_constraints(
      {"keep_sentences_short", "respond_in_json", "use_given_tone",
       "use_positive_language"});
  GenerationConfig config;
  config.max_size = 1;
  config.seed = 13;
  return stratified_sample(reduced, config, total, 4);
}

RunConfig deterministic_config(int workers = 1) {
  RunConfig config;
  config.max_in_flight = workers;
  config.deterministic_timestamps = true;
  config.model_id = "echo";
  return config;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {
    std::remove(path.c_str());
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("run_generation emits one record per prompt, in manifest order") {
  DatasetManifest manifest = small_dataset();
  EchoBackend backend;
  TempFile log("test_runner_log.jsonl");

  auto records = run_generation(manifest, backend, deterministic_config(), log.path);
  REQUIRE(records.size() == manifest.prompts.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].prompt_id == manifest.prompts[i].id);
    CHECK(!records[i].failed);
    CHECK(!records[i].response_text.empty());
    CHECK(records[i].created_at == "1970-01-01T00:00:00Z");
    CHECK(records[i].latency_ms == 0);
  }
}

TEST_CASE("byte-identical logs across runs and worker counts") {
  DatasetManifest manifest = small_dataset();
  EchoBackend backend;

  TempFile a("test_runner_a.jsonl"), b("test_runner_b.jsonl"),
      c("test_runner_c.jsonl");
  run_generation(manifest, backend, deterministic_config(1), a.path);
  run_generation(manifest, backend, deterministic_config(1), b.path);
  run_generation(manifest, backend, deterministic_config(8), c.path);
  CHECK(read_file(a.path) == read_file(b.path));
  CHECK(read_file(a.path) == read_file(c.path));
}

TEST_CASE("resume re-issues exactly the missing prompts") {
  DatasetManifest manifest = small_dataset();
  EchoBackend backend;
  TempFile log("test_runner_resume.jsonl");

  // simulate interruption: keep only the first 10 log lines
  run_generation(manifest, backend, deterministic_config(), log.path);
  const std::string full = read_file(log.path);
  {
    std::istringstream in(full);
    std::ofstream out(log.path, std::ios::trunc);
    std::string line;
    for (int i = 0; i < 10 && std::getline(in, line); ++i) out << line << '\n';
  }

  auto resumed = run_generation(manifest, backend, deterministic_config(), log.path);
  CHECK(resumed.size() == manifest.prompts.size());
  std::set<std::string> ids;
  for (const auto& r : resumed) ids.insert(r.prompt_id);
  CHECK(ids.size() == manifest.prompts.size());
  // the first 10 entries were not regenerated: full log is byte-identical
  CHECK(read_file(log.path) == full);
}

TEST_CASE("total backend failure on a cold start raises") {
  DatasetManifest manifest = small_dataset(8);
  MockBackend backend;
  backend.set_unmatched_policy(MockBackend::UnmatchedPolicy::Error);
  TempFile log("test_runner_dead.jsonl");
  RunConfig config = deterministic_config();
  config.retries = 1;
  CHECK_THROWS_AS(
      (void)run_generation(manifest, backend, config, log.path), BackendError);
}

TEST_CASE("failed prompts are recorded, not dropped") {
  DatasetManifest manifest = small_dataset(8);
  EchoBackend good;
  TempFile log("test_runner_partial.jsonl");
  // complete the first half, then fail the rest
  {
    DatasetManifest head = manifest;
    head.prompts.resize(4);
    run_generation(head, good, deterministic_config(), log.path);
  }
  MockBackend dead;
  dead.set_unmatched_policy(MockBackend::UnmatchedPolicy::Error);
  RunConfig config = deterministic_config();
  config.retries = 1;
  auto records = run_generation(manifest, dead, config, log.path);
  REQUIRE(records.size() == 8);
  int failed = 0;
  for (const auto& r : records)
    if (r.failed) {
      ++failed;
      CHECK(!r.error.empty());
    }
  CHECK(failed == 4);
}

TEST_CASE("evaluate_response scores every constraint of the prompt") {
  const Catalog& catalog = Catalog::builtin();
  DatasetManifest manifest = small_dataset();
  EchoBackend gen;
  TempFile log("test_runner_eval_log.jsonl");
  auto records = run_generation(manifest, gen, deterministic_config(), log.path);

  MockBackend judge;
  judge.set_default_response(R"({"reasoning": "ok", "score": 8})");

  int total_records = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto batch = evaluate_response(records[i], manifest.prompts[i], catalog, judge);
    REQUIRE(batch.size() == manifest.prompts[i].constraints.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      CHECK(batch[j].prompt_id == manifest.prompts[i].id);
      CHECK(batch[j].rank == static_cast<int>(j + 1));
      CHECK(batch[j].list_size == manifest.prompts[i].list_size);
      CHECK((batch[j].method == "Deterministic" || batch[j].method == "Judge"));
      if (batch[j].method == "Judge") {
        CHECK(batch[j].fractional == doctest::Approx(0.8));
        CHECK(batch[j].binary == 1);
      }
    }
    total_records += static_cast<int>(batch.size());
  }
  int slots = 0;
  for (const auto& p : manifest.prompts) slots += p.list_size;
  CHECK(total_records == slots);

  // mismatched prompt/record pairing is an integrity error
  CHECK_THROWS_AS((void)evaluate_response(records[0], manifest.prompts[1],
                                          catalog, judge),
                  IntegrityError);
}

TEST_CASE("judge failures are flagged, not fatal") {
  const Catalog& catalog = Catalog::builtin();
  DatasetManifest manifest = small_dataset();
  EchoBackend gen;
  TempFile log("test_runner_flag_log.jsonl");
  auto records = run_generation(manifest, gen, deterministic_config(), log.path);

  MockBackend judge;
  judge.set_default_response("never a valid verdict");

  // find a prompt with a judge-kind constraint
  bool checked = false;
  for (std::size_t i = 0; i < records.size() && !checked; ++i) {
    const ConstraintSpec& spec =
        catalog.constraint(manifest.prompts[i].constraints[0].spec_id);
    if (spec.verifier_kind != VerifierKind::Judge) continue;
    auto batch = evaluate_response(records[i], manifest.prompts[i], catalog, judge);
    REQUIRE(batch.size() == 1);
    CHECK(batch[0].evaluation_failed);
    checked = true;
  }
  CHECK(checked);
}

TEST_CASE("evaluate_dataset is idempotent and force re-scores") {
  const Catalog& catalog = Catalog::builtin();
  DatasetManifest manifest = small_dataset();
  EchoBackend gen;
  TempFile log("test_runner_ds_log.jsonl");
  TempFile store("test_runner_store.jsonl");
  auto records = run_generation(manifest, gen, deterministic_config(), log.path);

  MockBackend judge;
  judge.set_default_response(R"({"reasoning": "ok", "score": 8})");
  EvaluateConfig config;

  auto first = evaluate_dataset(records, manifest, catalog, judge, config, store.path);
  int slots = 0;
  for (const auto& p : manifest.prompts) slots += p.list_size;
  CHECK(static_cast<int>(first.size()) == slots);

  // second pass adds nothing
  auto second = evaluate_dataset(records, manifest, catalog, judge, config, store.path);
  CHECK(second.size() == first.size());

  // force re-evaluates from scratch
  config.force = true;
  auto forced = evaluate_dataset(records, manifest, catalog, judge, config, store.path);
  CHECK(forced.size() == first.size());

  // a record citing an unknown prompt is an integrity error
  std::vector<GenerationRecord> bogus = records;
  bogus[0].prompt_id = "deadbeefdeadbeef";
  config.force = false;
  CHECK_THROWS_AS((void)evaluate_dataset(bogus, manifest, catalog, judge,
                                         config, store.path),
                  IntegrityError);
}

TEST_CASE("evaluation output is identical across worker counts") {
  const Catalog& catalog = Catalog::builtin();
  DatasetManifest manifest = small_dataset();
  EchoBackend gen;
  TempFile log("test_runner_wk_log.jsonl");
  auto records = run_generation(manifest, gen, deterministic_config(), log.path);

  MockBackend judge;
  judge.set_default_response(R"({"reasoning": "ok", "score": 8})");

  TempFile s1("test_runner_wk1.jsonl"), s8("test_runner_wk8.jsonl");
  EvaluateConfig c1, c8;
  c8.max_in_flight = 8;
  evaluate_dataset(records, manifest, catalog, judge, c1, s1.path);
  evaluate_dataset(records, manifest, catalog, judge, c8, s8.path);
  CHECK(read_file(s1.path) == read_file(s8.path));
}
