#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/backend.hpp"
#include "mosaic/judge.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/promptgen.hpp"

namespace mosaic {

struct GenerationRecord {
  std::string prompt_id;
  std::string model_id;
  std::string response_text;
  std::string finish_reason;
  long latency_ms = 0;
  int attempt_count = 0;
  std::string created_at;  // ISO-8601 UTC
  bool failed = false;     // retry budget exhausted; kept, not dropped
  std::string error;
};

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int max_in_flight = 1;
  int retries = 3;
  double temperature = 1.0;
  int max_tokens = 1024;
  std::string model_id = "mock";
  bool deterministic_timestamps = false;  // fixed created_at/latency for
                                          // byte-stable pipelines
};

// One record per prompt. Prompt ids already present in the log at `log_path`
// are skipped (resume). New records are appended to the log as they finish,
// in manifest order.
std::vector<GenerationRecord> run_generation(const DatasetManifest& manifest,
                                             ChatBackend& backend,
                                             const RunConfig& config,
                                             const std::string& log_path);

// One ComplianceRecord per constraint of the prompt. Deterministic
// constraints never touch the backend; judge failures are flagged.
std::vector<ComplianceRecord> evaluate_response(const GenerationRecord& record,
                                                const Prompt& prompt,
                                                const Catalog& catalog,
                                                ChatBackend& judge_backend,
                                                const JudgeConfig& judge_config = {});

struct EvaluateConfig {
  int max_in_flight = 1;
  bool force = false;  // re-evaluate already-scored (prompt_id, spec_id) pairs
  JudgeConfig judge;
};

// Idempotent dataset evaluation; appends to the record store at store_path.
RecordStore evaluate_dataset(const std::vector<GenerationRecord>& records,
                             const DatasetManifest& manifest,
                             const Catalog& catalog, ChatBackend& judge_backend,
                             const EvaluateConfig& config,
                             const std::string& store_path);

void save_generation_records(const std::vector<GenerationRecord>& records,
                             const std::string& path, bool append = false);
std::vector<GenerationRecord> load_generation_records(const std::string& path);

}  // namespace mosaic
