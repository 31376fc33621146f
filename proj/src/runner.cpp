#include "mosaic/runner.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace mosaic {

using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

constexpr const char* kEpoch = "1970-01-01T00:00:00Z";

// Runs job(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& job) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers),
                                              count);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        job(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

json generation_record_to_json(const GenerationRecord& r) {
  return {{"prompt_id", r.prompt_id},     {"model_id", r.model_id},
          {"response_text", r.response_text},
          {"finish_reason", r.finish_reason},
          {"latency_ms", r.latency_ms},   {"attempt_count", r.attempt_count},
          {"created_at", r.created_at},   {"failed", r.failed},
          {"error", r.error}};
}

GenerationRecord generation_record_from_json(const json& j) {
  GenerationRecord r;
  r.prompt_id = j.at("prompt_id");
  r.model_id = j.at("model_id");
  r.response_text = j.at("response_text");
  r.finish_reason = j.value("finish_reason", "");
  r.latency_ms = j.value("latency_ms", 0L);
  r.attempt_count = j.value("attempt_count", 0);
  r.created_at = j.value("created_at", "");
  r.failed = j.value("failed", false);
  r.error = j.value("error", "");
  return r;
}

}  // namespace

void save_generation_records(const std::vector<GenerationRecord>& records,
                             const std::string& path, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records)
    out << generation_record_to_json(r).dump() << '\n';
}

std::vector<GenerationRecord> load_generation_records(const std::string& path) {
  std::vector<GenerationRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(generation_record_from_json(json::parse(line)));
  }
  return records;
}

std::vector<GenerationRecord> run_generation(const DatasetManifest& manifest,
                                             ChatBackend& backend,
                                             const RunConfig& config,
                                             const std::string& log_path) {
  std::set<std::string> completed;
  for (const auto& r : load_generation_records(log_path))
    completed.insert(r.prompt_id);

  std::vector<const Prompt*> pending;
  for (const auto& prompt : manifest.prompts)
    if (!completed.count(prompt.id)) pending.push_back(&prompt);

  std::vector<GenerationRecord> fresh(pending.size());
  parallel_for(pending.size(), config.max_in_flight, [&](std::size_t i) {
    const Prompt& prompt = *pending[i];
    ChatRequest request;
    for (const auto& m : prompt.rendered_messages)
      request.messages.push_back({m.role, m.content});
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.model = config.model_id;

    GenerationRecord record;
    record.prompt_id = prompt.id;
    record.model_id = config.model_id;
    const auto start = std::chrono::steady_clock::now();
    try {
      ChatResponse response = complete_with_retries(
          backend, request, config.retries, 50, &record.attempt_count);
      record.response_text = response.text;
      record.finish_reason = response.finish_reason;
    } catch (const BackendError& e) {
      record.failed = true;
      record.error = e.what();
    }
    const auto end = std::chrono::steady_clock::now();
    record.latency_ms =
        config.deterministic_timestamps
            ? 0
            : std::chrono::duration_cast<std::chrono::milliseconds>(end - start)
                  .count();
    record.created_at = config.deterministic_timestamps ? kEpoch : utc_now();
    fresh[i] = std::move(record);
  });

  if (completed.empty() && !fresh.empty()) {
    bool all_failed = true;
    for (const auto& r : fresh)
      if (!r.failed) all_failed = false;
    if (all_failed)
      throw BackendError("backend unreachable with zero completed work");
  }

  // append in manifest order
  save_generation_records(fresh, log_path, /*append=*/true);
  return load_generation_records(log_path);
}

std::vector<ComplianceRecord> evaluate_response(const GenerationRecord& record,
                                                const Prompt& prompt,
                                                const Catalog& catalog,
                                                ChatBackend& judge_backend,
                                                const JudgeConfig& judge_config) {
  if (record.prompt_id != prompt.id)
    throw IntegrityError("record/prompt mismatch: " + record.prompt_id +
                         " vs " + prompt.id);
  const ProductSpec& product = catalog.product(prompt.product_id);

  std::vector<ComplianceRecord> out;
  out.reserve(prompt.constraints.size());
  for (std::size_t i = 0; i < prompt.constraints.size(); ++i) {
    const ConstraintInstance& inst = prompt.constraints[i];
    const ConstraintSpec& spec = catalog.constraint(inst.spec_id);

    ComplianceRecord cr;
    cr.prompt_id = prompt.id;
    cr.spec_id = inst.spec_id;
    cr.rank = static_cast<int>(i + 1);
    cr.list_size = prompt.list_size;
    cr.method = to_string(spec.verifier_kind);

    if (spec.verifier_kind == VerifierKind::Deterministic) {
      std::vector<std::string> keywords;
      auto kw = inst.bindings.find("kw");
      if (kw != inst.bindings.end()) keywords = kw->second;
      FractionalScore score =
          verify_with_params(record.response_text, spec.verifier_params,
                             keywords);
      cr.fractional = score.value;
      cr.binary = binarize(score);
    } else {
      try {
        FractionalScore score =
            judge_compliance(record.response_text, inst, spec, product,
                             judge_backend, judge_config);
        cr.fractional = score.value;
        cr.binary = binarize(score);
      } catch (const std::runtime_error&) {
        cr.evaluation_failed = true;
      }
    }
    out.push_back(std::move(cr));
  }
  return out;
}

RecordStore evaluate_dataset(const std::vector<GenerationRecord>& records,
                             const DatasetManifest& manifest,
                             const Catalog& catalog, ChatBackend& judge_backend,
                             const EvaluateConfig& config,
                             const std::string& store_path) {
  std::unordered_map<std::string, const Prompt*> prompts;
  for (const auto& prompt : manifest.prompts) prompts[prompt.id] = &prompt;

  RecordStore existing;
  if (!config.force && std::filesystem::exists(store_path))
    existing = load_records(store_path);
  std::set<std::pair<std::string, std::string>> scored;
  for (const auto& r : existing) scored.insert({r.prompt_id, r.spec_id});

  std::vector<const GenerationRecord*> pending;
  for (const auto& record : records) {
    auto it = prompts.find(record.prompt_id);
    if (it == prompts.end())
      throw IntegrityError("generated prompt missing from manifest: " +
                           record.prompt_id);
    if (record.failed) continue;
    bool all_scored = true;
    for (const auto& inst : it->second->constraints)
      if (!scored.count({record.prompt_id, inst.spec_id})) all_scored = false;
    if (!all_scored) pending.push_back(&record);
  }

  std::vector<std::vector<ComplianceRecord>> results(pending.size());
  parallel_for(pending.size(), config.max_in_flight, [&](std::size_t i) {
    const GenerationRecord& record = *pending[i];
    results[i] = evaluate_response(record, *prompts.at(record.prompt_id),
                                   catalog, judge_backend, config.judge);
  });

  RecordStore fresh;
  for (auto& batch : results) {
    for (auto& cr : batch) {
      if (scored.count({cr.prompt_id, cr.spec_id})) continue;
      fresh.push_back(std::move(cr));
    }
  }

  RecordStore all = existing;
  all.insert(all.end(), fresh.begin(), fresh.end());
  save_records(all, store_path);
  return all;
}

}  // namespace mosaic
