#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/backend.hpp"
#include "mosaic/judge.hpp"
#include "mosaic/promptgen.hpp"

namespace mosaic {

struct RewriteConfig {
  int n_max = 10;       // max iterations
  int p_max = 3;        // patience: non-improving iterations before stop
  double epsilon = 1e-9;  // minimum delta treated as change
  JudgeConfig judge;
  double generation_temperature = 1.0;
  bool include_numeric_history = true;  // planner sees numeric score history
                                        // alongside the qualitative report
};

enum class EditAction { Rephrase, Split, Merge };

std::string to_string(EditAction action);
EditAction edit_action_from_string(const std::string& name);

struct TrackedConstraint {
  std::string current_text;
  std::set<std::string> origins;  // original spec_ids this text descends from
};

struct EditDecision {
  EditAction action = EditAction::Rephrase;
  std::vector<int> targets;  // 1-based indices into the current list
  std::string instruction;
};

struct EditEvent {
  int iteration = 0;
  EditAction action = EditAction::Rephrase;
  std::vector<int> targets;
  std::string planner_instruction;
  std::vector<TrackedConstraint> before;
  std::vector<TrackedConstraint> after;
  std::map<std::string, int> scores_after;  // per-original binaries
  double global_after = 0.0;
};

struct StepScores {
  std::map<std::string, int> per_original;   // spec_id -> binary
  std::set<std::string> unevaluated;         // judge failures
  double global = 0.0;                       // PA over evaluated originals
};

struct RewriteState {
  TaskSpec task;
  ProductSpec product;
  std::vector<ConstraintInstance> originals;
  std::vector<TrackedConstraint> current;
  std::vector<EditEvent> history;
  int iteration = 0;
  double best_global = 0.0;
  int no_improve_streak = 0;
};

class StepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlannerFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EditArityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionBackends {
  ChatBackend* generator = nullptr;
  ChatBackend* judge = nullptr;
  ChatBackend* planner = nullptr;
  ChatBackend* editor = nullptr;
};

// Prompt identical to promptgen::assemble_prompt, with the current tracked
// texts in place of the originals.
Prompt build_current_prompt(const RewriteState& state);

std::string generate_step(const RewriteState& state, ChatBackend& generator,
                          const RewriteConfig& config);

// Scores every ORIGINAL constraint against the response; edits never change
// the measuring stick.
StepScores evaluate_step(const RewriteState& state, const std::string& response,
                         const Catalog& catalog, ChatBackend& judge_backend,
                         const JudgeConfig& judge_config);

// Qualitative report: per constraint and global, increased / decreased /
// unchanged, with an epsilon deadband. First iteration gets a baseline report.
std::string translate_feedback(const std::optional<StepScores>& prev,
                               const StepScores& cur, double epsilon);

EditDecision plan_step(const RewriteState& state, const std::string& feedback,
                       ChatBackend& planner, const RewriteConfig& config);

std::vector<TrackedConstraint> apply_edit(
    const std::vector<TrackedConstraint>& current, const EditDecision& decision,
    ChatBackend& editor);

bool should_terminate(const RewriteState& state, const RewriteConfig& config);

struct SessionResult {
  RewriteState state;
  std::string status;  // Succeeded | Failed
  // line-delimited event log (one JSON object per stage per iteration)
  std::vector<std::string> transcript;
};

SessionResult run_session(const TaskSpec& task, const ProductSpec& product,
                          std::vector<ConstraintInstance> constraints,
                          const Catalog& catalog, SessionBackends backends,
                          const RewriteConfig& config);

}  // namespace mosaic
