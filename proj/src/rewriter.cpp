#include "mosaic/rewriter.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mosaic/runner.hpp"
#include "mosaic/verifiers.hpp"

namespace mosaic {

using nlohmann::json;

std::string to_string(EditAction action) {
  switch (action) {
    case EditAction::Rephrase: return "rephrase";
    case EditAction::Split: return "split";
    case EditAction::Merge: return "merge";
  }
  throw std::runtime_error("bad edit action");
}

EditAction edit_action_from_string(const std::string& name) {
  if (name == "rephrase") return EditAction::Rephrase;
  if (name == "split") return EditAction::Split;
  if (name == "merge") return EditAction::Merge;
  throw PlannerFormatError("unknown edit action: " + name);
}

Prompt build_current_prompt(const RewriteState& state) {
  // Tracked texts stand in for the originals; spec ids are synthetic since a
  // split/merge no longer maps 1:1 onto catalog entries.
  std::vector<ConstraintInstance> instances;
  instances.reserve(state.current.size());
  for (std::size_t i = 0; i < state.current.size(); ++i) {
    ConstraintInstance inst;
    inst.spec_id = "tracked_" + std::to_string(i + 1);
    inst.rendered_text = state.current[i].current_text;
    instances.push_back(std::move(inst));
  }
  return assemble_prompt(state.task, state.product, std::move(instances));
}

std::string generate_step(const RewriteState& state, ChatBackend& generator,
                          const RewriteConfig& config) {
  Prompt prompt = build_current_prompt(state);
  ChatRequest request;
  for (const auto& m : prompt.rendered_messages)
    request.messages.push_back({m.role, m.content});
  request.temperature = config.generation_temperature;
  try {
    return complete_with_retries(generator, request).text;
  } catch (const BackendError& e) {
    throw StepError(std::string("generation failed: ") + e.what());
  }
}

StepScores evaluate_step(const RewriteState& state, const std::string& response,
                         const Catalog& catalog, ChatBackend& judge_backend,
                         const JudgeConfig& judge_config) {
  if (response.empty()) throw StepError("empty response");
  StepScores scores;
  int followed = 0, evaluated = 0;
  for (const auto& inst : state.originals) {
    const ConstraintSpec& spec = catalog.constraint(inst.spec_id);
    if (spec.verifier_kind == VerifierKind::Deterministic) {
      std::vector<std::string> keywords;
      auto kw = inst.bindings.find("kw");
      if (kw != inst.bindings.end()) keywords = kw->second;
      const int bin =
          binarize(verify_with_params(response, spec.verifier_params, keywords));
      scores.per_original[inst.spec_id] = bin;
      followed += bin;
      ++evaluated;
    } else {
      try {
        const int bin = binarize(judge_compliance(
            response, inst, spec, state.product, judge_backend, judge_config));
        scores.per_original[inst.spec_id] = bin;
        followed += bin;
        ++evaluated;
      } catch (const std::runtime_error&) {
        scores.unevaluated.insert(inst.spec_id);
      }
    }
  }
  scores.global = evaluated == 0
                      ? 0.0
                      : static_cast<double>(followed) / evaluated;
  return scores;
}

namespace {

std::string trend(double prev, double cur, double epsilon) {
  if (cur - prev > epsilon) return "increased";
  if (prev - cur > epsilon) return "decreased";
  return "unchanged";
}

}  // namespace

std::string translate_feedback(const std::optional<StepScores>& prev,
                               const StepScores& cur, double epsilon) {
  std::ostringstream out;
  if (!prev) {
    out << "Baseline compliance report.\n";
    for (const auto& [spec_id, bin] : cur.per_original)
      out << "- " << spec_id << ": " << (bin ? "followed" : "not followed")
          << "\n";
    out << "Global compliance score: " << cur.global << "\n";
    return out.str();
  }
  if (prev->per_original.size() != cur.per_original.size())
    throw IntegrityError("feedback key sets differ in size");
  out << "Compliance change report.\n";
  for (const auto& [spec_id, bin] : cur.per_original) {
    auto it = prev->per_original.find(spec_id);
    if (it == prev->per_original.end())
      throw IntegrityError("feedback key mismatch: " + spec_id);
    out << "- " << spec_id << ": "
        << trend(it->second, bin, epsilon) << " (now "
        << (bin ? "followed" : "not followed") << ")\n";
  }
  out << "Global compliance score: " << trend(prev->global, cur.global, epsilon)
      << " (now " << cur.global << ")\n";
  return out.str();
}

namespace {

std::string render_history(const RewriteState& state, bool numeric) {
  std::ostringstream out;
  if (state.history.empty()) return "(no edits yet)\n";
  for (const auto& event : state.history) {
    out << "Iteration " << event.iteration << ": " << to_string(event.action)
        << " on [";
    for (std::size_t i = 0; i < event.targets.size(); ++i)
      out << (i ? ", " : "") << event.targets[i];
    out << "] — " << event.planner_instruction;
    if (numeric) out << " (global score after: " << event.global_after << ")";
    out << "\n";
  }
  return out.str();
}

EditDecision parse_decision(const std::string& raw, std::size_t list_size) {
  json parsed = json::parse(raw, nullptr, false);
  if (parsed.is_discarded()) {
    // try a fenced or embedded object
    std::size_t open = raw.find('{');
    std::size_t close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos ||
        close <= open)
      throw PlannerFormatError("planner output is not JSON: " + raw);
    parsed = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (parsed.is_discarded())
      throw PlannerFormatError("planner output is not JSON: " + raw);
  }
  if (!parsed.is_object() || !parsed.contains("action") ||
      !parsed.contains("targets"))
    throw PlannerFormatError("planner output missing action/targets: " + raw);

  EditDecision decision;
  decision.action = edit_action_from_string(parsed.at("action"));
  decision.targets = parsed.at("targets").get<std::vector<int>>();
  decision.instruction = parsed.value("instruction", "");

  if (decision.targets.empty())
    throw PlannerFormatError("planner decision names no targets");
  std::set<int> unique(decision.targets.begin(), decision.targets.end());
  if (unique.size() != decision.targets.size())
    throw PlannerFormatError("planner decision repeats a target");
  for (int t : decision.targets) {
    if (t < 1 || static_cast<std::size_t>(t) > list_size)
      throw PlannerFormatError("target index out of range: " +
                               std::to_string(t));
  }
  if (decision.action != EditAction::Merge && decision.targets.size() != 1)
    throw PlannerFormatError("rephrase/split take exactly one target");
  if (decision.action == EditAction::Merge && decision.targets.size() < 2)
    throw PlannerFormatError("merge needs at least two targets");
  return decision;
}

}  // namespace

EditDecision plan_step(const RewriteState& state, const std::string& feedback,
                       ChatBackend& planner, const RewriteConfig& config) {
  std::ostringstream user;
  user << "You refine a list of writing constraints to improve a model's "
          "compliance.\n\n";
  user << "### Edit history ###\n"
       << render_history(state, config.include_numeric_history) << "\n";
  user << "### Current constraints ###\n";
  for (std::size_t i = 0; i < state.current.size(); ++i)
    user << (i + 1) << ". " << state.current[i].current_text << "\n";
  user << "\n### Feedback ###\n" << feedback << "\n";
  user << "### Available actions ###\n"
          "- rephrase: change the wording of one constraint\n"
          "- split: divide a long constraint into multiple short ones\n"
          "- merge: combine multiple short constraints into a long one\n\n";
  user << "Decide which constraint to edit and what action to take. Respond "
          "only with a JSON object with keys \"action\" (rephrase|split|"
          "merge), \"targets\" (list of 1-based indices) and \"instruction\" "
          "(a detailed instruction for the editor).";

  ChatRequest request;
  request.messages = {{"system",
                       "You are the strategic planner of a constraint "
                       "rewriting workflow."},
                      {"user", user.str()}};

  std::string raw;
  try {
    raw = complete_with_retries(planner, request).text;
  } catch (const BackendError& e) {
    throw StepError(std::string("planner failed: ") + e.what());
  }
  try {
    return parse_decision(raw, state.current.size());
  } catch (const PlannerFormatError&) {
    // one re-ask with a format reminder
    ChatRequest retry = request;
    retry.messages.push_back({"assistant", raw});
    retry.messages.push_back(
        {"user",
         "Your previous reply could not be parsed. Respond only with a JSON "
         "object {\"action\": ..., \"targets\": [...], \"instruction\": ...}."});
    std::string second;
    try {
      second = complete_with_retries(planner, retry).text;
    } catch (const BackendError& e) {
      throw StepError(std::string("planner failed: ") + e.what());
    }
    return parse_decision(second, state.current.size());
  }
}

namespace {

std::vector<std::string> parse_edited_texts(const std::string& raw) {
  json parsed = json::parse(raw, nullptr, false);
  if (parsed.is_discarded()) {
    std::size_t open = raw.find('{');
    std::size_t close = raw.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open)
      parsed = json::parse(raw.substr(open, close - open + 1), nullptr, false);
  }
  if (parsed.is_discarded() || !parsed.is_object() ||
      !parsed.contains("constraints") || !parsed["constraints"].is_array())
    throw EditArityError("editor output is not {\"constraints\": [...]}: " +
                         raw);
  return parsed["constraints"].get<std::vector<std::string>>();
}

}  // namespace

std::vector<TrackedConstraint> apply_edit(
    const std::vector<TrackedConstraint>& current, const EditDecision& decision,
    ChatBackend& editor) {
  std::ostringstream user;
  user << "Rewrite the following constraint list.\n\n### Constraints ###\n";
  for (std::size_t i = 0; i < current.size(); ++i)
    user << (i + 1) << ". " << current[i].current_text << "\n";
  user << "\n### Edit to perform ###\nAction: " << to_string(decision.action)
       << "\nTargets:";
  for (int t : decision.targets) user << ' ' << t;
  user << "\nInstruction: " << decision.instruction << "\n\n";
  user << "Return only a JSON object {\"constraints\": [...]} holding the "
          "replacement text(s) for the targeted constraint(s) only";
  if (decision.action == EditAction::Rephrase)
    user << " (exactly one rewritten constraint)";
  if (decision.action == EditAction::Split)
    user << " (two or more shorter constraints)";
  if (decision.action == EditAction::Merge)
    user << " (exactly one combined constraint)";
  user << ".";

  ChatRequest request;
  request.messages = {{"system",
                       "You are the constraint editing agent of a rewriting "
                       "workflow."},
                      {"user", user.str()}};
  std::string raw;
  try {
    raw = complete_with_retries(editor, request).text;
  } catch (const BackendError& e) {
    throw StepError(std::string("editor failed: ") + e.what());
  }
  std::vector<std::string> texts = parse_edited_texts(raw);

  switch (decision.action) {
    case EditAction::Rephrase:
      if (texts.size() != 1)
        throw EditArityError("rephrase must yield exactly one constraint");
      break;
    case EditAction::Split:
      if (texts.size() < 2)
        throw EditArityError("split must yield at least two constraints");
      break;
    case EditAction::Merge:
      if (texts.size() != 1)
        throw EditArityError("merge must yield exactly one constraint");
      break;
  }

  // provenance: rephrase keeps origins; split children inherit the full set;
  // merge unions the targets' origins
  std::set<std::size_t> targeted;
  for (int t : decision.targets)
    targeted.insert(static_cast<std::size_t>(t - 1));

  std::set<std::string> merged_origins;
  for (std::size_t i : targeted)
    merged_origins.insert(current[i].origins.begin(),
                          current[i].origins.end());

  std::vector<TrackedConstraint> next;
  const std::size_t first_target = *targeted.begin();
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (!targeted.count(i)) {
      next.push_back(current[i]);
      continue;
    }
    if (i != first_target) continue;  // merge collapses onto the first slot
    if (decision.action == EditAction::Merge) {
      next.push_back({texts.front(), merged_origins});
    } else {
      for (const auto& text : texts)
        next.push_back({text, current[i].origins});
    }
  }
  return next;
}

bool should_terminate(const RewriteState& state, const RewriteConfig& config) {
  return state.iteration >= config.n_max ||
         state.no_improve_streak >= config.p_max;
}

SessionResult run_session(const TaskSpec& task, const ProductSpec& product,
                          std::vector<ConstraintInstance> constraints,
                          const Catalog& catalog, SessionBackends backends,
                          const RewriteConfig& config) {
  if (!backends.generator || !backends.judge || !backends.planner ||
      !backends.editor)
    throw StepError("all four session backends must be provided");

  SessionResult result;
  RewriteState& state = result.state;
  state.task = task;
  state.product = product;
  state.originals = std::move(constraints);
  for (const auto& inst : state.originals)
    state.current.push_back({inst.rendered_text, {inst.spec_id}});
  result.status = "Succeeded";

  auto log = [&](const std::string& stage, json payload) {
    payload["iteration"] = state.iteration + 1;
    payload["stage"] = stage;
    result.transcript.push_back(payload.dump());
  };

  std::optional<StepScores> prev_scores;
  int consecutive_aborts = 0;

  while (!should_terminate(state, config)) {
    try {
      Prompt prompt = build_current_prompt(state);
      const std::string response =
          generate_step(state, *backends.generator, config);
      log("generate", {{"prompt_id", prompt.id},
                       {"system", prompt.rendered_messages[0].content},
                       {"response", response}});

      StepScores scores = evaluate_step(state, response, catalog,
                                        *backends.judge, config.judge);
      log("evaluate", {{"per_original", scores.per_original},
                       {"global", scores.global},
                       {"unevaluated", scores.unevaluated}});

      const std::string feedback =
          translate_feedback(prev_scores, scores, config.epsilon);
      log("translate", {{"report", feedback}});

      ++state.iteration;
      if (scores.global > state.best_global + config.epsilon) {
        state.best_global = scores.global;
        state.no_improve_streak = 0;
      } else {
        ++state.no_improve_streak;
      }
      prev_scores = scores;
      consecutive_aborts = 0;

      if (should_terminate(state, config)) break;

      EditDecision decision =
          plan_step(state, feedback, *backends.planner, config);
      log("plan", {{"action", to_string(decision.action)},
                   {"targets", decision.targets},
                   {"instruction", decision.instruction}});

      EditEvent event;
      event.iteration = state.iteration;
      event.action = decision.action;
      event.targets = decision.targets;
      event.planner_instruction = decision.instruction;
      event.before = state.current;
      state.current = apply_edit(state.current, decision, *backends.editor);
      event.after = state.current;
      event.scores_after = scores.per_original;
      event.global_after = scores.global;
      state.history.push_back(event);

      json after = json::array();
      for (const auto& tc : state.current) after.push_back(tc.current_text);
      log("edit", {{"constraints_after", after}});
    } catch (const std::runtime_error& e) {
      // aborted iteration: state unchanged, only the abort counter moves
      log("error", {{"message", e.what()}});
      if (++consecutive_aborts >= 3) {
        result.status = "Failed";
        break;
      }
    }
  }
  return result;
}

}  // namespace mosaic
