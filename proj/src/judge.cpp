#include "mosaic/judge.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace mosaic {

using nlohmann::json;

const std::vector<Rubric>& judge_rubrics() {
  static const std::vector<Rubric> rubrics = {
      {"Positive language",
       "The given passage uses positive and empowering language (e.g., "
       "\"opportunity\", \"benefit\", \"simplify\", etc.) and avoids negative "
       "or fear-based terms (e.g., \"problem\", \"risk\", \"failure\", "
       "etc.)."},
      {"Specific tone",
       "The given passage maintains a single, consistent, {tone} tone "
       "throughout the entire context."},
      {"Inverted pyramid principle",
       "The given passage presents the most critical piece of information "
       "(e.g., the core answer, main announcement, key takeaway, etc.) in the "
       "description {product_description}, before supporting details or "
       "secondary context."},
      {"Internal contradictions",
       "The given passage does not contain any internal contradictions. All "
       "stated facts, arguments, and data points are consistent with each "
       "other from start to finish."},
      {"Supporting evidence",
       "The given passage avoids making unsupported assertions and provides "
       "a reason or piece of evidence within the text for every significant "
       "claim, benefit or conclusion."},
      {"Communication purpose",
       "The given passage has a clear purpose of communication and directly "
       "addresses the primary underlying question of the target audience "
       "(e.g., \"How will this help me?\", \"What do I need to know?\", \"Is "
       "my problem solved?\", etc.)."},
      {"Precise language",
       "The given passage uses precision and unambiguous language. It avoids "
       "vague terms or phrases that could be misinterpreted by the target "
       "audience. All instructions, descriptions or conclusions are explicit "
       "and clear in the given passage."},
      {"Accurate product information",
       "The given passage only contains accurate product names, features, "
       "and numerical data (e.g., prices, percentages, etc.) that can be "
       "verified against the product description {product_description}."},
      {"Substantiated superlatives",
       "If the passage contains superlatives (e.g., best, greatest, etc.) "
       "they are substantiated by verifiable sources. Citations and links "
       "are also provided as necessary. If no superlatives are used (i.e. "
       "when no claim is made), no substantiation for claims need to be "
       "provided."},
  };
  return rubrics;
}

const Rubric& rubric_by_name(const std::string& name) {
  for (const auto& r : judge_rubrics())
    if (r.name == name) return r;
  throw InvalidBindingError("unknown rubric: " + name);
}

const std::string& judge_system_prompt() {
  static const std::string prompt =
      "You are an expert writing coach acting as a fair and strict judge. "
      "Your task is to evaluate a given passage based on a provided rubric.";
  return prompt;
}

const std::string& judge_user_template() {
  static const std::string tmpl =
      "### Passage ###\n"
      "{passage}\n"
      "\n"
      "### Rubric ###\n"
      "Evaluate the given passage on the following criterion on a scale of 0 "
      "to 10:\n"
      "{rubric_name}: {rubric_description} (0 = completely disagree, 2 = "
      "somewhat disagree, 5 = neutral, 8 = somewhat agree, 10 = completely "
      "agree).\n"
      "\n"
      "### Instructions ###\n"
      "Provide your output only in a JSON format with the keys \"reasoning\" "
      "and \"score\".";
  return tmpl;
}

namespace {

void substitute(std::string& text, const std::string& placeholder,
                const std::string& value) {
  std::size_t pos;
  while ((pos = text.find(placeholder)) != std::string::npos)
    text.replace(pos, placeholder.size(), value);
}

std::string resolve_rubric(const Rubric& rubric,
                           const std::map<std::string, std::string>& bindings) {
  std::string text = rubric.description_template;
  for (const char* key : {"tone", "product_description"}) {
    const std::string placeholder = std::string("{") + key + "}";
    if (text.find(placeholder) == std::string::npos) continue;
    auto it = bindings.find(key);
    if (it == bindings.end())
      throw InvalidBindingError("rubric '" + rubric.name +
                                "' needs binding: " + key);
    substitute(text, placeholder, it->second);
  }
  return text;
}

}  // namespace

ChatRequest build_judge_prompt(
    const std::string& passage, const Rubric& rubric,
    const std::map<std::string, std::string>& bindings) {
  std::string user = judge_user_template();
  substitute(user, "{passage}", passage);
  substitute(user, "{rubric_name}", rubric.name);
  substitute(user, "{rubric_description}", resolve_rubric(rubric, bindings));

  ChatRequest request;
  request.messages = {{"system", judge_system_prompt()}, {"user", user}};
  return request;
}

namespace {

// Candidate JSON payloads: whole text, any fenced block, first {...} span.
std::vector<std::string> json_candidates(const std::string& raw) {
  std::vector<std::string> candidates;
  candidates.push_back(raw);
  std::size_t pos = 0;
  while ((pos = raw.find("```", pos)) != std::string::npos) {
    std::size_t start = raw.find('\n', pos);
    if (start == std::string::npos) break;
    std::size_t end = raw.find("```", start);
    if (end == std::string::npos) break;
    candidates.push_back(raw.substr(start + 1, end - start - 1));
    pos = end + 3;
  }
  std::size_t open = raw.find('{');
  std::size_t close = raw.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open)
    candidates.push_back(raw.substr(open, close - open + 1));
  return candidates;
}

}  // namespace

JudgeVerdict parse_verdict(const std::string& raw) {
  bool saw_out_of_range = false;
  for (const auto& candidate : json_candidates(raw)) {
    json parsed = json::parse(candidate, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    if (!parsed.contains("score") || !parsed.contains("reasoning")) continue;
    if (!parsed["score"].is_number()) continue;
    const double score = parsed["score"].get<double>();
    if (score < 0 || score > 10 || score != std::floor(score)) {
      saw_out_of_range = true;
      continue;
    }
    JudgeVerdict verdict;
    verdict.score = static_cast<int>(score);
    verdict.reasoning = parsed["reasoning"].is_string()
                            ? parsed["reasoning"].get<std::string>()
                            : parsed["reasoning"].dump();
    verdict.raw = raw;
    return verdict;
  }
  if (saw_out_of_range)
    throw VerdictRangeError("judge score outside [0,10] in: " + raw);
  throw VerdictParseError("no parseable verdict object in: " + raw);
}

FractionalScore judge_compliance(const std::string& passage,
                                 const ConstraintInstance& constraint,
                                 const ConstraintSpec& spec,
                                 const ProductSpec& product,
                                 ChatBackend& backend,
                                 const JudgeConfig& config) {
  if (spec.verifier_kind != VerifierKind::Judge)
    throw InvalidBindingError("constraint " + spec.id + " is not judge-kind");

  std::map<std::string, std::string> bindings;
  bindings["product_description"] = product.description;
  auto tone_it = constraint.bindings.find("SelectedTone");
  if (tone_it != constraint.bindings.end() && !tone_it->second.empty())
    bindings["tone"] = tone_it->second.front();

  const Rubric& rubric =
      rubric_by_name(spec.verifier_params.at("rubric").get<std::string>());
  ChatRequest request = build_judge_prompt(passage, rubric, bindings);
  request.temperature = config.temperature;
  request.model = config.model;

  ChatResponse response;
  try {
    response = complete_with_retries(backend, request,
                                     config.transport_attempts,
                                     config.backoff_ms);
  } catch (const BackendError& e) {
    throw JudgeUnavailableError(std::string("judge backend failed: ") +
                                e.what());
  }

  try {
    JudgeVerdict verdict = parse_verdict(response.text);
    return {verdict.score / 10.0, verdict.reasoning};
  } catch (const std::runtime_error&) {
    // one re-ask with a format reminder
    ChatRequest retry = request;
    retry.messages.push_back({"assistant", response.text});
    retry.messages.push_back(
        {"user",
         "Your previous reply could not be parsed. Respond only with a JSON "
         "object with the keys \"reasoning\" and \"score\" (integer 0-10)."});
    ChatResponse second;
    try {
      second = complete_with_retries(backend, retry, config.transport_attempts,
                                     config.backoff_ms);
    } catch (const BackendError& e) {
      throw JudgeUnavailableError(std::string("judge backend failed: ") +
                                  e.what());
    }
    JudgeVerdict verdict = parse_verdict(second.text);
    return {verdict.score / 10.0, verdict.reasoning};
  }
}

}  // namespace mosaic
