#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/backend.hpp"
#include "mosaic/catalog.hpp"
#include "mosaic/verifiers.hpp"

namespace mosaic {

struct Rubric {
  std::string name;
  // may contain {tone} / {product_description}
  std::string description_template;
};

struct JudgeVerdict {
  int score = 0;  // 0..10
  std::string reasoning;
  std::string raw;
};

class InvalidBindingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VerdictParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VerdictRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JudgeUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The 9 judge rubrics for Semantic / Business-Legal / positive-language
// constraints.
const std::vector<Rubric>& judge_rubrics();
const Rubric& rubric_by_name(const std::string& name);

const std::string& judge_system_prompt();
const std::string& judge_user_template();

// Assembles the judge request. `bindings` must resolve every placeholder in
// the rubric text ("tone", "product_description").
ChatRequest build_judge_prompt(const std::string& passage, const Rubric& rubric,
                               const std::map<std::string, std::string>& bindings);

// Extracts the first parseable {"reasoning":..., "score":...} object, either
// directly or inside a fenced code block. Score outside [0,10] is rejected.
JudgeVerdict parse_verdict(const std::string& raw);

struct JudgeConfig {
  int transport_attempts = 3;
  int backoff_ms = 50;
  double temperature = 0.0;
  std::string model;
};

// Scores one judge-kind constraint: verdict.score / 10.
FractionalScore judge_compliance(const std::string& passage,
                                 const ConstraintInstance& constraint,
                                 const ConstraintSpec& spec,
                                 const ProductSpec& product,
                                 ChatBackend& backend,
                                 const JudgeConfig& config = {});

}  // namespace mosaic
