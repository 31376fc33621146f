#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mosaic/rng.hpp"

namespace mosaic {

enum class Category { Formatting, Lexical, Syntactic, Semantic, BusinessLegal };

enum class VerifierKind { Deterministic, Judge };

std::string to_string(Category category);
Category category_from_string(const std::string& name);  // throws InvalidFilterError

std::string to_string(VerifierKind kind);

class InvalidFilterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaskSpec {
  std::string id;
  std::string name;
  std::string description;  // imperative, no trailing period
};

struct ProductSpec {
  std::string id;
  std::string name;
  std::string description;  // one sentence, no trailing period
  std::vector<std::string> keyword_pool;  // exactly 5
};

struct ConstraintSpec {
  std::string id;
  Category category;
  std::string name;
  std::string template_text;
  VerifierKind verifier_kind;
  nlohmann::json verifier_params;
  std::vector<std::string> placeholders;  // declared placeholder names
};

// A constraint rendered for one prompt: placeholders resolved against a
// product and a seeded RNG.
struct ConstraintInstance {
  std::string spec_id;
  std::string rendered_text;
  std::map<std::string, std::vector<std::string>> bindings;
};

struct InstantiationOptions {
  int min_keywords = 2;  // keyword subset size sampled uniformly in [min,max]
  int max_keywords = 3;
};

class Catalog {
 public:
  // The built-in catalog: 4 tasks, 8 products, 21 constraints, 4 tones.
  static const Catalog& builtin();

  // Load from an override file (JSON with tasks/products/constraints/tones);
  // the same invariants are enforced.
  static Catalog load(const std::string& path);

  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  const std::vector<ProductSpec>& products() const { return products_; }
  const std::vector<ConstraintSpec>& constraints() const { return constraints_; }
  const std::vector<std::string>& tones() const { return tones_; }

  const TaskSpec& task(const std::string& id) const;
  const ProductSpec& product(const std::string& id) const;
  const ConstraintSpec& constraint(const std::string& id) const;

  // Full catalog in stable id order, or the subset in one category.
  // A category name outside the five-value enum raises InvalidFilterError.
  std::vector<ConstraintSpec> list_constraints(
      const std::optional<std::string>& category_filter = std::nullopt) const;

  // Binds placeholders for a single constraint. Pure function of
  // (spec, product, rng state).
  ConstraintInstance instantiate_constraint(
      const ConstraintSpec& spec, const ProductSpec& product, Rng& rng,
      const InstantiationOptions& options = {}) const;

  // Binds a whole ordered constraint list for one prompt. Include- and
  // exclude-keyword sets are drawn disjointly from the product's pool when
  // both constraints are present.
  std::vector<ConstraintInstance> instantiate_constraints(
      const std::vector<std::string>& spec_ids, const ProductSpec& product,
      Rng& rng, const InstantiationOptions& options = {}) const;

  // Copy holding only the named constraints; tasks, products and tones are
  // unchanged. For reduced desk-scale pools — cardinality checks are skipped.
  Catalog with_constraints(const std::vector<std::string>& spec_ids) const;

  // Throws CatalogError if any cardinality or placeholder invariant fails.
  void validate() const;

 private:
  std::vector<TaskSpec> tasks_;
  std::vector<ProductSpec> products_;
  std::vector<ConstraintSpec> constraints_;
  std::vector<std::string> tones_;

  friend Catalog make_builtin_catalog();
};

}  // namespace mosaic
