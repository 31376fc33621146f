#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "mosaic/catalog.hpp"

namespace mosaic {

class InvalidInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShortfallError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Message {
  std::string role;  // system | user | assistant
  std::string content;
};

struct Prompt {
  std::string id;  // content hash of (task, product, ordered rendered texts)
  std::string task_id;
  std::string product_id;
  std::vector<ConstraintInstance> constraints;  // ordered, 1..20, distinct specs
  int list_size = 0;
  std::vector<Message> rendered_messages;
  std::uint64_t seed = 0;
};

using StratumKey = std::tuple<std::string, std::string, int>;  // task, product, size

struct DatasetManifest {
  std::vector<Prompt> prompts;
  std::map<StratumKey, int> strata_counts;
  // (spec_id, list_size, rank) -> count
  std::map<std::tuple<std::string, int, int>, int> rank_histogram;
};

struct GenerationConfig {
  int shuffles_per_combo = 3;
  int max_size = 20;
  std::uint64_t seed = 0;
};

// Builds the role-tagged messages and content id for one prompt.
Prompt assemble_prompt(const TaskSpec& task, const ProductSpec& product,
                       std::vector<ConstraintInstance> constraints,
                       std::uint64_t seed = 0);

// All orderings of a constraint combination. Exhaustive permutations for
// |combo| <= 3; otherwise shuffles_per_combo distinct random shuffles.
std::vector<std::vector<std::string>> enumerate_orderings(
    const std::vector<std::string>& combo, int shuffles_per_combo, Rng& rng);

// Closed-form size of the comprehensive pool:
// n_pairs * [ sum_{k=1..min(3,max)} P(n,k) + sum_{k=4..max} C(n,k)*shuffles ].
std::uint64_t comprehensive_count(int n_constraints, int max_size,
                                  int shuffles_per_combo, int n_pairs);

// Streams every prompt of the comprehensive pool in a deterministic order.
void generate_comprehensive(const Catalog& catalog,
                            const GenerationConfig& config,
                            const std::function<void(Prompt&&)>& sink);

// Largest-remainder allocation of `total` over `num_strata` equal-quota
// strata; the first `total % num_strata` strata in key order get the extra.
std::vector<int> allocate_largest_remainder(int total, int num_strata);

// Stratified sample over the comprehensive stream; per-stratum reservoirs.
DatasetManifest stratified_sample(const Catalog& catalog,
                                  const GenerationConfig& config, int total,
                                  std::uint64_t sample_seed);

// Rebuilds the manifest aggregates (used after loading prompts from disk).
void rebuild_manifest_counts(DatasetManifest& manifest);

struct DistributionReport {
  std::map<std::pair<std::string, int>, int> by_list_size;  // spec x size
  std::map<std::pair<std::string, int>, int> by_rank;       // spec x rank
  std::map<std::pair<std::string, std::string>, int> by_task;
  std::map<std::pair<std::string, std::string>, int> by_product;
};

DistributionReport distribution_report(const DatasetManifest& manifest);

// --- persistence -------------------------------------------------------------

nlohmann::json prompt_to_json(const Prompt& prompt);
Prompt prompt_from_json(const nlohmann::json& j);

void save_dataset(const DatasetManifest& manifest,
                  const std::string& prompts_path,
                  const std::string& manifest_path);
DatasetManifest load_dataset(const std::string& prompts_path);

}  // namespace mosaic
