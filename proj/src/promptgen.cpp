#include "mosaic/promptgen.hpp"

#include <algorithm>
#include <fstream>

namespace mosaic {

namespace {

using nlohmann::json;

std::uint64_t saturating_factorial(int k) {
  std::uint64_t f = 1;
  for (int i = 2; i <= k; ++i) {
    if (f > UINT64_MAX / static_cast<std::uint64_t>(i)) return UINT64_MAX;
    f *= static_cast<std::uint64_t>(i);
  }
  return f;
}

std::uint64_t permutations_count(int n, int k) {
  std::uint64_t p = 1;
  for (int i = 0; i < k; ++i) p *= static_cast<std::uint64_t>(n - i);
  return p;
}

std::uint64_t combinations_count(int n, int k) {
  if (k > n) return 0;
  std::uint64_t c = 1;
  for (int i = 1; i <= k; ++i) {
    c = c * static_cast<std::uint64_t>(n - k + i) /
        static_cast<std::uint64_t>(i);
  }
  return c;
}

std::string ordering_key(const std::vector<std::string>& ordering) {
  std::string key;
  for (const auto& id : ordering) {
    key += id;
    key += '\x1e';
  }
  return key;
}

}  // namespace

Prompt assemble_prompt(const TaskSpec& task, const ProductSpec& product,
                       std::vector<ConstraintInstance> constraints,
                       std::uint64_t seed) {
  if (constraints.empty())
    throw InvalidInputError("prompt needs at least one constraint");
  if (constraints.size() > 20)
    throw InvalidInputError("prompt may hold at most 20 constraints");
  std::set<std::string> seen;
  for (const auto& inst : constraints) {
    if (!seen.insert(inst.spec_id).second)
      throw InvalidInputError("duplicate constraint spec: " + inst.spec_id);
  }

  Prompt prompt;
  prompt.task_id = task.id;
  prompt.product_id = product.id;
  prompt.list_size = static_cast<int>(constraints.size());
  prompt.seed = seed;

  std::string system = "You are a writing assistant. Your task is to " +
                       task.description +
                       ".\nEnsure your draft complies with all of the "
                       "following requirements:\n";
  std::string id_material = task.id + '\x1f' + product.id + '\x1f';
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    if (i) system += '\n';
    system += std::to_string(i + 1) + ". " + constraints[i].rendered_text;
    id_material += constraints[i].rendered_text;
    id_material += '\x1e';
  }
  prompt.rendered_messages = {
      {"system", system},
      {"user", "Product/Service: " + product.description + "."}};
  prompt.id = hash_hex(fnv1a64(id_material));
  prompt.constraints = std::move(constraints);
  return prompt;
}

std::vector<std::vector<std::string>> enumerate_orderings(
    const std::vector<std::string>& combo, int shuffles_per_combo, Rng& rng) {
  const int k = static_cast<int>(combo.size());
  if (k < 1 || k > 20)
    throw InvalidInputError("combination size must be in [1,20]");
  std::vector<std::vector<std::string>> orderings;
  if (k <= 3) {
    std::vector<std::string> perm = combo;
    std::sort(perm.begin(), perm.end());
    do {
      orderings.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return orderings;
  }

  if (static_cast<std::uint64_t>(shuffles_per_combo) > saturating_factorial(k))
    throw InvalidConfigError("shuffles_per_combo exceeds |combo|!");

  std::set<std::string> seen;
  while (orderings.size() < static_cast<std::size_t>(shuffles_per_combo)) {
    std::vector<std::string> shuffled = combo;
    rng.shuffle(shuffled);
    if (seen.insert(ordering_key(shuffled)).second)
      orderings.push_back(std::move(shuffled));
  }
  return orderings;
}

std::uint64_t comprehensive_count(int n_constraints, int max_size,
                                  int shuffles_per_combo, int n_pairs) {
  std::uint64_t per_pair = 0;
  for (int k = 1; k <= std::min(3, max_size); ++k)
    per_pair += permutations_count(n_constraints, k);
  for (int k = 4; k <= max_size; ++k)
    per_pair += combinations_count(n_constraints, k) *
                static_cast<std::uint64_t>(shuffles_per_combo);
  return per_pair * static_cast<std::uint64_t>(n_pairs);
}

namespace {

// Streams every (task, product, ordered spec-id list) of the comprehensive
// pool without materializing prompts. Order is deterministic: tasks and
// products in catalog order, sizes ascending, combinations in lexicographic
// index order, orderings as produced by enumerate_orderings.
void enumerate_pool(
    const Catalog& catalog, const GenerationConfig& config,
    const std::function<void(const TaskSpec&, const ProductSpec&,
                             const std::vector<std::string>&)>& sink) {
  const int n = static_cast<int>(catalog.constraints().size());
  const int max_size = std::min(config.max_size, n);
  const Rng base(config.seed);

  for (const auto& task : catalog.tasks()) {
    for (const auto& product : catalog.products()) {
      for (int k = 1; k <= max_size; ++k) {
        std::vector<int> idx(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
        while (true) {
          std::vector<std::string> combo;
          combo.reserve(static_cast<std::size_t>(k));
          std::string combo_label = task.id + '|' + product.id + '|';
          for (int i : idx) {
            combo.push_back(catalog.constraints()[static_cast<std::size_t>(i)].id);
            combo_label += combo.back();
            combo_label += ',';
          }
          Rng combo_rng = base.fork(combo_label);
          for (auto& ordering :
               enumerate_orderings(combo, config.shuffles_per_combo, combo_rng)) {
            sink(task, product, ordering);
          }
          // advance combination indices
          int pos = k - 1;
          while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos)
            --pos;
          if (pos < 0) break;
          ++idx[static_cast<std::size_t>(pos)];
          for (int i = pos + 1; i < k; ++i)
            idx[static_cast<std::size_t>(i)] =
                idx[static_cast<std::size_t>(i - 1)] + 1;
        }
      }
    }
  }
}

Prompt materialize(const Catalog& catalog, const GenerationConfig& config,
                   const TaskSpec& task, const ProductSpec& product,
                   const std::vector<std::string>& ordering) {
  const std::uint64_t prompt_seed =
      fnv1a64(task.id + '\x1f' + product.id + '\x1f' + ordering_key(ordering),
              config.seed ^ 0x9E3779B97F4A7C15ULL);
  Rng rng(prompt_seed);
  auto instances = catalog.instantiate_constraints(ordering, product, rng);
  return assemble_prompt(task, product, std::move(instances), prompt_seed);
}

}  // namespace

void generate_comprehensive(const Catalog& catalog,
                            const GenerationConfig& config,
                            const std::function<void(Prompt&&)>& sink) {
  enumerate_pool(catalog, config,
                 [&](const TaskSpec& task, const ProductSpec& product,
                     const std::vector<std::string>& ordering) {
                   sink(materialize(catalog, config, task, product, ordering));
                 });
}

std::vector<int> allocate_largest_remainder(int total, int num_strata) {
  if (num_strata <= 0) return {};
  const int base = total / num_strata;
  const int extra = total % num_strata;
  std::vector<int> alloc(static_cast<std::size_t>(num_strata), base);
  for (int i = 0; i < extra; ++i) ++alloc[static_cast<std::size_t>(i)];
  return alloc;
}

DatasetManifest stratified_sample(const Catalog& catalog,
                                  const GenerationConfig& config, int total,
                                  std::uint64_t sample_seed) {
  const int n = static_cast<int>(catalog.constraints().size());
  const int max_size = std::min(config.max_size, n);

  // strata in key order: (task_id, product_id, size)
  std::vector<StratumKey> keys;
  for (const auto& task : catalog.tasks())
    for (const auto& product : catalog.products())
      for (int k = 1; k <= max_size; ++k)
        keys.emplace_back(task.id, product.id, k);
  std::sort(keys.begin(), keys.end());

  std::vector<int> alloc =
      allocate_largest_remainder(total, static_cast<int>(keys.size()));
  std::map<StratumKey, std::size_t> stratum_index;
  for (std::size_t i = 0; i < keys.size(); ++i) stratum_index[keys[i]] = i;

  struct Candidate {
    std::string task_id;
    std::string product_id;
    std::vector<std::string> ordering;
  };
  std::vector<std::vector<Candidate>> reservoirs(keys.size());
  std::vector<std::uint64_t> seen(keys.size(), 0);

  Rng sample_rng(sample_seed);
  enumerate_pool(catalog, config,
                 [&](const TaskSpec& task, const ProductSpec& product,
                     const std::vector<std::string>& ordering) {
                   const StratumKey key{task.id, product.id,
                                        static_cast<int>(ordering.size())};
                   const std::size_t s = stratum_index.at(key);
                   const auto cap = static_cast<std::size_t>(alloc[s]);
                   ++seen[s];
                   if (cap == 0) return;
                   if (reservoirs[s].size() < cap) {
                     reservoirs[s].push_back({task.id, product.id, ordering});
                   } else {
                     const std::uint64_t j = sample_rng.uniform_below(seen[s]);
                     if (j < cap)
                       reservoirs[s][static_cast<std::size_t>(j)] = {
                           task.id, product.id, ordering};
                   }
                 });

  DatasetManifest manifest;
  for (std::size_t s = 0; s < keys.size(); ++s) {
    if (reservoirs[s].size() < static_cast<std::size_t>(alloc[s])) {
      const auto& [t, p, k] = keys[s];
      throw ShortfallError("stratum (" + t + ", " + p + ", size " +
                           std::to_string(k) + ") holds " +
                           std::to_string(seen[s]) + " prompts, needs " +
                           std::to_string(alloc[s]));
    }
    for (const auto& cand : reservoirs[s]) {
      manifest.prompts.push_back(materialize(catalog, config,
                                             catalog.task(cand.task_id),
                                             catalog.product(cand.product_id),
                                             cand.ordering));
    }
  }
  rebuild_manifest_counts(manifest);
  return manifest;
}

void rebuild_manifest_counts(DatasetManifest& manifest) {
  manifest.strata_counts.clear();
  manifest.rank_histogram.clear();
  for (const auto& prompt : manifest.prompts) {
    manifest.strata_counts[{prompt.task_id, prompt.product_id,
                            prompt.list_size}]++;
    for (std::size_t i = 0; i < prompt.constraints.size(); ++i) {
      manifest.rank_histogram[{prompt.constraints[i].spec_id,
                               prompt.list_size,
                               static_cast<int>(i + 1)}]++;
    }
  }
}

DistributionReport distribution_report(const DatasetManifest& manifest) {
  DistributionReport report;
  for (const auto& prompt : manifest.prompts) {
    for (std::size_t i = 0; i < prompt.constraints.size(); ++i) {
      const auto& spec_id = prompt.constraints[i].spec_id;
      report.by_list_size[{spec_id, prompt.list_size}]++;
      report.by_rank[{spec_id, static_cast<int>(i + 1)}]++;
      report.by_task[{spec_id, prompt.task_id}]++;
      report.by_product[{spec_id, prompt.product_id}]++;
    }
  }
  return report;
}

json prompt_to_json(const Prompt& prompt) {
  json constraints = json::array();
  for (const auto& inst : prompt.constraints) {
    constraints.push_back({{"spec_id", inst.spec_id},
                           {"rendered_text", inst.rendered_text},
                           {"bindings", inst.bindings}});
  }
  json messages = json::array();
  for (const auto& m : prompt.rendered_messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"id", prompt.id},
          {"task_id", prompt.task_id},
          {"product_id", prompt.product_id},
          {"constraints", constraints},
          {"list_size", prompt.list_size},
          {"messages", messages},
          {"seed", prompt.seed}};
}

Prompt prompt_from_json(const json& j) {
  Prompt prompt;
  prompt.id = j.at("id");
  prompt.task_id = j.at("task_id");
  prompt.product_id = j.at("product_id");
  prompt.list_size = j.at("list_size");
  prompt.seed = j.at("seed");
  for (const auto& cj : j.at("constraints")) {
    ConstraintInstance inst;
    inst.spec_id = cj.at("spec_id");
    inst.rendered_text = cj.at("rendered_text");
    inst.bindings = cj.value(
        "bindings", std::map<std::string, std::vector<std::string>>{});
    prompt.constraints.push_back(std::move(inst));
  }
  for (const auto& mj : j.at("messages"))
    prompt.rendered_messages.push_back({mj.at("role"), mj.at("content")});
  return prompt;
}

void save_dataset(const DatasetManifest& manifest,
                  const std::string& prompts_path,
                  const std::string& manifest_path) {
  std::ofstream out(prompts_path);
  if (!out) throw std::runtime_error("cannot write " + prompts_path);
  for (const auto& prompt : manifest.prompts)
    out << prompt_to_json(prompt).dump() << '\n';

  json strata = json::array();
  for (const auto& [key, count] : manifest.strata_counts) {
    strata.push_back({{"task_id", std::get<0>(key)},
                      {"product_id", std::get<1>(key)},
                      {"list_size", std::get<2>(key)},
                      {"count", count}});
  }
  json ranks = json::array();
  for (const auto& [key, count] : manifest.rank_histogram) {
    ranks.push_back({{"spec_id", std::get<0>(key)},
                     {"list_size", std::get<1>(key)},
                     {"rank", std::get<2>(key)},
                     {"count", count}});
  }
  json summary = {{"num_prompts", manifest.prompts.size()},
                  {"strata_counts", strata},
                  {"rank_histogram", ranks}};
  std::ofstream mout(manifest_path);
  if (!mout) throw std::runtime_error("cannot write " + manifest_path);
  mout << summary.dump(2) << '\n';
}

DatasetManifest load_dataset(const std::string& prompts_path) {
  std::ifstream in(prompts_path);
  if (!in) throw std::runtime_error("cannot open " + prompts_path);
  DatasetManifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    manifest.prompts.push_back(prompt_from_json(json::parse(line)));
  }
  rebuild_manifest_counts(manifest);
  return manifest;
}

}  // namespace mosaic
