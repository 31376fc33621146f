#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mosaic/promptgen.hpp"

using namespace mosaic;

namespace {

std::vector<ConstraintInstance> plain_instances(
    const std::vector<std::string>& ids) {
  std::vector<ConstraintInstance> out;
  for (const auto& id : ids) out.push_back({id, "Text for " + id, {}});
  return out;
}

// Brute-force count of orderings for one constraint pool, written without
// the library's closed form: enumerate ordered k-sequences for k <= 3 and
// count combinations * shuffles for k >= 4.
std::uint64_t brute_force_per_pair(int n, int max_size, int shuffles) {
  std::uint64_t count = 0;
  // ordered sequences without repetition, sizes 1..min(3, max_size)
  std::vector<int> seq;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  auto recurse = [&](auto&& self, int remaining) -> void {
    if (!seq.empty()) ++count;
    if (remaining == 0) return;
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      used[static_cast<std::size_t>(i)] = true;
      seq.push_back(i);
      self(self, remaining - 1);
      seq.pop_back();
      used[static_cast<std::size_t>(i)] = false;
    }
  };
  recurse(recurse, std::min(3, max_size));

  // subsets of sizes 4..max_size, each contributing `shuffles` orderings
  for (int k = 4; k <= max_size; ++k) {
    std::uint64_t subsets = 0;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
      ++subsets;
      int pos = k - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos)
        --pos;
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
      for (int i = pos + 1; i < k; ++i)
        idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
    }
    count += subsets * static_cast<std::uint64_t>(shuffles);
  }
  return count;
}

}  // namespace

TEST_CASE("assemble_prompt renders the documented message layout") {
  const Catalog& c = Catalog::builtin();
  const TaskSpec& task = c.task("marketing_email");
  const ProductSpec& product = c.product("smartphone");

  auto insts = plain_instances({"a_first", "b_second"});
  insts[0].rendered_text = "First requirement.";
  insts[1].rendered_text = "Second requirement.";
  Prompt p = assemble_prompt(task, product, insts, 99);

  REQUIRE(p.rendered_messages.size() == 2);
  CHECK(p.rendered_messages[0].role == "system");
  CHECK(p.rendered_messages[0].content ==
        "You are a writing assistant. Your task is to Write a marketing "
        "email to promote a given product or service.\n"
        "Ensure your draft complies with all of the following "
        "requirements:\n"
        "1. First requirement.\n"
        "2. Second requirement.");
  CHECK(p.rendered_messages[1].role == "user");
  CHECK(p.rendered_messages[1].content ==
        "Product/Service: " + product.description + ".");
  CHECK(p.list_size == 2);
  CHECK(p.id.size() == 16);
  CHECK(p.seed == 99);

  // id depends on constraint order
  std::swap(insts[0], insts[1]);
  CHECK(assemble_prompt(task, product, insts, 99).id != p.id);
}

TEST_CASE("assemble_prompt input validation") {
  const Catalog& c = Catalog::builtin();
  const TaskSpec& task = c.task("faq_entry");
  const ProductSpec& product = c.product("smartphone");

  CHECK_THROWS_AS(assemble_prompt(task, product, {}, 0), InvalidInputError);
  CHECK_THROWS_AS(
      assemble_prompt(task, product, plain_instances({"x", "y", "x"}), 0),
      InvalidInputError);
  std::vector<std::string> too_many;
  for (int i = 0; i < 21; ++i) too_many.push_back("c" + std::to_string(i));
  CHECK_THROWS_AS(assemble_prompt(task, product, plain_instances(too_many), 0),
                  InvalidInputError);
}

TEST_CASE("enumerate_orderings is exhaustive for small combos") {
  Rng rng(1);
  auto one = enumerate_orderings({"a"}, 3, rng);
  CHECK(one.size() == 1);

  auto two = enumerate_orderings({"b", "a"}, 3, rng);
  REQUIRE(two.size() == 2);
  std::set<std::vector<std::string>> set2(two.begin(), two.end());
  CHECK(set2.count({"a", "b"}));
  CHECK(set2.count({"b", "a"}));

  auto three = enumerate_orderings({"c", "a", "b"}, 3, rng);
  CHECK(three.size() == 6);
  CHECK(std::set<std::vector<std::string>>(three.begin(), three.end()).size() ==
        6);
}

TEST_CASE("enumerate_orderings samples distinct shuffles for large combos") {
  Rng rng(5);
  auto got = enumerate_orderings({"a", "b", "c", "d"}, 5, rng);
  CHECK(got.size() == 5);
  CHECK(std::set<std::vector<std::string>>(got.begin(), got.end()).size() == 5);
  for (const auto& ordering : got) {
    std::set<std::string> members(ordering.begin(), ordering.end());
    CHECK(members == std::set<std::string>({"a", "b", "c", "d"}));
  }

  Rng rng2(5);
  CHECK_THROWS_AS(
      (void)enumerate_orderings({"a", "b", "c", "d"}, 25, rng2),
      InvalidConfigError);
  CHECK_THROWS_AS((void)enumerate_orderings({}, 3, rng2), InvalidInputError);
}

TEST_CASE("comprehensive pool matches the closed form and a brute force") {
  CHECK(comprehensive_count(4, 4, 2, 32) == 1344);
  CHECK(comprehensive_count(4, 4, 2, 1) == brute_force_per_pair(4, 4, 2));
  CHECK(comprehensive_count(6, 5, 3, 1) == brute_force_per_pair(6, 5, 3));
  CHECK(comprehensive_count(5, 3, 7, 1) == brute_force_per_pair(5, 3, 7));

  const Catalog reduced = Catalog::builtin().with_constraints(
      {"keep_sentences_short", "use_custom_variable", "respond_in_json",
       "include_boc_token"});
  GenerationConfig config;
  config.shuffles_per_combo = 2;
  config.max_size = 4;
  config.seed = 11;
  std::uint64_t streamed = 0;
  std::set<std::string> ids;
  generate_comprehensive(reduced, config, [&](Prompt&& p) {
    ++streamed;
    ids.insert(p.id);
    CHECK(p.list_size >= 1);
    CHECK(p.list_size <= 4);
  });
  CHECK(streamed == 1344);
  CHECK(ids.size() == 1344);  // all prompts distinct
}

TEST_CASE("largest-remainder allocation") {
  auto alloc = allocate_largest_remainder(4000, 640);
  REQUIRE(alloc.size() == 640);
  int total = 0, sixes = 0, sevens = 0;
  for (int a : alloc) {
    total += a;
    if (a == 6) ++sixes;
    if (a == 7) ++sevens;
  }
  CHECK(total == 4000);
  CHECK(sixes == 480);
  CHECK(sevens == 160);

  // balance property across arbitrary shapes
  for (int t : {1, 9, 640, 641, 12345}) {
    auto a = allocate_largest_remainder(t, 7);
    int sum = 0;
    auto [lo, hi] = std::minmax_element(a.begin(), a.end());
    for (int v : a) sum += v;
    CHECK(sum == t);
    CHECK(*hi - *lo <= 1);
  }
  CHECK(allocate_largest_remainder(5, 0).empty());
}

TEST_CASE("stratified sample draws from the comprehensive pool") {
  const Catalog reduced = Catalog::builtin().with_constraints(
      {"keep_sentences_short", "use_custom_variable", "respond_in_json"});
  GenerationConfig config;
  config.max_size = 3;
  config.seed = 21;

  // strata: 4 tasks x 8 products x 3 sizes = 96
  DatasetManifest manifest = stratified_sample(reduced, config, 192, 77);
  CHECK(manifest.prompts.size() == 192);
  REQUIRE(manifest.strata_counts.size() == 96);
  for (const auto& [key, count] : manifest.strata_counts) CHECK(count == 2);

  // every sampled prompt must exist verbatim in the comprehensive stream
  std::map<std::string, std::string> pool;  // id -> system message
  generate_comprehensive(reduced, config, [&](Prompt&& p) {
    pool[p.id] = p.rendered_messages[0].content;
  });
  for (const auto& p : manifest.prompts) {
    auto it = pool.find(p.id);
    REQUIRE(it != pool.end());
    CHECK(it->second == p.rendered_messages[0].content);
  }

  // identical inputs, identical sample
  DatasetManifest again = stratified_sample(reduced, config, 192, 77);
  REQUIRE(again.prompts.size() == manifest.prompts.size());
  for (std::size_t i = 0; i < again.prompts.size(); ++i)
    CHECK(again.prompts[i].id == manifest.prompts[i].id);

  // a stratum of size-1 prompts holds only 3 orderings per pair; asking for
  // far more than the pool offers names the starved stratum
  try {
    (void)stratified_sample(reduced, config, 96 * 40, 77);
    FAIL("expected ShortfallError");
  } catch (const ShortfallError& e) {
    CHECK(std::string(e.what()).find("size 1") != std::string::npos);
  }
}

TEST_CASE("dataset persistence round trip") {
  const Catalog reduced = Catalog::builtin().with_constraints(
      {"keep_sentences_short", "use_given_tone", "use_given_keywords"});
  GenerationConfig config;
  config.max_size = 2;
  config.seed = 3;
  DatasetManifest manifest = stratified_sample(reduced, config, 64, 5);

  const std::string prompts_path = "test_promptgen_ds.jsonl";
  const std::string manifest_path = "test_promptgen_mf.json";
  save_dataset(manifest, prompts_path, manifest_path);
  DatasetManifest loaded = load_dataset(prompts_path);
  std::remove(prompts_path.c_str());
  std::remove(manifest_path.c_str());

  REQUIRE(loaded.prompts.size() == manifest.prompts.size());
  for (std::size_t i = 0; i < loaded.prompts.size(); ++i) {
    const Prompt& a = manifest.prompts[i];
    const Prompt& b = loaded.prompts[i];
    CHECK(a.id == b.id);
    CHECK(a.task_id == b.task_id);
    CHECK(a.list_size == b.list_size);
    REQUIRE(a.constraints.size() == b.constraints.size());
    for (std::size_t j = 0; j < a.constraints.size(); ++j) {
      CHECK(a.constraints[j].rendered_text == b.constraints[j].rendered_text);
      CHECK(a.constraints[j].bindings == b.constraints[j].bindings);
    }
    CHECK(a.rendered_messages[0].content == b.rendered_messages[0].content);
  }
  CHECK(loaded.strata_counts == manifest.strata_counts);
  CHECK(loaded.rank_histogram == manifest.rank_histogram);
}

TEST_CASE("rank histogram accounting") {
  const Catalog reduced = Catalog::builtin().with_constraints(
      {"keep_sentences_short", "use_custom_variable"});
  GenerationConfig config;
  config.max_size = 2;
  config.seed = 1;
  DatasetManifest manifest = stratified_sample(reduced, config, 96, 9);

  // sum over the histogram equals total constraint slots
  int slots = 0, histogram_total = 0;
  for (const auto& p : manifest.prompts) slots += p.list_size;
  for (const auto& [key, count] : manifest.rank_histogram)
    histogram_total += count;
  CHECK(slots == histogram_total);

  auto report = distribution_report(manifest);
  int by_rank_total = 0;
  for (const auto& [key, count] : report.by_rank) by_rank_total += count;
  CHECK(by_rank_total == slots);
}
