#include "mosaic/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

namespace mosaic {

namespace {

using nlohmann::json;

const char* kTonePool[] = {
    "Empathetic and apologetic",
    "Formal and authoritative",
    "Enthusiastic and inspiring",
    "Neutral and objective",
};

constexpr const char* kTonePlaceholder = "<SelectedTone>";
constexpr const char* kIncludeKwPlaceholder = "<kw1, kw2, ..>";
constexpr const char* kExcludeKwPlaceholder = "<{kw1}, {kw2}, ..>";

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void replace_once(std::string& text, const std::string& needle,
                  const std::string& value) {
  auto pos = text.find(needle);
  if (pos == std::string::npos) {
    throw CatalogError("placeholder not found in template: " + needle);
  }
  text.replace(pos, needle.size(), value);
}

}  // namespace

std::string to_string(Category category) {
  switch (category) {
    case Category::Formatting: return "Formatting";
    case Category::Lexical: return "Lexical";
    case Category::Syntactic: return "Syntactic";
    case Category::Semantic: return "Semantic";
    case Category::BusinessLegal: return "BusinessLegal";
  }
  throw CatalogError("bad category value");
}

Category category_from_string(const std::string& name) {
  if (name == "Formatting") return Category::Formatting;
  if (name == "Lexical") return Category::Lexical;
  if (name == "Syntactic") return Category::Syntactic;
  if (name == "Semantic") return Category::Semantic;
  if (name == "BusinessLegal") return Category::BusinessLegal;
  throw InvalidFilterError("unknown constraint category: " + name);
}

std::string to_string(VerifierKind kind) {
  return kind == VerifierKind::Deterministic ? "Deterministic" : "Judge";
}

Catalog make_builtin_catalog() {
  Catalog c;

  c.tasks_ = {
      {"marketing_email", "Marketing email",
       "Write a marketing email to promote a given product or service"},
      {"product_review", "Product review",
       "Write a detailed description and review of a given product or service"},
      {"faq_entry", "FAQ Entry",
       "Write a clear and concise entry for a product's Frequently Asked "
       "Questions page, explaining a specific feature"},
      {"internal_memo", "Internal Memo",
       "Write a brief internal memo for employees announcing a new product or "
       "service"},
  };

  c.products_ = {
      {"smartphone", "Smartphone",
       "A flagship smartphone featuring a 120Hz dynamic display, a triple-lens "
       "camera system with a 108MP main sensor, and 2-day battery life",
       {"performance", "innovation", "battery life", "camera", "display"}},
      {"wireless_earbuds", "Wireless Earbuds",
       "True wireless stereo earbuds with active noise cancellation, 8-hour "
       "playback on a single charge, and a water-resistance rating of IPX7",
       {"wireless", "comfort", "noise cancellation", "battery", "waterproof"}},
      {"savings_account", "Savings Account",
       "An online savings account with a 4.5% Annual Percentage Yield (APY), "
       "no monthly maintenance fees, and FDIC insurance up to $250,000",
       {"security", "growth", "flexibility", "FDIC insured", "no fees"}},
      {"credit_card", "Credit Card",
       "A credit card offering 3% cashback on rotating categories (gas, "
       "groceries), 1% on all other purchases, and no annual fee for the "
       "first year",
       {"cashback", "rewards", "no annual fee", "convenience", "security"}},
      {"meditation_app", "Meditation App",
       "A subscription-based mobile app offering a library of over 500 guided "
       "meditations, sleep stories, and mindfulness exercises",
       {"mindfulness", "wellness", "relaxation", "guided", "sleep"}},
      {"fitness_monitor", "Fitness Monitor",
       "A wrist-worn device that tracks steps, heart rate, sleep patterns, "
       "and SpO2 levels, with a companion app for goal setting and progress "
       "monitoring",
       {"health", "tracking", "motivation", "progress", "wellbeing"}},
      {"meals_subscription", "Meals Subscription",
       "A weekly subscription box that delivers pre-portioned ingredients and "
       "recipes for chef-designed meals, with options for various dietary "
       "needs",
       {"fresh", "convenience", "variety", "nutrition", "chef-designed"}},
      {"news_streaming", "News Streaming",
       "An online service providing 24/7 live access to international news "
       "channels, documentaries, and in-depth political analysis",
       {"live", "global", "in-depth", "analysis", "access"}},
  };

  c.tones_.assign(std::begin(kTonePool), std::end(kTonePool));

  auto det = [](std::string id, Category cat, std::string name,
                std::string text, json params) {
    return ConstraintSpec{std::move(id), cat,           std::move(name),
                          std::move(text), VerifierKind::Deterministic,
                          std::move(params), {}};
  };
  auto judged = [](std::string id, Category cat, std::string name,
                   std::string text, std::string rubric,
                   std::vector<std::string> placeholders = {}) {
    return ConstraintSpec{std::move(id),
                          cat,
                          std::move(name),
                          std::move(text),
                          VerifierKind::Judge,
                          json{{"rubric", std::move(rubric)}},
                          std::move(placeholders)};
  };

  c.constraints_ = {
      // Formatting
      det("keep_paragraphs_short", Category::Formatting, "Keep paragraphs short",
          "Keep paragraphs short, ideally 2-4 sentences.",
          {{"check", "paragraph_sentences"}, {"lo", 2}, {"hi", 4}}),
      det("keep_body_short", Category::Formatting, "Keep body short",
          "The body content should be organized into 2-3 paragraphs.",
          {{"check", "paragraph_count"}, {"lo", 2}, {"hi", 3}}),
      det("structure_body_into_lists", Category::Formatting,
          "Structure body into lists",
          "Organize the body content into lists using only dashes.",
          {{"check", "list_format"}, {"bullet", "-"}}),
      det("include_boc_token", Category::Formatting, "Include <BOC> token",
          "At the beginning of the generated content, include the special "
          "token <BOC>.",
          {{"check", "token"}, {"token", "<BOC>"}, {"position", "start"}}),
      det("include_eoc_token", Category::Formatting, "Include <EOC> token",
          "At the end of the generated content, include the special token "
          "<EOC>.",
          {{"check", "token"}, {"token", "<EOC>"}, {"position", "end"}}),
      det("respond_in_json", Category::Formatting, "Respond in JSON",
          "Respond in JSON format following the schema: {\"response\": <your "
          "response>}.",
          {{"check", "json"}}),
      // Lexical
      det("flesch_reading_ease_70_80", Category::Lexical,
          "Flesch Reading Ease 70-80",
          "Content should target a Flesch Reading Ease level between 70 and "
          "80 to ensure broad accessibility.",
          {{"check", "flesch"}, {"lo", 70.0}, {"hi", 80.0}}),
      judged("use_positive_language", Category::Lexical, "Use positive language",
             "Use positive and empowering language (e.g., 'opportunity', "
             "'benefit', 'simplify') and avoid negative or fear-based terms "
             "(e.g., 'problem', 'risk', 'failure').",
             "Positive language"),
      {"use_given_keywords",
       Category::Lexical,
       "Use given keywords",
       "Incorporate keywords aligned with the brand voice i.e., <kw1, kw2, "
       "..>.",
       VerifierKind::Deterministic,
       {{"check", "keywords"}, {"mode", "include"}},
       {"kw"}},
      {"avoid_given_keywords",
       Category::Lexical,
       "Avoid given keywords",
       "Do not use keywords like <{kw1}, {kw2}, ..>.",
       VerifierKind::Deterministic,
       {{"check", "keywords"}, {"mode", "exclude"}},
       {"kw"}},
      det("use_custom_variable", Category::Lexical, "Use custom variable",
          "Refer to the recipient of the message using the variable "
          "{{FirstName}} enclosed by double curly brackets.",
          {{"check", "variable"}, {"variable", "{{FirstName}}"}}),
      // Syntactic
      det("vary_sentence_length", Category::Syntactic, "Vary sentence length",
          "Vary sentence length and structure to create a compelling rhythm. "
          "Mix simple, compound, and complex sentences.",
          {{"check", "sentence_variation"}, {"sigma_ref", 6.0}}),
      det("keep_sentences_short", Category::Syntactic, "Keep sentences short",
          "Individual sentences should not exceed 25 words to maintain "
          "clarity and momentum.",
          {{"check", "max_sentence_length"}, {"cap", 25}}),
      // Semantic
      judged("use_given_tone", Category::Semantic, "Use given tone",
             "Maintain a single, consistent tone throughout the entire "
             "response as specified. Your response tone should be: "
             "<SelectedTone>.",
             "Specific tone", {"SelectedTone"}),
      judged("use_inverted_pyramid", Category::Semantic,
             "Use inverted pyramid principle",
             "Structure the response following the \"inverted pyramid\" "
             "principle. The most critical piece of information (the core "
             "answer, main announcement, or key takeaway) must be presented "
             "at the beginning, before supporting details or secondary "
             "context.",
             "Inverted pyramid principle"),
      judged("avoid_contradictions", Category::Semantic, "Avoid contradictions",
             "The response must not contain any internal contradictions. All "
             "stated facts, arguments, and data points must be consistent "
             "with each other from start to finish.",
             "Internal contradictions"),
      judged("substantiate_every_claim", Category::Semantic,
             "Substantiate every claim",
             "Every significant claim, benefit, or conclusion must be "
             "supported by a reason or piece of evidence within the text. "
             "Avoid making unsupported assertions. For example, instead of "
             "\"It's faster,\" write \"It's faster because it uses a "
             "next-generation processor.\"",
             "Supporting evidence"),
      judged("clear_purpose", Category::Semantic, "Clear purpose",
             "The content must directly address the primary underlying "
             "question of the target audience for the task (e.g., 'How will "
             "this help me?', 'What do I need to know?', 'Is my problem "
             "solved?'). The purpose of the communication must be clear.",
             "Communication purpose"),
      // Business/Legal
      judged("use_unambiguous_language", Category::BusinessLegal,
             "Use unambiguous language",
             "Use precise and unambiguous language. Avoid vague terms or "
             "phrases that could be misinterpreted by the target audience. "
             "All instructions, descriptions, or conclusions should be "
             "explicit and clear.",
             "Precise language"),
      judged("report_correct_features", Category::BusinessLegal,
             "Report correct features",
             "All product names, features, and numerical data (e.g., prices, "
             "percentages) must be accurate and up-to-date as of the "
             "generation date.",
             "Accurate product information"),
      judged("avoid_unsubstantiated_superlatives", Category::BusinessLegal,
             "Avoid unsubstantiated superlatives",
             "Avoid superlatives (e.g., 'best', 'greatest') unless they can "
             "be substantiated by a verifiable source, which must be cited or "
             "linked.",
             "Substantiated superlatives"),
  };

  c.validate();
  return c;
}

const Catalog& Catalog::builtin() {
  static const Catalog instance = make_builtin_catalog();
  return instance;
}

void Catalog::validate() const {
  if (tasks_.size() != 4) throw CatalogError("catalog must define 4 tasks");
  if (products_.size() != 8) throw CatalogError("catalog must define 8 products");
  if (constraints_.size() != 21)
    throw CatalogError("catalog must define 21 constraints");
  if (tones_.size() != 4) throw CatalogError("catalog must define 4 tones");

  std::set<std::string> descriptions;
  for (const auto& t : tasks_) {
    if (t.description.empty()) throw CatalogError("empty task description");
    if (!descriptions.insert(t.description).second)
      throw CatalogError("duplicate task description");
  }
  for (const auto& p : products_) {
    if (p.keyword_pool.size() != 5)
      throw CatalogError("product " + p.id + " must list 5 keywords");
  }

  std::map<Category, int> counts;
  std::set<std::string> ids;
  for (const auto& spec : constraints_) {
    counts[spec.category]++;
    if (!ids.insert(spec.id).second)
      throw CatalogError("duplicate constraint id: " + spec.id);
    for (const auto& ph : spec.placeholders) {
      const std::string needle =
          ph == "SelectedTone" ? kTonePlaceholder
          : spec.verifier_params.value("mode", "") == "exclude"
              ? kExcludeKwPlaceholder
              : kIncludeKwPlaceholder;
      if (spec.template_text.find(needle) == std::string::npos)
        throw CatalogError("undeclared placeholder text in " + spec.id);
    }
  }
  const std::map<Category, int> expected = {{Category::Formatting, 6},
                                            {Category::Lexical, 5},
                                            {Category::Syntactic, 2},
                                            {Category::Semantic, 5},
                                            {Category::BusinessLegal, 3}};
  if (counts != expected) throw CatalogError("constraint category counts wrong");
}

const TaskSpec& Catalog::task(const std::string& id) const {
  for (const auto& t : tasks_)
    if (t.id == id) return t;
  throw CatalogError("unknown task id: " + id);
}

const ProductSpec& Catalog::product(const std::string& id) const {
  for (const auto& p : products_)
    if (p.id == id) return p;
  throw CatalogError("unknown product id: " + id);
}

const ConstraintSpec& Catalog::constraint(const std::string& id) const {
  for (const auto& spec : constraints_)
    if (spec.id == id) return spec;
  throw CatalogError("unknown constraint id: " + id);
}

std::vector<ConstraintSpec> Catalog::list_constraints(
    const std::optional<std::string>& category_filter) const {
  std::optional<Category> wanted;
  if (category_filter) wanted = category_from_string(*category_filter);
  std::vector<ConstraintSpec> out;
  for (const auto& spec : constraints_) {
    if (!wanted || spec.category == *wanted) out.push_back(spec);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

namespace {

std::vector<std::string> sample_keywords(const ProductSpec& product, Rng& rng,
                                         const InstantiationOptions& options,
                                         std::size_t max_available) {
  auto lo = static_cast<std::size_t>(std::max(options.min_keywords, 1));
  auto hi = static_cast<std::size_t>(std::max(options.max_keywords,
                                              options.min_keywords));
  hi = std::min(hi, max_available);
  lo = std::min(lo, hi);
  const std::size_t size = lo + rng.uniform_below(hi - lo + 1);
  std::vector<std::string> pool = product.keyword_pool;
  rng.shuffle(pool);
  pool.resize(size);
  return pool;
}

ConstraintInstance render(const ConstraintSpec& spec,
                          const std::string& tone,
                          const std::vector<std::string>& keywords) {
  ConstraintInstance inst;
  inst.spec_id = spec.id;
  inst.rendered_text = spec.template_text;
  for (const auto& ph : spec.placeholders) {
    if (ph == "SelectedTone") {
      replace_once(inst.rendered_text, kTonePlaceholder, tone);
      inst.bindings["SelectedTone"] = {tone};
    } else if (ph == "kw") {
      const bool exclude = spec.verifier_params.value("mode", "") == "exclude";
      replace_once(inst.rendered_text,
                   exclude ? kExcludeKwPlaceholder : kIncludeKwPlaceholder,
                   join(keywords, ", "));
      inst.bindings["kw"] = keywords;
    } else {
      throw CatalogError("unknown placeholder " + ph + " in " + spec.id);
    }
  }
  return inst;
}

}  // namespace

ConstraintInstance Catalog::instantiate_constraint(
    const ConstraintSpec& spec, const ProductSpec& product, Rng& rng,
    const InstantiationOptions& options) const {
  std::string tone;
  std::vector<std::string> keywords;
  for (const auto& ph : spec.placeholders) {
    if (ph == "SelectedTone") {
      tone = tones_[rng.uniform_below(tones_.size())];
    } else if (ph == "kw") {
      keywords = sample_keywords(product, rng, options,
                                 product.keyword_pool.size());
    }
  }
  return render(spec, tone, keywords);
}

std::vector<ConstraintInstance> Catalog::instantiate_constraints(
    const std::vector<std::string>& spec_ids, const ProductSpec& product,
    Rng& rng, const InstantiationOptions& options) const {
  // When include- and exclude-keyword constraints co-occur, their bound sets
  // must be disjoint; draw both from one shuffled pool.
  bool has_include = false, has_exclude = false;
  for (const auto& id : spec_ids) {
    if (id == "use_given_keywords") has_include = true;
    if (id == "avoid_given_keywords") has_exclude = true;
  }

  std::vector<std::string> include_kws, exclude_kws;
  if (has_include && has_exclude) {
    std::vector<std::string> pool = product.keyword_pool;
    rng.shuffle(pool);
    auto pick_size = [&](std::size_t available) {
      auto lo = static_cast<std::size_t>(std::max(options.min_keywords, 1));
      auto hi = static_cast<std::size_t>(
          std::max(options.max_keywords, options.min_keywords));
      hi = std::min(hi, available);
      lo = std::min(lo, hi);
      return lo + rng.uniform_below(hi - lo + 1);
    };
    const std::size_t n_inc = pick_size(pool.size() - 1);
    const std::size_t n_exc = pick_size(pool.size() - n_inc);
    include_kws.assign(pool.begin(), pool.begin() + static_cast<long>(n_inc));
    exclude_kws.assign(pool.begin() + static_cast<long>(n_inc),
                       pool.begin() + static_cast<long>(n_inc + n_exc));
  }

  std::vector<ConstraintInstance> out;
  out.reserve(spec_ids.size());
  for (const auto& id : spec_ids) {
    const ConstraintSpec& spec = constraint(id);
    if (has_include && has_exclude &&
        (id == "use_given_keywords" || id == "avoid_given_keywords")) {
      out.push_back(render(spec, "",
                           id == "use_given_keywords" ? include_kws
                                                      : exclude_kws));
    } else {
      out.push_back(instantiate_constraint(spec, product, rng, options));
    }
  }
  return out;
}

Catalog Catalog::with_constraints(
    const std::vector<std::string>& spec_ids) const {
  Catalog c;
  c.tasks_ = tasks_;
  c.products_ = products_;
  c.tones_ = tones_;
  for (const auto& id : spec_ids) c.constraints_.push_back(constraint(id));
  return c;
}

Catalog Catalog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("cannot open catalog file: " + path);
  json doc = json::parse(in);

  Catalog c;
  for (const auto& j : doc.at("tasks")) {
    c.tasks_.push_back({j.at("id"), j.at("name"), j.at("description")});
  }
  for (const auto& j : doc.at("products")) {
    c.products_.push_back({j.at("id"), j.at("name"), j.at("description"),
                           j.at("keyword_pool").get<std::vector<std::string>>()});
  }
  c.tones_ = doc.at("tones").get<std::vector<std::string>>();
  for (const auto& j : doc.at("constraints")) {
    ConstraintSpec spec;
    spec.id = j.at("id");
    spec.category = category_from_string(j.at("category"));
    spec.name = j.at("name");
    spec.template_text = j.at("template_text");
    spec.verifier_kind = j.at("verifier_kind") == "Judge"
                             ? VerifierKind::Judge
                             : VerifierKind::Deterministic;
    spec.verifier_params = j.value("verifier_params", json::object());
    spec.placeholders =
        j.value("placeholders", std::vector<std::string>{});
    c.constraints_.push_back(std::move(spec));
  }
  c.validate();
  return c;
}

}  // namespace mosaic
