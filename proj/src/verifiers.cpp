#include "mosaic/verifiers.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>

namespace mosaic {

namespace {

using nlohmann::json;

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

// Guard list for the sentence splitter. Tokens ending in one of these are not
// treated as sentence terminals.
const std::array<const char*, 18> kAbbreviations = {
    "mr.",  "mrs.", "ms.",  "dr.",   "prof.", "sr.",
    "jr.",  "st.",  "vs.",  "etc.",  "e.g.",  "i.e.",
    "inc.", "ltd.", "co.",  "no.",   "fig.",  "approx."};

bool ends_with_abbreviation(std::string_view text, std::size_t dot_pos) {
  // token = run of non-space chars ending at dot_pos (inclusive)
  std::size_t start = dot_pos;
  while (start > 0 &&
         !std::isspace(static_cast<unsigned char>(text[start - 1])))
    --start;
  std::string token = lower(text.substr(start, dot_pos - start + 1));
  for (const char* abbr : kAbbreviations) {
    if (token == abbr) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> TextStats::all_sentences() const {
  std::vector<std::string> out;
  for (const auto& para : sentences)
    out.insert(out.end(), para.begin(), para.end());
  return out;
}

int TextStats::total_words() const {
  return std::accumulate(word_counts.begin(), word_counts.end(), 0);
}

int TextStats::total_syllables() const {
  return std::accumulate(syllable_counts.begin(), syllable_counts.end(), 0);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    current.push_back(c);
    if (c == '.' || c == '!' || c == '?') {
      // consume trailing terminal run (e.g. "?!" or "...")
      while (i + 1 < text.size() &&
             (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?')) {
        current.push_back(text[++i]);
      }
      const bool at_end = i + 1 >= text.size();
      const bool before_space =
          !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
      if ((at_end || before_space) &&
          !(c == '.' && ends_with_abbreviation(text, i))) {
        auto t = trim(current);
        if (!t.empty()) sentences.emplace_back(t);
        current.clear();
      }
    }
  }
  auto t = trim(current);
  if (!t.empty()) sentences.emplace_back(t);
  return sentences;
}

std::vector<std::string> split_words(std::string_view sentence) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() &&
           std::isspace(static_cast<unsigned char>(sentence[i])))
      ++i;
    std::size_t start = i;
    while (i < sentence.size() &&
           !std::isspace(static_cast<unsigned char>(sentence[i])))
      ++i;
    if (i == start) break;
    std::string_view tok = sentence.substr(start, i - start);
    // strip surrounding punctuation
    while (!tok.empty() && !is_word_char(tok.front())) tok.remove_prefix(1);
    while (!tok.empty() && !is_word_char(tok.back())) tok.remove_suffix(1);
    if (!tok.empty()) words.emplace_back(tok);
  }
  return words;
}

int count_syllables(std::string_view word) {
  std::string w = lower(word);
  auto is_vowel = [](char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' ||
           c == 'y';
  };
  int groups = 0;
  bool in_group = false;
  for (char c : w) {
    if (is_vowel(c)) {
      if (!in_group) ++groups;
      in_group = true;
    } else {
      in_group = false;
    }
  }
  // silent trailing e ("make"), but keep consonant-le ("table")
  if (w.size() >= 2 && w.back() == 'e' && !is_vowel(w[w.size() - 2]) &&
      !(w.size() >= 3 && w[w.size() - 2] == 'l' && !is_vowel(w[w.size() - 3])) &&
      groups > 1) {
    --groups;
  }
  return std::max(groups, 1);
}

TextStats segment(std::string_view text) {
  TextStats stats;
  // paragraphs: runs of 1+ newlines, whitespace-only chunks dropped
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view chunk =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    auto t = trim(chunk);
    if (!t.empty()) stats.paragraphs.emplace_back(t);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  for (const auto& para : stats.paragraphs) {
    auto sents = split_sentences(para);
    for (const auto& s : sents) {
      auto words = split_words(s);
      stats.word_counts.push_back(static_cast<int>(words.size()));
      for (const auto& w : words)
        stats.syllable_counts.push_back(count_syllables(w));
    }
    stats.sentences.push_back(std::move(sents));
  }
  return stats;
}

FractionalScore verify_paragraph_count(std::string_view text, int lo, int hi) {
  const int n = static_cast<int>(segment(text).paragraphs.size());
  std::string detail = "paragraphs=" + std::to_string(n);
  if (n >= lo && n <= hi) return {1.0, detail};
  const int d = n < lo ? lo - n : n - hi;
  return {1.0 / (1.0 + d), detail};
}

FractionalScore verify_paragraph_sentences(std::string_view text, int lo,
                                           int hi) {
  TextStats stats = segment(text);
  if (stats.paragraphs.empty()) return {0.0, "no paragraphs"};
  int ok = 0;
  for (const auto& para : stats.sentences) {
    const int n = static_cast<int>(para.size());
    if (n >= lo && n <= hi) ++ok;
  }
  return {static_cast<double>(ok) / static_cast<double>(stats.paragraphs.size()),
          "compliant_paragraphs=" + std::to_string(ok) + "/" +
              std::to_string(stats.paragraphs.size())};
}

FractionalScore verify_list_format(std::string_view text, char bullet) {
  int total = 0, ok = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = nl == std::string_view::npos
                                ? text.substr(pos)
                                : text.substr(pos, nl - pos);
    std::string_view t = line;
    while (!t.empty() && (t.front() == ' ' || t.front() == '\t'))
      t.remove_prefix(1);
    if (!trim(line).empty()) {
      ++total;
      if (t.size() >= 2 && t[0] == bullet && t[1] == ' ') ++ok;
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (total == 0) return {0.0, "no lines"};
  return {static_cast<double>(ok) / total,
          "bullet_lines=" + std::to_string(ok) + "/" + std::to_string(total)};
}

FractionalScore verify_token(std::string_view text, std::string_view token,
                             TokenPosition position) {
  std::string_view t = trim(text);
  bool found = false;
  if (position == TokenPosition::Start) {
    found = t.substr(0, token.size()) == token;
  } else {
    found = t.size() >= token.size() &&
            t.substr(t.size() - token.size()) == token;
  }
  return {found ? 1.0 : 0.0, found ? "token present" : "token absent"};
}

FractionalScore verify_json(std::string_view text) {
  std::string_view t = trim(text);
  json parsed = json::parse(t, nullptr, false);
  if (!parsed.is_discarded() && parsed.is_object()) {
    if (parsed.contains("response")) return {1.0, "valid object with response"};
    return {0.75, "valid object, response key missing"};
  }
  if (!t.empty() && t.front() == '{' &&
      t.find("response") != std::string_view::npos) {
    return {0.5, "object-like with response, parse failed"};
  }
  if (t.find('{') != std::string_view::npos) return {0.25, "brace present"};
  return {0.0, "no JSON structure"};
}

double flesch_reading_ease(std::string_view text) {
  TextStats stats = segment(text);
  const int sentences = static_cast<int>(stats.all_sentences().size());
  const int words = stats.total_words();
  const int syllables = stats.total_syllables();
  if (sentences == 0 || words == 0) return 0.0;
  return 206.835 - 1.015 * (static_cast<double>(words) / sentences) -
         84.6 * (static_cast<double>(syllables) / words);
}

FractionalScore verify_flesch(std::string_view text, double lo, double hi) {
  TextStats stats = segment(text);
  if (stats.total_words() == 0 || stats.all_sentences().empty())
    return {0.0, "unscorable"};
  const double fre = flesch_reading_ease(text);
  std::string detail = "fre=" + std::to_string(fre);
  if (fre >= lo && fre <= hi) return {1.0, detail};
  const double dist = fre < lo ? lo - fre : fre - hi;
  return {std::max(0.0, 1.0 - dist / 20.0), detail};
}

namespace {

// Case-insensitive phrase search with word boundaries on both ends.
bool contains_keyword(const std::string& haystack_lower,
                      const std::string& keyword_lower) {
  std::size_t pos = 0;
  while ((pos = haystack_lower.find(keyword_lower, pos)) !=
         std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(haystack_lower[pos - 1]);
    const std::size_t end = pos + keyword_lower.size();
    const bool right_ok =
        end >= haystack_lower.size() || !is_word_char(haystack_lower[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

}  // namespace

FractionalScore verify_keywords(std::string_view text,
                                const std::vector<std::string>& keywords,
                                KeywordMode mode) {
  const std::string lowered = lower(text);
  int hit = 0;
  for (const auto& kw : keywords) {
    if (contains_keyword(lowered, lower(kw))) ++hit;
  }
  const int n = static_cast<int>(keywords.size());
  const int good = mode == KeywordMode::Include ? hit : n - hit;
  return {n == 0 ? 0.0 : static_cast<double>(good) / n,
          "matched=" + std::to_string(hit) + "/" + std::to_string(n)};
}

FractionalScore verify_variable(std::string_view text,
                                std::string_view variable) {
  const bool found = text.find(variable) != std::string_view::npos;
  return {found ? 1.0 : 0.0, found ? "variable present" : "variable absent"};
}

FractionalScore verify_sentence_variation(std::string_view text,
                                          double sigma_ref) {
  TextStats stats = segment(text);
  const auto& counts = stats.word_counts;
  if (counts.size() < 2) return {0.0, "fewer than 2 sentences"};
  double mean = 0;
  for (int c : counts) mean += c;
  mean /= static_cast<double>(counts.size());
  double var = 0;
  for (int c : counts) var += (c - mean) * (c - mean);
  var /= static_cast<double>(counts.size());  // population variance
  const double sigma = std::sqrt(var);
  return {std::min(1.0, sigma / sigma_ref), "sigma=" + std::to_string(sigma)};
}

FractionalScore verify_max_sentence_length(std::string_view text, int cap) {
  TextStats stats = segment(text);
  const auto& counts = stats.word_counts;
  if (counts.empty()) return {0.0, "no sentences"};
  int ok = 0;
  for (int c : counts)
    if (c <= cap) ++ok;
  return {static_cast<double>(ok) / static_cast<double>(counts.size()),
          "within_cap=" + std::to_string(ok) + "/" +
              std::to_string(counts.size())};
}

int binarize(double value) { return value >= 0.5 ? 1 : 0; }

int binarize(const FractionalScore& score) { return binarize(score.value); }

FractionalScore verify_with_params(std::string_view text, const json& params,
                                   const std::vector<std::string>& keywords) {
  const std::string check = params.at("check");
  if (check == "paragraph_count")
    return verify_paragraph_count(text, params.value("lo", 2),
                                  params.value("hi", 3));
  if (check == "paragraph_sentences")
    return verify_paragraph_sentences(text, params.value("lo", 2),
                                      params.value("hi", 4));
  if (check == "list_format") {
    const std::string bullet = params.value("bullet", "-");
    return verify_list_format(text, bullet.empty() ? '-' : bullet[0]);
  }
  if (check == "token")
    return verify_token(text, params.at("token").get<std::string>(),
                        params.value("position", "start") == "start"
                            ? TokenPosition::Start
                            : TokenPosition::End);
  if (check == "json") return verify_json(text);
  if (check == "flesch")
    return verify_flesch(text, params.value("lo", 70.0),
                         params.value("hi", 80.0));
  if (check == "keywords")
    return verify_keywords(text, keywords,
                           params.value("mode", "include") == "include"
                               ? KeywordMode::Include
                               : KeywordMode::Exclude);
  if (check == "variable")
    return verify_variable(text,
                           params.value("variable", "{{FirstName}}"));
  if (check == "sentence_variation")
    return verify_sentence_variation(text, params.value("sigma_ref", 6.0));
  if (check == "max_sentence_length")
    return verify_max_sentence_length(text, params.value("cap", 25));
  throw std::runtime_error("unknown deterministic check: " + check);
}

}  // namespace mosaic
