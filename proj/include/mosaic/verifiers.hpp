#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mosaic {

// Fractional compliance score in [0,1] with a short machine-readable detail.
struct FractionalScore {
  double value = 0.0;
  std::string detail;
};

struct TextStats {
  std::vector<std::string> paragraphs;
  // sentences[i] holds the sentences of paragraphs[i]
  std::vector<std::vector<std::string>> sentences;
  std::vector<int> word_counts;      // per sentence, flattened in order
  std::vector<int> syllable_counts;  // per word, flattened in order

  std::vector<std::string> all_sentences() const;
  int total_words() const;
  int total_syllables() const;
};

enum class TokenPosition { Start, End };
enum class KeywordMode { Include, Exclude };

// --- segmentation -----------------------------------------------------------

// Paragraphs: runs of 1+ newlines. Sentences: terminal . ! ? followed by
// whitespace, with a fixed abbreviation guard. Words: whitespace tokens
// stripped of surrounding punctuation. Syllables: vowel-group heuristic with
// a silent-e adjustment and a minimum of 1.
TextStats segment(std::string_view text);

std::vector<std::string> split_sentences(std::string_view text);
std::vector<std::string> split_words(std::string_view sentence);
int count_syllables(std::string_view word);

// --- verifiers ---------------------------------------------------------------

FractionalScore verify_paragraph_count(std::string_view text, int lo = 2,
                                       int hi = 3);
FractionalScore verify_paragraph_sentences(std::string_view text, int lo = 2,
                                           int hi = 4);
FractionalScore verify_list_format(std::string_view text, char bullet = '-');
FractionalScore verify_token(std::string_view text, std::string_view token,
                             TokenPosition position);
FractionalScore verify_json(std::string_view text);
FractionalScore verify_flesch(std::string_view text, double lo = 70.0,
                              double hi = 80.0);
FractionalScore verify_keywords(std::string_view text,
                                const std::vector<std::string>& keywords,
                                KeywordMode mode);
FractionalScore verify_variable(std::string_view text,
                                std::string_view variable = "{{FirstName}}");
FractionalScore verify_sentence_variation(std::string_view text,
                                          double sigma_ref = 6.0);
FractionalScore verify_max_sentence_length(std::string_view text, int cap = 25);

double flesch_reading_ease(std::string_view text);

int binarize(const FractionalScore& score);
int binarize(double value);

// Dispatches on a constraint's verifier_params ("check" key plus bound
// keyword lists). Judge-kind constraints are not handled here.
FractionalScore verify_with_params(std::string_view text,
                                   const nlohmann::json& params,
                                   const std::vector<std::string>& keywords);

}  // namespace mosaic
