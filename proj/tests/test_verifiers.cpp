#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mosaic/verifiers.hpp"

using namespace mosaic;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kCorpusKeywords = {
    "performance", "innovation", "battery life", "camera", "display"};

double score_for(const std::string& check, const std::string& text) {
  if (check == "paragraph_count") return verify_paragraph_count(text).value;
  if (check == "paragraph_sentences")
    return verify_paragraph_sentences(text).value;
  if (check == "list_format") return verify_list_format(text).value;
  if (check == "token_start")
    return verify_token(text, "<BOC>", TokenPosition::Start).value;
  if (check == "token_end")
    return verify_token(text, "<EOC>", TokenPosition::End).value;
  if (check == "json") return verify_json(text).value;
  if (check == "flesch") return verify_flesch(text).value;
  if (check == "keywords_include")
    return verify_keywords(text, kCorpusKeywords, KeywordMode::Include).value;
  if (check == "keywords_exclude")
    return verify_keywords(text, kCorpusKeywords, KeywordMode::Exclude).value;
  if (check == "variable") return verify_variable(text).value;
  if (check == "sentence_variation")
    return verify_sentence_variation(text).value;
  if (check == "max_sentence_length")
    return verify_max_sentence_length(text).value;
  FAIL("unknown check in expected_scores.csv: ", check);
  return -1.0;
}

}  // namespace

TEST_CASE("segmentation basics") {
  auto sents = split_sentences("One. Two! Three?");
  REQUIRE(sents.size() == 3);
  CHECK(sents[0] == "One.");
  CHECK(sents[2] == "Three?");

  // abbreviation guard
  sents = split_sentences("Dr. Smith arrived. He sat down.");
  REQUIRE(sents.size() == 2);
  CHECK(sents[0] == "Dr. Smith arrived.");

  // terminal runs collapse into one boundary
  sents = split_sentences("Wait... really?! Yes.");
  REQUIRE(sents.size() == 3);
  CHECK(sents[0] == "Wait...");
  CHECK(sents[1] == "really?!");

  auto words = split_words("  \"Hello,\" she said --- twice.  ");
  REQUIRE(words.size() == 4);
  CHECK(words[0] == "Hello");
  CHECK(words[3] == "twice");
}

TEST_CASE("syllable heuristic") {
  CHECK(count_syllables("cat") == 1);
  CHECK(count_syllables("generated") == 4);
  CHECK(count_syllables("make") == 1);   // silent e
  CHECK(count_syllables("table") == 2);  // consonant-le keeps the e
  CHECK(count_syllables("the") == 1);
  CHECK(count_syllables("xyz") == 1);    // floor of 1
  CHECK(count_syllables("people") == 2);
}

TEST_CASE("flesch worked example") {
  CHECK(flesch_reading_ease("The cat sat.") == doctest::Approx(119.19).epsilon(0.0001));
}

TEST_CASE("sentence variation worked examples") {
  // three sentences of 5, 11 and 17 words
  const std::string text =
      "One two three four five. "
      "A b c d e f g h i j k. "
      "A b c d e f g h i j k l m n o p q.";
  const double sigma = std::sqrt(24.0);  // population sigma of {5,11,17}
  CHECK(verify_sentence_variation(text).value ==
        doctest::Approx(std::min(1.0, sigma / 6.0)).epsilon(1e-9));
  CHECK(verify_sentence_variation("Same same same. Same same same.").value ==
        doctest::Approx(0.0));
  CHECK(verify_sentence_variation("Only one sentence.").value == 0.0);
}

TEST_CASE("binarize thresholds") {
  CHECK(binarize(0.49) == 0);
  CHECK(binarize(0.50) == 1);
  CHECK(binarize(1.0) == 1);
  CHECK(binarize(FractionalScore{0.499999, ""}) == 0);
}

TEST_CASE("paragraph count decay") {
  CHECK(verify_paragraph_count("a\n\nb").value == 1.0);
  CHECK(verify_paragraph_count("a\n\nb\n\nc").value == 1.0);
  CHECK(verify_paragraph_count("a").value == doctest::Approx(0.5));
  CHECK(verify_paragraph_count("a\nb\nc\nd").value == doctest::Approx(0.5));
  CHECK(verify_paragraph_count("a\nb\nc\nd\ne").value ==
        doctest::Approx(1.0 / 3.0));
  CHECK(verify_paragraph_count("").value == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("json ladder") {
  CHECK(verify_json(R"({"response": "x"})").value == 1.0);
  CHECK(verify_json(R"({"other": 1})").value == 0.75);
  CHECK(verify_json(R"({"response": broken)").value == 0.5);
  CHECK(verify_json("text with a { brace").value == 0.25);
  CHECK(verify_json("nothing here").value == 0.0);
}

TEST_CASE("keyword matching respects word boundaries") {
  std::vector<std::string> kws = {"camera"};
  CHECK(verify_keywords("the camera is fine", kws, KeywordMode::Include).value == 1.0);
  CHECK(verify_keywords("great camerawork here", kws, KeywordMode::Include).value == 0.0);
  CHECK(verify_keywords("CAMERA!", kws, KeywordMode::Include).value == 1.0);
  // phrases
  std::vector<std::string> phrase = {"battery life"};
  CHECK(verify_keywords("long battery life indeed", phrase, KeywordMode::Include).value == 1.0);
  CHECK(verify_keywords("battery lifetime", phrase, KeywordMode::Exclude).value == 1.0);
}

TEST_CASE("monotonicity spot checks") {
  std::string list_text = "- a point\nplain prose line";
  double before = verify_list_format(list_text).value;
  double after = verify_list_format(list_text + "\n- another point").value;
  CHECK(after >= before);

  std::string prose = "Short one. Short two.";
  std::string long_sentence =
      " a b c d e f g h i j k l m n o p q r s t u v w x y z aa bb cc.";
  CHECK(verify_max_sentence_length(prose + long_sentence).value <=
        verify_max_sentence_length(prose).value);
}

TEST_CASE("corpus matches the independent recount table") {
  const std::string dir = MOSAIC_FIXTURE_DIR;
  std::ifstream table(dir + "/expected_scores.csv");
  REQUIRE(table.good());
  std::string line;
  std::getline(table, line);  // header
  std::map<std::string, std::string> text_cache;
  int rows = 0;
  std::set<std::string> files_seen;
  while (std::getline(table, line)) {
    if (line.empty()) continue;
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 + 1);
    REQUIRE(c2 != std::string::npos);
    const std::string file = line.substr(0, c1);
    const std::string check = line.substr(c1 + 1, c2 - c1 - 1);
    const double expected = std::strtod(line.c_str() + c2 + 1, nullptr);
    auto it = text_cache.find(file);
    if (it == text_cache.end())
      it = text_cache.emplace(file, read_file(dir + "/corpus/" + file)).first;
    const double got = score_for(check, it->second);
    INFO(file, " ", check);
    CHECK(std::fabs(got - expected) < 1e-12);
    ++rows;
    files_seen.insert(file);
  }
  CHECK(rows >= 600);
  CHECK(files_seen.size() >= 50);
}

TEST_CASE("verify_with_params dispatch") {
  nlohmann::json params = {{"check", "token"}, {"token", "<BOC>"},
                           {"position", "start"}};
  CHECK(verify_with_params("<BOC> hi", params, {}).value == 1.0);
  params = {{"check", "keywords"}, {"mode", "exclude"}};
  CHECK(verify_with_params("clean text", params, {"camera"}).value == 1.0);
  CHECK_THROWS(verify_with_params("x", {{"check", "nope"}}, {}));
}
