#include <doctest.h>

#include <sstream>

#include "psytriage/textfeat.hpp"

using namespace psytriage;

namespace {

std::vector<Token> words_of(const std::vector<std::string>& ws) {
  std::vector<Token> out;
  for (const auto& w : ws) {
    if (w == ".") out.push_back(Token::end_of_sentence());
    else out.push_back(Token::word(w));
  }
  return out;
}

std::vector<std::string> split(const std::string& phrase) {
  std::istringstream in(phrase);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

TEST_CASE("tokenizer") {
  const auto t = tokenize("Pat. found  \"drunk\"; BP 130.5, (no) alcohol!");
  const auto w = words(t);
  CHECK(w == std::vector<std::string>{"pat", "found", "drunk", "bp", "130.5", "no", "alcohol"});
  CHECK(t[1].boundary);  // after "pat"
  CHECK(!t.front().boundary);
  CHECK(tokenize("...").empty());
}

TEST_CASE("every keyword matches when written plainly") {
  const auto& lex = default_lexicon();
  for (const auto& cat : lex.categories) {
    for (const auto& kw : cat.keywords) {
      CAPTURE(kw);
      const auto toks = tokenize("Crew arrived. Signs of " + kw + " noted.");
      const auto m = match_category(toks, cat, lex.lex);
      REQUIRE(m.has_value());
      // a longer keyword of the same category may extend this one
      CHECK(m->find(kw) != std::string::npos);
    }
  }
}

TEST_CASE("negation grid: keyword x distance x sentence boundary") {
  const auto& lex = default_lexicon();
  const int window = lex.lex.negation_window;
  REQUIRE(window == 3);
  // fillers that are neither keywords, stop words nor negations
  const std::vector<std::string> fillers{"quickly", "really", "very", "somewhat", "clearly"};
  for (const auto& cat : lex.categories) {
    for (const auto& kw : cat.keywords) {
      for (const auto& neg : std::vector<std::string>{"no", "denies", "kein"}) {
        for (int distance = 1; distance <= window + 2; ++distance) {
          for (bool boundary : {false, true}) {
            // neg [fillers...] kw, where distance counts tokens from neg to kw
            std::vector<std::string> ws{"crew", neg};
            const int gap = distance - 1;
            for (int g = 0; g < gap; ++g) ws.push_back(fillers[static_cast<std::size_t>(g)]);
            if (boundary) {
              // the boundary sits just before the keyword; it is not a token
              ws.push_back(".");
            }
            for (const auto& w : split(kw)) ws.push_back(w);
            ws.push_back("today");
            const bool expect_suppressed = !boundary && distance <= window;
            CAPTURE(kw);
            CAPTURE(neg);
            CAPTURE(distance);
            CAPTURE(boundary);
            const auto m = match_category(words_of(ws), cat, lex.lex);
            CHECK(m.has_value() == !expect_suppressed);
          }
        }
      }
    }
  }
}

TEST_CASE("stop words count toward the negation window") {
  const auto& lex = default_lexicon();
  const auto& cat = lex.category(Category::Alcoholism);
  CHECK(!match_category(tokenize("no sign of alcohol"), cat, lex.lex));
  CHECK(match_category(tokenize("no sign at all of the alcohol"), cat, lex.lex));
}

TEST_CASE("a later unnegated mention still counts") {
  const auto& lex = default_lexicon();
  const auto& cat = lex.category(Category::Alcoholism);
  const auto m = match_category(tokenize("Denies alcohol. Later admits vodka."), cat, lex.lex);
  REQUIRE(m);
  CHECK(*m == "vodka");
}

TEST_CASE("notes are separated by sentence boundaries") {
  const auto toks = tokenize_notes({"patient says no", "alcohol on breath"});
  const auto& lex = default_lexicon();
  CHECK(match_category(toks, lex.category(Category::Alcoholism), lex.lex));
}

TEST_CASE("extract features fills one slot per category") {
  RescueRecord r;
  r.case_id = "c1";
  r.notes = {"Crying and devastated. Smells of vodka. No drugs found."};
  const auto f = extract_features(r, default_lexicon());
  CHECK(f[Category::PsychiatricSymptoms] == std::optional<std::string>("crying"));
  CHECK(f[Category::Alcoholism] == std::optional<std::string>("vodka"));
  CHECK(!f[Category::Intoxication]);
  CHECK(!f[Category::Preillness]);
}

TEST_CASE("lexicon file round trip and validation") {
  const auto& lex = default_lexicon();
  std::istringstream in(format_lexicon(lex));
  const auto back = parse_lexicon(in);
  for (std::size_t i = 0; i < kCategoryCount; ++i) CHECK(back.categories[i].keywords == lex.categories[i].keywords);
  CHECK(back.lex.negation_words == lex.lex.negation_words);
  // cannabis is listed under two categories
  CHECK(!lex.warnings.empty());

  std::istringstream bad("[settings]\nnegation_window = 0\n");
  CHECK_THROWS_AS(parse_lexicon(bad), Error);
}

TEST_CASE("word count skips stop words and sorts by count") {
  const auto& lex = default_lexicon();
  std::vector<std::vector<Token>> corpus{tokenize("the alcohol and the vodka"), tokenize("alcohol again")};
  const auto wc = word_count(corpus, lex.lex, 1);
  REQUIRE(wc.size() == 3);
  CHECK(wc[0] == WordCount{"alcohol", 2});
  CHECK(wc[1] == WordCount{"again", 1});
  CHECK(wc[2] == WordCount{"vodka", 1});
}
