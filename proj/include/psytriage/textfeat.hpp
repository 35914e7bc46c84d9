#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psytriage/core.hpp"

namespace psytriage {

struct Token {
  std::string text;       // empty for sentence boundaries
  bool boundary = false;  // true for a sentence boundary marker (. ! ? ;)

  static Token word(std::string t) { return {std::move(t), false}; }
  static Token end_of_sentence() { return {{}, true}; }
  friend bool operator==(const Token&, const Token&) = default;
};

/// Lowercases, splits on whitespace and punctuation, drops punctuation
/// (quotes and brackets included) and records sentence boundaries. A '.'
/// between two digits stays inside the number. Consecutive boundaries
/// collapse and no boundary is emitted before the first word.
std::vector<Token> tokenize(std::string_view text);

/// Words only, boundaries removed.
std::vector<std::string> words(std::span<const Token> tokens);

struct KeywordCategory {
  Category category;
  /// Lowercase keywords; phrases are space-separated words.
  std::vector<std::string> keywords;
};

struct Lexicons {
  std::set<std::string> stop_words;
  std::set<std::string> negation_words;
  int negation_window = 3;
  bool stemming = false;
};

/// Categories and lexicons as loaded from a lexicon file.
struct Lexicon {
  Lexicons lex;
  std::array<KeywordCategory, kCategoryCount> categories;
  /// Non-fatal findings such as keywords listed under more than one category.
  std::vector<std::string> warnings;

  const KeywordCategory& category(Category c) const {
    return categories[static_cast<std::size_t>(c)];
  }
};

/// Built-in lexicon: the category keyword table in English, default stop
/// words and English/German negation words.
const Lexicon& default_lexicon();
/// Text of the built-in lexicon in lexicon-file format.
std::string_view default_lexicon_text();

/// Lexicon file format (UTF-8 text, '#' starts a comment, blank lines ignored):
///
///   [settings]
///   negation_window = 3
///   stemming = false
///   [stop_words]
///   patient
///   [negation_words]
///   not
///   [category preillness]
///   depression
///   ...
///
/// One entry per line; phrases are written with single spaces. All five
/// categories must be present. Entries are lowercased and deduplicated within
/// a section. Throws Parse or InvalidConfig.
Lexicon parse_lexicon(std::istream& in);
Lexicon load_lexicon(const std::filesystem::path& path);
std::string format_lexicon(const Lexicon& lexicon);

/// Validates the invariants (non-empty categories, window >= 1, stop and
/// negation words disjoint from keywords) and refreshes warnings.
void validate_lexicon(Lexicon& lexicon);

/// Optional suffix stripper applied when Lexicons::stemming is set.
std::string light_stem(std::string_view word);

struct WordCount {
  std::string word;
  std::size_t count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

/// Counts non-stop-word tokens; keeps counts >= min_count, sorted by count
/// descending then word ascending.
std::vector<WordCount> word_count(const std::vector<std::vector<Token>>& corpus,
                                  const Lexicons& lex, std::size_t min_count = 50);

/// First unnegated occurrence of any category keyword. At a given position the
/// longest matching phrase wins. A match is suppressed when a negation word
/// occurs within negation_window tokens before it in the same sentence.
std::optional<std::string> match_category(std::span<const Token> tokens, const KeywordCategory& cat,
                                          const Lexicons& lex);

/// Tokens of all notes in order, with a sentence boundary between notes.
std::vector<Token> tokenize_notes(const std::vector<std::string>& notes);

TextFeatures extract_features(const RescueRecord& record, const Lexicon& lexicon);

}  // namespace psytriage
