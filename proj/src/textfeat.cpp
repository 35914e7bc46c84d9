#include "psytriage/textfeat.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "text_util.hpp"

namespace psytriage {

namespace {

enum class CharClass { Word, Separator, Boundary };

// Classifies the code point starting at s[i] and sets its byte length.
CharClass classify(std::string_view s, std::size_t i, std::size_t& len) {
  const auto c = static_cast<unsigned char>(s[i]);
  len = 1;
  if (c < 0x80) {
    if (std::isalnum(c)) return CharClass::Word;
    if (c == '.' || c == '!' || c == '?' || c == ';') return CharClass::Boundary;
    return CharClass::Separator;
  }
  if ((c & 0xE0) == 0xC0) len = 2;
  else if ((c & 0xF0) == 0xE0) len = 3;
  else if ((c & 0xF8) == 0xF0) len = 4;
  len = std::min(len, s.size() - i);
  // U+0080..U+00BF: Latin-1 punctuation and symbols (« » ¡ ¿ ° ...)
  if (c == 0xC2) return CharClass::Separator;
  // U+2000..U+206F: general punctuation (typographic quotes, dashes, ellipsis)
  if (c == 0xE2 && len == 3) {
    const auto n = static_cast<unsigned char>(s[i + 1]);
    if (n == 0x80 || n == 0x81) {
      if (n == 0x80 && static_cast<unsigned char>(s[i + 2]) == 0xA6) return CharClass::Boundary;
      return CharClass::Separator;
    }
  }
  return CharClass::Word;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::vector<std::string> keyword_words(const std::string& keyword, bool stem) {
  auto parts = detail::split(keyword, ' ');
  if (stem)
    for (auto& p : parts) p = light_stem(p);
  return parts;
}

std::string normalize_entry(std::string_view raw) {
  return detail::join(words(tokenize(raw)), " ");
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(Token::word(detail::lower_utf8(current)));
      current.clear();
    }
  };
  auto boundary = [&] {
    flush();
    if (!out.empty() && !out.back().boundary) out.push_back(Token::end_of_sentence());
  };
  for (std::size_t i = 0; i < text.size();) {
    std::size_t len = 1;
    const CharClass cls = classify(text, i, len);
    if (cls == CharClass::Word) {
      current.append(text.substr(i, len));
    } else if (cls == CharClass::Boundary) {
      const bool decimal = text[i] == '.' && !current.empty() && is_digit(current.back()) &&
                           i + 1 < text.size() && is_digit(text[i + 1]);
      if (decimal) current.push_back('.');
      else boundary();
    } else {
      flush();
    }
    i += len;
  }
  flush();
  return out;
}

std::vector<std::string> words(std::span<const Token> tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (!t.boundary) out.push_back(t.text);
  return out;
}

std::string light_stem(std::string_view word) {
  std::string w(word);
  auto strip = [&](std::string_view suffix, std::size_t min_stem) {
    if (w.size() >= suffix.size() + min_stem && w.ends_with(suffix)) {
      w.erase(w.size() - suffix.size());
      return true;
    }
    return false;
  };
  if (strip("ing", 3) || strip("ed", 3) || strip("es", 3)) return w;
  if (!w.ends_with("ss")) strip("s", 3);
  return w;
}

// ---------------------------------------------------------------------------

Lexicon parse_lexicon(std::istream& in) {
  Lexicon lexicon;
  std::array<bool, kCategoryCount> seen{};
  for (std::size_t i = 0; i < kCategoryCount; ++i) lexicon.categories[i].category = kAllCategories[i];

  enum class Section { None, Settings, Stop, Negation, Category } section = Section::None;
  std::size_t current = 0;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::Parse, "lexicon line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      const std::string name = detail::trim(line.substr(1, line.size() - 2));
      if (name == "settings") section = Section::Settings;
      else if (name == "stop_words") section = Section::Stop;
      else if (name == "negation_words") section = Section::Negation;
      else if (name.rfind("category", 0) == 0) {
        auto cat = parse_category(detail::trim(name.substr(8)));
        if (!cat) fail("unknown category '" + name.substr(8) + "'");
        current = static_cast<std::size_t>(*cat);
        if (seen[current]) fail("category listed twice");
        seen[current] = true;
        section = Section::Category;
      } else {
        fail("unknown section '" + name + "'");
      }
      continue;
    }
    switch (section) {
      case Section::None:
        fail("entry outside a section");
        break;
      case Section::Settings: {
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::lower_ascii(detail::trim(line.substr(eq + 1)));
        if (key == "negation_window") {
          try {
            lexicon.lex.negation_window = std::stoi(value);
          } catch (const std::exception&) {
            fail("negation_window must be an integer");
          }
        } else if (key == "stemming") {
          if (value != "true" && value != "false") fail("stemming must be true or false");
          lexicon.lex.stemming = value == "true";
        } else {
          fail("unknown setting '" + key + "'");
        }
        break;
      }
      case Section::Stop: lexicon.lex.stop_words.insert(normalize_entry(line)); break;
      case Section::Negation: lexicon.lex.negation_words.insert(normalize_entry(line)); break;
      case Section::Category: {
        auto& kws = lexicon.categories[current].keywords;
        std::string kw = normalize_entry(line);
        if (kw.empty()) fail("keyword has no word characters");
        if (std::find(kws.begin(), kws.end(), kw) == kws.end()) kws.push_back(std::move(kw));
        break;
      }
    }
  }
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    if (!seen[i])
      throw Error(ErrorCode::Parse,
                  "lexicon lacks [category " + std::string(category_id(kAllCategories[i])) + "]");
  validate_lexicon(lexicon);
  return lexicon;
}

void validate_lexicon(Lexicon& lexicon) {
  if (lexicon.lex.negation_window < 1)
    throw Error(ErrorCode::InvalidConfig, "negation_window must be >= 1");
  lexicon.warnings.clear();
  std::map<std::string, std::vector<Category>> owners;
  for (const auto& cat : lexicon.categories) {
    if (cat.keywords.empty())
      throw Error(ErrorCode::InvalidConfig,
                  "category " + std::string(category_id(cat.category)) + " has no keywords");
    for (const auto& kw : cat.keywords) {
      if (kw != detail::lower_utf8(kw))
        throw Error(ErrorCode::InvalidConfig, "keyword '" + kw + "' is not lowercase");
      if (lexicon.lex.stop_words.contains(kw))
        throw Error(ErrorCode::InvalidConfig, "keyword '" + kw + "' is also a stop word");
      if (lexicon.lex.negation_words.contains(kw))
        throw Error(ErrorCode::InvalidConfig, "keyword '" + kw + "' is also a negation word");
      owners[kw].push_back(cat.category);
    }
  }
  for (const auto& [kw, cats] : owners) {
    if (cats.size() < 2) continue;
    std::string msg = "keyword '" + kw + "' appears in several categories:";
    for (auto c : cats) msg += " " + std::string(category_id(c));
    lexicon.warnings.push_back(std::move(msg));
  }
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open lexicon " + path.string());
  return parse_lexicon(in);
}

const Lexicon& default_lexicon() {
  static const Lexicon lexicon = [] {
    std::istringstream in{std::string(default_lexicon_text())};
    return parse_lexicon(in);
  }();
  return lexicon;
}

std::string format_lexicon(const Lexicon& lexicon) {
  std::ostringstream out;
  out << "[settings]\nnegation_window = " << lexicon.lex.negation_window
      << "\nstemming = " << (lexicon.lex.stemming ? "true" : "false") << "\n\n[stop_words]\n";
  for (const auto& w : lexicon.lex.stop_words) out << w << '\n';
  out << "\n[negation_words]\n";
  for (const auto& w : lexicon.lex.negation_words) out << w << '\n';
  for (const auto& cat : lexicon.categories) {
    out << "\n[category " << category_id(cat.category) << "]\n";
    for (const auto& kw : cat.keywords) out << kw << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<WordCount> word_count(const std::vector<std::vector<Token>>& corpus, const Lexicons& lex,
                                  std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus)
    for (const auto& t : doc)
      if (!t.boundary && !lex.stop_words.contains(t.text)) ++counts[t.text];
  std::vector<WordCount> out;
  for (auto& [w, n] : counts)
    if (n >= min_count) out.push_back({w, n});
  std::stable_sort(out.begin(), out.end(),
                   [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
  return out;
}

std::optional<std::string> match_category(std::span<const Token> tokens, const KeywordCategory& cat,
                                          const Lexicons& lex) {
  std::vector<std::vector<std::string>> phrases;
  phrases.reserve(cat.keywords.size());
  for (const auto& kw : cat.keywords) phrases.push_back(keyword_words(kw, lex.stemming));

  std::vector<std::string> text;
  text.reserve(tokens.size());
  for (const auto& t : tokens) text.push_back(lex.stemming && !t.boundary ? light_stem(t.text) : t.text);

  auto negated = [&](std::size_t start) {
    int seen = 0;
    for (std::size_t j = start; j > 0 && seen < lex.negation_window; --j) {
      const Token& prev = tokens[j - 1];
      if (prev.boundary) return false;
      if (lex.negation_words.contains(prev.text)) return true;
      ++seen;
    }
    return false;
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].boundary) continue;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < phrases.size(); ++k) {
      const auto& p = phrases[k];
      if (i + p.size() > tokens.size()) continue;
      bool ok = true;
      for (std::size_t w = 0; w < p.size() && ok; ++w)
        ok = !tokens[i + w].boundary && text[i + w] == p[w];
      if (ok && (!best || p.size() > phrases[*best].size())) best = k;
    }
    if (best && !negated(i)) return cat.keywords[*best];
  }
  return std::nullopt;
}

std::vector<Token> tokenize_notes(const std::vector<std::string>& notes) {
  std::vector<Token> all;
  for (const auto& note : notes) {
    auto t = tokenize(note);
    if (t.empty()) continue;
    if (!all.empty() && !all.back().boundary) all.push_back(Token::end_of_sentence());
    all.insert(all.end(), t.begin(), t.end());
  }
  return all;
}

TextFeatures extract_features(const RescueRecord& record, const Lexicon& lexicon) {
  const auto tokens = tokenize_notes(record.notes);
  TextFeatures tf;
  for (const auto& cat : lexicon.categories) tf[cat.category] = match_category(tokens, cat, lexicon.lex);
  return tf;
}

}  // namespace psytriage
