#include "lamner/lexer.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>

#include "lamner/error.hpp"

namespace lamner {

namespace {

constexpr std::array<std::string_view, kEntityLabelCount> kLabelNames = {
    "modifier",   "class",          "function",         "object",   "return-type",
    "body-start-delimiter",         "body-end-delimiter",           "eol",
    "other-separator",              "number",           "string",   "data-type",
    "boolean",    "operator",       "loop",             "keyword",  "conditional",
    "annotation",
};

const std::unordered_set<std::string_view> kReserved = {
    "abstract", "assert",     "boolean",   "break",     "byte",       "case",
    "catch",    "char",       "class",     "const",     "continue",   "default",
    "do",       "double",     "else",      "enum",      "extends",    "final",
    "finally",  "float",      "for",       "goto",      "if",         "implements",
    "import",   "instanceof", "int",       "interface", "long",       "native",
    "new",      "package",    "private",   "protected", "public",     "return",
    "short",    "static",     "strictfp",  "super",     "switch",     "synchronized",
    "this",     "throw",      "throws",    "transient", "try",        "void",
    "volatile", "while",      "true",      "false",     "null",
};

const std::unordered_set<std::string_view> kModifiers = {
    "public", "private",      "protected", "static",    "final",    "abstract",
    "synchronized", "native", "transient", "volatile",  "strictfp",
};

const std::unordered_set<std::string_view> kDataTypes = {
    "boolean", "byte", "char", "short", "int", "long", "float", "double",
};

const std::unordered_set<std::string_view> kLoops = {"for", "while", "do"};
const std::unordered_set<std::string_view> kConditionals = {"if", "else", "switch", "case"};

// Longest first so that greedy matching picks ">>>=" over ">>".
constexpr std::array<std::string_view, 39> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=",
    ">=",   "+=",  "-=",  "*=",  "/=", "&=", "|=", "^=", "%=", "<<", ">>", "+",  "-",
    "*",    "/",   "%",   "=",   "<",  ">",  "!",  "~",  "?",  ":",  "&",  "|",  "^",
};

bool ident_start(unsigned char c) {
  return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80;
}
bool ident_part(unsigned char c) { return ident_start(c) || std::isdigit(c); }

class Scanner {
 public:
  explicit Scanner(std::string_view src) : src_(src) {}

  // Advances past whitespace and comments. Returns false at end of input.
  bool skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '/' && peek(1) == '*') {
        const std::size_t close = src_.find("*/", pos_ + 2);
        if (close == std::string_view::npos) throw LexError("unterminated block comment", pos_);
        pos_ = close + 2;
      } else {
        return true;
      }
    }
    return false;
  }

  CodeToken next() {
    const std::size_t start = pos_;
    const auto c = static_cast<unsigned char>(src_[pos_]);
    TokenKind kind;
    if (ident_start(c)) {
      while (pos_ < src_.size() && ident_part(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      kind = kReserved.contains(src_.substr(start, pos_ - start)) ? TokenKind::kKeyword
                                                                 : TokenKind::kIdentifier;
    } else if (std::isdigit(c) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      scan_number();
      kind = TokenKind::kNumber;
    } else if (c == '"') {
      scan_string();
      kind = TokenKind::kString;
    } else if (c == '\'') {
      scan_quoted('\'', "unterminated character literal");
      kind = TokenKind::kString;
    } else if (c == '@' && pos_ + 1 < src_.size() &&
               ident_start(static_cast<unsigned char>(src_[pos_ + 1]))) {
      ++pos_;
      while (pos_ < src_.size() && ident_part(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      kind = TokenKind::kAnnotation;
    } else if (src_.substr(pos_, 3) == "...") {
      pos_ += 3;
      kind = TokenKind::kSeparator;
    } else if (std::string_view("(){}[];,.@").find(static_cast<char>(c)) != std::string_view::npos) {
      ++pos_;
      kind = TokenKind::kSeparator;
    } else if (auto op = match_operator()) {
      pos_ += op->size();
      kind = TokenKind::kOperator;
    } else {
      ++pos_;
      kind = TokenKind::kUnknown;
    }
    CodeToken tok;
    tok.text = std::string(src_.substr(start, pos_ - start));
    tok.start = start;
    tok.end = pos_;
    tok.kind = kind;
    return tok;
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  std::optional<std::string_view> match_operator() const {
    const std::string_view rest = src_.substr(pos_);
    for (std::string_view op : kOperators) {
      if (rest.starts_with(op)) return op;
    }
    return std::nullopt;
  }

  void scan_number() {
    auto at = [&](std::size_t i) { return static_cast<unsigned char>(i < src_.size() ? src_[i] : 0); };
    if (at(pos_) == '0' && (at(pos_ + 1) == 'x' || at(pos_ + 1) == 'X')) {
      pos_ += 2;
      while (std::isxdigit(at(pos_)) || at(pos_) == '_' || at(pos_) == '.') ++pos_;
      if (at(pos_) == 'p' || at(pos_) == 'P') {
        ++pos_;
        if (at(pos_) == '+' || at(pos_) == '-') ++pos_;
        while (std::isdigit(at(pos_))) ++pos_;
      }
    } else if (at(pos_) == '0' && (at(pos_ + 1) == 'b' || at(pos_ + 1) == 'B')) {
      pos_ += 2;
      while (at(pos_) == '0' || at(pos_) == '1' || at(pos_) == '_') ++pos_;
    } else {
      while (std::isdigit(at(pos_)) || at(pos_) == '_') ++pos_;
      if (at(pos_) == '.' && std::isdigit(at(pos_ + 1))) {
        ++pos_;
        while (std::isdigit(at(pos_)) || at(pos_) == '_') ++pos_;
      } else if (at(pos_) == '.' && !ident_start(at(pos_ + 1)) && at(pos_ + 1) != '.') {
        ++pos_;  // "1." is a valid double literal
      }
      if (at(pos_) == 'e' || at(pos_) == 'E') {
        std::size_t p = pos_ + 1;
        if (at(p) == '+' || at(p) == '-') ++p;
        if (std::isdigit(at(p))) {
          pos_ = p;
          while (std::isdigit(at(pos_))) ++pos_;
        }
      }
    }
    if (std::string_view("lLfFdD").find(static_cast<char>(at(pos_))) != std::string_view::npos &&
        at(pos_) != 0) {
      ++pos_;
    }
  }

  void scan_string() {
    if (src_.substr(pos_, 3) == "\"\"\"") {
      const std::size_t start = pos_;
      pos_ += 3;
      while (pos_ < src_.size()) {
        if (src_[pos_] == '\\') {
          pos_ += 2;
        } else if (src_.substr(pos_, 3) == "\"\"\"") {
          pos_ += 3;
          return;
        } else {
          ++pos_;
        }
      }
      throw LexError("unterminated text block", start);
    }
    scan_quoted('"', "unterminated string literal");
  }

  void scan_quoted(char quote, const char* message) {
    const std::size_t start = pos_;
    ++pos_;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\\') {
        pos_ += 2;
      } else if (c == quote) {
        ++pos_;
        return;
      } else if (c == '\n') {
        break;
      } else {
        ++pos_;
      }
    }
    throw LexError(message, start);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool next_is_paren(const std::vector<CodeToken>& tokens, std::size_t i) {
  return i + 1 < tokens.size() && tokens[i + 1].text == "(";
}

bool class_shaped(const std::vector<CodeToken>& tokens, std::size_t i) {
  const CodeToken& t = tokens[i];
  return t.kind == TokenKind::kIdentifier && std::isupper(static_cast<unsigned char>(t.text[0])) &&
         !next_is_paren(tokens, i);
}

int angle_weight(std::string_view text) {
  if (text == ">") return 1;
  if (text == ">>") return 2;
  if (text == ">>>") return 3;
  if (text == "<") return -1;
  return 0;
}

// Index of the identifier in the method header's return-type position: the
// outer type name before the method name, skipping array brackets and
// generic arguments.
std::optional<std::size_t> find_return_type(const std::vector<CodeToken>& tokens) {
  std::size_t header_end = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].text == "{" || tokens[i].text == ";") {
      header_end = i;
      break;
    }
  }
  if (header_end == tokens.size()) return std::nullopt;

  std::optional<std::size_t> name;
  for (std::size_t i = 0; i + 1 < header_end; ++i) {
    if (tokens[i].kind == TokenKind::kIdentifier && tokens[i + 1].text == "(") {
      name = i;
      break;
    }
  }
  if (!name || *name == 0) return std::nullopt;

  std::ptrdiff_t j = static_cast<std::ptrdiff_t>(*name) - 1;
  while (j >= 1 && tokens[j].text == "]" && tokens[j - 1].text == "[") j -= 2;
  if (j >= 0 && angle_weight(tokens[j].text) > 0) {
    int depth = 0;
    for (; j >= 0; --j) {
      depth += angle_weight(tokens[j].text);
      if (depth == 0) break;
    }
    if (j < 0) return std::nullopt;
    --j;
  }
  if (j < 0 || tokens[j].kind != TokenKind::kIdentifier) return std::nullopt;

  if (j > 0) {
    const CodeToken& before = tokens[j - 1];
    const bool header_prefix = (before.kind == TokenKind::kKeyword && kModifiers.contains(before.text)) ||
                               before.kind == TokenKind::kAnnotation || before.text == ">" ||
                               before.text == ")";
    if (!header_prefix) return std::nullopt;
  }
  return static_cast<std::size_t>(j);
}

EntityLabel keyword_label(std::string_view text) {
  if (text == "true" || text == "false") return EntityLabel::kBoolean;
  if (kModifiers.contains(text)) return EntityLabel::kModifier;
  if (kDataTypes.contains(text)) return EntityLabel::kDataType;
  if (kLoops.contains(text)) return EntityLabel::kLoop;
  if (kConditionals.contains(text)) return EntityLabel::kConditional;
  return EntityLabel::kKeyword;
}

EntityLabel separator_label(std::string_view text) {
  if (text == "{") return EntityLabel::kBodyStartDelimiter;
  if (text == "}") return EntityLabel::kBodyEndDelimiter;
  if (text == ";") return EntityLabel::kEol;
  return EntityLabel::kOtherSeparator;
}

}  // namespace

std::string_view label_name(EntityLabel label) {
  return kLabelNames[static_cast<std::size_t>(label)];
}

std::optional<EntityLabel> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return static_cast<EntityLabel>(i);
  }
  return std::nullopt;
}

const std::array<EntityLabel, kEntityLabelCount>& all_labels() {
  static const auto labels = [] {
    std::array<EntityLabel, kEntityLabelCount> out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<EntityLabel>(i);
    return out;
  }();
  return labels;
}

TokenizedMethod tokenize(std::string source) {
  TokenizedMethod method;
  method.source = std::move(source);
  Scanner scanner(method.source);
  while (scanner.skip_trivia()) method.tokens.push_back(scanner.next());
  return method;
}

std::string strip_comments(std::string_view source) {
  std::string out;
  out.reserve(source.size());
  std::size_t i = 0;
  while (i < source.size()) {
    const char c = source[i];
    if (c == '"' || c == '\'') {
      // Copy literals verbatim so comment markers inside them survive.
      const bool block = source.substr(i, 3) == "\"\"\"";
      std::size_t j = i + (block ? 3 : 1);
      while (j < source.size()) {
        if (source[j] == '\\') {
          j += 2;
        } else if (block ? source.substr(j, 3) == "\"\"\"" : source[j] == c) {
          j += block ? 3 : 1;
          break;
        } else if (!block && source[j] == '\n') {
          break;
        } else {
          ++j;
        }
      }
      j = std::min(j, source.size());
      out.append(source.substr(i, j - i));
      i = j;
    } else if (c == '/' && i + 1 < source.size() && source[i + 1] == '/') {
      while (i < source.size() && source[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < source.size() && source[i + 1] == '*') {
      const std::size_t close = source.find("*/", i + 2);
      i = close == std::string_view::npos ? source.size() : close + 2;
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

void ClassIndex::add(const TokenizedMethod& method) {
  for (std::size_t i = 0; i < method.tokens.size(); ++i) {
    if (class_shaped(method.tokens, i)) names_.insert(lower(method.tokens[i].text));
  }
}

bool ClassIndex::contains_case_insensitive(std::string_view identifier) const {
  return names_.contains(lower(identifier));
}

TokenizedMethod label(TokenizedMethod method, const ClassIndex* corpus) {
  ClassIndex local;
  local.add(method);
  auto& tokens = method.tokens;
  const std::optional<std::size_t> return_type = find_return_type(tokens);

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    CodeToken& t = tokens[i];
    switch (t.kind) {
      case TokenKind::kNumber:
        t.label = EntityLabel::kNumber;
        break;
      case TokenKind::kString:
        t.label = EntityLabel::kString;
        break;
      case TokenKind::kSeparator:
        t.label = separator_label(t.text);
        break;
      case TokenKind::kOperator:
        t.label = EntityLabel::kOperator;
        break;
      case TokenKind::kKeyword:
        t.label = keyword_label(t.text);
        break;
      case TokenKind::kAnnotation:
        t.label = EntityLabel::kAnnotation;
        break;
      case TokenKind::kIdentifier:
        if (return_type && *return_type == i) {
          t.label = EntityLabel::kReturnType;
        } else if (next_is_paren(tokens, i)) {
          const bool has_class = local.contains_case_insensitive(t.text) ||
                                 (corpus && corpus->contains_case_insensitive(t.text));
          t.label = has_class ? EntityLabel::kObject : EntityLabel::kFunction;
        } else if (std::isupper(static_cast<unsigned char>(t.text[0]))) {
          t.label = EntityLabel::kClass;
        } else {
          t.label = EntityLabel::kObject;
        }
        break;
      case TokenKind::kUnknown:
        std::clog << "warning: unknown token '" << t.text << "' at offset " << t.start
                  << " labeled keyword\n";
        t.label = EntityLabel::kKeyword;
        break;
    }
  }
  return method;
}

TokenizedMethod lex_and_label(std::string source) { return label(tokenize(std::move(source))); }

bool is_numeric_literal(std::string_view text) {
  if (text.empty()) return false;
  const auto c0 = static_cast<unsigned char>(text[0]);
  return std::isdigit(c0) ||
         (c0 == '.' && text.size() > 1 && std::isdigit(static_cast<unsigned char>(text[1])));
}

bool is_string_literal(std::string_view text) {
  return text.size() >= 2 && (text.front() == '"' || text.front() == '\'') &&
         text.back() == text.front();
}

std::string normalize_literal(std::string_view text) {
  if (is_numeric_literal(text)) return "NUM";
  if (is_string_literal(text)) return "STR";
  return std::string(text);
}

std::vector<std::pair<std::string, EntityLabel>> sequence_labels(const TokenizedMethod& method) {
  std::vector<std::pair<std::string, EntityLabel>> out;
  out.reserve(method.tokens.size());
  for (const CodeToken& t : method.tokens) {
    if (!t.label) throw Error("sequence_labels: token '" + t.text + "' is unlabeled");
    out.emplace_back(normalize_literal(t.text), *t.label);
  }
  return out;
}

}  // namespace lamner
