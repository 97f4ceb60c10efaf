#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lamner {

/// Syntactic entity labels. Identifiers are split into class / function /
/// object / modifier / return-type and separators into the two body
/// delimiters, eol and the residual other-separator.
enum class EntityLabel : std::uint8_t {
  kModifier,
  kClass,
  kFunction,
  kObject,
  kReturnType,
  kBodyStartDelimiter,
  kBodyEndDelimiter,
  kEol,
  kOtherSeparator,
  kNumber,
  kString,
  kDataType,
  kBoolean,
  kOperator,
  kLoop,
  kKeyword,
  kConditional,
  kAnnotation,
};

inline constexpr std::size_t kEntityLabelCount = 18;

std::string_view label_name(EntityLabel label);
std::optional<EntityLabel> parse_label(std::string_view name);
const std::array<EntityLabel, kEntityLabelCount>& all_labels();

/// Raw lexical class assigned by the tokenizer.
enum class TokenKind : std::uint8_t {
  kIdentifier,
  kKeyword,
  kNumber,
  kString,     // string, text block or character literal
  kOperator,
  kSeparator,
  kAnnotation, // '@' immediately followed by an identifier
  kUnknown,
};

struct CodeToken {
  std::string text;
  std::size_t start = 0;  // half-open byte span into the source
  std::size_t end = 0;
  TokenKind kind = TokenKind::kUnknown;
  std::optional<EntityLabel> label;
};

struct TokenizedMethod {
  std::string source;
  std::vector<CodeToken> tokens;
};

/// Lexes Java source. Line, block and Javadoc comments are skipped.
/// Throws LexError for unterminated string/char literals and block comments.
TokenizedMethod tokenize(std::string source);

/// Source with comment spans removed and everything else kept verbatim.
std::string strip_comments(std::string_view source);

/// Lower-cased identifiers that look like class names (upper-case initial,
/// not followed by "("), collected over one or more methods.
class ClassIndex {
 public:
  void add(const TokenizedMethod& method);
  bool contains_case_insensitive(std::string_view identifier) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_set<std::string> names_;
};

/// Assigns entity labels by the identifier/separator refinement rules.
/// The method's own class-shaped identifiers are always consulted; `corpus`
/// extends the lookup for object detection when given.
TokenizedMethod label(TokenizedMethod method, const ClassIndex* corpus = nullptr);

/// Tokenize + label in one call, with the method-local class index only.
TokenizedMethod lex_and_label(std::string source);

bool is_numeric_literal(std::string_view text);
bool is_string_literal(std::string_view text);

/// Replacement applied to literal token texts: numbers become NUM, string and
/// character literals become STR; other tokens are returned unchanged.
std::string normalize_literal(std::string_view text);

/// (token text, label) pairs in source order with literal texts normalized.
/// Requires a labeled method.
std::vector<std::pair<std::string, EntityLabel>> sequence_labels(const TokenizedMethod& method);

}  // namespace lamner
