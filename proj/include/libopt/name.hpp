#pragma once

#include <algorithm>
#include <compare>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "libopt/error.hpp"

namespace libopt {

/// True for the characters of the word pattern `[a-zA-Z0-9_]`.
constexpr bool is_word_char(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

constexpr bool is_word(std::string_view text) noexcept {
  return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return is_word_char(c); });
}

constexpr bool is_blank(char c) noexcept { return c == ' ' || c == '\t'; }

constexpr bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_blanks(std::string_view text) noexcept {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

/// Drops everything from the first `#` on.
inline std::string_view strip_comment(std::string_view text) noexcept {
  auto hash = text.find('#');
  return hash == std::string_view::npos ? text : text.substr(0, hash);
}

/// A solver, collection, subcollection, problem or token name.
///
/// Names match the word pattern; construction from text that does not
/// throws ParseError, so a live Name is always valid.
class Name {
 public:
  Name() = delete;

  explicit Name(std::string_view text) : text_(text) {
    if (!is_word(text_)) throw ParseError("invalid name '" + text_ + "' (expected [a-zA-Z0-9_]+)");
  }

  static std::optional<Name> try_parse(std::string_view text) {
    if (!is_word(text)) return std::nullopt;
    return Name(text);
  }

  const std::string& str() const noexcept { return text_; }
  operator std::string_view() const noexcept { return text_; }

  friend auto operator<=>(const Name&, const Name&) = default;
  friend bool operator==(const Name&, const Name&) = default;
  friend bool operator==(const Name& a, std::string_view b) noexcept { return a.text_ == b; }

  friend std::ostream& operator<<(std::ostream& os, const Name& n) { return os << n.text_; }

 private:
  std::string text_;
};

/// A tag appended to a solver name with a dot: nonempty, no `%`, blank or `#`.
constexpr bool is_valid_tag(std::string_view tag) noexcept {
  if (tag.empty()) return false;
  return std::none_of(tag.begin(), tag.end(), [](char c) { return c == '%' || c == '#' || is_space(c); });
}

/// A solver name with its optional variant tag, written `solver[.tag]`.
struct SolverId {
  Name solver;
  std::optional<std::string> tag;

  explicit SolverId(Name s, std::optional<std::string> t = std::nullopt) : solver(std::move(s)), tag(std::move(t)) {
    if (tag && !is_valid_tag(*tag)) throw ParseError("invalid tag '" + *tag + "'");
  }

  /// Splits at the first dot only: `s.t1.t2` is solver `s`, tag `t1.t2`.
  static SolverId parse(std::string_view text) {
    auto dot = text.find('.');
    if (dot == std::string_view::npos) return SolverId(Name(text));
    auto tag = text.substr(dot + 1);
    if (!is_valid_tag(tag)) throw ParseError("invalid tag '" + std::string(tag) + "' in '" + std::string(text) + "'");
    return SolverId(Name(text.substr(0, dot)), std::string(tag));
  }

  std::string text() const { return tag ? solver.str() + "." + *tag : solver.str(); }

  friend auto operator<=>(const SolverId&, const SolverId&) = default;
  friend bool operator==(const SolverId&, const SolverId&) = default;
};

}  // namespace libopt

template <>
struct std::hash<libopt::Name> {
  std::size_t operator()(const libopt::Name& n) const noexcept { return std::hash<std::string>{}(n.str()); }
};
