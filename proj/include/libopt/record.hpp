#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "libopt/error.hpp"
#include "libopt/name.hpp"

namespace libopt {

inline constexpr std::string_view kSentinel = "libopt";
inline constexpr std::string_view kInfoToken = "info";

/// Parses a finite decimal real: optional sign, optional fraction,
/// optional `e`/`E` exponent. Locale independent.
inline std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::string_view body = text;
  if (body.front() == '+') {
    body.remove_prefix(1);
    if (body.empty() || body.front() == '-') return std::nullopt;
  }
  // from_chars would also take "inf", "nan" and hex digits in some modes.
  for (char c : body) {
    bool ok = (c >= '0' && c <= '9') || c == '.' || c == 'e' || c == 'E' || c == '-' || c == '+';
    if (!ok) return std::nullopt;
  }
  double value = 0.0;
  auto [end, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (ec != std::errc{} || end != body.data() + body.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

/// Shortest decimal text that parses back to exactly `value`.
inline std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

struct TokenPair {
  Name token;
  double value;

  friend bool operator==(const TokenPair& a, const TokenPair& b) noexcept {
    return a.token == b.token && a.value == b.value;
  }
};

using TokenPairs = std::vector<TokenPair>;

inline const TokenPair* find_token(const TokenPairs& pairs, std::string_view token) noexcept {
  for (const auto& p : pairs)
    if (p.token == token) return &p;
  return nullptr;
}

/// Checks the pair-sequence invariants shared by records and stored values:
/// at least two pairs, unique tokens, exactly one `info`.
inline void check_pairs(const TokenPairs& pairs) {
  if (pairs.size() < 2) throw ParseError("at least two token=number pairs are required");
  std::set<std::string_view> seen;
  for (const auto& p : pairs)
    if (!seen.insert(p.token.str()).second) throw ParseError("duplicate token '" + p.token.str() + "'");
  if (!seen.contains(kInfoToken)) throw ParseError("missing 'info' token");
}

/// One result line: `libopt%solver[.tag]%collection%problem%tok=num%...`.
struct LiboptRecord {
  SolverId solver;
  Name collection;
  Name problem;
  TokenPairs pairs;

  double info() const { return find_token(pairs, kInfoToken)->value; }
  bool success() const { return info() == 0.0; }

  friend bool operator==(const LiboptRecord&, const LiboptRecord&) = default;
};

/// Parses `tok=num` with blanks allowed around either side.
inline TokenPair parse_pair(std::string_view field) {
  auto eq = field.find('=');
  if (eq == std::string_view::npos) throw ParseError("malformed pair '" + std::string(field) + "' (missing '=')");
  auto token = trim_blanks(field.substr(0, eq));
  auto number = trim_blanks(field.substr(eq + 1));
  if (token.empty()) throw ParseError("malformed pair '" + std::string(field) + "' (empty token)");
  if (!is_word(token)) throw ParseError("invalid token '" + std::string(token) + "'");
  auto value = parse_number(number);
  if (!value) throw ParseError("malformed number '" + std::string(number) + "' for token '" + std::string(token) + "'");
  return TokenPair{Name(token), *value};
}

inline LiboptRecord parse_line(std::string_view text) {
  if (text.find('\n') != std::string_view::npos) throw ParseError("embedded newline in Libopt line");
  text = strip_comment(text);

  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pct = text.find('%', start);
    fields.push_back(trim_blanks(text.substr(start, pct == std::string_view::npos ? std::string_view::npos : pct - start)));
    if (pct == std::string_view::npos) break;
    start = pct + 1;
  }

  if (fields.front() != kSentinel) throw ParseError("missing 'libopt' sentinel");
  if (fields.size() < 4) throw ParseError("expected solver, collection and problem fields");

  auto solver = SolverId::parse(fields[1]);
  Name collection(fields[2]);
  Name problem(fields[3]);

  TokenPairs pairs;
  pairs.reserve(fields.size() - 4);
  for (std::size_t i = 4; i < fields.size(); ++i) pairs.push_back(parse_pair(fields[i]));
  check_pairs(pairs);

  return LiboptRecord{std::move(solver), std::move(collection), std::move(problem), std::move(pairs)};
}

inline std::string serialize_pairs(const TokenPairs& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    if (!out.empty()) out += '%';
    out += p.token.str();
    out += '=';
    out += format_number(p.value);
  }
  return out;
}

inline std::string serialize(const LiboptRecord& r) {
  std::string out(kSentinel);
  out += '%';
  out += r.solver.text();
  out += '%';
  out += r.collection.str();
  out += '%';
  out += r.problem.str();
  out += '%';
  out += serialize_pairs(r.pairs);
  return out;
}

/// Token sets and store location from the startup file. Absent sets mean
/// "no verification".
struct TokenConfig {
  std::optional<std::set<std::string>> valid_tokens;
  std::optional<std::set<std::string>> performance_tokens;
  std::optional<std::filesystem::path> store_path;
};

struct TokenIssue {
  std::string token;
  std::string message;
};

/// Reports every offending token; never stops at the first.
///
/// With `valid_tokens` configured, each pair token must be listed. With
/// `performance_tokens` configured, the record must carry at least one
/// performance pair, and on a successful run those values must be positive.
inline std::vector<TokenIssue> validate_tokens(const LiboptRecord& record, const TokenConfig& config) {
  std::vector<TokenIssue> issues;
  if (config.valid_tokens) {
    for (const auto& p : record.pairs)
      if (!config.valid_tokens->contains(p.token.str()))
        issues.push_back({p.token.str(), "unknown token '" + p.token.str() + "'"});
  }
  if (config.performance_tokens) {
    bool any = false;
    for (const auto& p : record.pairs) {
      if (!config.performance_tokens->contains(p.token.str())) continue;
      any = true;
      if (record.success() && p.value <= 0.0)
        issues.push_back({p.token.str(), "performance token '" + p.token.str() + "' must be positive, got " +
                                             format_number(p.value)});
    }
    if (!any) issues.push_back({"", "no performance token in line"});
  }
  return issues;
}

/// True when the line looks like it was meant to be a Libopt line.
inline bool has_sentinel(std::string_view line) {
  line = trim_blanks(line);
  if (!line.starts_with(kSentinel)) return false;
  return trim_blanks(line.substr(kSentinel.size())).starts_with('%');
}

struct FilterWarning {
  std::size_t line_number;
  std::string line;
  std::string message;
};

/// Rewrites one output line. Returns the parsed record when the line is a
/// Libopt line; the line is then replaced by its tagged form.
inline std::optional<LiboptRecord> filter_line(std::string& line, const std::optional<std::string>& tag) {
  LiboptRecord record = parse_line(line);
  if (tag) {
    record.solver.tag = record.solver.tag ? *record.solver.tag + "." + *tag : *tag;
    // Only the solver field changes; blanks and comments elsewhere stay.
    auto first = line.find('%');
    auto second = line.find('%', first + 1);
    auto field = std::string_view(line).substr(first + 1, second - first - 1);
    auto lead = field.find_first_not_of(" \t");
    auto body = trim_blanks(field);
    line.insert(first + 1 + lead + body.size(), "." + *tag);
  }
  return record;
}

struct FilterResult {
  std::vector<LiboptRecord> records;
  std::vector<FilterWarning> warnings;
};

/// Streams `input` to `sink` line by line, appending `.tag` to the solver
/// field of every Libopt line. Other lines pass through untouched; a line
/// that starts like a Libopt line but fails to parse is passed through and
/// reported as a warning.
inline FilterResult filter_stream(std::istream& input, const std::optional<std::string>& tag,
                                  const std::function<void(std::string_view)>& sink) {
  FilterResult result;
  std::string line;
  std::size_t number = 0;
  while (std::getline(input, line)) {
    ++number;
    if (has_sentinel(line)) {
      try {
        result.records.push_back(*filter_line(line, tag));
      } catch (const ParseError& e) {
        result.warnings.push_back({number, line, e.what()});
      }
    }
    sink(line);
  }
  return result;
}

/// Reads a `.lbt` results file: one Libopt line per line, `#` comments and
/// blank lines allowed. Non-Libopt lines are collected as errors with their
/// line numbers rather than thrown.
struct LbtEntry {
  std::size_t line_number;
  std::optional<LiboptRecord> record;
  std::string error;
  std::string text;
};

inline std::vector<LbtEntry> read_lbt(std::istream& in) {
  std::vector<LbtEntry> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_blanks(strip_comment(line)).empty()) continue;
    LbtEntry entry{number, std::nullopt, {}, line};
    try {
      entry.record = parse_line(line);
    } catch (const ParseError& e) {
      entry.error = e.what();
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace libopt
