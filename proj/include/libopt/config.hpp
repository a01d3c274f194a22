#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "libopt/error.hpp"
#include "libopt/name.hpp"
#include "libopt/record.hpp"

namespace libopt {

inline constexpr std::string_view kDefaultStoreName = "dtbopt";

/// Contents of the user startup file (`~/.liboptrc`).
struct StartupFile {
  std::optional<std::vector<Name>> tokens;
  std::optional<std::vector<Name>> performance_tokens;
  std::optional<std::filesystem::path> data_base;
  std::filesystem::path source_path;

  TokenConfig token_config() const {
    TokenConfig config;
    auto to_set = [](const std::vector<Name>& names) {
      std::set<std::string> out;
      for (const auto& n : names) out.insert(n.str());
      return out;
    };
    if (tokens) config.valid_tokens = to_set(*tokens);
    if (performance_tokens) config.performance_tokens = to_set(*performance_tokens);
    config.store_path = data_base;
    return config;
  }
};

namespace detail {

inline std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

}  // namespace detail

/// Recognized directives: `tokens = ...`, `performance_tokens = ...`,
/// `data_base = path`. Unknown or repeated directives are errors.
inline StartupFile parse_startup(std::string_view text, std::filesystem::path source = {}) {
  StartupFile file;
  file.source_path = std::move(source);
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    auto line = trim_blanks(strip_comment(raw));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'directive = value'", number);
    auto key = trim_blanks(line.substr(0, eq));
    auto words = detail::split_words(line.substr(eq + 1));

    auto names = [&] {
      std::vector<Name> out;
      for (auto w : words) {
        auto n = Name::try_parse(w);
        if (!n) throw ParseError("invalid token name '" + std::string(w) + "'", number);
        out.push_back(*n);
      }
      return out;
    };

    if (key == "tokens") {
      if (file.tokens) throw ParseError("duplicate 'tokens' directive", number);
      file.tokens = names();
    } else if (key == "performance_tokens") {
      if (file.performance_tokens) throw ParseError("duplicate 'performance_tokens' directive", number);
      file.performance_tokens = names();
    } else if (key == "data_base") {
      if (file.data_base) throw ParseError("duplicate 'data_base' directive", number);
      if (words.size() != 1) throw ParseError("'data_base' takes exactly one file name", number);
      file.data_base = std::filesystem::path(std::string(words.front()));
    } else {
      throw ParseError("unknown directive '" + std::string(key) + "'", number);
    }
  }

  if (file.tokens && file.performance_tokens) {
    for (const auto& p : *file.performance_tokens)
      if (std::find(file.tokens->begin(), file.tokens->end(), p) == file.tokens->end())
        throw ParseError("performance token '" + p.str() + "' is not among the tokens");
  }
  return file;
}

inline std::string serialize_startup(const StartupFile& file) {
  std::string out;
  auto list = [&](std::string_view key, const std::vector<Name>& names) {
    out += key;
    out += " =";
    for (const auto& n : names) out += " " + n.str();
    out += '\n';
  };
  if (file.tokens) list("tokens", *file.tokens);
  if (file.performance_tokens) list("performance_tokens", *file.performance_tokens);
  if (file.data_base) out += "data_base = " + file.data_base->string() + "\n";
  return out;
}

/// Store path priority: command line, then startup file, then
/// `dtbopt` in the working directory.
inline std::filesystem::path resolve_store_path(const std::optional<std::filesystem::path>& cli_arg,
                                                const std::optional<StartupFile>& startup,
                                                const std::filesystem::path& working_dir) {
  if (cli_arg) return *cli_arg;
  if (startup && startup->data_base) return *startup->data_base;
  return working_dir / kDefaultStoreName;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Startup file location: explicit path, else `$LIBOPT_RC`, else
/// `$HOME/.liboptrc`. Returns nullopt when nothing applies.
inline std::optional<std::filesystem::path> locate_startup(const std::optional<std::filesystem::path>& explicit_path,
                                                           const EnvLookup& env) {
  if (explicit_path) return explicit_path;
  if (auto rc = env("LIBOPT_RC"); rc && !rc->empty()) return std::filesystem::path(*rc);
  if (auto home = env("HOME"); home && !home->empty()) return std::filesystem::path(*home) / ".liboptrc";
  return std::nullopt;
}

/// Loads the startup file. A missing file is not an error unless it was
/// named explicitly.
inline std::optional<StartupFile> load_startup(const std::optional<std::filesystem::path>& explicit_path,
                                               const EnvLookup& env) {
  auto path = locate_startup(explicit_path, env);
  if (!path) return std::nullopt;
  std::ifstream in(*path);
  if (!in) {
    bool named = explicit_path.has_value() || env("LIBOPT_RC").has_value();
    if (named) throw Error("cannot read startup file " + path->string());
    return std::nullopt;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_startup(buf.str(), *path);
  } catch (const ParseError& e) {
    throw ParseError(path->string() + ": " + e.what());
  }
}

}  // namespace libopt
