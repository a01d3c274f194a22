#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include <unistd.h>

#include "libopt/error.hpp"
#include "libopt/name.hpp"

namespace libopt {

namespace fs = std::filesystem;

/// Names read from a `.lst` file, duplicates removed (first occurrence kept).
struct ProblemList {
  std::vector<Name> names;
  fs::path source;
  std::vector<std::string> warnings;

  bool contains(const Name& n) const { return std::find(names.begin(), names.end(), n) != names.end(); }
};

/// Whitespace-separated names; `#` comments run to end of line.
inline ProblemList parse_list(std::string_view text, fs::path source = {}) {
  ProblemList list;
  list.source = std::move(source);
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (is_space(c)) {
      if (c == '\n') ++line_no;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j]) && text[j] != '#') ++j;
    auto word = text.substr(i, j - i);
    auto name = Name::try_parse(word);
    if (!name) throw ParseError("invalid name '" + std::string(word) + "'", line_no);
    if (seen.insert(name->str()).second)
      list.names.push_back(*name);
    else
      list.warnings.push_back("duplicate name '" + name->str() + "' ignored");
    i = j;
  }
  return list;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline ProblemList read_list(const fs::path& path) {
  try {
    return parse_list(read_text_file(path), path);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Paths inside the hierarchy rooted at `LIBOPT_DIR`.
struct Layout {
  fs::path root;

  fs::path collections_dir() const { return root / "collections"; }
  fs::path solvers_dir() const { return root / "solvers"; }
  fs::path collections_index() const { return collections_dir() / "collections.lst"; }
  fs::path solvers_index() const { return solvers_dir() / "solvers.lst"; }
  fs::path collection_dir(const Name& coll) const { return collections_dir() / coll.str(); }
  fs::path collection_list(const Name& coll, const Name& subc) const {
    return collection_dir(coll) / (subc.str() + ".lst");
  }
  fs::path solver_dir(const Name& solv) const { return solvers_dir() / solv.str(); }
  fs::path solver_index(const Name& solv) const { return solver_dir(solv) / "collections.lst"; }
  fs::path solver_collection_dir(const Name& solv, const Name& coll) const { return solver_dir(solv) / coll.str(); }
  fs::path solver_list(const Name& solv, const Name& coll, const Name& subc) const {
    return solver_collection_dir(solv, coll) / (subc.str() + ".lst");
  }
  /// The `solv_coll` driver executable.
  fs::path driver(const Name& solv, const Name& coll) const {
    return solver_collection_dir(solv, coll) / (solv.str() + "_" + coll.str());
  }
};

/// First existing file among the working-directory override
/// `coll.subc.lst`, the solver-side list, and the collection-side list.
inline std::optional<fs::path> locate_list(const Name& solver, const Name& collection, const Name& subc,
                                           const fs::path& working_dir, const fs::path& root) {
  Layout layout{root};
  const fs::path candidates[] = {
      working_dir / (collection.str() + "." + subc.str() + ".lst"),
      layout.solver_list(solver, collection, subc),
      layout.collection_list(collection, subc),
  };
  for (const auto& p : candidates) {
    std::error_code ec;
    if (fs::is_regular_file(p, ec)) return p;
  }
  return std::nullopt;
}

/// Sorted names of the subdirectories of `dir` that are valid names.
inline std::vector<std::string> subdirectory_names(const fs::path& dir) {
  std::vector<std::string> names;
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw Error("cannot read directory " + dir.string() + ": " + ec.message());
  for (const auto& entry : it) {
    std::error_code dec;
    if (!entry.is_directory(dec)) continue;
    auto name = entry.path().filename().string();
    if (is_word(name)) names.push_back(std::move(name));
  }
  std::sort(names.begin(), names.end());
  return names;
}

inline std::string format_index(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += n + "\n";
  return out;
}

struct IndexReport {
  std::vector<fs::path> written;
  std::vector<std::string> notes;
};

inline void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error("write failed: " + path.string());
}

/// Regenerates `collections/collections.lst`, `solvers/solvers.lst` and each
/// `solvers/solv/collections.lst` from the directory tree. Missing top-level
/// directories are noted and skipped; `verify` reports them.
inline IndexReport generate_indexes(const fs::path& root, bool dry_run = false) {
  Layout layout{root};
  IndexReport report;
  auto emit = [&](const fs::path& path, const std::vector<std::string>& names) {
    if (!dry_run) write_text_file(path, format_index(names));
    report.written.push_back(path);
  };
  if (fs::is_directory(layout.collections_dir()))
    emit(layout.collections_index(), subdirectory_names(layout.collections_dir()));
  else
    report.notes.push_back("no directory " + layout.collections_dir().string());

  if (fs::is_directory(layout.solvers_dir())) {
    auto solvers = subdirectory_names(layout.solvers_dir());
    emit(layout.solvers_index(), solvers);
    for (const auto& s : solvers) emit(layout.solver_index(Name(s)), subdirectory_names(layout.solver_dir(Name(s))));
  } else {
    report.notes.push_back("no directory " + layout.solvers_dir().string());
  }
  return report;
}

enum class Severity { warning, error };

enum class FindingKind { missing, not_executable, inconsistent, index_mismatch, unreadable, duplicate };

struct Finding {
  Severity severity;
  FindingKind kind;
  fs::path path;
  std::string message;
};

inline std::string_view to_string(Severity s) { return s == Severity::warning ? "warning" : "error"; }

inline bool has_errors(const std::vector<Finding>& findings) {
  return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.severity == Severity::error; });
}

/// Consistency check of the tree. Every problem is returned as a finding;
/// nothing is thrown.
inline std::vector<Finding> verify(const fs::path& root) {
  Layout layout{root};
  std::vector<Finding> findings;
  auto add = [&](Severity s, FindingKind k, fs::path p, std::string m) {
    findings.push_back({s, k, std::move(p), std::move(m)});
  };
  auto missing = [&](const fs::path& p, std::string_view what) {
    add(Severity::error, FindingKind::missing, p, "missing " + std::string(what) + " " + p.string());
  };

  // Reads a list if present; returns nullopt and records a finding otherwise.
  auto load = [&](const fs::path& p, std::string_view what) -> std::optional<ProblemList> {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) {
      missing(p, what);
      return std::nullopt;
    }
    try {
      auto list = read_list(p);
      for (const auto& w : list.warnings) add(Severity::warning, FindingKind::duplicate, p, p.string() + ": " + w);
      return list;
    } catch (const Error& e) {
      add(Severity::error, FindingKind::unreadable, p, e.what());
      return std::nullopt;
    }
  };

  auto check_index = [&](const fs::path& index, const fs::path& dir) {
    auto list = load(index, "index list");
    if (!list) return;
    std::vector<std::string> listed;
    for (const auto& n : list->names) listed.push_back(n.str());
    std::sort(listed.begin(), listed.end());
    std::vector<std::string> actual;
    try {
      actual = subdirectory_names(dir);
    } catch (const Error& e) {
      add(Severity::error, FindingKind::unreadable, dir, e.what());
      return;
    }
    if (listed != actual)
      add(Severity::error, FindingKind::index_mismatch, index,
          index.string() + " does not match the subdirectories of " + dir.string());
  };

  auto subset = [&](const ProblemList& inner, const ProblemList& outer, const fs::path& inner_path,
                    const fs::path& outer_path) {
    for (const auto& n : inner.names)
      if (!outer.contains(n))
        add(Severity::error, FindingKind::inconsistent, inner_path,
            inner_path.string() + ": '" + n.str() + "' is not in " + outer_path.string());
  };

  std::set<std::string> collections;
  if (!fs::is_directory(layout.collections_dir())) {
    missing(layout.collections_dir(), "directory");
    missing(layout.collections_index(), "index list");
  } else {
    check_index(layout.collections_index(), layout.collections_dir());
    for (const auto& c : subdirectory_names(layout.collections_dir())) {
      collections.insert(c);
      Name coll(c);
      auto all_path = layout.collection_list(coll, Name("all"));
      auto def_path = layout.collection_list(coll, Name("default"));
      auto all = load(all_path, "list");
      auto def = load(def_path, "list");
      if (all && def) subset(*def, *all, def_path, all_path);
    }
  }

  if (!fs::is_directory(layout.solvers_dir())) {
    missing(layout.solvers_dir(), "directory");
    missing(layout.solvers_index(), "index list");
    return findings;
  }
  check_index(layout.solvers_index(), layout.solvers_dir());
  for (const auto& s : subdirectory_names(layout.solvers_dir())) {
    Name solv(s);
    check_index(layout.solver_index(solv), layout.solver_dir(solv));
    for (const auto& c : subdirectory_names(layout.solver_dir(solv))) {
      Name coll(c);
      auto dir = layout.solver_collection_dir(solv, coll);
      if (!collections.contains(c))
        add(Severity::error, FindingKind::inconsistent, dir,
            dir.string() + ": collection '" + c + "' is not installed under " + layout.collections_dir().string());

      auto all_path = layout.solver_list(solv, coll, Name("all"));
      auto def_path = layout.solver_list(solv, coll, Name("default"));
      auto all = load(all_path, "list");
      auto def = load(def_path, "list");
      if (all && def) subset(*def, *all, def_path, all_path);

      auto coll_all_path = layout.collection_list(coll, Name("all"));
      std::error_code ec;
      if (all && collections.contains(c) && fs::is_regular_file(coll_all_path, ec)) {
        try {
          subset(*all, read_list(coll_all_path), all_path, coll_all_path);
        } catch (const Error&) {
          // already reported on the collection side
        }
      }

      auto driver = layout.driver(solv, coll);
      if (!fs::is_regular_file(driver, ec))
        missing(driver, "driver");
      else if (::access(driver.c_str(), X_OK) != 0)
        add(Severity::error, FindingKind::not_executable, driver, "driver " + driver.string() + " is not executable");
    }
  }
  return findings;
}

}  // namespace libopt
