#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "libopt/error.hpp"
#include "libopt/hierarchy.hpp"
#include "libopt/name.hpp"
#include "libopt/record.hpp"

namespace libopt::toys {

/// Scripted outcome of one solver on one problem.
struct ScriptedResult {
  int info = 0;
  double nfc = 0;
  double time = 0;
};

struct ToyProblemSpec {
  Name name;
  double n;
  std::map<std::string, ScriptedResult> script;
};

/// The synthetic `toys` collection and its two fake solvers.
struct Fixture {
  std::filesystem::path root;
  std::vector<ToyProblemSpec> problems;
  std::vector<Name> all;
  std::vector<Name> defaults;
  std::map<std::string, std::vector<Name>> solver_all;

  /// Libopt line the driver of `solver` prints for `problem`.
  TokenPairs pairs(const std::string& solver, const Name& problem) const {
    for (const auto& p : problems) {
      if (p.name != problem) continue;
      const auto& r = p.script.at(solver);
      return {{Name("n"), p.n}, {Name("nfc"), r.nfc}, {Name("time"), r.time}, {Name("info"), double(r.info)}};
    }
    throw Error("no toy problem " + problem.str());
  }
};

inline constexpr const char* kSolvers[] = {"fakea", "fakeb"};
inline constexpr int kProblemCount = 6;

/// Driver shell script: looks up the problem in the `results.tbl` next to
/// it and prints the Libopt line. Honors `-k` (keeps its scratch file in
/// the working directory), `-t` (prints what it would do) and `-v`.
inline std::string driver_script(const std::string& solver, const std::string& collection) {
  std::string id = solver + "_" + collection;
  return R"(#!/bin/sh
# driver for solver )" + solver + " on collection " + collection + R"(
solver=)" + solver + R"(
coll=)" + collection + R"(
keep=0
test=0
verbose=0
prob=
for arg in "$@"; do
  case "$arg" in
    -k) keep=1 ;;
    -t) test=1 ;;
    -v) verbose=1 ;;
    -*) echo ")" + id + R"(: unknown option $arg" >&2; exit 2 ;;
    *) prob=$arg ;;
  esac
done
if [ -z "$prob" ]; then
  echo "usage: )" + id + R"( [-k] [-t] [-v] prob" >&2
  exit 2
fi
here=$(dirname "$0")
entry=$(awk -v p="$prob" '$1 == p { print $2 }' "$here/results.tbl")
if [ -z "$entry" ]; then
  echo ")" + id + R"(: no scripted result for $prob" >&2
  exit 1
fi
scratch="${solver}_${prob}.out"
if [ $test -eq 1 ]; then
  echo "would write $scratch and print the result of $prob" >&2
  exit 0
fi
[ $verbose -eq 1 ] && echo ")" + id + R"(: solving $prob" >&2
echo "$entry" > "$scratch"
echo "$solver: problem $prob"
echo "libopt%$solver%$coll%$prob%$entry"
[ $keep -eq 1 ] || rm -f "$scratch"
exit 0
)";
}

/// Builds the hierarchy under `root`: `collections/toys` with six problems
/// (`default.lst` holds the first four) and drivers for `fakea` (all six)
/// and `fakeb` (the first five). Values come from a seeded mt19937; fakeb
/// always fails p2.
inline Fixture generate_fixture(const std::filesystem::path& root, std::uint32_t seed) {
  namespace fs = std::filesystem;
  std::mt19937 rng(seed);
  // Raw engine output keeps the values identical across standard libraries.
  auto draw = [&](std::uint32_t mod) { return rng() % mod; };

  Fixture fx;
  fx.root = root;
  for (int i = 1; i <= kProblemCount; ++i) {
    ToyProblemSpec p{Name("p" + std::to_string(i)), double(1u << (1 + draw(12))), {}};
    for (const char* s : kSolvers) {
      ScriptedResult r;
      r.nfc = double(5 + draw(196));
      r.time = double(10 + draw(990)) / 100.0;
      p.script[s] = r;
    }
    if (i == 2) p.script["fakeb"].info = 1;
    fx.all.push_back(p.name);
    if (i <= 4) fx.defaults.push_back(p.name);
    fx.problems.push_back(std::move(p));
  }
  fx.solver_all["fakea"] = fx.all;
  fx.solver_all["fakeb"] = std::vector<Name>(fx.all.begin(), fx.all.begin() + 5);

  auto names = [](const std::vector<Name>& v) {
    std::string out;
    for (const auto& n : v) out += n.str() + "\n";
    return out;
  };

  Layout layout{root};
  Name toys("toys");
  fs::create_directories(layout.collection_dir(toys) / "probs");
  write_text_file(layout.collection_list(toys, Name("all")), "# toy problems\n" + names(fx.all));
  write_text_file(layout.collection_list(toys, Name("default")), names(fx.defaults));
  for (const auto& p : fx.problems)
    write_text_file(layout.collection_dir(toys) / "probs" / (p.name.str() + ".dat"),
                    "n " + format_number(p.n) + "\n");

  for (const char* s : kSolvers) {
    Name solver(s);
    auto dir = layout.solver_collection_dir(solver, toys);
    fs::create_directories(dir);
    const auto& soluble = fx.solver_all[s];
    write_text_file(layout.solver_list(solver, toys, Name("all")), names(soluble));
    std::vector<Name> def;
    for (const auto& d : fx.defaults)
      if (std::find(soluble.begin(), soluble.end(), d) != soluble.end()) def.push_back(d);
    write_text_file(layout.solver_list(solver, toys, Name("default")), names(def));

    std::string table;
    for (const auto& p : fx.problems) {
      if (std::find(soluble.begin(), soluble.end(), p.name) == soluble.end()) continue;
      table += p.name.str() + " " + serialize_pairs(fx.pairs(s, p.name)) + "\n";
    }
    write_text_file(dir / "results.tbl", table);

    auto driver = layout.driver(solver, toys);
    write_text_file(driver, driver_script(s, "toys"));
    fs::permissions(driver,
                    fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec | fs::perms::others_read |
                        fs::perms::others_exec,
                    fs::perm_options::replace);
  }
  generate_indexes(root);
  return fx;
}

}  // namespace libopt::toys
