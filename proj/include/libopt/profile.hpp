#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "libopt/config.hpp"
#include "libopt/error.hpp"
#include "libopt/hierarchy.hpp"
#include "libopt/name.hpp"
#include "libopt/record.hpp"
#include "libopt/store.hpp"

namespace libopt {

inline constexpr std::string_view kDefaultProfileBase = "perf";
inline constexpr std::string_view kSpecFileName = "perfopt.spc";

enum class Relation { less, less_equal, equal, not_equal, greater_equal, greater };

inline std::optional<Relation> parse_relation(std::string_view text) {
  if (text == "<") return Relation::less;
  if (text == "<=") return Relation::less_equal;
  if (text == "=" || text == "==") return Relation::equal;
  if (text == "!=") return Relation::not_equal;
  if (text == ">=") return Relation::greater_equal;
  if (text == ">") return Relation::greater;
  return std::nullopt;
}

/// `problem <token> <relation> <number>`: keeps problems whose descriptive
/// token value satisfies the relation.
struct ProblemFilter {
  Name token;
  Relation relation;
  double threshold;

  bool accepts(double v) const {
    switch (relation) {
      case Relation::less: return v < threshold;
      case Relation::less_equal: return v <= threshold;
      case Relation::equal: return v == threshold;
      case Relation::not_equal: return v != threshold;
      case Relation::greater_equal: return v >= threshold;
      case Relation::greater: return v > threshold;
    }
    return false;
  }
};

struct CollectionRef {
  Name collection;
  Name subc;
};

struct ProfileSpec {
  std::vector<std::string> solvers;
  std::vector<CollectionRef> collections;
  Name performance_token;
  std::vector<ProblemFilter> filters;
  std::optional<double> rho_bar_override;
  bool log_scale = false;
  std::filesystem::path output_base;
};

/// Parses `perfopt.spc`. Directives: `solver`, `collection`, `performance`,
/// `problem`, `rho_max`, `output`. A `-p` token from the command line
/// overrides `performance`; a command-line output base overrides `output`.
inline ProfileSpec parse_spec(std::string_view text, const std::optional<Name>& cli_ptok = std::nullopt,
                              bool cli_log = false, const std::optional<std::filesystem::path>& cli_output = std::nullopt,
                              const std::optional<std::set<std::string>>& performance_tokens = std::nullopt) {
  std::vector<std::string> solvers;
  std::vector<CollectionRef> collections;
  std::optional<Name> ptok;
  std::vector<ProblemFilter> filters;
  std::optional<double> rho_max;
  std::optional<std::filesystem::path> output;

  static const std::regex filter_re(R"(^\s*(\w+)\s*(<=|>=|!=|==|<|>|=)\s*(\S+)\s*$)");

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    auto line = trim_blanks(strip_comment(raw));
    if (line.empty()) continue;
    auto words = detail::split_words(line);
    auto directive = words.front();
    auto args = std::vector<std::string_view>(words.begin() + 1, words.end());
    auto rest = trim_blanks(line.substr(directive.size()));

    try {
      if (directive == "solver") {
        if (args.empty()) throw ParseError("'solver' needs at least one name");
        for (auto a : args) {
          auto id = SolverId::parse(a).text();
          if (std::find(solvers.begin(), solvers.end(), id) != solvers.end())
            throw ParseError("solver '" + id + "' listed twice");
          solvers.push_back(id);
        }
      } else if (directive == "collection") {
        if (args.empty()) throw ParseError("'collection' needs at least one name");
        for (auto a : args) {
          auto dot = a.find('.');
          Name coll(a.substr(0, dot));
          Name subc(dot == std::string_view::npos ? std::string_view("all") : a.substr(dot + 1));
          collections.push_back({coll, subc});
        }
      } else if (directive == "performance") {
        if (args.size() != 1) throw ParseError("'performance' takes exactly one token");
        if (ptok) throw ParseError("duplicate 'performance' directive");
        ptok = Name(args.front());
      } else if (directive == "problem") {
        std::match_results<std::string_view::const_iterator> m;
        if (!std::regex_match(rest.begin(), rest.end(), m, filter_re))
          throw ParseError("malformed filter '" + std::string(rest) + "' (expected 'problem token relation number')");
        auto value = parse_number(std::string_view(m[3].first, static_cast<std::size_t>(m[3].length())));
        if (!value) throw ParseError("malformed number in filter '" + std::string(rest) + "'");
        filters.push_back({Name(m[1].str()), *parse_relation(m[2].str()), *value});
      } else if (directive == "rho_max") {
        if (args.size() != 1) throw ParseError("'rho_max' takes exactly one number");
        if (rho_max) throw ParseError("duplicate 'rho_max' directive");
        auto value = parse_number(args.front());
        if (!value || *value <= 1.0) throw ParseError("'rho_max' must be a number greater than 1");
        rho_max = value;
      } else if (directive == "output") {
        if (args.size() != 1) throw ParseError("'output' takes exactly one file base name");
        if (output) throw ParseError("duplicate 'output' directive");
        output = std::filesystem::path(std::string(args.front()));
      } else {
        throw ParseError("unknown directive '" + std::string(directive) + "'");
      }
    } catch (const ParseError& e) {
      throw ParseError(e.what(), number);
    }
  }

  if (solvers.size() < 2) throw ParseError("at least two solvers are needed for a comparison");
  if (cli_ptok) ptok = cli_ptok;
  if (!ptok) throw ParseError("no performance token (use the 'performance' directive or -p)");
  if (performance_tokens && !performance_tokens->contains(ptok->str()))
    throw ParseError("'" + ptok->str() + "' is not a performance token");

  ProfileSpec spec{std::move(solvers), std::move(collections), *ptok, std::move(filters), rho_max, cli_log,
                   std::filesystem::path(std::string(kDefaultProfileBase))};
  if (cli_output)
    spec.output_base = *cli_output;
  else if (output)
    spec.output_base = *output;
  return spec;
}

/// A problem qualified by its collection.
struct ProblemId {
  Name collection;
  Name problem;

  std::string text() const { return collection.str() + "/" + problem.str(); }

  friend auto operator<=>(const ProblemId&, const ProblemId&) = default;
  friend bool operator==(const ProblemId&, const ProblemId&) = default;
};

/// Union of the problems named by the `collection` directives, in first-seen
/// order; nullopt when there are none (no restriction).
inline std::optional<std::vector<ProblemId>> gather_candidate_problems(const ProfileSpec& spec,
                                                                       const std::filesystem::path& working_dir,
                                                                       const std::optional<std::filesystem::path>& root) {
  if (spec.collections.empty()) return std::nullopt;
  std::vector<ProblemId> out;
  std::set<ProblemId> seen;
  for (const auto& ref : spec.collections) {
    std::vector<std::filesystem::path> candidates{working_dir / (ref.collection.str() + "." + ref.subc.str() + ".lst")};
    if (root) candidates.push_back(Layout{*root}.collection_list(ref.collection, ref.subc));
    std::optional<std::filesystem::path> found;
    for (const auto& c : candidates) {
      std::error_code ec;
      if (std::filesystem::is_regular_file(c, ec)) {
        found = c;
        break;
      }
    }
    if (!found) throw Error("no list for " + ref.collection.str() + "." + ref.subc.str());
    for (const auto& name : read_list(*found).names) {
      ProblemId id{ref.collection, name};
      if (seen.insert(id).second) out.push_back(id);
    }
  }
  return out;
}

/// Results of every selected solver on every eligible problem.
struct SelectedResults {
  std::vector<ProblemId> problems;
  std::vector<std::string> solvers;
  /// values[p][s], in `problems` x `solvers` order.
  std::vector<std::vector<StoreValue>> values;
  std::vector<std::string> warnings;
  std::size_t excluded_candidate = 0;
  std::size_t excluded_missing = 0;
  std::size_t excluded_filter = 0;
};

/// Picks the problems that are candidates (when a candidate list exists),
/// have a stored result carrying the performance token for every selected
/// solver, and pass every filter. Filters read descriptive values from the
/// first solver's record.
inline SelectedResults select_results(const ProfileSpec& spec, const std::optional<std::vector<ProblemId>>& candidates,
                                      const ResultsStore& store) {
  SelectedResults out;
  out.solvers = spec.solvers;
  std::set<ProblemId> allowed;
  if (candidates) allowed.insert(candidates->begin(), candidates->end());

  Selection first;
  first.solver = spec.solvers.front();
  for (const auto& [key, value] : store.query(first)) {
    ProblemId id{key.collection, key.problem};
    if (candidates && !allowed.contains(id)) {
      ++out.excluded_candidate;
      continue;
    }

    std::vector<StoreValue> row;
    bool complete = true;
    for (const auto& s : spec.solvers) {
      const StoreValue* v = store.find(StoreKey{SolverId::parse(s), key.collection, key.problem});
      if (!v || !find_token(*v, spec.performance_token.str())) {
        complete = false;
        break;
      }
      row.push_back(*v);
    }
    if (!complete) {
      ++out.excluded_missing;
      continue;
    }

    bool keep = true;
    for (const auto& f : spec.filters) {
      const TokenPair* tp = find_token(row.front(), f.token.str());
      if (!tp || !f.accepts(tp->value)) {
        keep = false;
        break;
      }
      for (std::size_t s = 1; s < row.size(); ++s) {
        const TokenPair* other = find_token(row[s], f.token.str());
        if (other && other->value != tp->value)
          out.warnings.push_back(id.text() + ": token '" + f.token.str() + "' differs between " + spec.solvers.front() +
                                 " and " + spec.solvers[s]);
      }
    }
    if (!keep) {
      ++out.excluded_filter;
      continue;
    }
    out.problems.push_back(id);
    out.values.push_back(std::move(row));
  }
  return out;
}

/// Performance values and ratios, `problems` x `solvers`.
struct RatioMatrix {
  std::vector<ProblemId> problems;
  std::vector<std::string> solvers;
  /// nullopt where the solver failed (`info` nonzero).
  std::vector<std::vector<std::optional<double>>> tau;
  std::vector<std::vector<double>> rho;
  double rho_bar = 2.0;

  bool failed(std::size_t p, std::size_t s) const { return !tau[p][s].has_value(); }
};

/// rho(p,s) = tau(p,s) / min over successful solvers of tau(p,.), and the
/// failure value rho_bar for every failed run. Without an override, rho_bar
/// is twice the largest finite ratio, and at least 2.
inline RatioMatrix compute_ratios(const SelectedResults& results, const Name& ptok,
                                  std::optional<double> rho_bar_override = std::nullopt) {
  RatioMatrix m;
  m.problems = results.problems;
  m.solvers = results.solvers;
  const auto np = results.problems.size();
  const auto ns = results.solvers.size();
  m.tau.assign(np, std::vector<std::optional<double>>(ns));
  m.rho.assign(np, std::vector<double>(ns, 0.0));

  double max_ratio = 0.0;
  bool any_finite = false;
  for (std::size_t p = 0; p < np; ++p) {
    std::optional<double> best;
    for (std::size_t s = 0; s < ns; ++s) {
      const auto& value = results.values[p][s];
      const TokenPair* info = find_token(value, kInfoToken);
      if (!info || info->value != 0.0) continue;
      const TokenPair* perf = find_token(value, ptok.str());
      if (!perf) continue;
      if (!(perf->value > 0.0))
        throw Error(results.problems[p].text() + ": performance value " + ptok.str() + "=" + format_number(perf->value) +
                    " of " + results.solvers[s] + " is not positive");
      m.tau[p][s] = perf->value;
      if (!best || perf->value < *best) best = perf->value;
    }
    for (std::size_t s = 0; s < ns; ++s) {
      if (!m.tau[p][s]) continue;
      double r = *m.tau[p][s] / *best;
      m.rho[p][s] = r;
      max_ratio = std::max(max_ratio, r);
      any_finite = true;
    }
  }

  if (rho_bar_override) {
    if (*rho_bar_override <= 1.0 || (any_finite && *rho_bar_override <= max_ratio))
      throw Error("rho_max " + format_number(*rho_bar_override) + " does not exceed the largest ratio " +
                  format_number(max_ratio));
    m.rho_bar = *rho_bar_override;
  } else {
    m.rho_bar = any_finite ? std::max(2.0, 2.0 * max_ratio) : 2.0;
  }
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t s = 0; s < ns; ++s)
      if (!m.tau[p][s]) m.rho[p][s] = m.rho_bar;
  return m;
}

struct Breakpoint {
  double t;
  double value;
};

/// Right-continuous staircase of one solver: value(t) holds from t up to
/// the next breakpoint.
struct StepFunction {
  std::string solver;
  std::vector<Breakpoint> breakpoints;
  double solve_fraction = 0.0;

  double operator()(double t) const {
    double v = 0.0;
    for (const auto& b : breakpoints) {
      if (b.t > t) break;
      v = b.value;
    }
    return v;
  }
};

/// Fraction of problems with rho <= t, at t = 1, at every distinct finite
/// ratio of the solver, and at rho_bar.
inline std::vector<StepFunction> compute_profiles(const RatioMatrix& m) {
  std::vector<StepFunction> out;
  const auto np = m.problems.size();
  if (np == 0) return out;
  const double total = static_cast<double>(np);
  for (std::size_t s = 0; s < m.solvers.size(); ++s) {
    std::set<double> ts{1.0, m.rho_bar};
    std::size_t solved = 0;
    for (std::size_t p = 0; p < np; ++p) {
      if (m.failed(p, s)) continue;
      ts.insert(m.rho[p][s]);
      ++solved;
    }
    StepFunction f{m.solvers[s], {}, static_cast<double>(solved) / total};
    for (double t : ts) {
      std::size_t count = 0;
      for (std::size_t p = 0; p < np; ++p)
        if (m.rho[p][s] <= t) ++count;
      f.breakpoints.push_back({t, static_cast<double>(count) / total});
    }
    out.push_back(std::move(f));
  }
  return out;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace detail {

/// Staircase vertices: each level is held up to the next breakpoint before
/// stepping.
inline std::vector<Breakpoint> staircase(const StepFunction& f, bool log_scale) {
  std::vector<Breakpoint> pts;
  auto x = [&](double t) { return log_scale ? std::log2(t) : t; };
  for (std::size_t i = 0; i < f.breakpoints.size(); ++i) {
    if (i > 0) pts.push_back({x(f.breakpoints[i].t), f.breakpoints[i - 1].value});
    pts.push_back({x(f.breakpoints[i].t), f.breakpoints[i].value});
  }
  return pts;
}

}  // namespace detail

/// Gnuplot data: one block per solver, blocks separated by two blank lines.
inline std::string emit_gnuplot(const std::vector<StepFunction>& profiles, bool log_scale) {
  std::string out = "# performance profiles\n";
  out += log_scale ? "# x = log2(t), y = fraction of problems\n" : "# x = t, y = fraction of problems\n";
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "# solver " + profiles[i].solver + "\n";
    for (const auto& pt : detail::staircase(profiles[i], log_scale))
      out += format_real(pt.t) + " " + format_real(pt.value) + "\n";
  }
  return out;
}

/// Turns a file stem into a valid Matlab function name.
inline std::string matlab_identifier(std::string_view stem) {
  std::string id;
  for (char c : stem) id += is_word_char(c) ? c : '_';
  if (id.empty() || !((id[0] >= 'a' && id[0] <= 'z') || (id[0] >= 'A' && id[0] <= 'Z'))) id = "perf_" + id;
  return id;
}

inline std::string matlab_quote(std::string_view text) {
  std::string out = "'";
  for (char c : text) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

/// Matlab function drawing the profiles with `stairs`.
inline std::string emit_matlab(const std::vector<StepFunction>& profiles, bool log_scale,
                               std::string_view function_name = kDefaultProfileBase) {
  std::string out = "function " + std::string(function_name) + "\n";
  out += "% performance profiles, one staircase per solver\n";
  if (profiles.empty()) {
    out += "error(" + matlab_quote(std::string(function_name) + ": no eligible problems, nothing to plot") + ");\n";
    return out;
  }
  auto x = [&](double t) { return log_scale ? std::log2(t) : t; };
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    out += "% solver " + profiles[i].solver + "\n";
    out += "p" + std::to_string(i + 1) + " = [\n";
    for (const auto& b : profiles[i].breakpoints)
      out += "  " + format_real(x(b.t)) + " " + format_real(b.value) + "\n";
    out += "];\n";
  }
  out += "clf;\nhold on;\n";
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    auto var = "p" + std::to_string(i + 1);
    out += "stairs(" + var + "(:,1), " + var + "(:,2));\n";
  }
  out += "hold off;\n";
  out += "legend(";
  for (std::size_t i = 0; i < profiles.size(); ++i) out += (i ? ", " : "") + matlab_quote(profiles[i].solver);
  out += ", 'Location', 'SouthEast');\n";
  out += log_scale ? "xlabel('log_2(t)');\n" : "xlabel('t');\n";
  out += "ylabel('fraction of problems');\n";
  out += "ylim([0 1.05]);\n";
  return out;
}

}  // namespace libopt
