#pragma once

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "libopt/config.hpp"
#include "libopt/error.hpp"
#include "libopt/hierarchy.hpp"
#include "libopt/name.hpp"
#include "libopt/record.hpp"

extern char** environ;

namespace libopt {

/// One command line `solv[.tag] coll[.subc] [problem ...]`.
struct RunDirective {
  SolverId solver;
  Name collection;
  std::optional<Name> subc;
  ProblemList explicit_problems;
};

inline RunDirective parse_command(std::string_view line) {
  auto words = detail::split_words(trim_blanks(strip_comment(line)));
  if (words.size() < 2) throw ParseError("expected 'solver[.tag] collection[.subc] [problems...]'");

  auto solver = SolverId::parse(words[0]);

  std::optional<Name> subc;
  auto coll_field = words[1];
  auto dot = coll_field.find('.');
  Name collection(coll_field.substr(0, dot));
  if (dot != std::string_view::npos) subc = Name(coll_field.substr(dot + 1));

  std::string rest;
  for (std::size_t i = 2; i < words.size(); ++i) {
    rest += words[i];
    rest += ' ';
  }
  auto problems = parse_list(rest);
  return RunDirective{std::move(solver), std::move(collection), std::move(subc), std::move(problems)};
}

/// Final problem list of a directive and the file it came from.
struct ResolvedList {
  Name subc;
  fs::path list_path;
  std::vector<Name> problems;
};

/// Expands a directive to its problem list, or nullopt when no list file
/// exists for the subcollection (the command line is then ignored).
///
/// The subcollection defaults to `all` when problems are named explicitly
/// and to `default` otherwise. The located list is intersected with the
/// solver-side `all.lst` and then with the explicit problems, keeping the
/// order of the located list.
inline std::optional<ResolvedList> resolve_problems(const RunDirective& d, const fs::path& working_dir,
                                                    const fs::path& root) {
  Name subc = d.subc ? *d.subc : Name(d.explicit_problems.names.empty() ? "default" : "all");
  auto located = locate_list(d.solver.solver, d.collection, subc, working_dir, root);
  if (!located) return std::nullopt;

  auto list = read_list(*located);
  auto soluble_path = Layout{root}.solver_list(d.solver.solver, d.collection, Name("all"));
  std::error_code ec;
  if (!fs::is_regular_file(soluble_path, ec))
    throw Error("hierarchy inconsistency: missing " + soluble_path.string());
  auto soluble = read_list(soluble_path);

  ResolvedList out{subc, *located, {}};
  for (const auto& p : list.names) {
    if (!soluble.contains(p)) continue;
    if (!d.explicit_problems.names.empty() && !d.explicit_problems.contains(p)) continue;
    out.problems.push_back(p);
  }
  return out;
}

struct RunFlags {
  bool keep = false;
  bool test = false;
  bool verbose = false;
};

struct RunOptions {
  RunFlags flags;
  /// Command file; standard input when absent.
  std::optional<fs::path> command_source;
};

struct ElementaryRun {
  SolverId solver;
  Name collection;
  Name problem;
  RunFlags flags;
};

/// True when `path` is `root` or lies below it.
inline bool is_inside(const fs::path& path, const fs::path& root) {
  auto p = fs::weakly_canonical(fs::absolute(path));
  auto r = fs::weakly_canonical(fs::absolute(root));
  auto pit = p.begin();
  for (auto rit = r.begin(); rit != r.end(); ++rit, ++pit) {
    if (rit->empty()) continue;  // trailing separator
    if (pit == p.end() || *pit != *rit) return false;
  }
  return true;
}

/// argv of the driver invocation `solv_coll [-k] [-t] [-v] prob`.
inline std::vector<std::string> driver_argv(const ElementaryRun& run, const fs::path& root) {
  std::vector<std::string> argv{Layout{root}.driver(run.solver.solver, run.collection).string()};
  if (run.flags.keep) argv.emplace_back("-k");
  if (run.flags.test) argv.emplace_back("-t");
  if (run.flags.verbose) argv.emplace_back("-v");
  argv.push_back(run.problem.str());
  return argv;
}

inline std::string join_command(const std::vector<std::string>& argv) {
  std::string out;
  for (const auto& a : argv) {
    if (!out.empty()) out += ' ';
    out += a;
  }
  return out;
}

using LineSink = std::function<void(std::string_view)>;

struct ExecResult {
  enum class Status { ok, no_result, failed, not_run };
  Status status = Status::not_run;
  int exit_code = 0;
  std::vector<LiboptRecord> records;
  std::vector<std::string> warnings;
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept {
    reset(o.release());
    return *this;
  }
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  int release() noexcept { return std::exchange(fd_, -1); }
  void reset(int fd = -1) noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
  }

 private:
  int fd_ = -1;
};

inline std::vector<std::string> merged_environment(const std::map<std::string, std::string>& extra) {
  std::vector<std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    auto eq = entry.find('=');
    if (eq != std::string_view::npos && extra.contains(std::string(entry.substr(0, eq)))) continue;
    env.emplace_back(entry);
  }
  for (const auto& [k, v] : extra) env.push_back(k + "=" + v);
  return env;
}

inline std::vector<char*> c_strings(std::vector<std::string>& strings) {
  std::vector<char*> out;
  out.reserve(strings.size() + 1);
  for (auto& s : strings) out.push_back(s.data());
  out.push_back(nullptr);
  return out;
}

}  // namespace detail

/// Runs one problem through its driver.
///
/// The driver runs in `working_dir` with `LIBOPT_DIR` (and any `extra_env`)
/// exported. Its standard output is streamed through the tag filter into
/// `out`; its standard error is inherited. In test mode the command is
/// reported through `diag` and nothing is spawned.
inline ExecResult execute(const ElementaryRun& run, const fs::path& working_dir, const fs::path& root,
                          const std::map<std::string, std::string>& extra_env, const LineSink& out,
                          const LineSink& diag) {
  if (is_inside(working_dir, root))
    throw Error("the working directory " + working_dir.string() + " is inside the Libopt hierarchy " + root.string());

  auto argv = driver_argv(run, fs::absolute(root));
  ExecResult result;
  if (run.flags.test) {
    diag(join_command(argv));
    return result;
  }

  const auto& driver = argv.front();
  std::error_code ec;
  if (!fs::is_regular_file(driver, ec)) throw Error("missing driver " + driver);
  if (::access(driver.c_str(), X_OK) != 0) throw Error("driver is not executable: " + driver);
  if (run.flags.verbose) diag(join_command(argv));

  auto env_map = extra_env;
  env_map["LIBOPT_DIR"] = fs::absolute(root).string();
  auto env = detail::merged_environment(env_map);
  auto c_argv = detail::c_strings(argv);
  auto c_env = detail::c_strings(env);
  auto wd = fs::absolute(working_dir).string();

  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  detail::Fd read_end(fds[0]);
  detail::Fd write_end(fds[1]);

  pid_t pid = ::fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    if (::chdir(wd.c_str()) != 0) ::_exit(126);
    if (::dup2(write_end.get(), STDOUT_FILENO) < 0) ::_exit(126);
    ::execve(c_argv[0], c_argv.data(), c_env.data());
    ::_exit(127);
  }
  write_end.reset();

  std::string pending;
  std::size_t line_no = 0;
  auto flush_line = [&](std::string line) {
    ++line_no;
    if (has_sentinel(line)) {
      try {
        result.records.push_back(*filter_line(line, run.solver.tag));
      } catch (const ParseError& e) {
        result.warnings.push_back("malformed Libopt line from " + driver + ": " + e.what());
      }
    }
    out(line);
  };

  char buf[4096];
  while (true) {
    ssize_t n = ::read(read_end.get(), buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = pending.find('\n')) != std::string::npos) {
      flush_line(pending.substr(0, pos));
      pending.erase(0, pos + 1);
    }
  }
  if (!pending.empty()) flush_line(std::move(pending));

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error(std::string("waitpid: ") + std::strerror(errno));
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (result.exit_code != 0)
    result.status = ExecResult::Status::failed;
  else if (result.records.empty())
    result.status = ExecResult::Status::no_result;
  else
    result.status = ExecResult::Status::ok;
  return result;
}

struct BatchSummary {
  std::size_t commands = 0;
  std::size_t runs = 0;
  std::size_t skips = 0;
  std::size_t failures = 0;
  std::size_t no_results = 0;
  std::size_t parse_errors = 0;
  std::size_t records = 0;

  bool clean() const { return skips == 0 && failures == 0 && parse_errors == 0; }
};

struct BatchContext {
  fs::path working_dir;
  fs::path root;
  std::optional<std::string> platform;
};

/// Reads command lines from `commands` and runs every resolved problem in
/// order. Errors on one line are reported through `diag` and never abort
/// the batch.
inline BatchSummary run_batch(std::istream& commands, const RunFlags& flags, const BatchContext& ctx,
                              const LineSink& out, const LineSink& diag) {
  if (is_inside(ctx.working_dir, ctx.root))
    throw Error("the working directory " + ctx.working_dir.string() + " is inside the Libopt hierarchy " +
                ctx.root.string());
  BatchSummary summary;
  std::map<std::string, std::string> env;
  if (ctx.platform) env["LIBOPT_PLAT"] = *ctx.platform;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(commands, line)) {
    ++line_no;
    auto body = trim_blanks(strip_comment(line));
    if (body.empty()) continue;
    ++summary.commands;
    auto where = "command line " + std::to_string(line_no) + " ('" + std::string(body) + "')";

    std::optional<RunDirective> directive;
    std::optional<ResolvedList> resolved;
    try {
      directive = parse_command(body);
      for (const auto& w : directive->explicit_problems.warnings) diag(where + ": " + w);
      resolved = resolve_problems(*directive, ctx.working_dir, ctx.root);
    } catch (const Error& e) {
      ++summary.parse_errors;
      diag(where + ": " + e.what());
      continue;
    }
    if (!resolved) {
      ++summary.skips;
      diag(where + ": no list for subcollection, line ignored");
      continue;
    }
    if (flags.verbose) diag(where + ": " + std::to_string(resolved->problems.size()) + " problem(s) from " +
                            resolved->list_path.string());

    for (const auto& problem : resolved->problems) {
      ElementaryRun run{directive->solver, directive->collection, problem, flags};
      ++summary.runs;
      try {
        auto r = execute(run, ctx.working_dir, ctx.root, env, out, diag);
        for (const auto& w : r.warnings) diag(w);
        summary.records += r.records.size();
        if (r.status == ExecResult::Status::failed) {
          ++summary.failures;
          diag(run.solver.text() + " on " + run.collection.str() + "/" + problem.str() + ": driver exited with status " +
               std::to_string(r.exit_code));
        } else if (r.status == ExecResult::Status::no_result) {
          ++summary.no_results;
          diag(run.solver.text() + " on " + run.collection.str() + "/" + problem.str() + ": no Libopt line");
        }
      } catch (const Error& e) {
        ++summary.failures;
        diag(e.what());
      }
    }
  }
  return summary;
}

}  // namespace libopt
