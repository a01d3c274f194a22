#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "libopt/config.hpp"
#include "libopt/error.hpp"
#include "libopt/hierarchy.hpp"
#include "libopt/profile.hpp"
#include "libopt/record.hpp"
#include "libopt/runner.hpp"
#include "libopt/store.hpp"

namespace libopt::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kPartial = 1, kUsage = 2 };

/// Process surroundings, injectable so commands can run in-process in tests.
struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  fs::path cwd;
  EnvLookup env;
};

/// Environment seen by every subcommand.
struct GlobalContext {
  std::optional<fs::path> root;
  std::optional<std::string> platform;
  fs::path working_dir;
  std::optional<StartupFile> startup;
  TokenConfig config;
};

inline GlobalContext load_context(const Io& io, const std::optional<fs::path>& rc_path) {
  GlobalContext ctx;
  ctx.working_dir = io.cwd;
  if (auto dir = io.env("LIBOPT_DIR"); dir && !dir->empty()) ctx.root = fs::path(*dir);
  if (auto plat = io.env("LIBOPT_PLAT"); plat && !plat->empty()) ctx.platform = *plat;
  ctx.startup = load_startup(rc_path ? std::optional<fs::path>(io.cwd / *rc_path) : std::nullopt, io.env);
  if (ctx.startup) ctx.config = ctx.startup->token_config();
  return ctx;
}

/// Thrown by command bodies for usage or configuration problems (exit 2).
struct UsageError : Error {
  using Error::Error;
};

inline fs::path in_cwd(const Io& io, const fs::path& p) { return p.is_absolute() ? p : io.cwd / p; }

inline fs::path require_root(const GlobalContext& ctx) {
  if (!ctx.root) throw UsageError("LIBOPT_DIR is not set");
  if (!fs::is_directory(*ctx.root)) throw UsageError("LIBOPT_DIR " + ctx.root->string() + " is not a directory");
  return *ctx.root;
}

namespace detail {

inline std::string plural(std::size_t n, std::string_view one, std::string_view many) {
  return std::to_string(n) + " " + std::string(n == 1 ? one : many);
}

inline int run_command(std::vector<std::string> args, Io& io) {
  CLI::App app{"Run solvers on problems.\n\nEach command line is 'solver[.tag] collection[.subc] [problem ...]'; "
               "commands are read from CommandFile or standard input.",
               "run"};
  RunFlags flags;
  std::optional<std::string> command_file;
  std::optional<std::string> rc;
  app.add_flag("-k", flags.keep, "keep mode: drivers leave their files in the working directory");
  app.add_flag("-t", flags.test, "test mode: print the driver commands without running them");
  app.add_flag("-v", flags.verbose, "verbose mode: print the driver commands as they run");
  app.add_option("--config", rc, "startup file (default $LIBOPT_RC or ~/.liboptrc)");
  app.add_option("CommandFile", command_file, "file of run commands");
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    io.err << "run: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  auto ctx = load_context(io, rc ? std::optional<fs::path>(*rc) : std::nullopt);
  auto root = require_root(ctx);

  std::ifstream file;
  std::istream* commands = &io.in;
  if (command_file) {
    file.open(in_cwd(io, *command_file));
    if (!file) throw UsageError("cannot read command file " + *command_file);
    commands = &file;
  }

  auto out = [&](std::string_view line) {
    io.out << line << '\n';
    io.out.flush();
  };
  auto diag = [&](std::string_view line) { io.err << "run: " << line << '\n'; };
  BatchSummary summary;
  try {
    summary = run_batch(*commands, flags, BatchContext{ctx.working_dir, root, ctx.platform}, out, diag);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (flags.verbose || !summary.clean())
    io.err << "run: " << plural(summary.commands, "command", "commands") << ", "
           << plural(summary.runs, "run", "runs") << ", " << summary.skips << " skipped, " << summary.failures
           << " failed, " << summary.parse_errors << " invalid\n";
  return summary.clean() ? kOk : kPartial;
}

inline int add_command(std::vector<std::string> args, Io& io) {
  CLI::App app{"Add results to, or delete results from, the results store.\n\n"
               "  add [-t] [-v] [-b DBFile] [-r] ResFile\n"
               "  add [-t] [-v] [-b DBFile] -d selection\n\n"
               "A selection ending in '%' is a 'solver%collection%problem%' pattern where an empty field matches "
               "anything; any other selection names a file of Libopt lines whose entries are deleted.",
               "add"};
  bool test = false, verbose = false, replace = false;
  std::optional<std::string> db, selection, res_file, rc;
  app.add_flag("-t", test, "test mode: report the effect without changing the store");
  app.add_flag("-v", verbose, "verbose mode");
  app.add_option("-b", db, "results store file");
  app.add_flag("-r", replace, "replace existing entries");
  app.add_option("-d", selection, "delete the selected entries");
  app.add_option("--config", rc, "startup file (default $LIBOPT_RC or ~/.liboptrc)");
  app.add_option("ResFile", res_file, "file of Libopt lines to add");
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    io.err << "add: " << e.what() << "\n" << app.help();
    return kUsage;
  }
  if (selection.has_value() == res_file.has_value()) {
    io.err << "add: give either ResFile or -d selection\n" << app.help();
    return kUsage;
  }
  if (selection && replace) {
    io.err << "add: -r cannot be combined with -d\n";
    return kUsage;
  }

  auto ctx = load_context(io, rc ? std::optional<fs::path>(*rc) : std::nullopt);
  auto store_path =
      in_cwd(io, resolve_store_path(db ? std::optional<fs::path>(*db) : std::nullopt, ctx.startup, ctx.working_dir));

  std::optional<StoreLock> lock;
  if (!test) lock.emplace(store_path);
  auto store = ResultsStore::open(store_path);
  const char* would = test ? "would " : "";
  int code = kOk;
  bool dirty = false;

  if (res_file) {
    auto report = import_file(store, in_cwd(io, *res_file), replace, ctx.config);
    for (const auto& m : report.messages) io.err << "add: " << m << '\n';
    io.err << "add: " << would << "add " << report.added << ", " << would << "replace " << report.replaced << ", "
           << report.duplicates << " duplicate, " << report.invalid << " invalid\n";
    if (report.duplicates || report.invalid) code = kPartial;
    dirty = report.added + report.replaced > 0;
  } else {
    auto parsed = [&] {
      try {
        return parse_selection(*selection);
      } catch (const ParseError& e) {
        throw UsageError(e.what());
      }
    }();
    if (auto* sel = std::get_if<Selection>(&parsed)) {
      auto doomed = store.query(*sel);
      if (verbose || test)
        for (const auto& [key, value] : doomed) io.err << "add: " << would << "delete " << key.text() << '\n';
      dirty = store.erase(*sel) > 0;
      io.err << "add: " << would << "delete " << plural(doomed.size(), "entry", "entries") << '\n';
    } else {
      auto report = erase_file(store, in_cwd(io, std::get<fs::path>(parsed)));
      for (const auto& m : report.messages) io.err << "add: " << m << '\n';
      if (verbose || test)
        for (const auto& k : report.deleted) io.err << "add: " << would << "delete " << k.text() << '\n';
      for (const auto& k : report.missing) io.err << "add: not in store: " << k.text() << '\n';
      io.err << "add: " << would << "delete " << plural(report.deleted.size(), "entry", "entries") << ", "
             << report.missing.size() << " missing\n";
      if (!report.missing.empty() || report.invalid) code = kPartial;
      dirty = !report.deleted.empty();
    }
  }

  if (!test && dirty) store.save(store_path);
  return code;
}

inline int profile_command(std::vector<std::string> args, Io& io) {
  CLI::App app{"Compare solvers with performance profiles.\n\n"
               "Reads perfopt.spc in the working directory and writes GFile.gnu (Gnuplot data) and GFile.m "
               "(Matlab function).",
               "profile"};
  bool test = false, verbose = false, log_scale = false;
  std::optional<std::string> db, ptok, gfile, rc;
  app.add_flag("-t", test, "test mode: compute but write no file");
  app.add_flag("-v", verbose, "verbose mode");
  app.add_option("-b", db, "results store file");
  app.add_option("-p", ptok, "performance token");
  app.add_flag("--log", log_scale, "logarithmic (base 2) x-coordinate; also accepted as -log");
  app.add_option("-g", gfile, "base name of the output files (default perf)");
  app.add_option("--config", rc, "startup file (default $LIBOPT_RC or ~/.liboptrc)");
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    io.err << "profile: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  auto ctx = load_context(io, rc ? std::optional<fs::path>(*rc) : std::nullopt);
  auto spec_path = ctx.working_dir / kSpecFileName;
  std::ifstream spec_in(spec_path);
  if (!spec_in) throw UsageError("cannot read " + spec_path.string() + " (the specification file is mandatory)");
  std::stringstream spec_text;
  spec_text << spec_in.rdbuf();

  ProfileSpec spec = [&] {
    try {
      return parse_spec(spec_text.str(), ptok ? std::optional<Name>(Name(*ptok)) : std::nullopt, log_scale,
                        gfile ? std::optional<fs::path>(*gfile) : std::nullopt, ctx.config.performance_tokens);
    } catch (const ParseError& e) {
      throw UsageError(std::string(kSpecFileName) + ": " + e.what());
    }
  }();

  auto store_path =
      in_cwd(io, resolve_store_path(db ? std::optional<fs::path>(*db) : std::nullopt, ctx.startup, ctx.working_dir));
  auto store = ResultsStore::open(store_path);
  std::optional<std::vector<ProblemId>> candidates;
  try {
    candidates = gather_candidate_problems(spec, ctx.working_dir, ctx.root);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  auto selected = select_results(spec, candidates, store);
  for (const auto& w : selected.warnings) io.err << "profile: warning: " << w << '\n';
  if (verbose)
    io.err << "profile: " << plural(selected.problems.size(), "eligible problem", "eligible problems") << " ("
           << selected.excluded_candidate << " outside the collections, " << selected.excluded_missing
           << " without results from every solver, " << selected.excluded_filter << " filtered out)\n";

  std::vector<StepFunction> profiles;
  int code = kOk;
  if (selected.problems.empty()) {
    io.err << "profile: no eligible problem for solvers";
    for (const auto& s : spec.solvers) io.err << ' ' << s;
    io.err << " with token " << spec.performance_token << '\n';
    code = kPartial;
  } else {
    auto matrix = compute_ratios(selected, spec.performance_token, spec.rho_bar_override);
    profiles = compute_profiles(matrix);
    if (verbose) {
      io.err << "profile: rho_bar = " << format_real(matrix.rho_bar) << '\n';
      for (const auto& f : profiles)
        io.err << "profile: " << f.solver << ": best on " << format_real(f(1.0)) << ", solves "
               << format_real(f.solve_fraction) << '\n';
    }
  }

  auto base = in_cwd(io, spec.output_base);
  auto gnu = fs::path(base.string() + ".gnu");
  auto mat = fs::path(base.string() + ".m");
  if (test) {
    io.err << "profile: would write " << gnu.string() << " and " << mat.string() << '\n';
    return code;
  }
  write_text_file(gnu, emit_gnuplot(profiles, spec.log_scale));
  write_text_file(mat, emit_matlab(profiles, spec.log_scale, matlab_identifier(base.stem().string())));
  if (verbose) io.err << "profile: wrote " << gnu.string() << " and " << mat.string() << '\n';
  return code;
}

inline int install_command(std::vector<std::string> args, Io& io) {
  CLI::App app{"Regenerate the index lists of the hierarchy rooted at $LIBOPT_DIR and check its consistency.",
               "install"};
  bool test = false, verbose = false;
  app.add_flag("-t", test, "test mode: check only, write no index list");
  app.add_flag("-v", verbose, "verbose mode");
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    io.err << "install: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  GlobalContext ctx;
  if (auto dir = io.env("LIBOPT_DIR"); dir && !dir->empty()) ctx.root = fs::path(*dir);
  auto root = require_root(ctx);

  auto report = generate_indexes(root, test);
  for (const auto& n : report.notes) io.err << "install: " << n << '\n';
  if (verbose || test)
    for (const auto& p : report.written) io.err << "install: " << (test ? "would write " : "wrote ") << p.string() << '\n';

  auto findings = verify(root);
  for (const auto& f : findings) io.err << "install: " << to_string(f.severity) << ": " << f.message << '\n';
  if (verbose || !findings.empty()) io.err << "install: " << plural(findings.size(), "finding", "findings") << '\n';
  return has_errors(findings) ? kPartial : kOk;
}

inline std::string top_usage() {
  return "usage: libopt <command> [options]\n\n"
         "commands:\n"
         "  run      run solvers on problems (alias runopt)\n"
         "  add      add or delete results in the results store (alias addopt)\n"
         "  profile  compute performance profiles (alias perfopt)\n"
         "  install  regenerate index lists and verify the hierarchy\n\n"
         "Use 'libopt <command> -h' for the options of a command.\n";
}

}  // namespace detail

/// Routes `argv` to a subcommand. `argv[0]` may be one of the aliases
/// `runopt`, `addopt` or `perfopt`. Returns the process exit code: 0 on full
/// success, 1 when some items failed or were skipped, 2 on usage and
/// configuration errors.
inline int dispatch(std::vector<std::string> argv, Io& io) {
  std::string command;
  std::vector<std::string> rest;
  auto prog = argv.empty() ? std::string("libopt") : fs::path(argv.front()).filename().string();
  if (prog == "runopt") command = "run";
  else if (prog == "addopt") command = "add";
  else if (prog == "perfopt") command = "profile";

  std::size_t first = 1;
  if (command.empty()) {
    if (argv.size() < 2) {
      io.err << detail::top_usage();
      return kUsage;
    }
    command = argv[1];
    first = 2;
  }
  for (std::size_t i = first; i < argv.size(); ++i) rest.push_back(argv[i] == "-log" ? "--log" : argv[i]);

  try {
    if (command == "run") return detail::run_command(rest, io);
    if (command == "add") return detail::add_command(rest, io);
    if (command == "profile") return detail::profile_command(rest, io);
    if (command == "install") return detail::install_command(rest, io);
    if (command == "-h" || command == "--help" || command == "help") {
      io.out << detail::top_usage();
      return kOk;
    }
    io.err << "libopt: unknown command '" << command << "'\n" << detail::top_usage();
    return kUsage;
  } catch (const std::exception& e) {
    io.err << command << ": " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace libopt::cli
