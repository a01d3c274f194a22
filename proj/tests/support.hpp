#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "libopt/cli.hpp"
#include "libopt/record.hpp"

namespace libopt::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "libopt-test-XXXXXX").string();
    if (!::mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
    path_ = templ;
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void make_executable(const fs::path& p) {
  fs::permissions(p, fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec, fs::perm_options::replace);
}

/// Result of an in-process CLI invocation.
struct CliResult {
  int code;
  std::string out;
  std::string err;
};

/// Runs `libopt args...` in-process with the given working directory and
/// environment overrides (all other variables read as unset, except HOME,
/// which is pointed at the working directory).
inline CliResult run_cli(const std::vector<std::string>& args, const fs::path& cwd,
                         std::map<std::string, std::string> env = {}, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  if (!env.contains("HOME")) env["HOME"] = cwd.string();
  cli::Io io{in, out, err, cwd, [env](const std::string& name) -> std::optional<std::string> {
               auto it = env.find(name);
               if (it == env.end()) return std::nullopt;
               return it->second;
             }};
  std::vector<std::string> argv{"libopt"};
  argv.insert(argv.end(), args.begin(), args.end());
  if (!args.empty() && (args.front() == "runopt" || args.front() == "addopt" || args.front() == "perfopt"))
    argv.erase(argv.begin());
  int code = cli::dispatch(argv, io);
  return {code, out.str(), err.str()};
}

/// Every regular file and directory below `root` with its content, for
/// before/after comparisons.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> snap;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    auto rel = fs::relative(e.path(), root).string();
    if (e.is_symlink())
      snap[rel] = "link:" + fs::read_symlink(e.path()).string();
    else if (e.is_directory())
      snap[rel] = "dir";
    else
      snap[rel] = read_file(e.path()) + "|mtime=" +
                  std::to_string(fs::last_write_time(e.path()).time_since_epoch().count());
  }
  return snap;
}

/// Random valid records for property tests.
class RecordGenerator {
 public:
  explicit RecordGenerator(std::uint32_t seed) : rng_(seed) {}

  std::string word(std::size_t max_len = 8) {
    static constexpr std::string_view chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
    std::string w;
    auto len = 1 + rng_() % max_len;
    for (std::size_t i = 0; i < len; ++i) w += chars[rng_() % chars.size()];
    return w;
  }

  std::string tag() {
    static constexpr std::string_view chars = "abcXYZ019_.-+:!=";
    std::string t;
    auto len = 1 + rng_() % 10;
    for (std::size_t i = 0; i < len; ++i) t += chars[rng_() % chars.size()];
    return t;
  }

  double number() {
    switch (rng_() % 5) {
      case 0: return double(rng_() % 100000);
      case 1: return -double(rng_() % 1000);
      case 2: return double(rng_() % 1000000) / 1000.0;
      case 3: return std::ldexp(double(rng_()), -int(rng_() % 60));
      default: {
        std::uniform_real_distribution<double> d(-1e12, 1e12);
        return d(rng_);
      }
    }
  }

  LiboptRecord record() {
    std::optional<std::string> t;
    if (rng_() % 3 == 0) t = tag();
    TokenPairs pairs;
    std::set<std::string> used{"info"};
    auto extra = 1 + rng_() % 6;
    for (std::size_t i = 0; i < extra; ++i) {
      auto tok = word(6);
      if (!used.insert(tok).second) continue;
      pairs.push_back({Name(tok), number()});
    }
    auto info_pos = rng_() % (pairs.size() + 1);
    pairs.insert(pairs.begin() + static_cast<std::ptrdiff_t>(info_pos), TokenPair{Name("info"), double(rng_() % 3)});
    return LiboptRecord{SolverId(Name(word()), t), Name(word()), Name(word()), std::move(pairs)};
  }

  /// Random run of blanks (possibly empty).
  std::string blanks() {
    std::string b;
    auto n = rng_() % 3;
    for (std::size_t i = 0; i < n; ++i) b += (rng_() % 2) ? ' ' : '\t';
    return b;
  }

  std::mt19937& rng() { return rng_; }

 private:
  std::mt19937 rng_;
};

/// Re-renders a record with random blanks around every field and `=`.
inline std::string padded(const LiboptRecord& r, RecordGenerator& gen) {
  auto f = [&](const std::string& s) { return gen.blanks() + s + gen.blanks(); };
  std::string line = f("libopt") + "%" + f(r.solver.text()) + "%" + f(r.collection.str()) + "%" + f(r.problem.str());
  for (const auto& p : r.pairs) line += "%" + f(p.token.str()) + "=" + f(format_number(p.value));
  return line;
}

}  // namespace libopt::testing
