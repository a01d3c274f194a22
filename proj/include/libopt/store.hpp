#pragma once

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "libopt/error.hpp"
#include "libopt/name.hpp"
#include "libopt/record.hpp"

namespace libopt {

/// `solver[.tag]%collection%problem`. Tagged solvers are distinct keys.
struct StoreKey {
  SolverId solver;
  Name collection;
  Name problem;

  static StoreKey of(const LiboptRecord& r) { return StoreKey{r.solver, r.collection, r.problem}; }

  std::string text() const { return solver.text() + "%" + collection.str() + "%" + problem.str(); }

  friend auto operator<=>(const StoreKey&, const StoreKey&) = default;
  friend bool operator==(const StoreKey&, const StoreKey&) = default;
};

using StoreValue = TokenPairs;

/// A `solv%coll%prob%` pattern; an absent field matches anything.
struct Selection {
  std::optional<std::string> solver;
  std::optional<Name> collection;
  std::optional<Name> problem;

  bool matches(const StoreKey& key) const {
    if (solver && key.solver.text() != *solver) return false;
    if (collection && key.collection != *collection) return false;
    if (problem && key.problem != *problem) return false;
    return true;
  }

  static Selection all() { return Selection{}; }
};

/// A selection ending in `%` is a pattern; anything else names a file of
/// Libopt lines whose triples are to be deleted.
inline std::variant<Selection, std::filesystem::path> parse_selection(std::string_view text) {
  if (text.empty()) throw ParseError("empty selection");
  if (text.back() != '%') return std::filesystem::path(std::string(text));

  text.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pct = text.find('%', start);
    fields.push_back(text.substr(start, pct == std::string_view::npos ? std::string_view::npos : pct - start));
    if (pct == std::string_view::npos) break;
    start = pct + 1;
  }
  if (fields.size() > 3) throw ParseError("selection '" + std::string(text) + "%' has more than three fields");

  Selection sel;
  if (!fields[0].empty()) sel.solver = SolverId::parse(fields[0]).text();
  if (fields.size() > 1 && !fields[1].empty()) sel.collection = Name(fields[1]);
  if (fields.size() > 2 && !fields[2].empty()) sel.problem = Name(fields[2]);
  return sel;
}

enum class AddOutcome { added, replaced, duplicate };

/// Results database: one entry per (solver, collection, problem).
///
/// On disk each entry is a Libopt line without its `libopt%` sentinel, one
/// per line, in key order.
class ResultsStore {
 public:
  using Entry = std::pair<StoreKey, StoreValue>;

  static ResultsStore parse(std::string_view text) {
    ResultsStore store;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (trim_blanks(line).empty()) continue;
      LiboptRecord record = [&] {
        try {
          return parse_line(std::string(kSentinel) + "%" + line);
        } catch (const ParseError& e) {
          throw ParseError(e.what(), number);
        }
      }();
      auto key = StoreKey::of(record);
      if (!store.entries_.emplace(key, std::move(record.pairs)).second)
        throw ParseError("duplicate entry " + key.text(), number);
    }
    return store;
  }

  /// Loads `path`; a missing file is an empty store.
  static ResultsStore open(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return ResultsStore{};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read results store " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      return parse(buf.str());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [key, value] : entries_) {
      out += key.text();
      out += '%';
      out += serialize_pairs(value);
      out += '\n';
    }
    return out;
  }

  /// Writes to a temporary file in the same directory, then renames it
  /// over `path`.
  void save(const std::filesystem::path& path) const {
    auto dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    auto tmp = dir / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
    auto text = to_text();
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error("cannot write " + tmp.string() + ": " + std::strerror(errno));
    std::size_t done = 0;
    while (done < text.size()) {
      auto n = ::write(fd, text.data() + done, text.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        int err = errno;
        ::close(fd);
        ::unlink(tmp.c_str());
        throw Error("write failed: " + tmp.string() + ": " + std::strerror(err));
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
      ::unlink(tmp.c_str());
      throw Error("cannot flush " + tmp.string());
    }
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
      int err = errno;
      ::unlink(tmp.c_str());
      throw Error("cannot replace " + path.string() + ": " + std::strerror(err));
    }
  }

  AddOutcome add(const LiboptRecord& record, bool replace) {
    check_pairs(record.pairs);
    auto key = StoreKey::of(record);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      entries_.emplace(std::move(key), record.pairs);
      return AddOutcome::added;
    }
    if (!replace) return AddOutcome::duplicate;
    it->second = record.pairs;
    return AddOutcome::replaced;
  }

  const StoreValue* find(const StoreKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::vector<Entry> query(const Selection& sel) const {
    std::vector<Entry> out;
    for (const auto& e : entries_)
      if (sel.matches(e.first)) out.push_back(e);
    return out;
  }

  std::size_t erase(const Selection& sel) {
    return std::erase_if(entries_, [&](const auto& e) { return sel.matches(e.first); });
  }

  bool erase(const StoreKey& key) { return entries_.erase(key) > 0; }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::map<StoreKey, StoreValue> entries_;
};

struct ImportReport {
  std::size_t added = 0;
  std::size_t replaced = 0;
  std::size_t duplicates = 0;
  std::size_t invalid = 0;
  std::vector<std::string> messages;
};

/// Adds every Libopt line of an `.lbt` stream. Duplicate or invalid lines are
/// counted and skipped.
inline ImportReport import_stream(ResultsStore& store, std::istream& in, bool replace, const TokenConfig& config,
                                  std::string_view source = "<input>") {
  ImportReport report;
  auto where = [&](std::size_t line) { return std::string(source) + ":" + std::to_string(line) + ": "; };
  for (const auto& entry : read_lbt(in)) {
    if (!entry.record) {
      ++report.invalid;
      report.messages.push_back(where(entry.line_number) + entry.error);
      continue;
    }
    auto issues = validate_tokens(*entry.record, config);
    if (!issues.empty()) {
      ++report.invalid;
      for (const auto& i : issues) report.messages.push_back(where(entry.line_number) + i.message);
      continue;
    }
    switch (store.add(*entry.record, replace)) {
      case AddOutcome::added:
        ++report.added;
        break;
      case AddOutcome::replaced:
        ++report.replaced;
        break;
      case AddOutcome::duplicate:
        ++report.duplicates;
        report.messages.push_back(where(entry.line_number) + "duplicate entry " + StoreKey::of(*entry.record).text() +
                                  " not replaced");
        break;
    }
  }
  return report;
}

inline ImportReport import_file(ResultsStore& store, const std::filesystem::path& path, bool replace,
                                const TokenConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return import_stream(store, in, replace, config, path.string());
}

struct FileDeleteReport {
  std::vector<StoreKey> deleted;
  std::vector<StoreKey> missing;
  std::size_t invalid = 0;
  std::vector<std::string> messages;
};

/// Deletes the triple of every Libopt line in `path`.
inline FileDeleteReport erase_file(ResultsStore& store, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read selection file " + path.string());
  FileDeleteReport report;
  for (const auto& entry : read_lbt(in)) {
    if (!entry.record) {
      ++report.invalid;
      report.messages.push_back(path.string() + ":" + std::to_string(entry.line_number) + ": " + entry.error);
      continue;
    }
    auto key = StoreKey::of(*entry.record);
    if (store.erase(key))
      report.deleted.push_back(key);
    else
      report.missing.push_back(key);
  }
  return report;
}

/// Exclusive advisory lock on `<store>.lock` for a read-modify-write cycle.
class StoreLock {
 public:
  explicit StoreLock(const std::filesystem::path& store_path) : path_(store_path.string() + ".lock") {
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open lock file " + path_ + ": " + std::strerror(errno));
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd_);
      throw Error("cannot lock " + path_ + ": " + std::strerror(err));
    }
  }
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;
  ~StoreLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  std::string path_;
  int fd_ = -1;
};

}  // namespace libopt
