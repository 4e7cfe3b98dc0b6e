#pragma once

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

struct sqlite3;
struct sqlite3_stmt;

namespace tracecurate {

// Key-value store for backend replies. Keys are hex digests; values are raw
// reply text. Implementations are safe to share across threads.
class VerdictCache {
 public:
  virtual ~VerdictCache() = default;
  virtual std::optional<std::string> get(std::string_view key) = 0;
  virtual void put(std::string_view key, std::string_view value) = 0;
  virtual std::size_t size() = 0;
};

class MemoryCache final : public VerdictCache {
 public:
  std::optional<std::string> get(std::string_view key) override;
  void put(std::string_view key, std::string_view value) override;
  std::size_t size() override;

 private:
  std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
};

// SQLite file in WAL mode; every put commits on its own, so a killed run
// loses nothing it already paid for.
class SqliteCache final : public VerdictCache {
 public:
  // Creates `dir` if needed and opens dir/verdicts.sqlite.
  explicit SqliteCache(const std::filesystem::path& dir);
  ~SqliteCache() override;
  SqliteCache(const SqliteCache&) = delete;
  SqliteCache& operator=(const SqliteCache&) = delete;

  std::optional<std::string> get(std::string_view key) override;
  void put(std::string_view key, std::string_view value) override;
  std::size_t size() override;

 private:
  std::mutex mu_;
  sqlite3* db_ = nullptr;
  sqlite3_stmt* get_stmt_ = nullptr;
  sqlite3_stmt* put_stmt_ = nullptr;
};

}  // namespace tracecurate
