#include "tracecurate/verdict_cache.hpp"

#include <sqlite3.h>

#include <fmt/format.h>

#include "tracecurate/error.hpp"

namespace tracecurate {

std::optional<std::string> MemoryCache::get(std::string_view key) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(std::string(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void MemoryCache::put(std::string_view key, std::string_view value) {
  std::lock_guard lock(mu_);
  entries_[std::string(key)] = std::string(value);
}

std::size_t MemoryCache::size() {
  std::lock_guard lock(mu_);
  return entries_.size();
}

namespace {

void check(int rc, sqlite3* db, const char* what) {
  if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW) {
    throw ConfigError(fmt::format("verdict cache: {} failed: {}", what,
                                  db ? sqlite3_errmsg(db) : "no handle"));
  }
}

}  // namespace

SqliteCache::SqliteCache(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw ConfigError(fmt::format("cannot create cache dir {}: {}",
                                  dir.string(), ec.message()));
  }
  const std::string file = (dir / "verdicts.sqlite").string();
  check(sqlite3_open(file.c_str(), &db_), db_, "open");
  sqlite3_busy_timeout(db_, 10000);
  check(sqlite3_exec(db_,
                     "PRAGMA journal_mode=WAL;"
                     "PRAGMA synchronous=NORMAL;"
                     "CREATE TABLE IF NOT EXISTS verdicts("
                     " key TEXT PRIMARY KEY, value TEXT NOT NULL);",
                     nullptr, nullptr, nullptr),
        db_, "init");
  check(sqlite3_prepare_v2(db_, "SELECT value FROM verdicts WHERE key = ?1", -1,
                           &get_stmt_, nullptr),
        db_, "prepare get");
  check(sqlite3_prepare_v2(db_,
                           "INSERT OR REPLACE INTO verdicts(key, value) "
                           "VALUES(?1, ?2)",
                           -1, &put_stmt_, nullptr),
        db_, "prepare put");
}

SqliteCache::~SqliteCache() {
  sqlite3_finalize(get_stmt_);
  sqlite3_finalize(put_stmt_);
  sqlite3_close(db_);
}

std::optional<std::string> SqliteCache::get(std::string_view key) {
  std::lock_guard lock(mu_);
  sqlite3_reset(get_stmt_);
  sqlite3_bind_text(get_stmt_, 1, key.data(), static_cast<int>(key.size()),
                    SQLITE_TRANSIENT);
  const int rc = sqlite3_step(get_stmt_);
  check(rc, db_, "get");
  if (rc != SQLITE_ROW) return std::nullopt;
  const auto* text =
      reinterpret_cast<const char*>(sqlite3_column_text(get_stmt_, 0));
  const int len = sqlite3_column_bytes(get_stmt_, 0);
  std::string value(text ? text : "", static_cast<std::size_t>(len));
  sqlite3_reset(get_stmt_);
  return value;
}

void SqliteCache::put(std::string_view key, std::string_view value) {
  std::lock_guard lock(mu_);
  sqlite3_reset(put_stmt_);
  sqlite3_bind_text(put_stmt_, 1, key.data(), static_cast<int>(key.size()),
                    SQLITE_TRANSIENT);
  sqlite3_bind_text(put_stmt_, 2, value.data(), static_cast<int>(value.size()),
                    SQLITE_TRANSIENT);
  check(sqlite3_step(put_stmt_), db_, "put");
  sqlite3_reset(put_stmt_);
}

std::size_t SqliteCache::size() {
  std::lock_guard lock(mu_);
  sqlite3_stmt* stmt = nullptr;
  check(sqlite3_prepare_v2(db_, "SELECT COUNT(*) FROM verdicts", -1, &stmt,
                           nullptr),
        db_, "count");
  sqlite3_step(stmt);
  const auto n = static_cast<std::size_t>(sqlite3_column_int64(stmt, 0));
  sqlite3_finalize(stmt);
  return n;
}

}  // namespace tracecurate
