#include "support/fixtures.hpp"

#include <sqlite3.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sqlink::testsupport {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "sqlink_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

ColumnSchema col(const std::string& name, ValueType type) {
  ColumnSchema c;
  c.name = name;
  c.display_name = name;
  c.value_type = type;
  return c;
}

}  // namespace

SchemaCatalog concert_catalog() {
  SchemaCatalog cat;
  cat.db_id = "concert_singer";

  TableSchema singer;
  singer.name = "singer";
  singer.columns = {col("singer_id", ValueType::number), col("name", ValueType::text),
                    col("age", ValueType::number), col("country", ValueType::text)};
  singer.primary_key = {"singer_id"};

  TableSchema concert;
  concert.name = "concert";
  concert.columns = {col("concert_id", ValueType::number),
                     col("concert_name", ValueType::text),
                     col("stadium_id", ValueType::number),
                     col("year", ValueType::time)};
  concert.primary_key = {"concert_id"};

  TableSchema stadium;
  stadium.name = "stadium";
  stadium.columns = {col("stadium_id", ValueType::number),
                     col("capacity", ValueType::number),
                     col("location", ValueType::text)};
  stadium.primary_key = {"stadium_id"};

  TableSchema sic;
  sic.name = "singer_in_concert";
  sic.columns = {col("concert_id", ValueType::number), col("singer_id", ValueType::number)};

  cat.tables = {singer, concert, stadium, sic};
  cat.foreign_keys = {
      {SchemaElementId::column_id("concert", "stadium_id"),
       SchemaElementId::column_id("stadium", "stadium_id")},
      {SchemaElementId::column_id("singer_in_concert", "concert_id"),
       SchemaElementId::column_id("concert", "concert_id")},
      {SchemaElementId::column_id("singer_in_concert", "singer_id"),
       SchemaElementId::column_id("singer", "singer_id")},
  };
  cat.validate();
  return cat;
}

SchemaCatalog tiny_catalog() {
  SchemaCatalog cat;
  cat.db_id = "tiny";
  TableSchema t1;
  t1.name = "t1";
  t1.columns = {col("a", ValueType::number), col("b", ValueType::text)};
  t1.primary_key = {"a"};
  TableSchema t2;
  t2.name = "t2";
  t2.columns = {col("c", ValueType::number)};
  cat.tables = {t1, t2};
  cat.validate();
  return cat;
}

void add_timing_table(const std::filesystem::path& path, int rows) {
  sqlite3* db = nullptr;
  if (sqlite3_open(path.string().c_str(), &db) != SQLITE_OK) {
    throw std::runtime_error("cannot open fixture db for timing table");
  }
  std::string sql = "CREATE TABLE timing (v INTEGER);BEGIN;";
  for (int i = 0; i < rows; ++i) {
    sql += "INSERT INTO timing VALUES (" + std::to_string(i * 37 % rows) + ");";
  }
  sql += "COMMIT;";
  char* errmsg = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &errmsg) != SQLITE_OK) {
    std::string msg = errmsg != nullptr ? errmsg : "unknown";
    sqlite3_free(errmsg);
    sqlite3_close(db);
    throw std::runtime_error("timing table setup failed: " + msg);
  }
  sqlite3_close(db);
}

void make_fixture_db(const std::filesystem::path& path) {
  std::filesystem::remove(path);
  sqlite3* db = nullptr;
  if (sqlite3_open(path.string().c_str(), &db) != SQLITE_OK) {
    throw std::runtime_error("cannot create fixture db");
  }
  const char* ddl =
      "CREATE TABLE t1 (a INTEGER PRIMARY KEY, b TEXT);"
      "CREATE TABLE t2 (c INTEGER);"
      "CREATE TABLE t3 (d INTEGER);"
      "INSERT INTO t1 VALUES (1,'x'),(2,'y'),(3,'y'),(4,'z');"
      "INSERT INTO t2 VALUES (10),(20),(30);";
  char* errmsg = nullptr;
  if (sqlite3_exec(db, ddl, nullptr, nullptr, &errmsg) != SQLITE_OK) {
    std::string msg = errmsg != nullptr ? errmsg : "unknown";
    sqlite3_free(errmsg);
    sqlite3_close(db);
    throw std::runtime_error("fixture db setup failed: " + msg);
  }
  sqlite3_close(db);
}

}  // namespace sqlink::testsupport
