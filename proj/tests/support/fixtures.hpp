#pragma once

#include <filesystem>
#include <string>

#include "sqlink/catalog.hpp"

namespace sqlink::testsupport {

// A fresh directory under the build tree's temp area, cleaned on creation.
std::filesystem::path temp_dir(const std::string& name);

void write_file(const std::filesystem::path& path, const std::string& content);
std::string slurp(const std::filesystem::path& path);

// concert_singer-style catalog used across the SQL corpus tests:
//   singer(singer_id, name, age, country)
//   concert(concert_id, concert_name, stadium_id, year)
//   stadium(stadium_id, capacity, location)
//   singer_in_concert(concert_id, singer_id)
SchemaCatalog concert_catalog();

// Two-table toy catalog: t1(a, b), t2(c).
SchemaCatalog tiny_catalog();

// Creates a small populated SQLite database at `path`:
//   t1(a integer primary key, b text)   -- 4 rows
//   t2(c integer)                       -- 3 rows
// plus an empty table t3(d integer) for the no-rows case.
void make_fixture_db(const std::filesystem::path& path);

// Adds a `timing(v integer)` table with `rows` rows so self-join queries
// run for milliseconds; used where timing ratios must beat scheduler noise.
void add_timing_table(const std::filesystem::path& path, int rows);

}  // namespace sqlink::testsupport
