#include <sqlite3.h>

#include <filesystem>

#include "doctest.h"
#include "sqlink/catalog.hpp"
#include "sqlink/error.hpp"
#include "support/fixtures.hpp"

using namespace sqlink;
namespace ts = sqlink::testsupport;

namespace {

const char* kTablesJson = R"JSON([
  {
    "db_id": "concert_fixture",
    "table_names_original": ["Singer", "concert"],
    "column_names_original": [
      [-1, "*"],
      [0, "Singer_ID"], [0, "Name"], [0, "Age"],
      [1, "concert_ID"], [1, "Singer_ID"]
    ],
    "column_types": ["text", "number", "text", "number", "number", "number"],
    "primary_keys": [1, 4],
    "foreign_keys": [[5, 1]]
  }
])JSON";

}  // namespace

TEST_SUITE("catalog") {

TEST_CASE("load_dataset_catalogs parses the dataset wire format") {
  auto dir = ts::temp_dir("catalog_load");
  ts::write_file(dir / "tables.json", kTablesJson);
  auto catalogs = load_dataset_catalogs((dir / "tables.json").string());
  REQUIRE(catalogs.size() == 1);
  const SchemaCatalog& cat = catalogs[0];
  CHECK(cat.db_id == "concert_fixture");
  REQUIRE(cat.tables.size() == 2);
  std::size_t total_cols = 0;
  for (const auto& t : cat.tables) total_cols += t.columns.size();
  CHECK(total_cols == 5);
  // identifiers normalized to lowercase, display names preserved
  CHECK(cat.tables[0].name == "singer");
  CHECK(cat.tables[0].columns[0].name == "singer_id");
  CHECK(cat.tables[0].columns[0].display_name == "Singer_ID");
  CHECK(cat.tables[0].primary_key == std::vector<std::string>{"singer_id"});
  REQUIRE(cat.foreign_keys.size() == 1);
  CHECK(cat.foreign_keys[0].from.to_string() == "concert.singer_id");
  CHECK(cat.foreign_keys[0].to.to_string() == "singer.singer_id");
}

TEST_CASE("load rejects an empty table list") {
  auto dir = ts::temp_dir("catalog_empty");
  ts::write_file(dir / "tables.json",
                 R"([{"db_id":"x","table_names_original":[],)"
                 R"("column_names_original":[[-1,"*"]],"column_types":["text"]}])");
  CHECK_THROWS_AS(load_dataset_catalogs((dir / "tables.json").string()),
                  ValidationError);
}

TEST_CASE("load rejects out-of-range foreign key indices") {
  auto dir = ts::temp_dir("catalog_fkrange");
  ts::write_file(dir / "tables.json",
                 R"([{"db_id":"x","table_names_original":["t"],)"
                 R"("column_names_original":[[-1,"*"],[0,"a"]],)"
                 R"("column_types":["text","text"],"foreign_keys":[[1, 9]]}])");
  CHECK_THROWS_AS(load_dataset_catalogs((dir / "tables.json").string()),
                  ValidationError);
}

TEST_CASE("load rejects duplicate db_id") {
  auto dir = ts::temp_dir("catalog_dup");
  ts::write_file(dir / "tables.json",
                 R"([{"db_id":"x","table_names_original":["t"],)"
                 R"("column_names_original":[[-1,"*"],[0,"a"]],"column_types":["text","text"]},)"
                 R"({"db_id":"x","table_names_original":["t"],)"
                 R"("column_names_original":[[-1,"*"],[0,"a"]],"column_types":["text","text"]}])");
  CHECK_THROWS_AS(load_dataset_catalogs((dir / "tables.json").string()),
                  ValidationError);
}

TEST_CASE("load accepts composite primary keys as nested arrays") {
  auto dir = ts::temp_dir("catalog_composite");
  ts::write_file(dir / "tables.json",
                 R"([{"db_id":"x","table_names_original":["t"],)"
                 R"("column_names_original":[[-1,"*"],[0,"a"],[0,"b"]],)"
                 R"("column_types":["text","number","number"],)"
                 R"("primary_keys":[[1, 2]]}])");
  auto catalogs = load_dataset_catalogs((dir / "tables.json").string());
  REQUIRE(catalogs.size() == 1);
  CHECK(catalogs[0].tables[0].primary_key == std::vector<std::string>{"a", "b"});
}

TEST_CASE("load reports a byte offset on malformed files") {
  auto dir = ts::temp_dir("catalog_malformed");
  ts::write_file(dir / "tables.json", "[{\"db_id\": }]");
  try {
    load_dataset_catalogs((dir / "tables.json").string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
  }
}

TEST_CASE("introspect_database reflects a live schema") {
  auto dir = ts::temp_dir("catalog_introspect");
  auto db_path = dir / "toy.sqlite";
  ts::make_fixture_db(db_path);
  SchemaCatalog cat = introspect_database(db_path.string());
  CHECK(cat.db_id == "toy");
  REQUIRE(cat.tables.size() == 3);
  CHECK(cat.tables[0].name == "t1");
  REQUIRE(cat.tables[0].columns.size() == 2);
  CHECK(cat.tables[0].columns[0].name == "a");
  CHECK(cat.tables[0].columns[0].value_type == ValueType::number);
  CHECK(cat.tables[0].columns[1].value_type == ValueType::text);
  CHECK(cat.tables[0].primary_key == std::vector<std::string>{"a"});
  CHECK(cat.tables[1].name == "t2");
  REQUIRE(cat.tables[1].columns.size() == 1);

  // up to 3 distinct sample values, deterministic order
  CHECK(cat.tables[0].columns[1].sample_values ==
        std::vector<std::string>{"x", "y", "z"});
  // empty table -> no sample values
  CHECK(cat.tables[2].columns[0].sample_values.empty());
}

TEST_CASE("introspect_database resolves foreign keys") {
  auto dir = ts::temp_dir("catalog_fk");
  auto db_path = dir / "fk.sqlite";
  {
    sqlite3* db = nullptr;
    REQUIRE(sqlite3_open(db_path.string().c_str(), &db) == SQLITE_OK);
    const char* ddl =
        "CREATE TABLE parent (id INTEGER PRIMARY KEY, label TEXT);"
        "CREATE TABLE child (pid INTEGER REFERENCES parent(id));"
        "CREATE TABLE implicit (pid INTEGER REFERENCES parent);";
    REQUIRE(sqlite3_exec(db, ddl, nullptr, nullptr, nullptr) == SQLITE_OK);
    sqlite3_close(db);
  }
  SchemaCatalog cat = introspect_database(db_path.string());
  REQUIRE(cat.foreign_keys.size() == 2);
  for (const auto& fk : cat.foreign_keys) {
    CHECK(fk.to.to_string() == "parent.id");  // implicit ref resolves to the pk
    CHECK(*fk.from.column == "pid");
  }
}

TEST_CASE("introspect_database rejects unreadable files") {
  auto dir = ts::temp_dir("catalog_badfile");
  ts::write_file(dir / "junk.sqlite", "this is not a database");
  CHECK_THROWS_AS(introspect_database((dir / "junk.sqlite").string()), IoError);
}

TEST_CASE("introspect_database rejects databases without user tables") {
  auto dir = ts::temp_dir("catalog_notables");
  auto db_path = dir / "empty.sqlite";
  {
    sqlite3* db = nullptr;
    REQUIRE(sqlite3_open(db_path.string().c_str(), &db) == SQLITE_OK);
    // force the file to materialize without creating any user table
    sqlite3_exec(db, "PRAGMA user_version = 1;", nullptr, nullptr, nullptr);
    sqlite3_close(db);
  }
  CHECK_THROWS_AS(introspect_database(db_path.string()), ValidationError);
}

TEST_CASE("subset_catalog keeps exactly the kept elements") {
  SchemaCatalog cat = ts::tiny_catalog();

  SUBCASE("identity") {
    for (const SchemaCatalog& c : {ts::tiny_catalog(), ts::concert_catalog()}) {
      SchemaCatalog same = subset_catalog(c, c.full_set());
      CHECK(same.full_set() == c.full_set());
      CHECK(serialize_schema(same, SchemaStyle::ddl) ==
            serialize_schema(c, SchemaStyle::ddl));
    }
  }

  SUBCASE("single table, single column") {
    SchemaSet keep;
    keep.insert(SchemaElementId::column_id("t1", "a"));
    SchemaCatalog sub = subset_catalog(cat, keep);
    REQUIRE(sub.tables.size() == 1);
    CHECK(sub.tables[0].name == "t1");
    REQUIRE(sub.tables[0].columns.size() == 1);
    CHECK(sub.tables[0].columns[0].name == "a");
    CHECK(sub.full_set() == keep);
  }

  SUBCASE("unknown element rejected") {
    SchemaSet keep;
    keep.insert(SchemaElementId::table_id("t9"));
    CHECK_THROWS_AS(subset_catalog(cat, keep), ResolutionError);
  }

  SUBCASE("empty keep rejected") {
    CHECK_THROWS_AS(subset_catalog(cat, SchemaSet{}), PreconditionError);
  }

  SUBCASE("foreign keys with dropped endpoints are dropped") {
    SchemaCatalog big = ts::concert_catalog();
    SchemaSet keep;
    keep.insert(SchemaElementId::column_id("concert", "stadium_id"));
    keep.insert(SchemaElementId::column_id("stadium", "stadium_id"));
    SchemaCatalog sub = subset_catalog(big, keep);
    REQUIRE(sub.foreign_keys.size() == 1);
    CHECK(sub.foreign_keys[0].from.table == "concert");

    SchemaSet no_target;
    no_target.insert(SchemaElementId::column_id("concert", "stadium_id"));
    CHECK(subset_catalog(big, no_target).foreign_keys.empty());
  }
}

TEST_CASE("serialize_schema compact and ddl styles") {
  SchemaCatalog cat = ts::tiny_catalog();

  SUBCASE("compact single table") {
    SchemaSet keep;
    keep.insert(SchemaElementId::column_id("t1", "a"));
    keep.insert(SchemaElementId::column_id("t1", "b"));
    SchemaCatalog sub = subset_catalog(cat, keep);
    CHECK(serialize_schema(sub, SchemaStyle::compact) == "t1(a, b)");
  }

  SUBCASE("compact multi table") {
    CHECK(serialize_schema(cat, SchemaStyle::compact) == "t1(a, b)\nt2(c)");
  }

  SUBCASE("determinism") {
    CHECK(serialize_schema(cat, SchemaStyle::ddl) ==
          serialize_schema(cat, SchemaStyle::ddl));
    CHECK(serialize_schema(cat, SchemaStyle::compact) ==
          serialize_schema(cat, SchemaStyle::compact));
  }

  SUBCASE("ddl names keys") {
    SchemaCatalog big = ts::concert_catalog();
    std::string ddl = serialize_schema(big, SchemaStyle::ddl);
    CHECK(ddl.find("CREATE TABLE singer (") != std::string::npos);
    CHECK(ddl.find("PRIMARY KEY (singer_id)") != std::string::npos);
    CHECK(ddl.find("FOREIGN KEY (stadium_id) REFERENCES stadium(stadium_id)") !=
          std::string::npos);
  }

  SUBCASE("ddl includes sample values") {
    SchemaCatalog c = cat;
    c.tables[0].columns[1].sample_values = {"x", "y"};
    std::string ddl = serialize_schema(c, SchemaStyle::ddl);
    CHECK(ddl.find("b text, -- values: x, y") != std::string::npos);
  }
}

TEST_CASE("schema set closure and projections") {
  SchemaSet s;
  s.insert(SchemaElementId::column_id("T1", "A"));
  CHECK(s.contains(SchemaElementId::table_id("t1")));  // closure + normalization
  CHECK(s.size() == 2);
  CHECK(s.table_level().size() == 1);
  CHECK(s.column_level().size() == 1);
  CHECK(s.table_level().size() + s.column_level().size() == s.size());

  SchemaSet u = SchemaSet::set_union(s, SchemaSet::from_strings({"t2.c"}));
  CHECK(u.size() == 4);
  SchemaSet i = SchemaSet::set_intersection(u, s);
  CHECK(i == s);
  CHECK(u.includes(s));
  CHECK_FALSE(s.includes(u));
}

}  // TEST_SUITE
