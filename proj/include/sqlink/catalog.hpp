#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sqlink/schema_set.hpp"

namespace sqlink {

enum class ValueType { text, number, time, boolean, other };

std::string_view value_type_name(ValueType t);
ValueType value_type_from_name(std::string_view name);

struct ColumnSchema {
  std::string name;          // normalized (lowercase, no whitespace)
  std::string display_name;  // original spelling, used in prompts
  ValueType value_type = ValueType::other;
  std::vector<std::string> sample_values;  // at most 3
};

struct TableSchema {
  std::string name;  // normalized
  std::vector<ColumnSchema> columns;
  std::vector<std::string> primary_key;  // normalized column names

  const ColumnSchema* find_column(std::string_view normalized_name) const;
};

struct ForeignKey {
  SchemaElementId from;  // column element
  SchemaElementId to;    // column element
};

// Immutable after construction; safe to share across threads.
struct SchemaCatalog {
  std::string db_id;
  std::vector<TableSchema> tables;
  std::vector<ForeignKey> foreign_keys;

  const TableSchema* find_table(std::string_view normalized_name) const;
  bool contains(const SchemaElementId& id) const;
  SchemaSet full_set() const;

  // Full dataset-boundary validation: unique names, resolvable foreign keys,
  // at least one table, at least one column per table. Subset catalogs built
  // by subset_catalog may legally hold zero-column tables and skip this.
  void validate() const;
};

// Reads a schema-collection file (the Spider/Bird tables.json layout).
std::vector<SchemaCatalog> load_dataset_catalogs(const std::string& path);

// Opens a SQLite database file read-only and reflects its live schema.
// sample_values holds up to 3 distinct non-null values per column.
SchemaCatalog introspect_database(const std::string& db_file);

// Returns the catalog restricted to exactly the elements of `keep`.
// Foreign keys with a dropped endpoint are dropped. A kept table with no
// kept columns stays as a zero-column table.
SchemaCatalog subset_catalog(const SchemaCatalog& catalog, const SchemaSet& keep);

enum class SchemaStyle { ddl, compact };

// Deterministic text rendering of a catalog. compact: one "t(c1, c2)" line
// per table. ddl: one CREATE TABLE block per table with keys and sample
// values as trailing comments.
std::string serialize_schema(const SchemaCatalog& catalog, SchemaStyle style);

}  // namespace sqlink
