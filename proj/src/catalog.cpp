#include "sqlink/catalog.hpp"

#include <sqlite3.h>

#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "sqlink/error.hpp"

namespace sqlink {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ValueType value_type_from_dataset(std::string_view raw) {
  std::string t = normalize_identifier(raw);
  if (t == "text" || t == "varchar" || t == "char") return ValueType::text;
  if (t == "number" || t == "integer" || t == "int" || t == "real" ||
      t == "float" || t == "double" || t == "numeric" || t == "decimal") {
    return ValueType::number;
  }
  if (t == "time" || t == "date" || t == "datetime" || t == "timestamp" ||
      t == "year") {
    return ValueType::time;
  }
  if (t == "boolean" || t == "bool" || t == "bit") return ValueType::boolean;
  return ValueType::other;
}

ValueType value_type_from_declared(std::string_view declared) {
  std::string t = normalize_identifier(declared);
  auto has = [&](const char* s) { return t.find(s) != std::string::npos; };
  if (has("int")) return ValueType::number;
  if (has("char") || has("clob") || has("text")) return ValueType::text;
  if (has("bool")) return ValueType::boolean;
  if (has("date") || has("time")) return ValueType::time;
  if (has("real") || has("floa") || has("doub") || has("num") || has("dec")) {
    return ValueType::number;
  }
  return ValueType::other;
}

std::string quote_sqlite_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += "\"\"";
    out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

std::string_view value_type_name(ValueType t) {
  switch (t) {
    case ValueType::text: return "text";
    case ValueType::number: return "number";
    case ValueType::time: return "time";
    case ValueType::boolean: return "boolean";
    case ValueType::other: return "other";
  }
  return "other";
}

ValueType value_type_from_name(std::string_view name) {
  if (name == "text") return ValueType::text;
  if (name == "number") return ValueType::number;
  if (name == "time") return ValueType::time;
  if (name == "boolean") return ValueType::boolean;
  return ValueType::other;
}

const ColumnSchema* TableSchema::find_column(std::string_view normalized_name) const {
  for (const auto& c : columns) {
    if (c.name == normalized_name) return &c;
  }
  return nullptr;
}

const TableSchema* SchemaCatalog::find_table(std::string_view normalized_name) const {
  for (const auto& t : tables) {
    if (t.name == normalized_name) return &t;
  }
  return nullptr;
}

bool SchemaCatalog::contains(const SchemaElementId& id) const {
  const TableSchema* t = find_table(id.table);
  if (t == nullptr) return false;
  if (!id.is_column()) return true;
  return t->find_column(*id.column) != nullptr;
}

SchemaSet SchemaCatalog::full_set() const {
  SchemaSet out;
  for (const auto& t : tables) {
    out.insert(SchemaElementId::table_id(t.name));
    for (const auto& c : t.columns) {
      out.insert(SchemaElementId::column_id(t.name, c.name));
    }
  }
  return out;
}

void SchemaCatalog::validate() const {
  if (db_id.empty()) throw ValidationError("catalog has empty db_id");
  if (tables.empty()) {
    throw ValidationError("catalog '" + db_id + "' has no tables");
  }
  std::unordered_set<std::string> table_names;
  for (const auto& t : tables) {
    if (t.name.empty()) throw ValidationError("empty table name in '" + db_id + "'");
    if (!table_names.insert(t.name).second) {
      throw ValidationError("duplicate table name '" + t.name + "' in '" + db_id + "'");
    }
    if (t.columns.empty()) {
      throw ValidationError("table '" + t.name + "' in '" + db_id + "' has no columns");
    }
    std::unordered_set<std::string> col_names;
    for (const auto& c : t.columns) {
      if (c.name.empty()) {
        throw ValidationError("empty column name in table '" + t.name + "'");
      }
      if (!col_names.insert(c.name).second) {
        throw ValidationError("duplicate column name '" + c.name + "' in table '" +
                              t.name + "'");
      }
    }
    for (const auto& pk : t.primary_key) {
      if (t.find_column(pk) == nullptr) {
        throw ValidationError("primary key column '" + pk + "' missing from table '" +
                              t.name + "'");
      }
    }
  }
  for (const auto& fk : foreign_keys) {
    for (const SchemaElementId* end : {&fk.from, &fk.to}) {
      if (!end->is_column() || !contains(*end)) {
        throw ValidationError("foreign key endpoint '" + end->to_string() +
                              "' does not resolve in '" + db_id + "'");
      }
    }
  }
}

std::vector<SchemaCatalog> load_dataset_catalogs(const std::string& path) {
  std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed schema file: ") + e.what(),
                     e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!doc.is_array()) {
    throw ParseError("schema file must contain an array of database entries", 0);
  }

  std::vector<SchemaCatalog> catalogs;
  std::unordered_set<std::string> seen_ids;
  for (const auto& entry : doc) {
    SchemaCatalog cat;
    try {
      cat.db_id = entry.at("db_id").get<std::string>();
      const auto& table_names = entry.at("table_names_original");
      const auto& column_names = entry.at("column_names_original");
      const auto& column_types = entry.at("column_types");

      for (const auto& name : table_names) {
        TableSchema t;
        t.name = normalize_identifier(name.get<std::string>());
        cat.tables.push_back(std::move(t));
      }

      // Global column index -> (table index, normalized name); sentinel
      // entries with a negative table index ([-1, "*"]) map to {-1, ""}.
      std::vector<std::pair<int, std::string>> column_index;
      for (std::size_t i = 0; i < column_names.size(); ++i) {
        const auto& pair = column_names.at(i);
        int table_idx = pair.at(0).get<int>();
        std::string original = pair.at(1).get<std::string>();
        if (table_idx < 0) {
          column_index.emplace_back(-1, "");
          continue;
        }
        if (table_idx >= static_cast<int>(cat.tables.size())) {
          throw ValidationError("column '" + original + "' references table index " +
                                std::to_string(table_idx) + " out of range");
        }
        ColumnSchema col;
        col.name = normalize_identifier(original);
        col.display_name = original;
        if (i < column_types.size()) {
          col.value_type = value_type_from_dataset(column_types.at(i).get<std::string>());
        }
        column_index.emplace_back(table_idx, col.name);
        cat.tables[table_idx].columns.push_back(std::move(col));
      }

      auto resolve_column = [&](int global_idx) -> std::pair<int, std::string> {
        if (global_idx < 0 || global_idx >= static_cast<int>(column_index.size()) ||
            column_index[global_idx].first < 0) {
          throw ValidationError("column index " + std::to_string(global_idx) +
                                " out of range in '" + cat.db_id + "'");
        }
        return column_index[global_idx];
      };

      if (entry.contains("primary_keys")) {
        for (const auto& pk : entry.at("primary_keys")) {
          // Composite keys arrive as nested arrays in some dataset versions.
          std::vector<int> parts;
          if (pk.is_array()) {
            for (const auto& part : pk) parts.push_back(part.get<int>());
          } else {
            parts.push_back(pk.get<int>());
          }
          for (int part : parts) {
            auto [tidx, cname] = resolve_column(part);
            cat.tables[tidx].primary_key.push_back(cname);
          }
        }
      }
      if (entry.contains("foreign_keys")) {
        for (const auto& fk : entry.at("foreign_keys")) {
          auto [from_t, from_c] = resolve_column(fk.at(0).get<int>());
          auto [to_t, to_c] = resolve_column(fk.at(1).get<int>());
          cat.foreign_keys.push_back(ForeignKey{
              SchemaElementId::column_id(cat.tables[from_t].name, from_c),
              SchemaElementId::column_id(cat.tables[to_t].name, to_c)});
        }
      }
    } catch (const json::exception& e) {
      throw ParseError("malformed database entry: " + std::string(e.what()), 0);
    }

    if (!seen_ids.insert(cat.db_id).second) {
      throw ValidationError("duplicate db_id '" + cat.db_id + "'");
    }
    cat.validate();
    catalogs.push_back(std::move(cat));
  }
  return catalogs;
}

namespace {

struct SqliteCloser {
  void operator()(sqlite3* db) const { sqlite3_close(db); }
};
using SqliteHandle = std::unique_ptr<sqlite3, SqliteCloser>;

struct StmtCloser {
  void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using SqliteStmt = std::unique_ptr<sqlite3_stmt, StmtCloser>;

SqliteStmt prepare(sqlite3* db, const std::string& sql) {
  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
    std::string msg = sqlite3_errmsg(db);
    sqlite3_finalize(stmt);
    throw IoError("sqlite prepare failed: " + msg);
  }
  return SqliteStmt(stmt);
}

std::string column_text(sqlite3_stmt* stmt, int idx) {
  const unsigned char* p = sqlite3_column_text(stmt, idx);
  return p != nullptr ? reinterpret_cast<const char*>(p) : "";
}

}  // namespace

SchemaCatalog introspect_database(const std::string& db_file) {
  sqlite3* raw = nullptr;
  if (sqlite3_open_v2(db_file.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr) !=
      SQLITE_OK) {
    std::string msg = raw != nullptr ? sqlite3_errmsg(raw) : "out of memory";
    sqlite3_close(raw);
    throw IoError("cannot open database '" + db_file + "': " + msg);
  }
  SqliteHandle db(raw);

  SchemaCatalog cat;
  {
    // db_id from the file name, extension stripped.
    std::string base = db_file;
    auto slash = base.find_last_of("/\\");
    if (slash != std::string::npos) base = base.substr(slash + 1);
    auto dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    cat.db_id = normalize_identifier(base);
    if (cat.db_id.empty()) cat.db_id = "db";
  }

  std::vector<std::string> original_names;
  {
    auto stmt = prepare(db.get(),
                        "SELECT name FROM sqlite_master WHERE type='table' "
                        "AND name NOT LIKE 'sqlite_%' ORDER BY rowid");
    int rc;
    while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
      original_names.push_back(column_text(stmt.get(), 0));
    }
    if (rc != SQLITE_DONE) {
      throw IoError("cannot read schema of '" + db_file + "': " +
                    sqlite3_errmsg(db.get()));
    }
  }
  if (original_names.empty()) {
    throw ValidationError("database '" + db_file + "' has no user tables");
  }

  for (const auto& original : original_names) {
    TableSchema table;
    table.name = normalize_identifier(original);
    auto info = prepare(db.get(), "PRAGMA table_info(" + quote_sqlite_ident(original) + ")");
    while (sqlite3_step(info.get()) == SQLITE_ROW) {
      ColumnSchema col;
      col.display_name = column_text(info.get(), 1);
      col.name = normalize_identifier(col.display_name);
      col.value_type = value_type_from_declared(column_text(info.get(), 2));
      if (sqlite3_column_int(info.get(), 5) > 0) {
        table.primary_key.push_back(col.name);
      }
      table.columns.push_back(std::move(col));
    }
    for (auto& col : table.columns) {
      auto values = prepare(db.get(), "SELECT DISTINCT " + quote_sqlite_ident(col.display_name) +
                                          " FROM " + quote_sqlite_ident(original) + " WHERE " +
                                          quote_sqlite_ident(col.display_name) +
                                          " IS NOT NULL ORDER BY 1 LIMIT 3");
      while (sqlite3_step(values.get()) == SQLITE_ROW) {
        col.sample_values.push_back(column_text(values.get(), 0));
      }
    }
    cat.tables.push_back(std::move(table));
  }

  for (const auto& original : original_names) {
    std::string table_name = normalize_identifier(original);
    auto fks = prepare(db.get(), "PRAGMA foreign_key_list(" + quote_sqlite_ident(original) + ")");
    while (sqlite3_step(fks.get()) == SQLITE_ROW) {
      std::string target_table = normalize_identifier(column_text(fks.get(), 2));
      std::string from_col = normalize_identifier(column_text(fks.get(), 3));
      std::string to_col = normalize_identifier(column_text(fks.get(), 4));
      const TableSchema* target = cat.find_table(target_table);
      if (target == nullptr) continue;
      if (to_col.empty()) {
        // Implicit reference to the target's primary key.
        if (target->primary_key.size() != 1) continue;
        to_col = target->primary_key.front();
      }
      if (target->find_column(to_col) == nullptr) continue;
      cat.foreign_keys.push_back(ForeignKey{
          SchemaElementId::column_id(table_name, from_col),
          SchemaElementId::column_id(target_table, to_col)});
    }
  }

  cat.validate();
  return cat;
}

SchemaCatalog subset_catalog(const SchemaCatalog& catalog, const SchemaSet& keep) {
  if (keep.empty()) {
    throw PreconditionError("subset_catalog: keep set is empty");
  }
  for (const auto& e : keep.elements()) {
    if (!catalog.contains(e)) throw ResolutionError(e.to_string());
  }

  SchemaCatalog out;
  out.db_id = catalog.db_id;
  for (const auto& t : catalog.tables) {
    if (!keep.contains(SchemaElementId::table_id(t.name))) continue;
    TableSchema kept;
    kept.name = t.name;
    for (const auto& c : t.columns) {
      if (keep.contains(SchemaElementId::column_id(t.name, c.name))) {
        kept.columns.push_back(c);
      }
    }
    for (const auto& pk : t.primary_key) {
      if (kept.find_column(pk) != nullptr) kept.primary_key.push_back(pk);
    }
    out.tables.push_back(std::move(kept));
  }
  for (const auto& fk : catalog.foreign_keys) {
    if (keep.contains(fk.from) && keep.contains(fk.to)) {
      out.foreign_keys.push_back(fk);
    }
  }
  return out;
}

std::string serialize_schema(const SchemaCatalog& catalog, SchemaStyle style) {
  std::ostringstream out;
  if (style == SchemaStyle::compact) {
    bool first_table = true;
    for (const auto& t : catalog.tables) {
      if (!first_table) out << "\n";
      first_table = false;
      out << t.name << "(";
      for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i > 0) out << ", ";
        out << t.columns[i].name;
      }
      out << ")";
    }
    return out.str();
  }

  std::unordered_map<std::string, std::vector<const ForeignKey*>> fks_by_table;
  for (const auto& fk : catalog.foreign_keys) {
    fks_by_table[fk.from.table].push_back(&fk);
  }

  bool first_table = true;
  for (const auto& t : catalog.tables) {
    if (!first_table) out << "\n\n";
    first_table = false;
    out << "CREATE TABLE " << t.name << " (";
    // (declaration, trailing comment) pairs; comma goes before the comment.
    std::vector<std::pair<std::string, std::string>> lines;
    for (const auto& c : t.columns) {
      std::string decl = c.name + " " + std::string(value_type_name(c.value_type));
      std::string comment;
      if (!c.sample_values.empty()) {
        comment = " -- values:";
        for (std::size_t i = 0; i < c.sample_values.size(); ++i) {
          comment += (i == 0 ? " " : ", ");
          comment += c.sample_values[i];
        }
      }
      lines.emplace_back(std::move(decl), std::move(comment));
    }
    if (!t.primary_key.empty()) {
      std::string decl = "PRIMARY KEY (";
      for (std::size_t i = 0; i < t.primary_key.size(); ++i) {
        if (i > 0) decl += ", ";
        decl += t.primary_key[i];
      }
      decl += ")";
      lines.emplace_back(std::move(decl), "");
    }
    auto it = fks_by_table.find(t.name);
    if (it != fks_by_table.end()) {
      for (const ForeignKey* fk : it->second) {
        lines.emplace_back("FOREIGN KEY (" + *fk->from.column + ") REFERENCES " +
                               fk->to.table + "(" + *fk->to.column + ")",
                           "");
      }
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      out << "\n  " << lines[i].first;
      if (i + 1 < lines.size()) out << ",";
      out << lines[i].second;
    }
    out << "\n);";
  }
  return out.str();
}

}  // namespace sqlink
