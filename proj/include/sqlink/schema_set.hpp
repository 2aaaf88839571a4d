#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sqlink {

// Lowercases and strips all whitespace. Applied to every identifier that
// enters the system so matching is case-insensitive everywhere.
std::string normalize_identifier(std::string_view raw);

// One schema element: a table, or a column of a table.
struct SchemaElementId {
  std::string table;
  std::optional<std::string> column;

  static SchemaElementId table_id(std::string_view table);
  static SchemaElementId column_id(std::string_view table, std::string_view column);

  // Parses "table" or "table.column" (split on the first '.').
  static SchemaElementId parse(std::string_view text);

  bool is_column() const { return column.has_value(); }
  SchemaElementId owner() const { return table_id(table); }
  std::string to_string() const;

  auto operator<=>(const SchemaElementId&) const = default;
};

// A set of schema elements, closed under table ownership by construction:
// inserting a column always inserts its owning table as well.
class SchemaSet {
 public:
  SchemaSet() = default;

  void insert(const SchemaElementId& id);
  bool contains(const SchemaElementId& id) const { return elements_.count(id) > 0; }
  bool empty() const { return elements_.empty(); }
  std::size_t size() const { return elements_.size(); }

  // Projection to table elements only.
  SchemaSet table_level() const;
  // Projection to column elements only. Note: the result of this projection
  // is a plain element list, not ownership-closed; exposed as ids.
  std::vector<SchemaElementId> column_level() const;

  bool includes(const SchemaSet& other) const;

  const std::set<SchemaElementId>& elements() const { return elements_; }

  std::vector<std::string> to_strings() const;
  static SchemaSet from_strings(const std::vector<std::string>& ids);

  static SchemaSet set_union(const SchemaSet& a, const SchemaSet& b);
  static SchemaSet set_intersection(const SchemaSet& a, const SchemaSet& b);

  bool operator==(const SchemaSet&) const = default;

 private:
  std::set<SchemaElementId> elements_;
};

}  // namespace sqlink
