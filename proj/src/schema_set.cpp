#include "sqlink/schema_set.hpp"

#include <cctype>

#include "sqlink/error.hpp"

namespace sqlink {

std::string normalize_identifier(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (std::isspace(c)) continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

SchemaElementId SchemaElementId::table_id(std::string_view table) {
  SchemaElementId id;
  id.table = normalize_identifier(table);
  if (id.table.empty()) throw ValidationError("empty table identifier");
  return id;
}

SchemaElementId SchemaElementId::column_id(std::string_view table,
                                           std::string_view column) {
  SchemaElementId id = table_id(table);
  id.column = normalize_identifier(column);
  if (id.column->empty()) throw ValidationError("empty column identifier");
  return id;
}

SchemaElementId SchemaElementId::parse(std::string_view text) {
  auto dot = text.find('.');
  if (dot == std::string_view::npos) return table_id(text);
  return column_id(text.substr(0, dot), text.substr(dot + 1));
}

std::string SchemaElementId::to_string() const {
  if (column) return table + "." + *column;
  return table;
}

void SchemaSet::insert(const SchemaElementId& id) {
  if (id.is_column()) elements_.insert(id.owner());
  elements_.insert(id);
}

SchemaSet SchemaSet::table_level() const {
  SchemaSet out;
  for (const auto& e : elements_) {
    if (!e.is_column()) out.insert(e);
  }
  return out;
}

std::vector<SchemaElementId> SchemaSet::column_level() const {
  std::vector<SchemaElementId> out;
  for (const auto& e : elements_) {
    if (e.is_column()) out.push_back(e);
  }
  return out;
}

bool SchemaSet::includes(const SchemaSet& other) const {
  for (const auto& e : other.elements_) {
    if (elements_.count(e) == 0) return false;
  }
  return true;
}

std::vector<std::string> SchemaSet::to_strings() const {
  std::vector<std::string> out;
  out.reserve(elements_.size());
  for (const auto& e : elements_) out.push_back(e.to_string());
  return out;
}

SchemaSet SchemaSet::from_strings(const std::vector<std::string>& ids) {
  SchemaSet out;
  for (const auto& s : ids) out.insert(SchemaElementId::parse(s));
  return out;
}

SchemaSet SchemaSet::set_union(const SchemaSet& a, const SchemaSet& b) {
  SchemaSet out = a;
  for (const auto& e : b.elements_) out.elements_.insert(e);
  return out;
}

SchemaSet SchemaSet::set_intersection(const SchemaSet& a, const SchemaSet& b) {
  SchemaSet out;
  for (const auto& e : a.elements_) {
    if (b.elements_.count(e) > 0) out.elements_.insert(e);
  }
  return out;
}

}  // namespace sqlink
