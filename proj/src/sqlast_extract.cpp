#include <algorithm>

#include "sqlink/error.hpp"
#include "sqlink/sqlast.hpp"

namespace sqlink::sql {

namespace {

struct Binding {
  std::string name;        // alias if present, else table name; may be empty
  const TableSchema* table = nullptr;  // null for derived tables
  std::string real_table;              // normalized real name (real tables)
  std::vector<std::string> derived_cols;

  bool exposes(const std::string& col) const {
    if (table != nullptr) return table->find_column(col) != nullptr;
    return std::find(derived_cols.begin(), derived_cols.end(), col) !=
           derived_cols.end();
  }
};

struct Scope {
  std::vector<Binding> bindings;
  const SelectCore* core = nullptr;
  const Scope* parent = nullptr;
};

class Extractor {
 public:
  explicit Extractor(const SchemaCatalog& catalog) : catalog_(catalog) {}

  SchemaSet run(const SelectStmt& stmt) {
    walk_stmt(stmt, nullptr);
    return std::move(out_);
  }

 private:
  std::vector<std::string> walk_stmt(const SelectStmt& stmt, const Scope* parent) {
    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < stmt.cores.size(); ++i) {
      auto cols = walk_core(stmt.cores[i], parent);
      if (i == 0) outputs = std::move(cols);
    }
    return outputs;
  }

  std::vector<std::string> walk_core(const SelectCore& core, const Scope* parent) {
    Scope scope;
    scope.core = &core;
    scope.parent = parent;

    for (const TableRef& ref : core.from) {
      Binding b;
      if (ref.is_subquery) {
        b.derived_cols = walk_stmt(*ref.sub, parent);
        b.name = ref.alias;  // may be empty (unnamed derived table)
      } else {
        const TableSchema* table = catalog_.find_table(ref.table);
        if (table == nullptr) throw ResolutionError(ref.table);
        b.table = table;
        b.real_table = ref.table;
        b.name = ref.alias.empty() ? ref.table : ref.alias;
        out_.insert(SchemaElementId::table_id(ref.table));
      }
      scope.bindings.push_back(std::move(b));
    }
    for (const TableRef& ref : core.from) {
      if (ref.on) walk_expr(*ref.on, scope);
    }

    std::vector<std::string> outputs;
    for (const SelectItem& item : core.items) {
      if (item.expr->kind == ExprKind::star) {
        auto cols = expand_star(*item.expr, scope);
        outputs.insert(outputs.end(), cols.begin(), cols.end());
        continue;
      }
      walk_expr(*item.expr, scope);
      if (!item.alias.empty()) {
        outputs.push_back(item.alias);
      } else if (item.expr->kind == ExprKind::column) {
        outputs.push_back(item.expr->column);
      } else {
        outputs.push_back("");
      }
    }

    if (core.where) walk_expr(*core.where, scope);
    for (const auto& g : core.group_by) walk_expr(*g, scope);
    if (core.having) walk_expr(*core.having, scope);
    for (const auto& o : core.order_by) walk_expr(*o.expr, scope);
    return outputs;
  }

  // Expands a select-item star to all columns of the referenced table(s)
  // and returns the exposed output column names.
  std::vector<std::string> expand_star(const Expr& star, const Scope& scope) {
    std::vector<std::string> outputs;
    auto expand_binding = [&](const Binding& b) {
      if (b.table != nullptr) {
        for (const auto& c : b.table->columns) {
          out_.insert(SchemaElementId::column_id(b.real_table, c.name));
          outputs.push_back(c.name);
        }
      } else {
        outputs.insert(outputs.end(), b.derived_cols.begin(), b.derived_cols.end());
      }
    };
    if (star.qualifier.empty()) {
      for (const Binding& b : scope.bindings) expand_binding(b);
      return outputs;
    }
    for (const Scope* s = &scope; s != nullptr; s = s->parent) {
      for (const Binding& b : s->bindings) {
        if (b.name == star.qualifier) {
          expand_binding(b);
          return outputs;
        }
      }
    }
    throw ResolutionError(star.qualifier);
  }

  void resolve_qualified(const std::string& qualifier, const std::string& column,
                         const Scope& scope) {
    for (const Scope* s = &scope; s != nullptr; s = s->parent) {
      for (const Binding& b : s->bindings) {
        if (b.name != qualifier) continue;
        if (b.table != nullptr) {
          if (b.table->find_column(column) == nullptr) {
            throw ResolutionError(qualifier + "." + column);
          }
          out_.insert(SchemaElementId::column_id(b.real_table, column));
        }
        // Derived table: the underlying sources were already collected
        // while walking the subquery itself.
        if (b.table == nullptr && !b.exposes(column)) {
          throw ResolutionError(qualifier + "." + column);
        }
        return;
      }
    }
    // Lenient fallback: a real table referenced by its own name even though
    // it carries an alias.
    for (const Scope* s = &scope; s != nullptr; s = s->parent) {
      const Binding* found = nullptr;
      for (const Binding& b : s->bindings) {
        if (b.table != nullptr && b.real_table == qualifier) {
          if (found != nullptr) throw AmbiguityError(qualifier + "." + column);
          found = &b;
        }
      }
      if (found != nullptr) {
        if (found->table->find_column(column) == nullptr) {
          throw ResolutionError(qualifier + "." + column);
        }
        out_.insert(SchemaElementId::column_id(found->real_table, column));
        return;
      }
    }
    throw ResolutionError(qualifier);
  }

  void resolve_unqualified(const std::string& column, const Scope& scope) {
    for (const Scope* s = &scope; s != nullptr; s = s->parent) {
      std::vector<const Binding*> owners;
      for (const Binding& b : s->bindings) {
        if (b.exposes(column)) owners.push_back(&b);
      }
      if (owners.size() > 1) throw AmbiguityError(column);
      if (owners.size() == 1) {
        if (owners[0]->table != nullptr) {
          out_.insert(SchemaElementId::column_id(owners[0]->real_table, column));
        }
        return;
      }
      // A select-item alias (ORDER BY c, HAVING c, ...): the aliased
      // expression was already walked as part of the item list.
      if (s->core != nullptr) {
        for (const SelectItem& item : s->core->items) {
          if (!item.alias.empty() && item.alias == column) return;
        }
      }
    }
    throw ResolutionError(column);
  }

  void walk_expr(const Expr& e, const Scope& scope) {
    switch (e.kind) {
      case ExprKind::column:
        if (e.qualifier.empty()) {
          resolve_unqualified(e.column, scope);
        } else {
          resolve_qualified(e.qualifier, e.column, scope);
        }
        return;
      case ExprKind::star:
        // A star outside the select list (aggregate argument) needs no
        // column knowledge; the table arrives via FROM.
        return;
      case ExprKind::literal:
        return;
      case ExprKind::unary:
        walk_expr(*e.lhs, scope);
        return;
      case ExprKind::binary:
        walk_expr(*e.lhs, scope);
        walk_expr(*e.rhs, scope);
        return;
      case ExprKind::func:
      case ExprKind::cast:
        for (const auto& a : e.args) walk_expr(*a, scope);
        return;
      case ExprKind::case_when:
        if (e.case_operand) walk_expr(*e.case_operand, scope);
        for (const auto& [cond, value] : e.whens) {
          walk_expr(*cond, scope);
          walk_expr(*value, scope);
        }
        if (e.else_expr) walk_expr(*e.else_expr, scope);
        return;
      case ExprKind::in_list:
        walk_expr(*e.lhs, scope);
        for (const auto& item : e.in_items) walk_expr(*item, scope);
        return;
      case ExprKind::in_subquery:
        walk_expr(*e.lhs, scope);
        walk_stmt(*e.sub, &scope);
        return;
      case ExprKind::between:
        walk_expr(*e.lhs, scope);
        walk_expr(*e.between_lo, scope);
        walk_expr(*e.between_hi, scope);
        return;
      case ExprKind::is_null:
        walk_expr(*e.lhs, scope);
        return;
      case ExprKind::exists:
      case ExprKind::subquery:
        walk_stmt(*e.sub, &scope);
        return;
    }
  }

  const SchemaCatalog& catalog_;
  SchemaSet out_;
};

}  // namespace

SchemaSet extract_schema_set(const SqlAst& ast, const SchemaCatalog& catalog) {
  if (!ast.root) throw PreconditionError("extract_schema_set: empty AST");
  return Extractor(catalog).run(*ast.root);
}

}  // namespace sqlink::sql
