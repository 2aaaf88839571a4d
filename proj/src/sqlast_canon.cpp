#include <algorithm>
#include <map>
#include <sstream>

#include "sqlink/error.hpp"
#include "sqlink/sqlast.hpp"

namespace sqlink::sql {

namespace {

// ---- rendering --------------------------------------------------------

std::string render_stmt(const SelectStmt& stmt);

std::string render_expr(const Expr& e) {
  switch (e.kind) {
    case ExprKind::column:
      return e.qualifier.empty() ? e.column : e.qualifier + "." + e.column;
    case ExprKind::star:
      return e.qualifier.empty() ? "*" : e.qualifier + ".*";
    case ExprKind::literal:
      switch (e.lit_kind) {
        case LitKind::integer:
        case LitKind::real:
          return e.lit_text;
        case LitKind::null:
          return "null";
        case LitKind::string: {
          std::string out = "'";
          for (char c : e.lit_text) {
            if (c == '\'') out += "''";
            else out.push_back(c);
          }
          out += "'";
          return out;
        }
      }
      return e.lit_text;
    case ExprKind::unary:
      return e.un_op == UnOp::neg ? "(- " + render_expr(*e.lhs) + ")"
                                  : "(not " + render_expr(*e.lhs) + ")";
    case ExprKind::binary: {
      const char* op = "?";
      switch (e.bin_op) {
        case BinOp::add: op = "+"; break;
        case BinOp::sub: op = "-"; break;
        case BinOp::mul: op = "*"; break;
        case BinOp::div: op = "/"; break;
        case BinOp::mod: op = "%"; break;
        case BinOp::concat: op = "||"; break;
        case BinOp::eq: op = "="; break;
        case BinOp::ne: op = "!="; break;
        case BinOp::lt: op = "<"; break;
        case BinOp::le: op = "<="; break;
        case BinOp::gt: op = ">"; break;
        case BinOp::ge: op = ">="; break;
        case BinOp::like: op = "like"; break;
        case BinOp::not_like: op = "not like"; break;
        case BinOp::glob: op = "glob"; break;
        case BinOp::and_: op = "and"; break;
        case BinOp::or_: op = "or"; break;
      }
      return "(" + render_expr(*e.lhs) + " " + op + " " + render_expr(*e.rhs) + ")";
    }
    case ExprKind::func: {
      std::string out = e.func_name + "(";
      if (e.distinct_arg) out += "distinct ";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i > 0) out += ", ";
        out += render_expr(*e.args[i]);
      }
      return out + ")";
    }
    case ExprKind::cast:
      return "cast(" + render_expr(*e.args.front()) + " as " + e.cast_type + ")";
    case ExprKind::case_when: {
      std::string out = "case";
      if (e.case_operand) out += " " + render_expr(*e.case_operand);
      for (const auto& [cond, value] : e.whens) {
        out += " when " + render_expr(*cond) + " then " + render_expr(*value);
      }
      if (e.else_expr) out += " else " + render_expr(*e.else_expr);
      return out + " end";
    }
    case ExprKind::in_list: {
      std::string out = "(" + render_expr(*e.lhs) + (e.negated ? " not in (" : " in (");
      for (std::size_t i = 0; i < e.in_items.size(); ++i) {
        if (i > 0) out += ", ";
        out += render_expr(*e.in_items[i]);
      }
      return out + "))";
    }
    case ExprKind::in_subquery:
      return "(" + render_expr(*e.lhs) + (e.negated ? " not in (" : " in (") +
             render_stmt(*e.sub) + "))";
    case ExprKind::between:
      return "(" + render_expr(*e.lhs) + (e.negated ? " not between " : " between ") +
             render_expr(*e.between_lo) + " and " + render_expr(*e.between_hi) + ")";
    case ExprKind::is_null:
      return "(" + render_expr(*e.lhs) + (e.negated ? " is not null)" : " is null)");
    case ExprKind::exists:
      return "(exists (" + render_stmt(*e.sub) + "))";
    case ExprKind::subquery:
      return "(" + render_stmt(*e.sub) + ")";
  }
  return "?";
}

std::string render_core(const SelectCore& core) {
  std::ostringstream out;
  out << "select ";
  if (core.distinct) out << "distinct ";
  for (std::size_t i = 0; i < core.items.size(); ++i) {
    if (i > 0) out << ", ";
    out << render_expr(*core.items[i].expr);
    if (!core.items[i].alias.empty()) out << " as " << core.items[i].alias;
  }
  if (!core.from.empty()) {
    out << " from ";
    for (std::size_t i = 0; i < core.from.size(); ++i) {
      const TableRef& ref = core.from[i];
      if (i > 0) {
        switch (ref.join) {
          case JoinKind::none:
          case JoinKind::inner: out << " join "; break;
          case JoinKind::left: out << " left join "; break;
          case JoinKind::cross: out << " cross join "; break;
        }
      }
      if (ref.is_subquery) {
        out << "(" << render_stmt(*ref.sub) << ")";
      } else {
        out << ref.table;
      }
      if (!ref.alias.empty() && ref.alias != ref.table) out << " as " << ref.alias;
      if (ref.on) out << " on " << render_expr(*ref.on);
    }
  }
  if (core.where) out << " where " << render_expr(*core.where);
  if (!core.group_by.empty()) {
    out << " group by ";
    for (std::size_t i = 0; i < core.group_by.size(); ++i) {
      if (i > 0) out << ", ";
      out << render_expr(*core.group_by[i]);
    }
  }
  if (core.having) out << " having " << render_expr(*core.having);
  if (!core.order_by.empty()) {
    out << " order by ";
    for (std::size_t i = 0; i < core.order_by.size(); ++i) {
      if (i > 0) out << ", ";
      out << render_expr(*core.order_by[i].expr);
      if (core.order_by[i].desc) out << " desc";
    }
  }
  if (core.limit) out << " limit " << *core.limit;
  if (core.limit_offset) out << " offset " << *core.limit_offset;
  return out.str();
}

std::string render_stmt(const SelectStmt& stmt) {
  std::string out = render_core(stmt.cores.front());
  for (std::size_t i = 0; i < stmt.ops.size(); ++i) {
    switch (stmt.ops[i].kind) {
      case SetOpKind::union_: out += stmt.ops[i].all ? " union all " : " union "; break;
      case SetOpKind::intersect: out += " intersect "; break;
      case SetOpKind::except: out += " except "; break;
    }
    out += render_core(stmt.cores[i + 1]);
  }
  return out;
}

// ---- canonical rewrite --------------------------------------------------

using AliasMap = std::map<std::string, std::string>;

class Canonicalizer {
 public:
  StmtPtr rewrite_stmt(const SelectStmt& stmt, const std::vector<const AliasMap*>& outer) {
    auto out = std::make_shared<SelectStmt>();
    out->ops = stmt.ops;
    for (const auto& core : stmt.cores) {
      out->cores.push_back(rewrite_core(core, outer));
    }
    return out;
  }

 private:
  SelectCore rewrite_core(const SelectCore& core, const std::vector<const AliasMap*>& outer) {
    // Canonical names: single-occurrence real tables lose their alias and
    // are addressed by the real name; self-joined tables get positional
    // aliases "table@k" so alias spelling cannot affect the key.
    std::map<std::string, int> occurrences;
    for (const TableRef& ref : core.from) {
      if (!ref.is_subquery) occurrences[ref.table]++;
    }

    AliasMap map;
    std::map<std::string, int> seen;
    std::vector<std::string> canonical_names;
    int real_tables = 0;
    int derived_tables = 0;
    std::string single_real;
    for (const TableRef& ref : core.from) {
      if (ref.is_subquery) {
        ++derived_tables;
        canonical_names.push_back(ref.alias);
        if (!ref.alias.empty()) map[ref.alias] = ref.alias;
        continue;
      }
      ++real_tables;
      std::string canonical = ref.table;
      if (occurrences[ref.table] > 1) {
        canonical += "@" + std::to_string(++seen[ref.table]);
      }
      canonical_names.push_back(canonical);
      single_real = ref.table;
      const std::string binding = ref.alias.empty() ? ref.table : ref.alias;
      map[binding] = canonical;
      if (occurrences[ref.table] == 1) map[ref.table] = canonical;
    }
    const bool qualify_bare =
        real_tables == 1 && derived_tables == 0 && !single_real.empty();

    std::vector<const AliasMap*> chain = outer;
    chain.push_back(&map);

    auto rewrite = [&](const ExprPtr& e) -> ExprPtr {
      return e ? rewrite_expr(*e, chain, qualify_bare ? single_real : "") : nullptr;
    };

    SelectCore out;
    out.distinct = core.distinct;
    for (std::size_t i = 0; i < core.from.size(); ++i) {
      const TableRef& ref = core.from[i];
      TableRef r;
      r.is_subquery = ref.is_subquery;
      r.join = ref.join;
      if (ref.is_subquery) {
        r.sub = rewrite_stmt(*ref.sub, outer);
        r.alias = ref.alias;
      } else {
        r.table = ref.table;
        r.alias = canonical_names[i] == ref.table ? "" : canonical_names[i];
      }
      r.on = rewrite(ref.on);
      out.from.push_back(std::move(r));
    }

    AliasMap item_aliases;  // alias -> rendered canonical expression index
    std::vector<ExprPtr> item_exprs;
    for (const SelectItem& item : core.items) {
      SelectItem it;
      it.expr = rewrite(item.expr);
      // Item aliases are dropped from the canonical form; ORDER BY
      // references to them are substituted below.
      if (!item.alias.empty()) {
        item_aliases[item.alias] = std::to_string(item_exprs.size());
      }
      item_exprs.push_back(it.expr);
      out.items.push_back(std::move(it));
    }

    out.where = sort_conjuncts(rewrite(core.where));
    for (const auto& g : core.group_by) out.group_by.push_back(rewrite(g));
    out.having = sort_conjuncts(rewrite(core.having));
    for (const auto& o : core.order_by) {
      OrderItem item;
      // SQLite resolves ORDER BY names against output aliases first, so the
      // alias check runs on the raw expression, before bare-name
      // qualification could hide the alias.
      ExprPtr e;
      if (o.expr->kind == ExprKind::column && o.expr->qualifier.empty() &&
          item_aliases.count(o.expr->column) > 0) {
        e = item_exprs[std::stoul(item_aliases[o.expr->column])];
      } else {
        e = rewrite(o.expr);
      }
      item.expr = e;
      item.desc = o.desc;
      out.order_by.push_back(std::move(item));
    }
    out.limit = core.limit;
    out.limit_offset = core.limit_offset;
    return out;
  }

  ExprPtr rewrite_expr(const Expr& e, const std::vector<const AliasMap*>& maps,
                       const std::string& bare_qualifier) {
    auto copy = std::make_shared<Expr>(e);
    auto rec = [&](const ExprPtr& child) -> ExprPtr {
      return child ? rewrite_expr(*child, maps, bare_qualifier) : nullptr;
    };
    switch (e.kind) {
      case ExprKind::column:
        if (!e.qualifier.empty()) {
          for (auto it = maps.rbegin(); it != maps.rend(); ++it) {
            auto found = (*it)->find(e.qualifier);
            if (found != (*it)->end()) {
              copy->qualifier = found->second;
              break;
            }
          }
        } else if (!bare_qualifier.empty()) {
          copy->qualifier = bare_qualifier;
        }
        return copy;
      case ExprKind::star:
        if (!e.qualifier.empty()) {
          for (auto it = maps.rbegin(); it != maps.rend(); ++it) {
            auto found = (*it)->find(e.qualifier);
            if (found != (*it)->end()) {
              copy->qualifier = found->second;
              break;
            }
          }
        }
        return copy;
      case ExprKind::literal:
        return copy;
      case ExprKind::unary:
        copy->lhs = rec(e.lhs);
        return copy;
      case ExprKind::binary:
        copy->lhs = rec(e.lhs);
        copy->rhs = rec(e.rhs);
        return copy;
      case ExprKind::func:
      case ExprKind::cast: {
        copy->args.clear();
        for (const auto& a : e.args) copy->args.push_back(rec(a));
        return copy;
      }
      case ExprKind::case_when: {
        copy->case_operand = rec(e.case_operand);
        copy->whens.clear();
        for (const auto& [cond, value] : e.whens) {
          copy->whens.emplace_back(rec(cond), rec(value));
        }
        copy->else_expr = rec(e.else_expr);
        return copy;
      }
      case ExprKind::in_list: {
        copy->lhs = rec(e.lhs);
        copy->in_items.clear();
        for (const auto& item : e.in_items) copy->in_items.push_back(rec(item));
        return copy;
      }
      case ExprKind::in_subquery:
        copy->lhs = rec(e.lhs);
        copy->sub = rewrite_stmt(*e.sub, maps);
        return copy;
      case ExprKind::between:
        copy->lhs = rec(e.lhs);
        copy->between_lo = rec(e.between_lo);
        copy->between_hi = rec(e.between_hi);
        return copy;
      case ExprKind::is_null:
        copy->lhs = rec(e.lhs);
        return copy;
      case ExprKind::exists:
      case ExprKind::subquery:
        copy->sub = rewrite_stmt(*e.sub, maps);
        return copy;
    }
    return copy;
  }

  // Flattens top-level AND chains and re-joins them sorted by structural key.
  ExprPtr sort_conjuncts(ExprPtr e) {
    if (!e) return e;
    std::vector<ExprPtr> conjuncts;
    flatten_and(e, conjuncts);
    if (conjuncts.size() < 2) return e;
    std::stable_sort(conjuncts.begin(), conjuncts.end(),
                     [](const ExprPtr& a, const ExprPtr& b) {
                       return render_expr(*a) < render_expr(*b);
                     });
    ExprPtr acc = conjuncts.front();
    for (std::size_t i = 1; i < conjuncts.size(); ++i) {
      auto n = std::make_shared<Expr>();
      n->kind = ExprKind::binary;
      n->bin_op = BinOp::and_;
      n->lhs = acc;
      n->rhs = conjuncts[i];
      acc = n;
    }
    return acc;
  }

  static void flatten_and(const ExprPtr& e, std::vector<ExprPtr>& out) {
    if (e->kind == ExprKind::binary && e->bin_op == BinOp::and_) {
      flatten_and(e->lhs, out);
      flatten_and(e->rhs, out);
    } else {
      out.push_back(e);
    }
  }
};

}  // namespace

std::string to_sql_text(const SelectStmt& stmt) { return render_stmt(stmt); }

CanonicalAst canonicalize(const SqlAst& ast) {
  if (!ast.root) throw PreconditionError("canonicalize: empty AST");
  Canonicalizer c;
  StmtPtr rewritten = c.rewrite_stmt(*ast.root, {});
  std::string key = render_stmt(*rewritten);
  return CanonicalAst{std::move(rewritten), std::move(key)};
}

bool ast_match(const SqlAst& a, const SqlAst& b) {
  return canonicalize(a).key == canonicalize(b).key;
}

}  // namespace sqlink::sql
