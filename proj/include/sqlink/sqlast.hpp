#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sqlink/catalog.hpp"
#include "sqlink/schema_set.hpp"

// Parsing, schema extraction, and canonicalization for the SELECT dialect
// used by Spider/Bird gold queries. All nodes are immutable after parse;
// everything here is a pure function over immutable inputs.
namespace sqlink::sql {

struct SelectStmt;
using StmtPtr = std::shared_ptr<const SelectStmt>;

enum class ExprKind {
  column,     // [qualifier.]name
  star,       // * or qualifier.*
  literal,
  unary,
  binary,
  func,       // name(args), aggregates included
  cast,
  case_when,
  in_list,
  in_subquery,
  between,
  is_null,
  exists,
  subquery,   // scalar subquery
};

enum class BinOp {
  add, sub, mul, div, mod, concat,
  eq, ne, lt, le, gt, ge,
  like, not_like, glob,
  and_, or_,
};

enum class UnOp { neg, not_ };

enum class LitKind { integer, real, string, null };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind{};

  // column / star
  std::string qualifier;  // normalized; empty when absent
  std::string column;     // normalized

  // literal: text kept verbatim (no numeric folding)
  LitKind lit_kind{};
  std::string lit_text;

  UnOp un_op{};
  BinOp bin_op{};
  ExprPtr lhs;
  ExprPtr rhs;

  // func / cast
  std::string func_name;  // normalized
  bool distinct_arg = false;
  std::vector<ExprPtr> args;
  std::string cast_type;  // normalized type name for cast

  // case
  ExprPtr case_operand;
  std::vector<std::pair<ExprPtr, ExprPtr>> whens;
  ExprPtr else_expr;

  // in / between / is_null / exists
  bool negated = false;
  std::vector<ExprPtr> in_items;
  StmtPtr sub;
  ExprPtr between_lo;
  ExprPtr between_hi;
};

enum class JoinKind { none, inner, left, cross };

struct TableRef {
  bool is_subquery = false;
  std::string table;  // normalized real name; empty for subqueries
  StmtPtr sub;
  std::string alias;  // normalized; empty when absent
  JoinKind join = JoinKind::none;  // none for the first FROM entry
  ExprPtr on;                      // may be null
};

struct SelectItem {
  ExprPtr expr;
  std::string alias;  // normalized; empty when absent
};

struct OrderItem {
  ExprPtr expr;
  bool desc = false;
};

struct SelectCore {
  bool distinct = false;
  std::vector<SelectItem> items;
  std::vector<TableRef> from;
  ExprPtr where;
  std::vector<ExprPtr> group_by;
  ExprPtr having;
  std::vector<OrderItem> order_by;
  std::optional<long long> limit;
  std::optional<long long> limit_offset;
};

enum class SetOpKind { union_, intersect, except };

struct SetOp {
  SetOpKind kind{};
  bool all = false;
};

// A compound select: cores.size() == ops.size() + 1.
struct SelectStmt {
  std::vector<SelectCore> cores;
  std::vector<SetOp> ops;
};

struct SqlAst {
  StmtPtr root;
};

// Throws ParseError (with byte offset) on syntax errors and
// UnsupportedStatementError on non-SELECT statements / unsupported dialect
// (WITH, window functions, DDL/DML).
SqlAst parse_sql(const std::string& text);

// The tables and columns the query references, aliases resolved, closed
// under table ownership. Star select items expand to all columns of the
// referenced table(s). Throws ResolutionError / AmbiguityError.
SchemaSet extract_schema_set(const SqlAst& ast, const SchemaCatalog& catalog);

struct CanonicalAst {
  StmtPtr stmt;
  std::string key;  // deterministic rendering; equality of keys == AST match

  bool operator==(const CanonicalAst& other) const { return key == other.key; }
};

// Alias-free (self-joins get positional aliases), lowercased, structurally
// normalized form: unqualified columns are qualified when the FROM has a
// single real table, and top-level AND conjuncts of WHERE/HAVING are sorted
// by their structural key. Idempotent.
CanonicalAst canonicalize(const SqlAst& ast);

bool ast_match(const SqlAst& a, const SqlAst& b);

// Deterministic rendering used both as the canonical key and for debugging.
std::string to_sql_text(const SelectStmt& stmt);

}  // namespace sqlink::sql
