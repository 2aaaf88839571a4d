#include <cctype>
#include <unordered_set>

#include "sqlink/error.hpp"
#include "sqlink/sqlast.hpp"

namespace sqlink::sql {

namespace {

enum class TokKind { ident, quoted_ident, dquote, number, string, symbol, end };

struct Token {
  TokKind kind{};
  std::string text;   // raw (decoded for quoted forms)
  std::string lower;  // normalized identifier / lowercase symbol text
  std::size_t offset = 0;
};

const std::unordered_set<std::string>& reserved_words() {
  static const std::unordered_set<std::string> words = {
      "select", "distinct", "all",   "from",    "where", "group",  "by",
      "having", "order",    "limit", "offset",  "union", "intersect",
      "except", "join",     "inner", "left",    "outer", "right",  "full",
      "cross",  "on",       "as",    "and",     "or",    "not",    "in",
      "between", "like",    "glob",  "is",      "null",  "case",   "when",
      "then",   "else",     "end",   "asc",     "desc",  "exists", "cast"};
  return words;
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space_and_comments();
      if (pos_ >= text_.size()) {
        out.push_back(Token{TokKind::end, "", "", text_.size()});
        return out;
      }
      out.push_back(next_token());
    }
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        pos_ += 2;
        while (pos_ + 1 < text_.size() &&
               !(text_[pos_] == '*' && text_[pos_ + 1] == '/')) {
          ++pos_;
        }
        pos_ = pos_ + 2 <= text_.size() ? pos_ + 2 : text_.size();
      } else {
        break;
      }
    }
  }

  Token next_token() {
    std::size_t start = pos_;
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_' || text_[pos_] == '$')) {
        ++pos_;
      }
      std::string raw = text_.substr(start, pos_ - start);
      return Token{TokKind::ident, raw, normalize_identifier(raw), start};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < text_.size() &&
         std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      bool saw_dot = false;
      bool saw_exp = false;
      while (pos_ < text_.size()) {
        char d = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++pos_;
        } else if (d == '.' && !saw_dot && !saw_exp) {
          saw_dot = true;
          ++pos_;
        } else if ((d == 'e' || d == 'E') && !saw_exp && pos_ + 1 < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
                    ((text_[pos_ + 1] == '+' || text_[pos_ + 1] == '-') &&
                     pos_ + 2 < text_.size() &&
                     std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))))) {
          saw_exp = true;
          pos_ += (text_[pos_ + 1] == '+' || text_[pos_ + 1] == '-') ? 2 : 1;
        } else {
          break;
        }
      }
      std::string raw = text_.substr(start, pos_ - start);
      return Token{TokKind::number, raw, raw, start};
    }
    if (c == '\'') return quoted(start, '\'', TokKind::string);
    if (c == '"') return quoted(start, '"', TokKind::dquote);
    if (c == '`') return quoted(start, '`', TokKind::quoted_ident);
    if (c == '[') {
      ++pos_;
      std::string body;
      while (pos_ < text_.size() && text_[pos_] != ']') body.push_back(text_[pos_++]);
      if (pos_ >= text_.size()) {
        throw ParseError("unterminated bracketed identifier", start);
      }
      ++pos_;
      return Token{TokKind::quoted_ident, body, normalize_identifier(body), start};
    }

    // multi-char operators first
    auto two = text_.substr(start, 2);
    if (two == "<=" || two == ">=" || two == "!=" || two == "<>" || two == "==" ||
        two == "||") {
      pos_ += 2;
      return Token{TokKind::symbol, two, two, start};
    }
    static const std::string singles = "(),.*+-/%<>=;";
    if (singles.find(c) != std::string::npos) {
      ++pos_;
      return Token{TokKind::symbol, std::string(1, c), std::string(1, c), start};
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }

  Token quoted(std::size_t start, char quote, TokKind kind) {
    ++pos_;
    std::string body;
    while (pos_ < text_.size()) {
      char d = text_[pos_];
      if (d == quote) {
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == quote) {
          body.push_back(quote);
          pos_ += 2;
          continue;
        }
        ++pos_;
        std::string lower =
            kind == TokKind::string ? body : normalize_identifier(body);
        return Token{kind, body, lower, start};
      }
      body.push_back(d);
      ++pos_;
    }
    throw ParseError("unterminated quoted token", start);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  StmtPtr parse_statement() {
    if (peek().kind == TokKind::end) throw err("expected SELECT");
    if (!is_kw("select")) {
      const Token& t = peek();
      if (t.kind == TokKind::ident) {
        static const std::unordered_set<std::string> other_statements = {
            "with",   "insert", "update", "delete", "create", "drop",
            "alter",  "replace", "pragma", "explain", "values", "attach",
            "vacuum", "begin",   "commit"};
        if (other_statements.count(t.lower) > 0) {
          throw UnsupportedStatementError("unsupported statement kind '" + t.lower +
                                          "': only SELECT is supported");
        }
      }
      throw err("expected SELECT");
    }
    StmtPtr stmt = parse_compound();
    accept_sym(";");
    if (peek().kind != TokKind::end) throw err("unexpected trailing input");
    return stmt;
  }

 private:
  // ---- token helpers -------------------------------------------------
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  bool is_kw(const char* kw, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokKind::ident && t.lower == kw;
  }
  bool accept_kw(const char* kw) {
    if (!is_kw(kw)) return false;
    advance();
    return true;
  }
  void expect_kw(const char* kw) {
    if (!accept_kw(kw)) throw err(std::string("expected ") + kw);
  }
  bool is_sym(const char* s, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokKind::symbol && t.lower == s;
  }
  bool accept_sym(const char* s) {
    if (!is_sym(s)) return false;
    advance();
    return true;
  }
  void expect_sym(const char* s) {
    if (!accept_sym(s)) throw err(std::string("expected '") + s + "'");
  }
  ParseError err(const std::string& what) const {
    return ParseError("parse error: " + what, peek().offset);
  }

  bool at_identifier() const {
    const Token& t = peek();
    if (t.kind == TokKind::quoted_ident || t.kind == TokKind::dquote) return true;
    return t.kind == TokKind::ident && reserved_words().count(t.lower) == 0;
  }
  std::string expect_identifier(const char* what) {
    if (!at_identifier()) throw err(std::string("expected ") + what);
    return advance().lower;
  }

  // ---- grammar --------------------------------------------------------
  StmtPtr parse_compound() {
    auto stmt = std::make_shared<SelectStmt>();
    stmt->cores.push_back(parse_core());
    while (true) {
      SetOp op;
      if (accept_kw("union")) {
        op.kind = SetOpKind::union_;
        op.all = accept_kw("all");
      } else if (accept_kw("intersect")) {
        op.kind = SetOpKind::intersect;
      } else if (accept_kw("except")) {
        op.kind = SetOpKind::except;
      } else {
        break;
      }
      stmt->ops.push_back(op);
      stmt->cores.push_back(parse_core());
    }
    return stmt;
  }

  SelectCore parse_core() {
    expect_kw("select");
    SelectCore core;
    if (accept_kw("distinct")) {
      core.distinct = true;
    } else {
      accept_kw("all");
    }
    core.items.push_back(parse_select_item());
    while (accept_sym(",")) core.items.push_back(parse_select_item());

    if (accept_kw("from")) {
      core.from.push_back(parse_table_ref(JoinKind::none, false));
      while (true) {
        if (accept_sym(",")) {
          core.from.push_back(parse_table_ref(JoinKind::cross, false));
          continue;
        }
        JoinKind kind = JoinKind::inner;
        bool explicit_join = false;
        if (is_kw("join")) {
          advance();
          explicit_join = true;
        } else if (is_kw("inner") && is_kw("join", 1)) {
          advance();
          advance();
          explicit_join = true;
        } else if (is_kw("cross") && is_kw("join", 1)) {
          advance();
          advance();
          kind = JoinKind::cross;
          explicit_join = true;
        } else if (is_kw("left")) {
          advance();
          accept_kw("outer");
          expect_kw("join");
          kind = JoinKind::left;
          explicit_join = true;
        } else if (is_kw("right") || is_kw("full")) {
          throw UnsupportedStatementError("unsupported join kind '" + peek().lower + "'");
        }
        if (!explicit_join) break;
        core.from.push_back(parse_table_ref(kind, true));
      }
    }

    if (accept_kw("where")) core.where = parse_expr();
    if (is_kw("group")) {
      advance();
      expect_kw("by");
      core.group_by.push_back(parse_expr());
      while (accept_sym(",")) core.group_by.push_back(parse_expr());
    }
    if (accept_kw("having")) core.having = parse_expr();
    if (is_kw("order")) {
      advance();
      expect_kw("by");
      do {
        OrderItem item;
        item.expr = parse_expr();
        if (accept_kw("desc")) {
          item.desc = true;
        } else {
          accept_kw("asc");
        }
        core.order_by.push_back(std::move(item));
      } while (accept_sym(","));
    }
    if (accept_kw("limit")) {
      long long first = parse_signed_integer();
      if (accept_kw("offset")) {
        core.limit = first;
        core.limit_offset = parse_signed_integer();
      } else if (accept_sym(",")) {
        // MySQL style: LIMIT offset, count
        core.limit_offset = first;
        core.limit = parse_signed_integer();
      } else {
        core.limit = first;
      }
    }
    return core;
  }

  long long parse_signed_integer() {
    bool neg = accept_sym("-");
    if (peek().kind != TokKind::number) throw err("expected integer");
    const std::string& text = advance().text;
    try {
      long long v = std::stoll(text);
      return neg ? -v : v;
    } catch (const std::exception&) {
      throw err("invalid integer literal '" + text + "'");
    }
  }

  SelectItem parse_select_item() {
    SelectItem item;
    if (is_sym("*")) {
      advance();
      auto star = std::make_shared<Expr>();
      star->kind = ExprKind::star;
      item.expr = star;
      return item;
    }
    item.expr = parse_expr();
    if (accept_kw("as")) {
      item.alias = expect_identifier("alias");
    } else if (at_identifier()) {
      item.alias = advance().lower;
    }
    return item;
  }

  TableRef parse_table_ref(JoinKind join, bool allow_on) {
    TableRef ref;
    ref.join = join;
    if (is_sym("(")) {
      advance();
      if (!is_kw("select")) throw err("expected SELECT in derived table");
      ref.is_subquery = true;
      ref.sub = parse_compound();
      expect_sym(")");
    } else {
      ref.table = expect_identifier("table name");
      if (accept_sym(".")) {
        // schema-qualified name: keep only the table part
        ref.table = expect_identifier("table name");
      }
    }
    if (accept_kw("as")) {
      ref.alias = expect_identifier("alias");
    } else if (at_identifier()) {
      ref.alias = advance().lower;
    }
    if (allow_on && accept_kw("on")) ref.on = parse_expr();
    return ref;
  }

  // ---- expressions ----------------------------------------------------
  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (accept_kw("or")) {
      lhs = make_binary(BinOp::or_, lhs, parse_and());
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_not();
    while (accept_kw("and")) {
      lhs = make_binary(BinOp::and_, lhs, parse_not());
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (accept_kw("not")) {
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::unary;
      e->un_op = UnOp::not_;
      e->lhs = parse_not();
      return e;
    }
    return parse_predicate();
  }

  ExprPtr parse_predicate() {
    ExprPtr lhs = parse_additive();
    if (is_sym("=") || is_sym("==") || is_sym("!=") || is_sym("<>") || is_sym("<") ||
        is_sym("<=") || is_sym(">") || is_sym(">=")) {
      std::string op = advance().lower;
      BinOp bin;
      if (op == "=" || op == "==") bin = BinOp::eq;
      else if (op == "!=" || op == "<>") bin = BinOp::ne;
      else if (op == "<") bin = BinOp::lt;
      else if (op == "<=") bin = BinOp::le;
      else if (op == ">") bin = BinOp::gt;
      else bin = BinOp::ge;
      return make_binary(bin, lhs, parse_additive());
    }

    bool negated = false;
    if (is_kw("not") && (is_kw("like", 1) || is_kw("in", 1) || is_kw("between", 1) ||
                         is_kw("glob", 1))) {
      advance();
      negated = true;
    }
    if (accept_kw("like")) {
      ExprPtr rhs = parse_additive();
      return make_binary(negated ? BinOp::not_like : BinOp::like, lhs, rhs);
    }
    if (accept_kw("glob")) {
      ExprPtr rhs = parse_additive();
      auto e = make_binary(BinOp::glob, lhs, rhs);
      if (negated) {
        auto n = std::make_shared<Expr>();
        n->kind = ExprKind::unary;
        n->un_op = UnOp::not_;
        n->lhs = e;
        return n;
      }
      return e;
    }
    if (accept_kw("in")) {
      auto e = std::make_shared<Expr>();
      e->negated = negated;
      e->lhs = lhs;
      expect_sym("(");
      if (is_kw("select")) {
        e->kind = ExprKind::in_subquery;
        e->sub = parse_compound();
      } else {
        e->kind = ExprKind::in_list;
        e->in_items.push_back(parse_expr());
        while (accept_sym(",")) e->in_items.push_back(parse_expr());
      }
      expect_sym(")");
      return e;
    }
    if (accept_kw("between")) {
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::between;
      e->negated = negated;
      e->lhs = lhs;
      e->between_lo = parse_additive();
      expect_kw("and");
      e->between_hi = parse_additive();
      return e;
    }
    if (negated) throw err("expected LIKE, GLOB, IN or BETWEEN after NOT");
    if (accept_kw("is")) {
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::is_null;
      e->negated = accept_kw("not");
      e->lhs = lhs;
      expect_kw("null");
      return e;
    }
    return lhs;
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    while (true) {
      if (accept_sym("+")) {
        lhs = make_binary(BinOp::add, lhs, parse_multiplicative());
      } else if (accept_sym("-")) {
        lhs = make_binary(BinOp::sub, lhs, parse_multiplicative());
      } else if (accept_sym("||")) {
        lhs = make_binary(BinOp::concat, lhs, parse_multiplicative());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    while (true) {
      if (accept_sym("*")) {
        lhs = make_binary(BinOp::mul, lhs, parse_unary());
      } else if (accept_sym("/")) {
        lhs = make_binary(BinOp::div, lhs, parse_unary());
      } else if (accept_sym("%")) {
        lhs = make_binary(BinOp::mod, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_unary() {
    if (accept_sym("-")) {
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::unary;
      e->un_op = UnOp::neg;
      e->lhs = parse_unary();
      return e;
    }
    if (accept_sym("+")) return parse_unary();
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    if (t.kind == TokKind::number) {
      advance();
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::literal;
      e->lit_kind = t.text.find_first_of(".eE") == std::string::npos ? LitKind::integer
                                                                     : LitKind::real;
      e->lit_text = t.text;
      return e;
    }
    if (t.kind == TokKind::string || t.kind == TokKind::dquote) {
      // Double-quoted tokens in gold queries are almost always string
      // literals, not identifiers; treat them as such in value position.
      advance();
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::literal;
      e->lit_kind = LitKind::string;
      e->lit_text = t.text;
      return e;
    }
    if (is_kw("null")) {
      advance();
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::literal;
      e->lit_kind = LitKind::null;
      e->lit_text = "null";
      return e;
    }
    if (is_kw("case")) return parse_case();
    if (is_kw("cast")) return parse_cast();
    if (is_kw("exists")) {
      advance();
      expect_sym("(");
      if (!is_kw("select")) throw err("expected SELECT in EXISTS");
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::exists;
      e->sub = parse_compound();
      expect_sym(")");
      return e;
    }
    if (is_sym("(")) {
      advance();
      if (is_kw("select")) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::subquery;
        e->sub = parse_compound();
        expect_sym(")");
        return e;
      }
      ExprPtr inner = parse_expr();
      expect_sym(")");
      return inner;
    }
    if (t.kind == TokKind::ident || t.kind == TokKind::quoted_ident) {
      // function call?
      if (t.kind == TokKind::ident && is_sym("(", 1)) {
        return parse_function();
      }
      if (!at_identifier()) throw err("expected expression");
      std::string first = advance().lower;
      auto e = std::make_shared<Expr>();
      if (accept_sym(".")) {
        if (accept_sym("*")) {
          e->kind = ExprKind::star;
          e->qualifier = first;
          return e;
        }
        e->kind = ExprKind::column;
        e->qualifier = first;
        e->column = expect_identifier("column name");
        return e;
      }
      e->kind = ExprKind::column;
      e->column = first;
      return e;
    }
    throw err("expected expression");
  }

  ExprPtr parse_function() {
    std::string name = advance().lower;  // identifier, '(' verified by caller
    expect_sym("(");
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::func;
    e->func_name = name;
    if (accept_sym(")")) {
      check_window();
      return e;
    }
    if (is_sym("*")) {
      advance();
      auto star = std::make_shared<Expr>();
      star->kind = ExprKind::star;
      e->args.push_back(star);
      expect_sym(")");
      check_window();
      return e;
    }
    if (accept_kw("distinct")) e->distinct_arg = true;
    e->args.push_back(parse_expr());
    while (accept_sym(",")) e->args.push_back(parse_expr());
    expect_sym(")");
    check_window();
    return e;
  }

  void check_window() {
    if (is_kw("over")) {
      throw UnsupportedStatementError("window functions are not supported");
    }
  }

  ExprPtr parse_case() {
    advance();  // case
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::case_when;
    if (!is_kw("when")) e->case_operand = parse_expr();
    if (!is_kw("when")) throw err("expected WHEN");
    while (accept_kw("when")) {
      ExprPtr cond = parse_expr();
      expect_kw("then");
      ExprPtr value = parse_expr();
      e->whens.emplace_back(std::move(cond), std::move(value));
    }
    if (accept_kw("else")) e->else_expr = parse_expr();
    expect_kw("end");
    return e;
  }

  ExprPtr parse_cast() {
    advance();  // cast
    expect_sym("(");
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::cast;
    e->args.push_back(parse_expr());
    expect_kw("as");
    std::string type = expect_identifier("type name");
    if (accept_sym("(")) {
      type += "(";
      type += std::to_string(parse_signed_integer());
      if (accept_sym(",")) {
        type += ",";
        type += std::to_string(parse_signed_integer());
      }
      expect_sym(")");
      type += ")";
    }
    e->cast_type = type;
    expect_sym(")");
    return e;
  }

  ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::binary;
    e->bin_op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

SqlAst parse_sql(const std::string& text) {
  if (text.empty()) throw ParseError("parse error: empty input", 0);
  Lexer lexer(text);
  Parser parser(lexer.run());
  return SqlAst{parser.parse_statement()};
}

}  // namespace sqlink::sql
