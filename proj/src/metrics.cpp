#include "sqlink/metrics.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <set>

#include "sqlink/error.hpp"
#include "sqlink/sqlast.hpp"

namespace sqlink {

namespace {

std::set<std::string> project(const SchemaSet& s, LinkLevel level) {
  std::set<std::string> out;
  for (const auto& e : s.elements()) {
    if ((level == LinkLevel::column) == e.is_column()) out.insert(e.to_string());
  }
  return out;
}

}  // namespace

LinkingReport linking_metrics(const std::vector<SchemaSet>& preds,
                              const std::vector<SchemaSet>& golds,
                              LinkLevel level) {
  if (preds.size() != golds.size() || preds.empty()) {
    throw PreconditionError("linking_metrics: need equal non-zero pred/gold counts");
  }
  LinkingReport report;
  report.n = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto pred = project(preds[i], level);
    auto gold = project(golds[i], level);
    bool includes = std::includes(pred.begin(), pred.end(), gold.begin(), gold.end());
    report.ma += (pred == gold) ? 1.0 : 0.0;
    report.ia += includes ? 1.0 : 0.0;
    if (!pred.empty()) {
      std::size_t redundant = 0;
      for (const auto& e : pred) redundant += gold.count(e) == 0 ? 1 : 0;
      report.re += double(redundant) / double(pred.size());
    }
  }
  report.ma /= double(report.n);
  report.ia /= double(report.n);
  report.re /= double(report.n);
  return report;
}

// ---- execution -------------------------------------------------------------

namespace {

struct Cell {
  enum Kind { null_v, int_v, real_v, text_v, blob_v } kind = null_v;
  long long i = 0;
  double d = 0.0;
  std::string s;

  double numeric() const { return kind == int_v ? double(i) : d; }
  bool is_numeric() const { return kind == int_v || kind == real_v; }
};

using Row = std::vector<Cell>;

bool cell_equal(const Cell& a, const Cell& b) {
  if (a.kind == Cell::null_v || b.kind == Cell::null_v) {
    return a.kind == b.kind;
  }
  if (a.is_numeric() && b.is_numeric()) {
    if (a.kind == Cell::int_v && b.kind == Cell::int_v) return a.i == b.i;
    double x = a.numeric(), y = b.numeric();
    return std::abs(x - y) <= 1e-6 * std::max({1.0, std::abs(x), std::abs(y)});
  }
  if (a.kind != b.kind) return false;
  return a.s == b.s;  // text and blob
}

bool row_equal(const Row& a, const Row& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!cell_equal(a[i], b[i])) return false;
  }
  return true;
}

// Total order for canonical multiset comparison; numeric kinds unify so a
// 1 vs 1.0 difference cannot reorder rows across result sets.
bool cell_less(const Cell& a, const Cell& b) {
  auto rank = [](const Cell& c) {
    switch (c.kind) {
      case Cell::null_v: return 0;
      case Cell::int_v:
      case Cell::real_v: return 1;
      case Cell::text_v: return 2;
      case Cell::blob_v: return 3;
    }
    return 4;
  };
  if (rank(a) != rank(b)) return rank(a) < rank(b);
  if (a.is_numeric()) return a.numeric() < b.numeric();
  return a.s < b.s;
}

bool row_less(const Row& a, const Row& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                      cell_less);
}

struct SqliteCloser {
  void operator()(sqlite3* db) const { sqlite3_close(db); }
};

struct QueryRun {
  bool ok = false;
  bool timed_out = false;
  std::string error;
  std::vector<Row> rows;
  double seconds = 0.0;
};

struct TimeoutState {
  std::chrono::steady_clock::time_point deadline;
};

int progress_callback(void* raw) {
  auto* state = static_cast<TimeoutState*>(raw);
  return std::chrono::steady_clock::now() > state->deadline ? 1 : 0;
}

QueryRun run_query(sqlite3* db, const std::string& sql, double timeout_seconds,
                   bool collect_rows) {
  QueryRun out;
  TimeoutState state{std::chrono::steady_clock::now() +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(timeout_seconds))};
  sqlite3_progress_handler(db, 256, &progress_callback, &state);

  auto start = std::chrono::steady_clock::now();
  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
    out.error = sqlite3_errmsg(db);
    sqlite3_progress_handler(db, 0, nullptr, nullptr);
    return out;
  }
  int rc;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    if (!collect_rows) continue;
    Row row;
    int cols = sqlite3_column_count(stmt);
    for (int c = 0; c < cols; ++c) {
      Cell cell;
      switch (sqlite3_column_type(stmt, c)) {
        case SQLITE_NULL:
          cell.kind = Cell::null_v;
          break;
        case SQLITE_INTEGER:
          cell.kind = Cell::int_v;
          cell.i = sqlite3_column_int64(stmt, c);
          break;
        case SQLITE_FLOAT:
          cell.kind = Cell::real_v;
          cell.d = sqlite3_column_double(stmt, c);
          break;
        case SQLITE_TEXT: {
          cell.kind = Cell::text_v;
          const unsigned char* p = sqlite3_column_text(stmt, c);
          cell.s = p != nullptr ? reinterpret_cast<const char*>(p) : "";
          break;
        }
        default: {
          cell.kind = Cell::blob_v;
          const void* p = sqlite3_column_blob(stmt, c);
          int n = sqlite3_column_bytes(stmt, c);
          cell.s.assign(static_cast<const char*>(p), std::size_t(std::max(n, 0)));
          break;
        }
      }
      row.push_back(std::move(cell));
    }
    out.rows.push_back(std::move(row));
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  sqlite3_finalize(stmt);
  sqlite3_progress_handler(db, 0, nullptr, nullptr);
  if (rc != SQLITE_DONE) {
    out.error = sqlite3_errmsg(db);
    out.timed_out = rc == SQLITE_INTERRUPT;
    return out;
  }
  out.ok = true;
  return out;
}

// Top-level ORDER BY detection: parse when possible, token scan otherwise.
bool has_top_level_order_by(const std::string& sql) {
  try {
    sql::SqlAst ast = sql::parse_sql(sql);
    for (const auto& core : ast.root->cores) {
      if (!core.order_by.empty()) return true;
    }
    return false;
  } catch (const Error&) {
  }
  // paren-depth-0 scan for "order by" outside quotes, whitespace collapsed
  int depth = 0;
  std::string lowered;
  lowered.reserve(sql.size());
  for (std::size_t i = 0; i < sql.size(); ++i) {
    char c = sql[i];
    if (c == '\'' || c == '"') {
      char quote = c;
      ++i;
      while (i < sql.size() && sql[i] != quote) ++i;
      lowered.push_back(' ');
      continue;
    }
    if (c == '(') ++depth;
    if (c == ')') --depth;
    char out = depth == 0 ? char(std::tolower((unsigned char)c)) : ' ';
    if (std::isspace((unsigned char)out)) out = ' ';
    if (out == ' ' && !lowered.empty() && lowered.back() == ' ') continue;
    lowered.push_back(out);
  }
  return lowered.find("order by") != std::string::npos;
}

double median_time(sqlite3* db, const std::string& sql, double timeout_seconds,
                   int runs, double first_run_seconds) {
  std::vector<double> times = {first_run_seconds};
  for (int r = 1; r < runs; ++r) {
    QueryRun rerun = run_query(db, sql, timeout_seconds, false);
    if (!rerun.ok) break;
    times.push_back(rerun.seconds);
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

constexpr double kTimerResolution = 1e-7;  // seconds

}  // namespace

ExecOutcome execution_accuracy(const std::string& db_file,
                               const std::string& pred_sql,
                               const std::string& gold_sql,
                               const ExecLimits& limits) {
  ExecOutcome out;
  sqlite3* raw = nullptr;
  if (sqlite3_open_v2(db_file.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr) !=
      SQLITE_OK) {
    std::string msg = raw != nullptr ? sqlite3_errmsg(raw) : "out of memory";
    sqlite3_close(raw);
    throw IoError("cannot open database '" + db_file + "': " + msg);
  }
  std::unique_ptr<sqlite3, SqliteCloser> db(raw);

  QueryRun gold = run_query(db.get(), gold_sql, limits.timeout_seconds, true);
  if (!gold.ok) {
    out.gold_error = true;
    out.note = "gold query failed: " + gold.error;
    return out;
  }

  if (pred_sql.empty()) {
    out.note = "empty prediction";
    return out;
  }
  QueryRun pred = run_query(db.get(), pred_sql, limits.timeout_seconds, true);
  if (!pred.ok) {
    out.timeout = pred.timed_out;
    out.note = pred.timed_out ? "prediction timed out"
                              : "prediction failed: " + pred.error;
    return out;
  }

  bool ordered = has_top_level_order_by(gold_sql);
  std::vector<Row> gold_rows = gold.rows;
  std::vector<Row> pred_rows = pred.rows;
  if (!ordered) {
    std::sort(gold_rows.begin(), gold_rows.end(), row_less);
    std::sort(pred_rows.begin(), pred_rows.end(), row_less);
  }
  bool equal = gold_rows.size() == pred_rows.size();
  for (std::size_t i = 0; equal && i < gold_rows.size(); ++i) {
    equal = row_equal(gold_rows[i], pred_rows[i]);
  }
  out.flag = equal ? 1 : 0;

  if (out.flag == 1) {
    out.gold_time_s = std::max(
        median_time(db.get(), gold_sql, limits.timeout_seconds, limits.runs,
                    gold.seconds),
        kTimerResolution);
    out.pred_time_s = std::max(
        median_time(db.get(), pred_sql, limits.timeout_seconds, limits.runs,
                    pred.seconds),
        kTimerResolution);
  }
  return out;
}

double valid_efficiency_score(const std::vector<ExecOutcome>& outcomes) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& o : outcomes) {
    if (o.gold_error) continue;
    ++n;
    if (o.flag != 1) continue;
    double gold_t = std::max(o.gold_time_s, kTimerResolution);
    double pred_t = std::max(o.pred_time_s, kTimerResolution);
    sum += gold_t / pred_t;
  }
  return n > 0 ? sum / double(n) : 0.0;
}

ExecReport aggregate_execution(std::vector<ExecOutcome> outcomes) {
  ExecReport report;
  double correct = 0.0;
  for (const auto& o : outcomes) {
    if (o.gold_error) {
      ++report.excluded;
      continue;
    }
    ++report.n;
    correct += o.flag;
    report.timeouts += o.timeout ? 1 : 0;
  }
  report.ex = report.n > 0 ? correct / double(report.n) : 0.0;
  report.ves = valid_efficiency_score(outcomes);
  report.rows = std::move(outcomes);
  return report;
}

// ---- exact match ------------------------------------------------------------

int exact_match(const std::string& pred_sql, const std::string& gold_sql) {
  sql::SqlAst gold;
  try {
    gold = sql::parse_sql(gold_sql);
  } catch (const Error& e) {
    throw ValidationError("gold SQL does not parse: " + std::string(e.what()));
  }
  try {
    sql::SqlAst pred = sql::parse_sql(pred_sql);
    return sql::ast_match(pred, gold) ? 1 : 0;
  } catch (const Error&) {
    return 0;  // unparseable prediction counts as a miss
  }
}

EmReport exact_match_report(const std::vector<std::string>& preds,
                            const std::vector<std::string>& golds) {
  if (preds.size() != golds.size() || preds.empty()) {
    throw PreconditionError("exact_match_report: need equal non-zero counts");
  }
  EmReport report;
  report.n = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int flag = exact_match(preds[i], golds[i]);
    bool parseable = true;
    try {
      sql::parse_sql(preds[i]);
    } catch (const Error&) {
      parseable = false;
    }
    if (!parseable) ++report.unparseable;
    report.flags.push_back(flag);
    report.em += flag;
  }
  report.em /= double(report.n);
  return report;
}

}  // namespace sqlink
