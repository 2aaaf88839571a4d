#pragma once

#include <string>
#include <vector>

#include "sqlink/schema_set.hpp"

// The six evaluation metrics: MA/IA/RE for schema linking at table and
// column granularity, EX/VES for execution, EM for canonical-AST match.
namespace sqlink {

enum class LinkLevel { table, column };

struct LinkingReport {
  double ma = 0.0;  // predicted set equals gold
  double ia = 0.0;  // predicted set includes gold
  double re = 0.0;  // mean fraction of predicted elements outside gold
  std::size_t n = 0;
};

// Sets are projected to the requested level first. The RE term of an
// instance with an empty prediction is 0.
LinkingReport linking_metrics(const std::vector<SchemaSet>& preds,
                              const std::vector<SchemaSet>& golds,
                              LinkLevel level);

struct ExecLimits {
  double timeout_seconds = 30.0;
  int runs = 5;  // timing repetitions; median taken
};

struct ExecOutcome {
  int flag = 0;             // 1 when executions match
  bool gold_error = false;  // dataset error: instance excluded from EX/VES
  std::string note;
  double gold_time_s = 0.0;  // median over runs
  double pred_time_s = 0.0;
  bool timeout = false;
};

// Executes both queries read-only against the SQLite file. Results compare
// as multisets of rows unless the gold query has a top-level ORDER BY.
// Numeric cells compare with relative tolerance 1e-6, text exactly,
// null == null. Prediction failure of any kind yields flag 0.
ExecOutcome execution_accuracy(const std::string& db_file,
                               const std::string& pred_sql,
                               const std::string& gold_sql,
                               const ExecLimits& limits);

// VES over per-instance outcomes: (1/n) * sum_i flag_i * gold_i/pred_i,
// gold-error rows excluded, times clamped to the timer resolution.
double valid_efficiency_score(const std::vector<ExecOutcome>& outcomes);

struct ExecReport {
  double ex = 0.0;
  double ves = 0.0;
  std::size_t n = 0;         // included instances
  std::size_t excluded = 0;  // gold failures
  std::size_t timeouts = 0;
  std::vector<ExecOutcome> rows;
};

ExecReport aggregate_execution(std::vector<ExecOutcome> outcomes);

// 1 when the canonical ASTs match. Unparseable prediction gives 0; a gold
// query that fails to parse is a dataset error (ValidationError).
int exact_match(const std::string& pred_sql, const std::string& gold_sql);

struct EmReport {
  double em = 0.0;
  std::size_t n = 0;
  std::size_t unparseable = 0;  // predictions that failed to parse
  std::vector<int> flags;
};

EmReport exact_match_report(const std::vector<std::string>& preds,
                            const std::vector<std::string>& golds);

}  // namespace sqlink
