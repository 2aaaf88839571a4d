#include "sqlink/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "sqlink/error.hpp"

namespace sqlink {

ScorerResult ColumnScorer::score(const Instance& instance,
                                 const SchemaCatalog& cycle_catalog) {
  ColumnScores scores =
      score_and_filter_columns(params_, instance, cycle_catalog, threshold_);
  return ScorerResult{std::move(scores.filtered), std::move(scores.scores), {}};
}

ScorerResult TableScorer::score(const Instance& instance,
                                const SchemaCatalog& cycle_catalog) {
  TablePrediction pred =
      predict_table_level(params_, *encoder_, instance, cycle_catalog, rule_);
  ScorerResult out;
  out.set = std::move(pred.fused);
  out.scores = std::move(pred.score_cos);
  out.scores.insert(out.scores.end(), pred.score_cl.begin(), pred.score_cl.end());
  return out;
}

ScorerResult DatabaseScorer::score(const Instance& instance,
                                   const SchemaCatalog& cycle_catalog) {
  LinkOutcome outcome =
      link_database_level(*client_, instance, cycle_catalog, retries_);
  ScorerResult out;
  out.set = std::move(outcome.set);
  if (outcome.dropped_names > 0) {
    out.warnings.push_back("database: dropped " +
                           std::to_string(outcome.dropped_names) +
                           " unknown names");
  }
  if (outcome.error) {
    out.warnings.push_back("database: " + *outcome.error);
  }
  return out;
}

void CycleConfig::validate() const {
  if (num_cycles < 1) throw ConfigError("cycle config: num_cycles must be >= 1");
  if (plan.empty()) throw ConfigError("cycle config: empty plan");
  for (const auto& cycle : plan) {
    if (cycle.empty()) {
      throw ConfigError("cycle config: every cycle needs at least one scorer");
    }
  }
}

namespace {

// keep-top-1-table: the best table by the column scorer's max column score,
// else the first table of the cycle catalog; plus its columns in `current`.
SchemaSet fallback_set(const SchemaSet& current, const SchemaCatalog& sub,
                       const std::vector<ScoredElement>& column_scores) {
  std::string best_table;
  double best_score = -2.0;
  for (const auto& s : column_scores) {
    if (s.scorer != "column") continue;
    if (s.score > best_score) {
      best_score = s.score;
      best_table = s.element.table;
    }
  }
  if (best_table.empty() && !sub.tables.empty()) {
    best_table = sub.tables.front().name;
  }
  SchemaSet out;
  if (best_table.empty()) return out;
  out.insert(SchemaElementId::table_id(best_table));
  for (const auto& e : current.elements()) {
    if (e.is_column() && e.table == best_table) out.insert(e);
  }
  return out;
}

}  // namespace

CycleOutcome run_cycle(const Instance& instance, const SchemaSet& current,
                       const SchemaCatalog& catalog,
                       const std::vector<Scorer*>& scorers) {
  if (current.empty()) {
    throw PreconditionError("run_cycle: empty candidate set");
  }
  if (scorers.empty()) {
    throw PreconditionError("run_cycle: no scorers enabled");
  }
  auto start = std::chrono::steady_clock::now();

  SchemaCatalog sub = subset_catalog(catalog, current);

  CycleOutcome out;
  out.row.input = current.to_strings();

  SchemaSet unioned;
  std::vector<ScoredElement> column_scores;
  std::size_t failures = 0;
  for (Scorer* scorer : scorers) {
    ScorerResult result;
    try {
      result = scorer->score(instance, sub);
    } catch (const std::exception& e) {
      ++failures;
      out.row.failures.push_back(scorer->name() + ": " + e.what());
      continue;
    }
    // Hallucinated or stale elements cannot re-enter the candidate set.
    SchemaSet kept = SchemaSet::set_intersection(result.set, current);
    unioned = SchemaSet::set_union(unioned, kept);
    out.row.scorer_outputs.emplace_back(scorer->name(), kept.to_strings());
    for (auto& w : result.warnings) out.row.warnings.push_back(std::move(w));
    if (scorer->name() == "column") {
      column_scores.insert(column_scores.end(), result.scores.begin(),
                           result.scores.end());
    }
  }
  if (failures == scorers.size()) {
    throw Error("run_cycle: all enabled scorers failed");
  }

  if (unioned.empty()) {
    SchemaSet fb = fallback_set(current, sub, column_scores);
    out.row.fallback = fb.to_strings();
    unioned = fb;
  }

  out.row.union_result = unioned.to_strings();
  out.row.duration_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  out.set = std::move(unioned);
  return out;
}

ChainResult run_chain(const Instance& instance, const SchemaCatalog& catalog,
                      const std::map<std::string, Scorer*>& scorers,
                      const CycleConfig& config) {
  config.validate();

  ChainResult out;
  SchemaSet current = catalog.full_set();
  for (int k = 0; k < config.num_cycles; ++k) {
    std::size_t plan_idx = std::min<std::size_t>(k, config.plan.size() - 1);
    std::vector<Scorer*> enabled;
    for (const auto& name : config.plan[plan_idx]) {
      auto it = scorers.find(name);
      if (it == scorers.end() || it->second == nullptr) {
        throw ConfigError("run_chain: no scorer registered for '" + name + "'");
      }
      enabled.push_back(it->second);
    }
    try {
      CycleOutcome cycle = run_cycle(instance, current, catalog, enabled);
      cycle.row.cycle = k + 1;
      out.trace.rows.push_back(std::move(cycle.row));
      current = std::move(cycle.set);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      out.error = "cycle " + std::to_string(k + 1) + ": " + e.what();
      break;
    }
  }
  out.final_set = std::move(current);
  return out;
}

}  // namespace sqlink
