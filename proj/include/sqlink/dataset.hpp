#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sqlink/catalog.hpp"
#include "sqlink/metrics.hpp"
#include "sqlink/pipeline.hpp"
#include "sqlink/types.hpp"

// Dataset ingestion, JSON-lines record formats, trace export, and the
// evaluation report document.
namespace sqlink {

std::map<std::string, SchemaCatalog> catalog_index(std::vector<SchemaCatalog> catalogs);

struct IngestResult {
  std::vector<Instance> instances;
  std::size_t gold_parse_failures = 0;  // kept, flagged with a null gold_schema
};

// Reads a raw samples file: a JSON array of objects with db_id, question,
// optional evidence, gold SQL under "SQL"/"query"/"gold_sql", and an
// optional annotated "gold_schema" override. Gold schema sets are derived
// from the gold SQL unless overridden; underivable golds are flagged.
IngestResult ingest_instances(const std::string& samples_path,
                              const std::map<std::string, SchemaCatalog>& catalogs);

std::vector<Instance> load_instances_jsonl(const std::string& path);
void write_instances_jsonl(const std::string& path,
                           const std::vector<Instance>& instances);

struct Prediction {
  std::string id;
  SchemaSet schema;
  std::string sql;
  bool unparseable = false;
  std::optional<std::string> error;
  std::string trace_ref;  // e.g. "traces.jsonl#<id>"
};

std::vector<Prediction> load_predictions_jsonl(const std::string& path);
void write_predictions_jsonl(const std::string& path,
                             const std::vector<Prediction>& predictions);

// One deterministic JSON record per instance; per-cycle timings are kept in
// a dedicated "timing" key so the rest of the record is reproducible.
nlohmann::json trace_to_json(const Instance& instance, const ChainResult& chain);
void write_traces_jsonl(const std::string& path,
                        const std::vector<nlohmann::json>& traces);
std::vector<nlohmann::json> load_traces_jsonl(const std::string& path);

// ---- evaluation report -------------------------------------------------

struct AblationRow {
  int cycle = 0;
  std::string scorer;  // "column" | "table" | "database" | "union"
  LinkingReport table;
  LinkingReport column;
};

struct ReportInputs {
  std::size_t instances = 0;
  LinkingReport table_link;
  LinkingReport column_link;
  std::optional<EmReport> em;
  std::optional<ExecReport> exec;
  std::vector<AblationRow> ablation;
};

// Deterministic report document; metric values are x100, 2 decimals. VES
// and per-instance timings are excluded (see build_timing_json).
nlohmann::json build_report_json(const ReportInputs& inputs);

// Timing-dependent section: VES and per-instance execution times.
nlohmann::json build_timing_json(const ReportInputs& inputs);

std::string render_report_text(const nlohmann::json& report);

}  // namespace sqlink
