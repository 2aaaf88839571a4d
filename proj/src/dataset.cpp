#include "sqlink/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sqlink/error.hpp"
#include "sqlink/sqlast.hpp"

namespace sqlink {

namespace {

using nlohmann::json;

json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in " + path + ": " + e.what(),
                     e.byte > 0 ? e.byte - 1 : 0);
  }
}

std::vector<json> parse_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError("malformed JSON line " + std::to_string(line_no) + " in " +
                           path + ": " + e.what(),
                       0);
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  for (const auto& record : records) {
    out << record.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::string zero_pad(std::size_t index) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index;
  return ss.str();
}

double pct(double x) { return std::round(x * 10000.0) / 100.0; }

json linking_to_json(const LinkingReport& r) {
  return json{{"MA", pct(r.ma)}, {"IA", pct(r.ia)}, {"RE", pct(r.re)}};
}

}  // namespace

std::map<std::string, SchemaCatalog> catalog_index(
    std::vector<SchemaCatalog> catalogs) {
  std::map<std::string, SchemaCatalog> out;
  for (auto& cat : catalogs) {
    std::string id = cat.db_id;
    out.emplace(std::move(id), std::move(cat));
  }
  return out;
}

IngestResult ingest_instances(
    const std::string& samples_path,
    const std::map<std::string, SchemaCatalog>& catalogs) {
  json doc = parse_json_file(samples_path);
  if (!doc.is_array()) {
    throw ParseError("samples file must hold a JSON array", 0);
  }

  std::vector<std::string> unresolved;
  IngestResult out;
  std::size_t index = 0;
  for (const auto& entry : doc) {
    Instance inst;
    if (entry.contains("question_id")) {
      const auto& qid = entry.at("question_id");
      inst.id = qid.is_string() ? qid.get<std::string>()
                                : zero_pad(qid.get<std::size_t>());
    } else if (entry.contains("id")) {
      const auto& qid = entry.at("id");
      inst.id = qid.is_string() ? qid.get<std::string>()
                                : zero_pad(qid.get<std::size_t>());
    } else {
      inst.id = zero_pad(index);
    }
    ++index;

    inst.db_id = normalize_identifier(entry.at("db_id").get<std::string>());
    inst.question = entry.at("question").get<std::string>();
    inst.evidence = entry.value("evidence", std::string());
    if (entry.contains("SQL")) {
      inst.gold_sql = entry.at("SQL").get<std::string>();
    } else if (entry.contains("query")) {
      inst.gold_sql = entry.at("query").get<std::string>();
    } else {
      inst.gold_sql = entry.value("gold_sql", std::string());
    }

    auto cat_it = catalogs.find(inst.db_id);
    if (cat_it == catalogs.end()) {
      unresolved.push_back(inst.id + " -> " + inst.db_id);
      continue;
    }

    if (entry.contains("gold_schema") && entry.at("gold_schema").is_array()) {
      // annotated labels override derivation
      std::vector<std::string> ids;
      for (const auto& s : entry.at("gold_schema")) ids.push_back(s.get<std::string>());
      inst.gold_schema = SchemaSet::from_strings(ids);
    } else if (!inst.gold_sql.empty()) {
      try {
        inst.gold_schema = sql::extract_schema_set(sql::parse_sql(inst.gold_sql),
                                                   cat_it->second);
      } catch (const Error&) {
        inst.gold_schema = std::nullopt;
        ++out.gold_parse_failures;
      }
    }
    out.instances.push_back(std::move(inst));
  }

  if (!unresolved.empty()) {
    std::string msg = "unresolvable db_id for " +
                      std::to_string(unresolved.size()) + " sample(s):";
    for (const auto& u : unresolved) msg += " " + u + ";";
    throw ValidationError(msg);
  }
  return out;
}

std::vector<Instance> load_instances_jsonl(const std::string& path) {
  std::vector<Instance> out;
  for (const auto& record : parse_jsonl_file(path)) {
    Instance inst;
    inst.id = record.at("id").get<std::string>();
    inst.db_id = record.at("db_id").get<std::string>();
    inst.question = record.at("question").get<std::string>();
    inst.evidence = record.value("evidence", std::string());
    inst.gold_sql = record.value("gold_sql", std::string());
    if (record.contains("gold_schema") && record.at("gold_schema").is_array()) {
      std::vector<std::string> ids;
      for (const auto& s : record.at("gold_schema")) {
        ids.push_back(s.get<std::string>());
      }
      inst.gold_schema = SchemaSet::from_strings(ids);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void write_instances_jsonl(const std::string& path,
                           const std::vector<Instance>& instances) {
  std::vector<json> records;
  for (const auto& inst : instances) {
    json record = {{"id", inst.id},
                   {"db_id", inst.db_id},
                   {"question", inst.question},
                   {"evidence", inst.evidence},
                   {"gold_sql", inst.gold_sql}};
    record["gold_schema"] =
        inst.gold_schema ? json(inst.gold_schema->to_strings()) : json(nullptr);
    records.push_back(std::move(record));
  }
  write_jsonl(path, records);
}

std::vector<Prediction> load_predictions_jsonl(const std::string& path) {
  std::vector<Prediction> out;
  for (const auto& record : parse_jsonl_file(path)) {
    Prediction p;
    p.id = record.at("id").get<std::string>();
    if (record.contains("schema") && record.at("schema").is_array()) {
      std::vector<std::string> ids;
      for (const auto& s : record.at("schema")) ids.push_back(s.get<std::string>());
      p.schema = SchemaSet::from_strings(ids);
    }
    p.sql = record.value("sql", std::string());
    p.unparseable = record.value("unparseable", false);
    p.trace_ref = record.value("trace_ref", std::string());
    if (record.contains("error") && record.at("error").is_string()) {
      p.error = record.at("error").get<std::string>();
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions_jsonl(const std::string& path,
                             const std::vector<Prediction>& predictions) {
  std::vector<json> records;
  for (const auto& p : predictions) {
    json record = {{"id", p.id},
                   {"schema", p.schema.to_strings()},
                   {"sql", p.sql},
                   {"unparseable", p.unparseable},
                   {"trace_ref", p.trace_ref}};
    record["error"] = p.error ? json(*p.error) : json(nullptr);
    records.push_back(std::move(record));
  }
  write_jsonl(path, records);
}

nlohmann::json trace_to_json(const Instance& instance, const ChainResult& chain) {
  json cycles = json::array();
  for (const auto& row : chain.trace.rows) {
    json scorers = json::object();
    for (const auto& [name, ids] : row.scorer_outputs) scorers[name] = ids;
    json cycle = {{"cycle", row.cycle},
                  {"input", row.input},
                  {"scorers", scorers},
                  {"failures", row.failures},
                  {"warnings", row.warnings},
                  {"union", row.union_result},
                  {"timing", json{{"duration_ms", row.duration_ms}}}};
    cycle["fallback"] = row.fallback ? json(*row.fallback) : json(nullptr);
    cycles.push_back(std::move(cycle));
  }
  json out = {{"id", instance.id},
              {"db_id", instance.db_id},
              {"cycles", cycles},
              {"final", chain.final_set.to_strings()}};
  out["error"] = chain.error ? json(*chain.error) : json(nullptr);
  return out;
}

void write_traces_jsonl(const std::string& path,
                        const std::vector<nlohmann::json>& traces) {
  write_jsonl(path, traces);
}

std::vector<nlohmann::json> load_traces_jsonl(const std::string& path) {
  return parse_jsonl_file(path);
}

nlohmann::json build_report_json(const ReportInputs& inputs) {
  json report;
  report["n"] = inputs.instances;
  report["notes"] = json::array(
      {"metric values are x100, rounded to 2 decimals",
       "VES follows the ratio formula without the square root used by the "
       "official Bird harness and lives in the timing report"});
  report["linking"] = {{"table", linking_to_json(inputs.table_link)},
                       {"column", linking_to_json(inputs.column_link)}};
  if (inputs.em) {
    report["em"] = {{"EM", pct(inputs.em->em)},
                    {"n", inputs.em->n},
                    {"unparseable", inputs.em->unparseable}};
  }
  if (inputs.exec) {
    report["execution"] = {{"EX", pct(inputs.exec->ex)},
                           {"n", inputs.exec->n},
                           {"excluded", inputs.exec->excluded},
                           {"timeouts", inputs.exec->timeouts}};
  }
  if (!inputs.ablation.empty()) {
    json rows = json::array();
    for (const auto& row : inputs.ablation) {
      rows.push_back({{"cycle", row.cycle},
                      {"scorer", row.scorer},
                      {"table", linking_to_json(row.table)},
                      {"column", linking_to_json(row.column)}});
    }
    report["ablation"] = rows;
  }
  return report;
}

nlohmann::json build_timing_json(const ReportInputs& inputs) {
  json out;
  if (inputs.exec) {
    out["VES"] = pct(inputs.exec->ves);
    json rows = json::array();
    for (const auto& row : inputs.exec->rows) {
      rows.push_back({{"flag", row.flag},
                      {"gold_s", row.gold_time_s},
                      {"pred_s", row.pred_time_s}});
    }
    out["per_instance"] = rows;
  }
  return out;
}

std::string render_report_text(const nlohmann::json& report) {
  std::ostringstream out;
  out << "instances: " << report.at("n").get<std::size_t>() << "\n\n";
  auto write_linking = [&out](const std::string& label, const json& level) {
    out << std::left << std::setw(22) << label;
    out << std::fixed << std::setprecision(2);
    out << " MA " << std::setw(7) << level.at("MA").get<double>();
    out << " IA " << std::setw(7) << level.at("IA").get<double>();
    out << " RE " << std::setw(7) << level.at("RE").get<double>() << "\n";
  };
  out << "schema linking (final sets)\n";
  write_linking("  table level", report.at("linking").at("table"));
  write_linking("  column level", report.at("linking").at("column"));
  if (report.contains("em")) {
    out << "\nexact match\n  EM " << std::fixed << std::setprecision(2)
        << report.at("em").at("EM").get<double>() << "  (unparseable "
        << report.at("em").at("unparseable").get<std::size_t>() << ")\n";
  }
  if (report.contains("execution")) {
    out << "\nexecution\n  EX " << std::fixed << std::setprecision(2)
        << report.at("execution").at("EX").get<double>() << "  (n "
        << report.at("execution").at("n").get<std::size_t>() << ", excluded "
        << report.at("execution").at("excluded").get<std::size_t>() << ", timeouts "
        << report.at("execution").at("timeouts").get<std::size_t>() << ")\n";
  }
  if (report.contains("ablation")) {
    out << "\nper-cycle ablation\n";
    for (const auto& row : report.at("ablation")) {
      std::string label = "  cycle " + std::to_string(row.at("cycle").get<int>()) +
                          " " + row.at("scorer").get<std::string>();
      out << std::left << std::setw(28) << label;
      const auto& t = row.at("table");
      const auto& c = row.at("column");
      out << std::fixed << std::setprecision(2);
      out << " T(MA " << t.at("MA").get<double>() << " IA " << t.at("IA").get<double>()
          << " RE " << t.at("RE").get<double>() << ")";
      out << " C(MA " << c.at("MA").get<double>() << " IA " << c.at("IA").get<double>()
          << " RE " << c.at("RE").get<double>() << ")\n";
    }
  }
  return out.str();
}

}  // namespace sqlink
