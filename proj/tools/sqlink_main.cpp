// sqlink: batch entry points for dataset ingestion, scorer training,
// chain-loop schema linking, SQL generation, and evaluation.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "sqlink/catalog.hpp"
#include "sqlink/crossenc.hpp"
#include "sqlink/dataset.hpp"
#include "sqlink/embedder.hpp"
#include "sqlink/error.hpp"
#include "sqlink/llmlink.hpp"
#include "sqlink/metrics.hpp"
#include "sqlink/pipeline.hpp"
#include "sqlink/sqlast.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sqlink;

namespace {

// ---- shared option bundle -------------------------------------------------

struct CommonOpts {
  std::string config_path;
  std::string tables_path;
  std::string instances_path;
  std::string out_dir = "out";
  std::uint64_t seed = 7;
  int jobs = 1;
};

json load_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw ConfigError(std::string("cannot open config: ") + argv[i + 1]);
      try {
        json doc;
        in >> doc;
        return doc;
      } catch (const json::parse_error& e) {
        throw ConfigError("config file malformed: " + std::string(e.what()));
      }
    }
  }
  return json::object();
}

template <typename T>
T cfg_value(const json& config, const std::string& pointer, T fallback) {
  try {
    const json* node = &config;
    std::string rest = pointer;
    while (!rest.empty()) {
      auto slash = rest.find('/');
      std::string key = rest.substr(0, slash);
      if (!node->contains(key)) return fallback;
      node = &node->at(key);
      rest = slash == std::string::npos ? "" : rest.substr(slash + 1);
    }
    return node->get<T>();
  } catch (const json::exception&) {
    return fallback;
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::map<std::string, SchemaCatalog> load_catalogs(const std::string& tables_path) {
  require_file(tables_path, "--tables");
  return catalog_index(load_dataset_catalogs(tables_path));
}

std::vector<Instance> load_sorted_instances(const std::string& path) {
  require_file(path, "--instances");
  auto instances = load_instances_jsonl(path);
  std::sort(instances.begin(), instances.end(),
            [](const Instance& a, const Instance& b) { return a.id < b.id; });
  return instances;
}

const SchemaCatalog& catalog_for(const std::map<std::string, SchemaCatalog>& cats,
                                 const Instance& inst) {
  auto it = cats.find(inst.db_id);
  if (it == cats.end()) {
    throw ValidationError("instance " + inst.id + " references unknown db '" +
                          inst.db_id + "'");
  }
  return it->second;
}

std::shared_ptr<LlmClient> make_llm_client(const std::string& mock_script,
                                           const std::string& url,
                                           const std::string& model,
                                           const json& config) {
  if (!mock_script.empty()) {
    require_file(mock_script, "--mock-llm");
    return std::make_shared<MockLlmClient>(
        MockLlmClient::from_script_file(mock_script));
  }
  if (url.empty()) {
    throw ConfigError("either --mock-llm or --llm-url is required");
  }
  LlmClientConfig cfg;
  cfg.endpoint_url = url;
  cfg.model = model;
  cfg.temperature = cfg_value(config, "llm/temperature", 0.0);
  cfg.max_tokens = cfg_value(config, "llm/max_tokens", 1024);
  cfg.timeout_seconds = cfg_value(config, "llm/timeout_seconds", 60);
  cfg.retries = cfg_value(config, "llm/retries", 2);
  cfg.backoff_seconds = cfg_value(config, "llm/backoff_seconds", 0.5);
  cfg.max_concurrency = cfg_value(config, "llm/max_concurrency", 4);
  cfg.auth_env = cfg_value(config, "llm/auth_env", std::string("LLM_API_KEY"));
  return std::make_shared<HttpLlmClient>(cfg);
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string current;
  for (char c : csv) {
    if (c == ',') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

// Deterministic parallel map over instances: results land by index.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& t : workers) t.join();
}

// ---- commands ---------------------------------------------------------------

int cmd_ingest(const CommonOpts& common, const std::string& data_path) {
  auto catalogs = load_catalogs(common.tables_path);
  require_file(data_path, "--data");
  fs::create_directories(common.out_dir);

  IngestResult result = ingest_instances(data_path, catalogs);
  std::sort(result.instances.begin(), result.instances.end(),
            [](const Instance& a, const Instance& b) { return a.id < b.id; });
  write_instances_jsonl((fs::path(common.out_dir) / "instances.jsonl").string(),
                        result.instances);
  std::cout << "ingested " << result.instances.size() << " instances over "
            << catalogs.size() << " catalogs";
  if (result.gold_parse_failures > 0) {
    std::cout << " (" << result.gold_parse_failures
              << " gold queries failed to parse; flagged)";
  }
  std::cout << "\n";
  return 0;
}

int cmd_mine_triplets(const CommonOpts& common) {
  auto catalogs = load_catalogs(common.tables_path);
  auto instances = load_sorted_instances(common.instances_path);
  fs::create_directories(common.out_dir);

  std::mt19937_64 rng(common.seed);
  std::vector<json> records;
  std::size_t skipped = 0;
  for (const auto& inst : instances) {
    if (!inst.gold_schema) {
      ++skipped;
      continue;
    }
    const SchemaCatalog& cat = catalog_for(catalogs, inst);
    for (const auto& t : mine_triplets(inst, *inst.gold_schema, cat, rng)) {
      records.push_back(json{{"id", inst.id},
                             {"anchor", t.anchor_text},
                             {"positive", t.positive_text},
                             {"negative", t.negative_text}});
    }
  }
  std::ofstream out(fs::path(common.out_dir) / "triplets.jsonl",
                    std::ios::binary | std::ios::trunc);
  for (const auto& r : records) out << r.dump() << "\n";
  std::cout << "mined " << records.size() << " triplets (" << skipped
            << " instances without gold skipped)\n";
  return 0;
}

TripletTrainConfig embedder_config_from(const json& config, std::uint64_t seed) {
  TripletTrainConfig cfg;
  cfg.margin = cfg_value(config, "embedder/margin", 0.3);
  cfg.learning_rate = cfg_value(config, "embedder/learning_rate", 0.05);
  cfg.epochs = cfg_value(config, "embedder/epochs", 50);
  cfg.batch_size = cfg_value(config, "embedder/batch_size", 1);
  cfg.embed_dim = cfg_value(config, "embedder/embed_dim", std::size_t(256));
  cfg.features.hash_dim = cfg_value(config, "embedder/hash_dim", 4096u);
  cfg.seed = seed;
  return cfg;
}

int cmd_train_embedder(const CommonOpts& common, const std::string& triplets_path,
                       const std::string& out_file, TripletTrainConfig cfg) {
  EmbedderTrainReport report;
  EmbedderParams params;
  if (!triplets_path.empty()) {
    require_file(triplets_path, "--triplets");
    std::vector<TripletExample> triplets;
    std::ifstream in(triplets_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json record = json::parse(line);
      triplets.push_back(TripletExample{record.at("anchor").get<std::string>(),
                                        record.at("positive").get<std::string>(),
                                        record.at("negative").get<std::string>()});
    }
    params = train_embedder(triplets, cfg, &report);
  } else {
    auto catalogs = load_catalogs(common.tables_path);
    auto instances = load_sorted_instances(common.instances_path);
    std::vector<MinedExample> examples;
    for (const auto& inst : instances) {
      if (!inst.gold_schema) continue;
      examples.push_back(
          MinedExample{&inst, &catalog_for(catalogs, inst), &*inst.gold_schema});
    }
    params = train_embedder_remine(examples, cfg, &report);
  }
  fs::create_directories(fs::path(out_file).parent_path().empty()
                             ? "."
                             : fs::path(out_file).parent_path().string());
  save_embedder(params, out_file);
  if (!report.epoch_mean_loss.empty()) {
    std::cout << "embedder: loss " << report.epoch_mean_loss.front() << " -> "
              << report.epoch_mean_loss.back() << " over "
              << report.epoch_mean_loss.size() << " epochs\n";
  }
  std::cout << "saved " << out_file << "\n";
  return 0;
}

int cmd_train_crossenc(const CommonOpts& common, const std::string& out_file,
                       CrossTrainConfig cfg) {
  auto catalogs = load_catalogs(common.tables_path);
  auto instances = load_sorted_instances(common.instances_path);
  std::vector<LabeledExample> examples;
  for (const auto& inst : instances) {
    if (!inst.gold_schema) continue;
    examples.push_back(
        LabeledExample{&inst, &catalog_for(catalogs, inst), &*inst.gold_schema});
  }
  HashTokenEncoder encoder(FeatureConfig{}, cfg.model.model_dim, cfg.model.seed);
  CrossTrainReport report;
  CrossEncoderParams params = train_cross_encoder(examples, encoder, cfg, &report);
  fs::create_directories(fs::path(out_file).parent_path().empty()
                             ? "."
                             : fs::path(out_file).parent_path().string());
  params.save(out_file);
  if (!report.epoch_mean_loss.empty()) {
    std::cout << "cross encoder: loss " << report.epoch_mean_loss.front() << " -> "
              << report.epoch_mean_loss.back() << " over "
              << report.epoch_mean_loss.size() << " epochs\n";
  }
  std::cout << "saved " << out_file << "\n";
  return 0;
}

struct LinkOpts {
  std::string embedder_path;
  std::string crossenc_path;
  std::string mock_script;
  std::string llm_url;
  std::string llm_model = "default";
  int cycles = 2;
  std::string scorers_csv;  // overrides the plan for every cycle when set
  double threshold = 0.5;
  int retries = 2;
  SelectionRule rule;
};

int cmd_link(const CommonOpts& common, const LinkOpts& opts, const json& config) {
  auto catalogs = load_catalogs(common.tables_path);
  auto instances = load_sorted_instances(common.instances_path);
  fs::create_directories(common.out_dir);

  CycleConfig cycle_config;
  cycle_config.num_cycles = opts.cycles;
  if (!opts.scorers_csv.empty()) {
    cycle_config.plan = {split_csv(opts.scorers_csv)};
  } else if (config.contains("plan")) {
    cycle_config.plan.clear();
    for (const auto& cycle : config.at("plan")) {
      cycle_config.plan.push_back(cycle.get<std::vector<std::string>>());
    }
  }
  cycle_config.validate();

  std::set<std::string> needed;
  for (const auto& cycle : cycle_config.plan) {
    for (const auto& name : cycle) {
      if (name != "column" && name != "table" && name != "database") {
        throw ConfigError("unknown scorer '" + name +
                          "' (expected column, table, database)");
      }
      needed.insert(name);
    }
  }

  std::map<std::string, std::unique_ptr<Scorer>> owned;
  if (needed.count("column") > 0) {
    require_file(opts.embedder_path, "--embedder");
    owned["column"] = std::make_unique<ColumnScorer>(
        load_embedder(opts.embedder_path), opts.threshold);
  }
  if (needed.count("table") > 0) {
    require_file(opts.crossenc_path, "--crossenc");
    CrossEncoderParams params = CrossEncoderParams::load(opts.crossenc_path);
    auto encoder = std::make_shared<HashTokenEncoder>(
        FeatureConfig{}, params.config.model_dim, params.config.seed);
    owned["table"] = std::make_unique<TableScorer>(std::move(params),
                                                   std::move(encoder), opts.rule);
  }
  int jobs = common.jobs;
  if (needed.count("database") > 0) {
    auto client =
        make_llm_client(opts.mock_script, opts.llm_url, opts.llm_model, config);
    owned["database"] = std::make_unique<DatabaseScorer>(client, opts.retries);
    if (!opts.mock_script.empty() && jobs != 1) {
      std::cerr << "note: --mock-llm forces --jobs 1 for deterministic scripts\n";
      jobs = 1;
    }
  }
  std::map<std::string, Scorer*> scorers;
  for (auto& [name, scorer] : owned) scorers[name] = scorer.get();

  for (const auto& inst : instances) catalog_for(catalogs, inst);  // validate

  std::vector<Prediction> predictions(instances.size());
  std::vector<json> traces(instances.size());
  std::atomic<std::size_t> errors{0};
  std::atomic<std::size_t> fallbacks{0};
  parallel_for(instances.size(), jobs, [&](std::size_t i) {
    const Instance& inst = instances[i];
    const SchemaCatalog& cat = catalogs.at(inst.db_id);
    Prediction pred;
    pred.id = inst.id;
    pred.trace_ref = "traces.jsonl#" + inst.id;
    try {
      ChainResult chain = run_chain(inst, cat, scorers, cycle_config);
      pred.schema = chain.final_set;
      pred.error = chain.error;
      if (chain.error) ++errors;
      for (const auto& row : chain.trace.rows) {
        if (row.fallback) ++fallbacks;
      }
      traces[i] = trace_to_json(inst, chain);
    } catch (const std::exception& e) {
      pred.error = e.what();
      ++errors;
      traces[i] = json{{"id", inst.id}, {"db_id", inst.db_id},
                       {"cycles", json::array()}, {"final", json::array()},
                       {"error", e.what()}};
    }
    predictions[i] = std::move(pred);
  });

  write_predictions_jsonl((fs::path(common.out_dir) / "predictions.jsonl").string(),
                          predictions);
  write_traces_jsonl((fs::path(common.out_dir) / "traces.jsonl").string(), traces);
  std::cout << "linked " << instances.size() << " instances (" << errors.load()
            << " errors, " << fallbacks.load() << " fallbacks)\n";
  return 0;
}

int cmd_generate(const CommonOpts& common, const std::string& predictions_path,
                 const std::string& mock_script, const std::string& llm_url,
                 const std::string& llm_model, const json& config) {
  auto catalogs = load_catalogs(common.tables_path);
  auto instances = load_sorted_instances(common.instances_path);
  require_file(predictions_path, "--predictions");
  auto predictions = load_predictions_jsonl(predictions_path);
  fs::create_directories(common.out_dir);

  std::map<std::string, const Instance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;

  auto client = make_llm_client(mock_script, llm_url, llm_model, config);
  int jobs = common.jobs;
  if (!mock_script.empty() && jobs != 1) jobs = 1;

  std::sort(predictions.begin(), predictions.end(),
            [](const Prediction& a, const Prediction& b) { return a.id < b.id; });

  std::atomic<std::size_t> errors{0};
  parallel_for(predictions.size(), jobs, [&](std::size_t i) {
    Prediction& pred = predictions[i];
    auto it = by_id.find(pred.id);
    if (it == by_id.end()) {
      pred.error = "prediction id not present in instances";
      ++errors;
      return;
    }
    const Instance& inst = *it->second;
    try {
      GenerationResult result = generate_sql(*client, inst, pred.schema,
                                             catalogs.at(inst.db_id));
      pred.sql = result.sql_text;
      pred.unparseable = result.unparseable;
    } catch (const std::exception& e) {
      pred.error = e.what();
      ++errors;
    }
  });

  write_predictions_jsonl((fs::path(common.out_dir) / "predictions.jsonl").string(),
                          predictions);
  std::cout << "generated SQL for " << predictions.size() << " predictions ("
            << errors.load() << " errors)\n";
  return 0;
}

struct EvalOpts {
  std::string predictions_path;
  std::string db_dir;
  std::string traces_path;
  double timeout_seconds = 30.0;
  int runs = 5;
};

fs::path locate_db_file(const std::string& db_dir, const std::string& db_id) {
  for (const auto& candidate :
       {fs::path(db_dir) / (db_id + ".sqlite"),
        fs::path(db_dir) / db_id / (db_id + ".sqlite"),
        fs::path(db_dir) / (db_id + ".db"),
        fs::path(db_dir) / db_id / (db_id + ".db")}) {
    if (fs::exists(candidate)) return candidate;
  }
  throw ConfigError("no database file for '" + db_id + "' under " + db_dir);
}

int cmd_evaluate(const CommonOpts& common, const EvalOpts& opts) {
  auto catalogs = load_catalogs(common.tables_path);
  auto instances = load_sorted_instances(common.instances_path);
  require_file(opts.predictions_path, "--predictions");
  auto predictions = load_predictions_jsonl(opts.predictions_path);
  fs::create_directories(common.out_dir);

  std::map<std::string, const Prediction*> preds_by_id;
  for (const auto& p : predictions) preds_by_id[p.id] = &p;

  ReportInputs inputs;
  std::vector<SchemaSet> pred_sets, gold_sets;
  std::vector<std::string> pred_sql, gold_sql;
  std::vector<const Instance*> exec_instances;
  for (const auto& inst : instances) {
    auto it = preds_by_id.find(inst.id);
    if (it == preds_by_id.end()) {
      throw ValidationError("no prediction for instance " + inst.id);
    }
    if (!inst.gold_schema) continue;  // flagged at ingest; excluded
    pred_sets.push_back(it->second->schema);
    gold_sets.push_back(*inst.gold_schema);
    if (!inst.gold_sql.empty()) {
      pred_sql.push_back(it->second->sql);
      gold_sql.push_back(inst.gold_sql);
      exec_instances.push_back(&inst);
    }
  }
  if (pred_sets.empty()) {
    throw ValidationError("no instances with gold schema to evaluate");
  }
  inputs.instances = pred_sets.size();
  inputs.table_link = linking_metrics(pred_sets, gold_sets, LinkLevel::table);
  inputs.column_link = linking_metrics(pred_sets, gold_sets, LinkLevel::column);
  if (!pred_sql.empty()) {
    inputs.em = exact_match_report(pred_sql, gold_sql);
  }

  if (!opts.db_dir.empty()) {
    ExecLimits limits;
    limits.timeout_seconds = opts.timeout_seconds;
    limits.runs = opts.runs;
    std::vector<ExecOutcome> outcomes;
    for (std::size_t i = 0; i < exec_instances.size(); ++i) {
      fs::path db = locate_db_file(opts.db_dir, exec_instances[i]->db_id);
      outcomes.push_back(
          execution_accuracy(db.string(), pred_sql[i], gold_sql[i], limits));
    }
    inputs.exec = aggregate_execution(std::move(outcomes));
  }

  if (!opts.traces_path.empty()) {
    require_file(opts.traces_path, "--traces");
    std::map<std::string, const SchemaSet*> gold_by_id;
    for (const auto& inst : instances) {
      if (inst.gold_schema) gold_by_id[inst.id] = &*inst.gold_schema;
    }
    // (cycle, scorer) -> aligned pred/gold sets
    std::map<std::pair<int, std::string>, std::pair<std::vector<SchemaSet>,
                                                    std::vector<SchemaSet>>>
        cells;
    for (const auto& trace : load_traces_jsonl(opts.traces_path)) {
      auto gold_it = gold_by_id.find(trace.at("id").get<std::string>());
      if (gold_it == gold_by_id.end()) continue;
      for (const auto& cycle : trace.at("cycles")) {
        int k = cycle.at("cycle").get<int>();
        auto add = [&](const std::string& scorer, const json& ids) {
          auto& cell = cells[{k, scorer}];
          cell.first.push_back(
              SchemaSet::from_strings(ids.get<std::vector<std::string>>()));
          cell.second.push_back(*gold_it->second);
        };
        for (const auto& [scorer, ids] : cycle.at("scorers").items()) {
          add(scorer, ids);
        }
        add("union", cycle.at("union"));
      }
    }
    for (const auto& [key, cell] : cells) {
      AblationRow row;
      row.cycle = key.first;
      row.scorer = key.second;
      row.table = linking_metrics(cell.first, cell.second, LinkLevel::table);
      row.column = linking_metrics(cell.first, cell.second, LinkLevel::column);
      inputs.ablation.push_back(std::move(row));
    }
    std::sort(inputs.ablation.begin(), inputs.ablation.end(),
              [](const AblationRow& a, const AblationRow& b) {
                auto rank = [](const AblationRow& r) {
                  return std::make_tuple(r.cycle, r.scorer == "union" ? 1 : 0,
                                         r.scorer);
                };
                return rank(a) < rank(b);
              });
  }

  json report = build_report_json(inputs);
  {
    std::ofstream out(fs::path(common.out_dir) / "report.json",
                      std::ios::binary | std::ios::trunc);
    out << report.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(common.out_dir) / "report.txt",
                      std::ios::binary | std::ios::trunc);
    out << render_report_text(report);
  }
  if (inputs.exec) {
    std::ofstream out(fs::path(common.out_dir) / "report_timing.json",
                      std::ios::binary | std::ios::trunc);
    out << build_timing_json(inputs).dump(2) << "\n";
  }
  std::cout << render_report_text(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"progressive schema linking and Text-to-SQL evaluation"};
  app.require_subcommand(1);

  json config;
  try {
    config = load_config(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CommonOpts common;
  common.seed = cfg_value(config, "seed", std::uint64_t(7));
  common.jobs = cfg_value(config, "jobs", 1);
  common.out_dir = cfg_value(config, "out", std::string("out"));
  common.tables_path = cfg_value(config, "tables", std::string());
  common.instances_path = cfg_value(config, "instances", std::string());

  app.add_option("--config", common.config_path, "JSON config file with defaults");

  auto add_common = [&](CLI::App* cmd, bool with_instances = true) {
    cmd->add_option("--tables", common.tables_path, "schema collection file");
    if (with_instances) {
      cmd->add_option("--instances", common.instances_path, "instances.jsonl");
    }
    cmd->add_option("--out", common.out_dir, "output directory");
    cmd->add_option("--seed", common.seed, "root random seed");
    cmd->add_option("--jobs", common.jobs, "instance-level parallelism");
    cmd->add_option("--config", common.config_path, "JSON config file");
  };

  // ingest
  std::string data_path = cfg_value(config, "data", std::string());
  auto* ingest = app.add_subcommand("ingest", "normalize a raw dataset");
  add_common(ingest, false);
  ingest->add_option("--data", data_path, "raw samples file (JSON array)");

  // mine-triplets
  auto* mine = app.add_subcommand("mine-triplets", "mine training triplets");
  add_common(mine);

  // train-embedder
  TripletTrainConfig embed_cfg = embedder_config_from(config, common.seed);
  std::string triplets_path, embedder_out = "embedder.ckpt";
  auto* train_embed = app.add_subcommand("train-embedder",
                                         "train the column-level embedder");
  add_common(train_embed);
  train_embed->add_option("--triplets", triplets_path, "fixed triplets.jsonl");
  train_embed->add_option("--model-out", embedder_out, "checkpoint path");
  train_embed->add_option("--epochs", embed_cfg.epochs);
  train_embed->add_option("--lr", embed_cfg.learning_rate);
  train_embed->add_option("--margin", embed_cfg.margin);
  train_embed->add_option("--embed-dim", embed_cfg.embed_dim);
  train_embed->add_option("--hash-dim", embed_cfg.features.hash_dim);
  train_embed->add_option("--batch", embed_cfg.batch_size);

  // train-crossenc
  CrossTrainConfig cross_cfg;
  cross_cfg.model.model_dim = cfg_value(config, "crossenc/model_dim", std::size_t(64));
  cross_cfg.model.heads = cfg_value(config, "crossenc/heads", 4);
  cross_cfg.model.dropout = cfg_value(config, "crossenc/dropout", 0.1);
  cross_cfg.model.token_budget = cfg_value(config, "crossenc/token_budget", 512);
  cross_cfg.learning_rate = cfg_value(config, "crossenc/learning_rate", 0.05);
  cross_cfg.epochs = cfg_value(config, "crossenc/epochs", 20);
  std::string fusion = cfg_value(config, "crossenc/fusion", std::string("recurrent"));
  std::string crossenc_out = "crossenc.ckpt";
  auto* train_cross = app.add_subcommand("train-crossenc",
                                         "train the table-level cross encoder");
  add_common(train_cross);
  train_cross->add_option("--model-out", crossenc_out, "checkpoint path");
  train_cross->add_option("--model-dim", cross_cfg.model.model_dim);
  train_cross->add_option("--heads", cross_cfg.model.heads);
  train_cross->add_option("--epochs", cross_cfg.epochs);
  train_cross->add_option("--lr", cross_cfg.learning_rate);
  train_cross->add_option("--dropout", cross_cfg.model.dropout);
  train_cross->add_option("--budget", cross_cfg.model.token_budget);
  train_cross->add_option("--fusion", fusion, "recurrent | mean_pool");

  // link
  LinkOpts link_opts;
  link_opts.cycles = cfg_value(config, "cycles", 2);
  link_opts.threshold = cfg_value(config, "threshold", 0.5);
  link_opts.retries = cfg_value(config, "retries", 2);
  link_opts.rule.table_threshold = cfg_value(config, "rule/table_threshold", 0.5);
  link_opts.rule.top_tables = cfg_value(config, "rule/top_tables", 2);
  link_opts.rule.cols_top = cfg_value(config, "rule/cols_top", 8);
  link_opts.rule.cols_rest = cfg_value(config, "rule/cols_rest", 4);
  link_opts.llm_url = cfg_value(config, "llm/url", std::string());
  link_opts.llm_model = cfg_value(config, "llm/model", std::string("default"));
  auto* link = app.add_subcommand("link", "run the chain-loop schema linking");
  add_common(link);
  link->add_option("--embedder", link_opts.embedder_path, "embedder checkpoint");
  link->add_option("--crossenc", link_opts.crossenc_path, "cross-encoder checkpoint");
  link->add_option("--mock-llm", link_opts.mock_script, "scripted mock responses");
  link->add_option("--llm-url", link_opts.llm_url, "chat-completions endpoint");
  link->add_option("--llm-model", link_opts.llm_model);
  link->add_option("--cycles", link_opts.cycles, "number of chain cycles");
  link->add_option("--scorers", link_opts.scorers_csv,
                   "comma-separated scorers for every cycle");
  link->add_option("--threshold", link_opts.threshold, "column score threshold");
  link->add_option("--retries", link_opts.retries, "unparseable-response retries");

  // generate
  std::string predictions_path = cfg_value(config, "predictions", std::string());
  std::string gen_mock, gen_url = link_opts.llm_url, gen_model = link_opts.llm_model;
  auto* generate = app.add_subcommand("generate", "generate SQL from linked schemas");
  add_common(generate);
  generate->add_option("--predictions", predictions_path, "predictions.jsonl");
  generate->add_option("--mock-llm", gen_mock, "scripted mock responses");
  generate->add_option("--llm-url", gen_url);
  generate->add_option("--llm-model", gen_model);

  // evaluate
  EvalOpts eval_opts;
  eval_opts.db_dir = cfg_value(config, "db_dir", std::string());
  eval_opts.timeout_seconds = cfg_value(config, "exec/timeout_seconds", 30.0);
  eval_opts.runs = cfg_value(config, "exec/runs", 5);
  auto* evaluate = app.add_subcommand("evaluate", "score predictions and report");
  add_common(evaluate);
  evaluate->add_option("--predictions", eval_opts.predictions_path,
                       "predictions.jsonl");
  evaluate->add_option("--db-dir", eval_opts.db_dir,
                       "database directory (enables EX/VES)");
  evaluate->add_option("--traces", eval_opts.traces_path,
                       "traces.jsonl (enables the per-cycle ablation report)");
  evaluate->add_option("--timeout", eval_opts.timeout_seconds);
  evaluate->add_option("--runs", eval_opts.runs, "timing repetitions for VES");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(common, data_path);
    if (*mine) return cmd_mine_triplets(common);
    if (*train_embed) {
      embed_cfg.seed = common.seed;
      return cmd_train_embedder(common, triplets_path, embedder_out, embed_cfg);
    }
    if (*train_cross) {
      cross_cfg.model.fusion =
          fusion == "mean_pool" ? FusionKind::mean_pool : FusionKind::recurrent;
      cross_cfg.model.seed = common.seed;
      cross_cfg.seed = common.seed;
      return cmd_train_crossenc(common, crossenc_out, cross_cfg);
    }
    if (*link) return cmd_link(common, link_opts, config);
    if (*generate) {
      return cmd_generate(common, predictions_path, gen_mock, gen_url, gen_model,
                          config);
    }
    if (*evaluate) {
      eval_opts.predictions_path = eval_opts.predictions_path.empty()
                                       ? predictions_path
                                       : eval_opts.predictions_path;
      return cmd_evaluate(common, eval_opts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
