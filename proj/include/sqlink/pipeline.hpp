#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sqlink/catalog.hpp"
#include "sqlink/crossenc.hpp"
#include "sqlink/embedder.hpp"
#include "sqlink/llmlink.hpp"
#include "sqlink/types.hpp"

// The chain loop: run the enabled granularity scorers on the current
// candidate schema, union their outputs, shrink, repeat.
namespace sqlink {

struct ScorerResult {
  SchemaSet set;
  std::vector<ScoredElement> scores;
  std::vector<std::string> warnings;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  // cycle_catalog is the subset catalog of the cycle's candidate set.
  virtual ScorerResult score(const Instance& instance,
                             const SchemaCatalog& cycle_catalog) = 0;
};

// Column-level scorer backed by the trained embedder.
class ColumnScorer final : public Scorer {
 public:
  ColumnScorer(EmbedderParams params, double threshold)
      : params_(std::move(params)), threshold_(threshold) {}
  std::string name() const override { return "column"; }
  ScorerResult score(const Instance& instance,
                     const SchemaCatalog& cycle_catalog) override;

 private:
  EmbedderParams params_;
  double threshold_;
};

// Table-level scorer backed by the cross encoder.
class TableScorer final : public Scorer {
 public:
  TableScorer(CrossEncoderParams params, std::shared_ptr<TokenEncoder> encoder,
              SelectionRule rule)
      : params_(std::move(params)), encoder_(std::move(encoder)), rule_(rule) {}
  std::string name() const override { return "table"; }
  ScorerResult score(const Instance& instance,
                     const SchemaCatalog& cycle_catalog) override;

 private:
  CrossEncoderParams params_;
  std::shared_ptr<TokenEncoder> encoder_;
  SelectionRule rule_;
};

// Database-level scorer backed by the LLM endpoint (or mock).
class DatabaseScorer final : public Scorer {
 public:
  DatabaseScorer(std::shared_ptr<LlmClient> client, int retries)
      : client_(std::move(client)), retries_(retries) {}
  std::string name() const override { return "database"; }
  ScorerResult score(const Instance& instance,
                     const SchemaCatalog& cycle_catalog) override;

 private:
  std::shared_ptr<LlmClient> client_;
  int retries_;
};

// Test/ablation scorer driven by a function.
class ScriptedScorer final : public Scorer {
 public:
  using Fn = std::function<SchemaSet(const Instance&, const SchemaCatalog&)>;
  ScriptedScorer(std::string name, Fn fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  ScorerResult score(const Instance& instance,
                     const SchemaCatalog& cycle_catalog) override {
    return ScorerResult{fn_(instance, cycle_catalog), {}, {}};
  }

 private:
  std::string name_;
  Fn fn_;
};

struct CycleConfig {
  int num_cycles = 2;
  // Enabled scorer names per cycle; the last entry repeats when num_cycles
  // exceeds the plan length.
  std::vector<std::vector<std::string>> plan = {
      {"column", "table", "database"},
      {"table", "database"},
  };

  void validate() const;  // throws ConfigError
};

struct CycleTraceRow {
  int cycle = 0;  // 1-based
  std::vector<std::string> input;
  // (scorer name, output set) post-intersection with the cycle input --
  // exactly the parts whose union forms the cycle output.
  std::vector<std::pair<std::string, std::vector<std::string>>> scorer_outputs;
  std::vector<std::string> failures;  // "scorer: what"
  std::vector<std::string> warnings;
  std::vector<std::string> union_result;
  std::optional<std::vector<std::string>> fallback;  // set when union was empty
  double duration_ms = 0.0;
};

struct CycleTrace {
  std::vector<CycleTraceRow> rows;
};

struct CycleOutcome {
  SchemaSet set;
  CycleTraceRow row;
};

// One cycle: each scorer runs on subset_catalog(catalog, current); outputs
// are intersected with `current` and unioned. An empty union triggers the
// keep-top-1-table fallback (the best table by the column scorer's max
// column score, else the first table) together with its columns present in
// `current`. Throws when every enabled scorer hard-fails.
CycleOutcome run_cycle(const Instance& instance, const SchemaSet& current,
                       const SchemaCatalog& catalog,
                       const std::vector<Scorer*>& scorers);

struct ChainResult {
  SchemaSet final_set;
  CycleTrace trace;
  std::optional<std::string> error;  // set when a cycle aborted the instance
};

ChainResult run_chain(const Instance& instance, const SchemaCatalog& catalog,
                      const std::map<std::string, Scorer*>& scorers,
                      const CycleConfig& config);

}  // namespace sqlink
