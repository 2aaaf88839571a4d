#pragma once

#include <optional>
#include <string>

#include "sqlink/schema_set.hpp"

namespace sqlink {

// One Text-to-SQL sample.
struct Instance {
  std::string id;
  std::string db_id;
  std::string question;
  std::string evidence;  // empty when the dataset carries none
  std::string gold_sql;  // empty for inference-only runs
  std::optional<SchemaSet> gold_schema;
};

// The anchor text: evidence and question concatenated with a space.
inline std::string anchor_text(const Instance& inst) {
  if (inst.evidence.empty()) return inst.question;
  return inst.evidence + " " + inst.question;
}

// A schema element with a score in a named score space.
struct ScoredElement {
  SchemaElementId element;
  double score = 0.0;
  std::string scorer;
};

}  // namespace sqlink
