#include "doctest.h"
#include "sqlink/error.hpp"
#include "sqlink/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace sqlink;
namespace ts = sqlink::testsupport;

namespace {

Instance make_instance() {
  Instance inst;
  inst.id = "i0";
  inst.db_id = "tiny";
  inst.question = "q";
  return inst;
}

ScriptedScorer returning(const std::string& name, std::vector<std::string> ids) {
  return ScriptedScorer(name, [ids](const Instance&, const SchemaCatalog&) {
    return SchemaSet::from_strings(ids);
  });
}

ScriptedScorer identity(const std::string& name) {
  return ScriptedScorer(name, [](const Instance&, const SchemaCatalog& cat) {
    return cat.full_set();
  });
}

ScriptedScorer failing(const std::string& name) {
  return ScriptedScorer(name, [](const Instance&, const SchemaCatalog&) -> SchemaSet {
    throw Error("scripted failure");
  });
}

SchemaSet recompute_union(const CycleTraceRow& row) {
  SchemaSet out;
  for (const auto& [name, ids] : row.scorer_outputs) {
    out = SchemaSet::set_union(out, SchemaSet::from_strings(ids));
  }
  if (row.fallback) {
    out = SchemaSet::set_union(out, SchemaSet::from_strings(*row.fallback));
  }
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("run_cycle") {
  SchemaCatalog cat = ts::tiny_catalog();
  Instance inst = make_instance();
  SchemaSet full = cat.full_set();

  SUBCASE("identity scorers reproduce the input") {
    auto a = identity("column");
    auto b = identity("table");
    auto outcome = run_cycle(inst, full, cat, {&a, &b});
    CHECK(outcome.set == full);
    CHECK_FALSE(outcome.row.fallback.has_value());
  }

  SUBCASE("union of scripted outputs") {
    auto a = returning("column", {"t1", "t1.a"});
    auto b = returning("table", {"t2", "t2.c"});
    auto c = returning("database", {});
    auto outcome = run_cycle(inst, full, cat, {&a, &b, &c});
    CHECK(outcome.set == SchemaSet::from_strings({"t1", "t1.a", "t2", "t2.c"}));
    CHECK(outcome.row.scorer_outputs.size() == 3);
    CHECK(recompute_union(outcome.row) == outcome.set);
  }

  SUBCASE("empty union triggers the keep-top-1-table fallback") {
    auto a = returning("column", {});
    auto b = returning("table", {});
    auto outcome = run_cycle(inst, full, cat, {&a, &b});
    REQUIRE(outcome.row.fallback.has_value());
    CHECK_FALSE(outcome.set.empty());
    // first table of the catalog plus its columns in the input
    CHECK(outcome.set == SchemaSet::from_strings({"t1", "t1.a", "t1.b"}));
    CHECK(recompute_union(outcome.row) == outcome.set);
  }

  SUBCASE("scorer outputs are clipped to the cycle input") {
    SchemaSet current = SchemaSet::from_strings({"t1", "t1.a"});
    auto a = returning("column", {"t1", "t1.a", "t1.b"});  // t1.b is stale
    auto outcome = run_cycle(inst, current, cat, {&a});
    CHECK(outcome.set == SchemaSet::from_strings({"t1", "t1.a"}));
  }

  SUBCASE("one failing scorer is recorded, the cycle proceeds") {
    auto bad = failing("column");
    auto good = returning("table", {"t2", "t2.c"});
    auto outcome = run_cycle(inst, full, cat, {&bad, &good});
    CHECK(outcome.set == SchemaSet::from_strings({"t2", "t2.c"}));
    REQUIRE(outcome.row.failures.size() == 1);
    CHECK(outcome.row.failures[0].find("column") == 0);
  }

  SUBCASE("all scorers failing aborts the cycle") {
    auto bad1 = failing("column");
    auto bad2 = failing("table");
    CHECK_THROWS_AS(run_cycle(inst, full, cat, {&bad1, &bad2}), Error);
  }

  SUBCASE("empty candidate set is a precondition error") {
    auto a = identity("column");
    CHECK_THROWS_AS(run_cycle(inst, SchemaSet{}, cat, {&a}), PreconditionError);
  }
}

TEST_CASE("run_chain") {
  SchemaCatalog cat = ts::tiny_catalog();
  Instance inst = make_instance();

  SUBCASE("identity scorers are a fixed point at the full set") {
    auto a = identity("column");
    CycleConfig config;
    config.num_cycles = 1;
    config.plan = {{"column"}};
    auto result = run_chain(inst, cat, {{"column", &a}}, config);
    CHECK(result.final_set == cat.full_set());
    CHECK_FALSE(result.error.has_value());
    REQUIRE(result.trace.rows.size() == 1);
  }

  SUBCASE("scripted shrinking chain is monotone") {
    // cycle 1 keeps t1 whole, later cycles keep only t1.a
    int call = 0;
    ScriptedScorer shrink("column", [&call](const Instance&, const SchemaCatalog&) {
      ++call;
      if (call == 1) return SchemaSet::from_strings({"t1", "t1.a", "t1.b"});
      return SchemaSet::from_strings({"t1", "t1.a"});
    });
    CycleConfig config;
    config.num_cycles = 3;
    config.plan = {{"column"}};
    auto result = run_chain(inst, cat, {{"column", &shrink}}, config);
    REQUIRE(result.trace.rows.size() == 3);
    SchemaSet prev = cat.full_set();
    for (const auto& row : result.trace.rows) {
      SchemaSet input = SchemaSet::from_strings(row.input);
      SchemaSet output = SchemaSet::from_strings(row.union_result);
      CHECK(input.includes(output));
      CHECK(prev == input);
      CHECK(recompute_union(row) == output);
      prev = output;
    }
    CHECK(result.final_set == SchemaSet::from_strings({"t1", "t1.a"}));
  }

  SUBCASE("cycle-2 empty scorers fall back inside cycle 2") {
    int call = 0;
    ScriptedScorer fade("column", [&call](const Instance&, const SchemaCatalog&) {
      ++call;
      if (call == 1) return SchemaSet::from_strings({"t2", "t2.c"});
      return SchemaSet{};
    });
    CycleConfig config;
    config.num_cycles = 2;
    config.plan = {{"column"}};
    auto result = run_chain(inst, cat, {{"column", &fade}}, config);
    REQUIRE(result.trace.rows.size() == 2);
    CHECK(result.trace.rows[1].fallback.has_value());
    // fallback keeps the only table of cycle 2's input
    CHECK(result.final_set == SchemaSet::from_strings({"t2", "t2.c"}));
  }

  SUBCASE("hard failure aborts with a partial trace") {
    int call = 0;
    ScriptedScorer dying("column", [&call](const Instance&, const SchemaCatalog&) -> SchemaSet {
      if (++call >= 2) throw Error("boom");
      return SchemaSet::from_strings({"t1", "t1.a"});
    });
    CycleConfig config;
    config.num_cycles = 3;
    config.plan = {{"column"}};
    auto result = run_chain(inst, cat, {{"column", &dying}}, config);
    REQUIRE(result.error.has_value());
    CHECK(result.error->find("cycle 2") == 0);
    CHECK(result.trace.rows.size() == 1);  // completed cycles only
  }

  SUBCASE("plan shorter than num_cycles repeats its last entry") {
    auto a = identity("column");
    auto b = identity("table");
    CycleConfig config;
    config.num_cycles = 3;
    config.plan = {{"column"}, {"table"}};
    auto result =
        run_chain(inst, cat, {{"column", &a}, {"table", &b}}, config);
    REQUIRE(result.trace.rows.size() == 3);
    CHECK(result.trace.rows[2].scorer_outputs[0].first == "table");
  }

  SUBCASE("unknown scorer name is a config error") {
    auto a = identity("column");
    CycleConfig config;
    config.plan = {{"bogus"}};
    CHECK_THROWS_AS(run_chain(inst, cat, {{"column", &a}}, config), ConfigError);
  }

  SUBCASE("invalid cycle config rejected") {
    CycleConfig config;
    config.num_cycles = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.num_cycles = 1;
    config.plan = {{}};
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
}

}  // TEST_SUITE
