#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "sqlink/embedder.hpp"
#include "sqlink/error.hpp"
#include "support/fixtures.hpp"

using namespace sqlink;
namespace ts = sqlink::testsupport;

namespace {

// Reference mirror of the featurizer's bucket function, kept independent of
// the implementation under test.
std::uint32_t reference_bucket(const std::string& gram, std::uint64_t seed,
                               std::uint32_t dim) {
  std::uint64_t h = 1469598103934665603ull ^ (seed * 1099511628211ull);
  for (unsigned char c : gram) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<std::uint32_t>(h % dim);
}

std::string random_word(std::mt19937_64& rng, int min_len = 4, int max_len = 10) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::string out;
  int n = len(rng);
  for (int i = 0; i < n; ++i) out.push_back(static_cast<char>(ch(rng)));
  return out;
}

double gradcheck_rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

Instance make_instance(const std::string& question, const std::string& evidence = "") {
  Instance inst;
  inst.id = "i0";
  inst.db_id = "tiny";
  inst.question = question;
  inst.evidence = evidence;
  return inst;
}

}  // namespace

TEST_SUITE("embedder") {

TEST_CASE("featurize basics") {
  FeatureConfig cfg;
  cfg.hash_dim = 64;

  CHECK(featurize("", cfg).empty());
  CHECK(featurize("a", cfg).empty());  // shorter than every n-gram

  SUBCASE("deterministic") {
    auto a = featurize("find the name", cfg);
    auto b = featurize("find the name", cfg);
    CHECK(a.entries == b.entries);
  }

  SUBCASE("abc hits exactly the buckets of its n-grams") {
    auto f = featurize("abc", cfg);
    std::set<std::uint32_t> expected = {reference_bucket("ab", cfg.seed, cfg.hash_dim),
                                        reference_bucket("bc", cfg.seed, cfg.hash_dim),
                                        reference_bucket("abc", cfg.seed, cfg.hash_dim)};
    std::set<std::uint32_t> got;
    double mass = 0;
    for (const auto& [idx, val] : f.entries) {
      got.insert(idx);
      mass += val;
    }
    CHECK(got == expected);
    CHECK(mass == doctest::Approx(3.0));  // one count per n-gram
  }

  SUBCASE("case-insensitive") {
    CHECK(featurize("ABC", cfg).entries == featurize("abc", cfg).entries);
  }
}

TEST_CASE("embed is unit-norm and deterministic") {
  FeatureConfig cfg;
  cfg.hash_dim = 128;
  auto params = EmbedderParams::init(cfg, 16, 42);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    auto v = embed(params, random_word(rng, 5, 20));
    double norm = 0;
    for (double x : v) norm += x * x;
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
  }
  CHECK(embed(params, "hello world") == embed(params, "hello world"));
  CHECK_THROWS_AS(embed(params, ""), DegenerateInputError);
}

TEST_CASE("cosine_distance hand values") {
  std::vector<double> e1 = {1, 0};
  std::vector<double> e2 = {0, 1};
  std::vector<double> neg = {-1, 0};
  CHECK(cosine_distance(e1, e1) == doctest::Approx(0.0));
  CHECK(cosine_distance(e1, e2) == doctest::Approx(1.0));
  CHECK(cosine_distance(e1, neg) == doctest::Approx(2.0));
}

TEST_CASE("triplet_loss hand values") {
  std::vector<double> a = {1, 0};
  std::vector<double> p = {0, 1};
  std::vector<double> n = {-1, 0};

  // a == p, phi(a,n) = 0.8, beta = 0.3 -> 0
  std::vector<double> n08 = {0.2, std::sqrt(1.0 - 0.04)};
  CHECK(triplet_loss(a, a, n08, 0.3) == doctest::Approx(0.0));

  // phi(a,p) == phi(a,n) -> beta
  CHECK(triplet_loss(a, p, p, 0.3) == doctest::Approx(0.3));

  // phi(a,p)=1, phi(a,n)=2, beta=0.2 -> 0; swapped -> 1.2
  CHECK(triplet_loss(a, p, n, 0.2) == doctest::Approx(0.0));
  CHECK(triplet_loss(a, n, p, 0.2) == doctest::Approx(1.2));

  // non-negativity, zero iff margin satisfied
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  for (int i = 0; i < 50; ++i) {
    auto unit = [&rng, &dist]() {
      std::vector<double> v = {dist(rng), dist(rng), dist(rng)};
      double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      for (auto& x : v) x /= norm;
      return v;
    };
    auto ua = unit(), up = unit(), un = unit();
    double loss = triplet_loss(ua, up, un, 0.3);
    CHECK(loss >= 0.0);
    double gap = cosine_distance(ua, up) - cosine_distance(ua, un) + 0.3;
    CHECK((loss == 0.0) == (gap <= 0.0));
  }
}

TEST_CASE("triplet_gradient matches central finite differences") {
  FeatureConfig cfg;
  cfg.hash_dim = 8;  // F = 8
  const std::size_t kDim = 4;  // D = 4
  const double kBeta = 0.3;
  const double kStep = 1e-5;

  std::mt19937_64 rng(2024);
  int active_checked = 0;
  for (int trial = 0; trial < 40 && active_checked < 10; ++trial) {
    auto params = EmbedderParams::init(cfg, kDim, rng());
    TripletExample t{random_word(rng) + " " + random_word(rng), random_word(rng),
                     random_word(rng)};
    double loss = triplet_loss_value(params, t, kBeta);
    if (loss < 1e-3) continue;  // hinge inactive or too close to the kink
    ++active_checked;

    auto grad = triplet_gradient(params, t, kBeta);
    double max_err = 0;
    for (std::size_t i = 0; i < params.projection.size(); ++i) {
      double saved = params.projection[i];
      params.projection[i] = saved + kStep;
      double up = triplet_loss_value(params, t, kBeta);
      params.projection[i] = saved - kStep;
      double down = triplet_loss_value(params, t, kBeta);
      params.projection[i] = saved;
      double fd = (up - down) / (2 * kStep);
      max_err = std::max(max_err, gradcheck_rel_err(fd, grad[i]));
    }
    CHECK(max_err < 1e-6);
  }
  CHECK(active_checked >= 10);
}

TEST_CASE("triplet_gradient is zero when the hinge is inactive") {
  FeatureConfig cfg;
  cfg.hash_dim = 8;
  auto params = EmbedderParams::init(cfg, 4, 9);
  // identical anchor/positive, far negative, small margin: loss = 0
  TripletExample t{"alpha beta", "alpha beta", "zzz qqq"};
  double loss = triplet_loss_value(params, t, 1e-6);
  if (loss == 0.0) {
    auto grad = triplet_gradient(params, t, 1e-6);
    for (double g : grad) CHECK(g == 0.0);
  }
}

TEST_CASE("one gradient step decreases the loss of an active triplet") {
  FeatureConfig cfg;
  cfg.hash_dim = 32;
  std::mt19937_64 rng(77);
  auto params = EmbedderParams::init(cfg, 8, 5);
  TripletExample t{"find the name", "name of singer", "capacity of stadium"};
  double before = triplet_loss_value(params, t, 0.5);
  REQUIRE(before > 0.0);
  auto grad = triplet_gradient(params, t, 0.5);
  for (std::size_t i = 0; i < grad.size(); ++i) params.projection[i] -= 0.01 * grad[i];
  double after = triplet_loss_value(params, t, 0.5);
  CHECK(after < before);
}

TEST_CASE("train_embedder contract") {
  FeatureConfig cfg;
  cfg.hash_dim = 256;
  TripletTrainConfig train;
  train.features = cfg;
  train.embed_dim = 16;
  train.seed = 11;
  train.learning_rate = 0.1;

  std::vector<TripletExample> triplets = {
      {"find singer name", "singer.name (text)", "stadium.capacity (number)"},
      {"how many concerts", "concert.concert_id (number)", "singer.age (number)"},
  };

  SUBCASE("0 epochs returns the initialization") {
    train.epochs = 0;
    auto params = train_embedder(triplets, train);
    auto init = EmbedderParams::init(cfg, train.embed_dim, train.seed);
    CHECK(params.projection == init.projection);
  }

  SUBCASE("same seed is bit-identical") {
    train.epochs = 5;
    auto a = train_embedder(triplets, train);
    auto b = train_embedder(triplets, train);
    CHECK(a.projection == b.projection);
  }

  SUBCASE("loss decreases on a separable toy corpus") {
    train.epochs = 30;
    EmbedderTrainReport report;
    train_embedder(triplets, train, &report);
    REQUIRE(report.epoch_mean_loss.size() == 30);
    CHECK(report.epoch_mean_loss.back() < report.epoch_mean_loss.front());
  }

  SUBCASE("empty triplet list rejected") {
    CHECK_THROWS_AS(train_embedder({}, train), PreconditionError);
  }
}

TEST_CASE("mine_triplets sampling rules") {
  SchemaCatalog cat = ts::tiny_catalog();  // t1(a, b), t2(c)
  Instance inst = make_instance("what is a", "");

  SUBCASE("one positive, same-table negative") {
    SchemaSet gold = SchemaSet::from_strings({"t1.a"});
    std::mt19937_64 rng(1);
    auto triplets = mine_triplets(inst, gold, cat, rng);
    REQUIRE(triplets.size() == 1);
    CHECK(triplets[0].anchor_text == "what is a");
    CHECK(triplets[0].positive_text.find("t1.a") == 0);
    CHECK(triplets[0].negative_text.find("t1.b") == 0);
  }

  SUBCASE("gold covering everything yields no triplets") {
    SchemaSet gold = SchemaSet::from_strings({"t1.a", "t1.b", "t2.c"});
    std::mt19937_64 rng(1);
    CHECK(mine_triplets(inst, gold, cat, rng).empty());
  }

  SUBCASE("falls back to other tables when the own table has no negative") {
    // gold covers all of t1; negative for t1.a must come from t2
    SchemaSet gold = SchemaSet::from_strings({"t1.a", "t1.b"});
    std::mt19937_64 rng(1);
    auto triplets = mine_triplets(inst, gold, cat, rng);
    REQUIRE(triplets.size() == 2);
    for (const auto& t : triplets) {
      CHECK(t.negative_text.find("t2.c") == 0);
    }
  }

  SUBCASE("evidence is concatenated into the anchor") {
    Instance with_k = make_instance("question", "evidence");
    SchemaSet gold = SchemaSet::from_strings({"t1.a"});
    std::mt19937_64 rng(1);
    auto triplets = mine_triplets(with_k, gold, cat, rng);
    REQUIRE(triplets.size() == 1);
    CHECK(triplets[0].anchor_text == "evidence question");
  }
}

TEST_CASE("score_and_filter_columns") {
  SchemaCatalog cat = ts::tiny_catalog();
  FeatureConfig cfg;
  cfg.hash_dim = 512;
  auto params = EmbedderParams::init(cfg, 32, 17);

  SUBCASE("column text identical to anchor scores 1.0 and is retained") {
    Instance inst = make_instance("t1.a (number)");
    auto result = score_and_filter_columns(params, inst, cat, 0.5);
    REQUIRE(result.scores.size() == 3);
    CHECK(result.scores[0].element.to_string() == "t1.a");
    CHECK(result.scores[0].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.filtered.contains(SchemaElementId::column_id("t1", "a")));
    CHECK(result.filtered.contains(SchemaElementId::table_id("t1")));  // closure
  }

  SUBCASE("threshold 1.0 filters everything") {
    Instance inst = make_instance("t1.a (number)");
    auto result = score_and_filter_columns(params, inst, cat, 1.0);
    CHECK(result.filtered.empty());
  }

  SUBCASE("monotone in threshold") {
    Instance inst = make_instance("what is the a of t1");
    auto lo = score_and_filter_columns(params, inst, cat, -0.9);
    auto mid = score_and_filter_columns(params, inst, cat, 0.1);
    auto hi = score_and_filter_columns(params, inst, cat, 0.9);
    CHECK(lo.filtered.includes(mid.filtered));
    CHECK(mid.filtered.includes(hi.filtered));
  }

  SUBCASE("scores agree with reference dot products") {
    Instance inst = make_instance("which a and b");
    auto result = score_and_filter_columns(params, inst, cat, 0.0);
    auto anchor = embed(params, "which a and b");
    std::vector<std::string> texts = {"t1.a (number)", "t1.b (text)", "t2.c (number)"};
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto col = embed(params, texts[i]);
      double want = 0;
      for (std::size_t k = 0; k < col.size(); ++k) want += anchor[k] * col[k];
      CHECK(result.scores[i].score == doctest::Approx(want).epsilon(1e-12));
    }
  }

  SUBCASE("d_f^c stays within the catalog") {
    Instance inst = make_instance("anything at all");
    auto result = score_and_filter_columns(params, inst, cat, -1.0);
    for (const auto& e : result.filtered.elements()) CHECK(cat.contains(e));
  }

  SUBCASE("threshold precondition") {
    Instance inst = make_instance("q");
    CHECK_THROWS_AS(score_and_filter_columns(params, inst, cat, 1.5),
                    PreconditionError);
  }
}

}  // TEST_SUITE
