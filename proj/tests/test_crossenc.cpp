#include <cmath>
#include <random>

#include "doctest.h"
#include "sqlink/crossenc.hpp"
#include "sqlink/error.hpp"
#include "support/fixtures.hpp"

using namespace sqlink;
namespace ts = sqlink::testsupport;

namespace {

double gradcheck_rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

CrossEncoderConfig small_config(std::size_t dim = 4, int heads = 2) {
  CrossEncoderConfig cfg;
  cfg.model_dim = dim;
  cfg.heads = heads;
  cfg.dropout = 0.0;
  cfg.fusion = FusionKind::recurrent;
  cfg.seed = 99;
  return cfg;
}

void set_identity(Mat& m) {
  std::fill(m.a.begin(), m.a.end(), 0.0);
  for (std::size_t i = 0; i < m.rows && i < m.cols; ++i) m.a[i * m.cols + i] = 1.0;
}

void zero(Mat& m) { std::fill(m.a.begin(), m.a.end(), 0.0); }

Instance make_instance(const std::string& question, const std::string& evidence = "") {
  Instance inst;
  inst.id = "i0";
  inst.db_id = "tiny";
  inst.question = question;
  inst.evidence = evidence;
  return inst;
}

std::vector<double> rand_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_SUITE("crossenc") {

TEST_CASE("init validates the configuration") {
  CrossEncoderConfig cfg = small_config(5, 1);
  CHECK_THROWS_AS(CrossEncoderParams::init(cfg), ConfigError);  // odd dim
  cfg = small_config(8, 3);
  CHECK_THROWS_AS(CrossEncoderParams::init(cfg), ConfigError);  // 8 % 3 != 0
  cfg = small_config(8, 2);
  CHECK_NOTHROW(CrossEncoderParams::init(cfg));
}

TEST_CASE("disentangle") {
  auto params = CrossEncoderParams::init(small_config(4, 2));

  SUBCASE("zero weights give zero halves") {
    zero(params.dn_w);
    zero(params.dn_b);
    auto d = disentangle(params, std::vector<double>{1, 2, 3, 4});
    CHECK(d.unrelated == std::vector<double>{0, 0});
    CHECK(d.related == std::vector<double>{0, 0});
  }

  SUBCASE("identity weights clamp negatives") {
    set_identity(params.dn_w);
    zero(params.dn_b);
    auto d = disentangle(params, std::vector<double>{-1, -2, -3, -4});
    CHECK(d.unrelated == std::vector<double>{0, 0});
    CHECK(d.related == std::vector<double>{0, 0});
  }

  SUBCASE("random frozen weights match a hand matrix multiply") {
    std::mt19937_64 rng(4);
    for (auto& w : params.dn_w.a) w = std::normal_distribution<double>()(rng);
    for (auto& b : params.dn_b.a) b = std::normal_distribution<double>()(rng);
    std::vector<double> e_q = {0.5, -0.3, 1.1, 0.2};
    auto d = disentangle(params, e_q);
    for (std::size_t i = 0; i < 4; ++i) {
      double z = params.dn_b.a[i];
      for (std::size_t j = 0; j < 4; ++j) z += params.dn_w.a[i * 4 + j] * e_q[j];
      double want = std::max(z, 0.0);
      double got = i < 2 ? d.unrelated[i] : d.related[i - 2];
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("multi_head_attention") {
  SUBCASE("single key with identity projections returns the value") {
    auto params = CrossEncoderParams::init(small_config(4, 1));
    set_identity(params.att_wq);
    set_identity(params.att_wk);
    set_identity(params.att_wv);
    set_identity(params.att_wo);
    zero(params.att_bo);
    std::vector<double> q = {1, 0, 0, 0};
    std::vector<std::vector<double>> kv = {{0.3, -0.7, 0.2, 0.9}};
    auto out = multi_head_attention(params, q, kv, kv);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(out[i] == doctest::Approx(kv[0][i]).epsilon(1e-12));
    }
  }

  SUBCASE("two identical keys average the values") {
    auto params = CrossEncoderParams::init(small_config(4, 1));
    set_identity(params.att_wq);
    set_identity(params.att_wk);
    set_identity(params.att_wv);
    set_identity(params.att_wo);
    zero(params.att_bo);
    std::vector<double> q = {1, 1, 0, 0};
    std::vector<std::vector<double>> keys = {{1, 0, 0, 0}, {1, 0, 0, 0}};
    std::vector<std::vector<double>> values = {{2, 0, 0, 0}, {0, 4, 0, 0}};
    auto out = multi_head_attention(params, q, keys, values);
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[1] == doctest::Approx(2.0));
  }

  SUBCASE("per-head weights sum to 1") {
    auto params = CrossEncoderParams::init(small_config(8, 4));
    std::mt19937_64 rng(12);
    std::vector<double> q = rand_vec(rng, 8);
    std::vector<std::vector<double>> kv;
    for (int i = 0; i < 5; ++i) kv.push_back(rand_vec(rng, 8));
    std::vector<std::vector<double>> weights;
    multi_head_attention(params, q, kv, kv, &weights);
    REQUIRE(weights.size() == 4);
    for (const auto& head : weights) {
      double sum = 0;
      for (double w : head) sum += w;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }

  SUBCASE("reference implementation agreement, h=2 d_m=4") {
    auto params = CrossEncoderParams::init(small_config(4, 2));
    std::mt19937_64 rng(21);
    std::vector<double> query = rand_vec(rng, 4);
    std::vector<std::vector<double>> keys, values;
    for (int i = 0; i < 3; ++i) keys.push_back(rand_vec(rng, 4));
    for (int i = 0; i < 3; ++i) values.push_back(rand_vec(rng, 4));
    auto got = multi_head_attention(params, query, keys, values);

    // plain-loop reference
    auto matvec = [](const Mat& m, const std::vector<double>& x) {
      std::vector<double> y(m.rows, 0.0);
      for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) y[r] += m.a[r * m.cols + c] * x[c];
      }
      return y;
    };
    auto q = matvec(params.att_wq, query);
    std::vector<std::vector<double>> ks, vs;
    for (const auto& k : keys) ks.push_back(matvec(params.att_wk, k));
    for (const auto& v : values) vs.push_back(matvec(params.att_wv, v));
    std::vector<double> concat(4, 0.0);
    const std::size_t dh = 2;
    for (std::size_t head = 0; head < 2; ++head) {
      std::vector<double> logits(3, 0.0);
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < dh; ++i) {
          logits[c] += q[head * dh + i] * ks[c][head * dh + i];
        }
        logits[c] /= std::sqrt(double(dh));
      }
      double denom = 0;
      std::vector<double> alpha(3);
      for (std::size_t c = 0; c < 3; ++c) denom += std::exp(logits[c]);
      for (std::size_t c = 0; c < 3; ++c) alpha[c] = std::exp(logits[c]) / denom;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < dh; ++i) {
          concat[head * dh + i] += alpha[c] * vs[c][head * dh + i];
        }
      }
    }
    auto want = matvec(params.att_wo, concat);
    for (std::size_t i = 0; i < 4; ++i) want[i] += params.att_bo.a[i];
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }
  }

  SUBCASE("empty key list rejected") {
    auto params = CrossEncoderParams::init(small_config(4, 2));
    CHECK_THROWS_AS(
        multi_head_attention(params, std::vector<double>{1, 0, 0, 0}, {}, {}),
        PreconditionError);
  }
}

TEST_CASE("fuse_norm") {
  SUBCASE("zero attended vector normalizes e_t") {
    std::vector<double> e_t = {3, 4};
    std::vector<double> zero2 = {0, 0};
    auto out = fuse_norm(e_t, zero2);
    CHECK(out[0] == doctest::Approx(0.6));
    CHECK(out[1] == doctest::Approx(0.8));
  }
  SUBCASE("hand-computed fusion") {
    std::vector<double> e_t = {1, 0};
    std::vector<double> e_ta = {0, 1};
    auto out = fuse_norm(e_t, e_ta);
    CHECK(out[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(out[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  }
  SUBCASE("unit norm on random inputs") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 20; ++i) {
      auto a = rand_vec(rng, 6);
      auto b = rand_vec(rng, 6);
      auto out = fuse_norm(a, b);
      double norm = 0;
      for (double x : out) norm += x * x;
      CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
    }
  }
  SUBCASE("exact cancellation is degenerate") {
    std::vector<double> e_t = {1, -2};
    std::vector<double> e_ta = {-1, 2};
    CHECK_THROWS_AS(fuse_norm(e_t, e_ta), DegenerateInputError);
  }
}

TEST_CASE("pair_scores") {
  auto params = CrossEncoderParams::init(small_config(4, 2));

  SUBCASE("target equal to the padded related half scores cos 1") {
    std::vector<double> related = {0.6, 0.8};
    std::vector<std::vector<double>> targets = {{0.6, 0.8, 0, 0}};
    auto s = pair_scores(params, related, targets);
    CHECK(s.cos[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("orthogonal target scores cos 0") {
    std::vector<double> related = {1, 0};
    std::vector<std::vector<double>> targets = {{0, 0, 1, 0}};
    auto s = pair_scores(params, related, targets);
    CHECK(s.cos[0] == doctest::Approx(0.0));
  }

  SUBCASE("zero classifier weights give cl exactly 0.5") {
    zero(params.cl_w1);
    zero(params.cl_b1);
    zero(params.cl_w2);
    zero(params.cl_b2);
    std::vector<double> related = {1, 2};
    std::vector<std::vector<double>> targets = {{1, 0, 0, 0}, {0, 1, 0, 0}};
    auto s = pair_scores(params, related, targets);
    CHECK(s.cl[0] == 0.5);
    CHECK(s.cl[1] == 0.5);
  }

  SUBCASE("ranges") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 20; ++i) {
      std::vector<double> related = rand_vec(rng, 2);
      std::vector<std::vector<double>> targets = {rand_vec(rng, 4)};
      auto s = pair_scores(params, related, targets);
      CHECK(s.cos[0] >= -1.0 - 1e-12);
      CHECK(s.cos[0] <= 1.0 + 1e-12);
      CHECK(s.cl[0] > 0.0);
      CHECK(s.cl[0] < 1.0);
    }
  }
}

TEST_CASE("table_level_loss") {
  SUBCASE("perfect confident predictions approach zero") {
    std::vector<double> cos = {1.0 - 1e-12, -1.0 + 1e-12};
    std::vector<double> cl = {1.0 - 1e-12, 1e-12};
    std::vector<int> labels = {1, 0};
    auto loss = table_level_loss(cos, cl, labels);
    // bounded by the clamp epsilon
    CHECK(loss.l_t < 2.0 * -std::log(1.0 - 1e-7) + 1e-6);
  }

  SUBCASE("p = 0.5 gives ln 2 per branch") {
    std::vector<double> cos = {0.0};  // maps to probability 0.5
    std::vector<double> cl = {0.5};
    std::vector<int> one = {1};
    auto loss = table_level_loss(cos, cl, one);
    CHECK(loss.l_cos == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(loss.l_cl == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    std::vector<int> zero_label = {0};
    auto loss0 = table_level_loss(cos, cl, zero_label);
    CHECK(loss0.l_cl == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }

  SUBCASE("l_t = l_cos + l_cl exactly") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> cos_dist(-1, 1);
    std::uniform_real_distribution<double> p_dist(0.01, 0.99);
    for (int i = 0; i < 20; ++i) {
      std::vector<double> cos = {cos_dist(rng), cos_dist(rng), cos_dist(rng)};
      std::vector<double> cl = {p_dist(rng), p_dist(rng), p_dist(rng)};
      std::vector<int> labels = {1, 0, 1};
      auto loss = table_level_loss(cos, cl, labels);
      CHECK(loss.l_t == loss.l_cos + loss.l_cl);
    }
  }
}

TEST_CASE("encode_sequences") {
  SchemaCatalog cat = ts::tiny_catalog();

  SUBCASE("mean-pool of single-token spans is the token vector") {
    CrossEncoderConfig cfg = small_config(8, 2);
    cfg.fusion = FusionKind::mean_pool;
    auto params = CrossEncoderParams::init(cfg);
    HashTokenEncoder enc(FeatureConfig{}, 8, 3);
    auto embs = encode_sequences(enc, params, "question", cat.tables[0]);
    auto tokens = enc.encode_tokens("question");
    REQUIRE(tokens.size() == 1);
    CHECK(embs.question == tokens[0]);
  }

  SUBCASE("token budget truncates without error") {
    CrossEncoderConfig cfg = small_config(8, 2);
    auto params = CrossEncoderParams::init(cfg);
    HashTokenEncoder enc(FeatureConfig{}, 8, 3);
    std::string longq;
    for (int i = 0; i < 600; ++i) longq += "word" + std::to_string(i) + " ";
    auto embs = encode_sequences(enc, params, longq, cat.tables[0]);
    // everything after the 512-token question is truncated to zero spans
    CHECK(embs.table == std::vector<double>(8, 0.0));
    REQUIRE(embs.columns.size() == 2);
    CHECK(embs.columns[0] == std::vector<double>(8, 0.0));
  }

  SUBCASE("recurrent fusion matches a step-by-step reference") {
    CrossEncoderConfig cfg = small_config(4, 2);
    auto params = CrossEncoderParams::init(cfg);
    HashTokenEncoder enc(FeatureConfig{}, 4, 3);
    auto embs = encode_sequences(enc, params, "alpha beta gamma", cat.tables[1]);

    auto tokens = enc.encode_tokens("alpha beta gamma");
    REQUIRE(tokens.size() == 3);
    std::vector<double> state(4, 0.0);
    for (const auto& x : tokens) {
      std::vector<double> next(4);
      for (std::size_t i = 0; i < 4; ++i) {
        double z = params.fus_b.a[i];
        for (std::size_t j = 0; j < 4; ++j) {
          z += params.fus_wx.a[i * 4 + j] * x[j];
          z += params.fus_ws.a[i * 4 + j] * state[j];
        }
        next[i] = std::tanh(z);
      }
      state = next;
    }
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(embs.question[i] == doctest::Approx(state[i]).epsilon(1e-12));
    }
  }
}

namespace {

double crossenc_gradcheck(const CrossEncoderConfig& cfg, TokenEncoder& enc,
                          const Instance& inst, const SchemaCatalog& cat,
                          const SchemaSet& gold) {
  const double kStep = 1e-5;
  auto params = CrossEncoderParams::init(cfg);
  auto result = cross_encoder_gradient(params, enc, inst, cat, gold);
  REQUIRE(std::isfinite(result.loss.l_t));

  double max_err = 0;
  auto tensors = params.tensors();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Mat* mat = tensors[t].second;
    for (std::size_t i = 0; i < mat->a.size(); ++i) {
      double saved = mat->a[i];
      mat->a[i] = saved + kStep;
      double up = cross_encoder_loss(params, enc, inst, cat, gold).l_t;
      mat->a[i] = saved - kStep;
      double down = cross_encoder_loss(params, enc, inst, cat, gold).l_t;
      mat->a[i] = saved;
      double fd = (up - down) / (2 * kStep);
      max_err = std::max(max_err, gradcheck_rel_err(fd, result.grads[t].a[i]));
    }
  }
  return max_err;
}

}  // namespace

TEST_CASE("full-loss gradient matches central finite differences") {
  // d_m=8, h=2, one instance over the tiny catalog
  SchemaCatalog cat = ts::tiny_catalog();
  Instance inst = make_instance("what is the a of t1", "numbers are ids");
  SchemaSet gold = SchemaSet::from_strings({"t1.a"});
  HashTokenEncoder enc(FeatureConfig{}, 8, 5);

  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    CrossEncoderConfig cfg = small_config(8, 2);
    cfg.seed = seed;
    CAPTURE(seed);
    CHECK(crossenc_gradcheck(cfg, enc, inst, cat, gold) < 1e-4);
  }

  SUBCASE("mean-pool fusion variant") {
    CrossEncoderConfig cfg = small_config(8, 2);
    cfg.fusion = FusionKind::mean_pool;
    CHECK(crossenc_gradcheck(cfg, enc, inst, cat, gold) < 1e-4);
  }

  SUBCASE("zero-column table in the catalog") {
    SchemaSet keep = SchemaSet::from_strings({"t1", "t1.a", "t2"});
    SchemaCatalog sub = subset_catalog(cat, keep);
    REQUIRE(sub.tables[1].columns.empty());
    CrossEncoderConfig cfg = small_config(8, 2);
    CHECK(crossenc_gradcheck(cfg, enc, inst, sub, gold) < 1e-4);
  }
}

TEST_CASE("select_by_rule applies the threshold and top-k schedule") {
  SelectionRule rule;  // 0.5 / top-2 / 8 / 4
  auto col = [](const std::string& t, const std::string& c, double s) {
    return ScoredElement{SchemaElementId::column_id(t, c), s, "x"};
  };

  SUBCASE("no table above threshold gives the empty set") {
    std::vector<BranchTableScores> tables = {{"t1", 0.5, {col("t1", "a", 0.9)}},
                                             {"t2", 0.2, {col("t2", "b", 0.9)}}};
    CHECK(select_by_rule(tables, rule).empty());
  }

  SUBCASE("one table keeps its top-8 of 10 columns") {
    BranchTableScores t{"t1", 0.9, {}};
    for (int i = 0; i < 10; ++i) {
      t.columns.push_back(col("t1", "c" + std::to_string(i), i / 10.0));
    }
    auto set = select_by_rule({t}, rule);
    // 1 table + 8 columns; c0 and c1 (lowest scores) dropped
    CHECK(set.size() == 9);
    CHECK_FALSE(set.contains(SchemaElementId::column_id("t1", "c0")));
    CHECK_FALSE(set.contains(SchemaElementId::column_id("t1", "c1")));
    CHECK(set.contains(SchemaElementId::column_id("t1", "c9")));
  }

  SUBCASE("third-ranked table keeps at most 4 columns") {
    std::vector<BranchTableScores> tables;
    for (int t = 0; t < 3; ++t) {
      BranchTableScores entry{"t" + std::to_string(t), 0.9 - 0.1 * t, {}};
      for (int i = 0; i < 6; ++i) {
        entry.columns.push_back(
            col(entry.table_name, "c" + std::to_string(i), 0.5 + i / 100.0));
      }
      tables.push_back(std::move(entry));
    }
    auto set = select_by_rule(tables, rule);
    // t0, t1: all 6 columns (6 <= 8); t2: top 4 only
    CHECK(set.size() == 3 + 6 + 6 + 4);
    CHECK_FALSE(set.contains(SchemaElementId::column_id("t2", "c0")));
    CHECK(set.contains(SchemaElementId::column_id("t2", "c5")));
  }
}

TEST_CASE("predict_table_level") {
  SchemaCatalog cat = ts::tiny_catalog();
  Instance inst = make_instance("which a of t1");
  HashTokenEncoder enc(FeatureConfig{}, 8, 5);
  SelectionRule rule;

  SUBCASE("zeroed params select nothing") {
    auto params = CrossEncoderParams::init(small_config(8, 2));
    for (auto& [name, mat] : params.tensors()) zero(*mat);
    // dn output is zero -> cos scores 0; classifier outputs exactly 0.5
    // -> neither branch passes the strict 0.5 threshold
    CHECK_THROWS_AS(predict_table_level(params, enc, inst, cat, rule),
                    DegenerateInputError);
    // zero params make the fused table vector degenerate; give the
    // attention output a bias so fusion is well-defined
    params.att_bo.a[0] = 1.0;
    params.fus_b.a[0] = 0.5;  // non-zero table embedding
    auto pred = predict_table_level(params, enc, inst, cat, rule);
    CHECK(pred.fused.empty());
    CHECK(pred.pred_cos.empty());
    CHECK(pred.pred_cl.empty());
  }

  SUBCASE("fused is the union of the branches") {
    auto params = CrossEncoderParams::init(small_config(8, 2));
    auto pred = predict_table_level(params, enc, inst, cat, rule);
    CHECK(pred.fused == SchemaSet::set_union(pred.pred_cos, pred.pred_cl));
    for (const auto& e : pred.fused.elements()) CHECK(cat.contains(e));
  }

  SUBCASE("column permutation leaves the prediction unchanged") {
    auto params = CrossEncoderParams::init(small_config(8, 2));
    SchemaCatalog permuted = cat;
    std::swap(permuted.tables[0].columns[0], permuted.tables[0].columns[1]);
    auto a = predict_table_level(params, enc, inst, cat, rule);
    auto b = predict_table_level(params, enc, inst, permuted, rule);
    CHECK(a.fused == b.fused);
  }
}

TEST_CASE("train_cross_encoder contract") {
  SchemaCatalog cat = ts::tiny_catalog();
  Instance i1 = make_instance("what is the a of t1");
  Instance i2 = make_instance("show c from t2");
  SchemaSet g1 = SchemaSet::from_strings({"t1.a"});
  SchemaSet g2 = SchemaSet::from_strings({"t2.c"});
  std::vector<LabeledExample> examples = {{&i1, &cat, &g1}, {&i2, &cat, &g2}};
  HashTokenEncoder enc(FeatureConfig{}, 8, 5);

  CrossTrainConfig cfg;
  cfg.model = small_config(8, 2);
  cfg.model.dropout = 0.1;
  cfg.learning_rate = 0.1;
  cfg.seed = 17;

  SUBCASE("0 epochs returns the initialization") {
    cfg.epochs = 0;
    auto params = train_cross_encoder(examples, enc, cfg);
    auto init = CrossEncoderParams::init(cfg.model);
    for (std::size_t i = 0; i < params.tensors().size(); ++i) {
      CHECK(params.tensors()[i].second->a == init.tensors()[i].second->a);
    }
  }

  SUBCASE("deterministic under a fixed seed") {
    cfg.epochs = 3;
    auto a = train_cross_encoder(examples, enc, cfg);
    auto b = train_cross_encoder(examples, enc, cfg);
    for (std::size_t i = 0; i < a.tensors().size(); ++i) {
      CHECK(a.tensors()[i].second->a == b.tensors()[i].second->a);
    }
  }

  SUBCASE("loss decreases") {
    cfg.epochs = 25;
    CrossTrainReport report;
    train_cross_encoder(examples, enc, cfg, &report);
    REQUIRE(report.epoch_mean_loss.size() == 25);
    CHECK(report.epoch_mean_loss.back() < report.epoch_mean_loss.front());
  }
}

TEST_CASE("checkpoint round-trip") {
  auto dir = ts::temp_dir("crossenc_ckpt");
  auto params = CrossEncoderParams::init(small_config(8, 2));
  params.save((dir / "model.ckpt").string());
  auto loaded = CrossEncoderParams::load((dir / "model.ckpt").string());
  CHECK(loaded.config.model_dim == 8);
  CHECK(loaded.config.heads == 2);
  auto a = params.tensors();
  auto b = loaded.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].second->a == b[i].second->a);  // bit-identical doubles
  }
}

TEST_CASE("checkpoint rejects corrupt files") {
  auto dir = ts::temp_dir("crossenc_ckpt_bad");
  ts::write_file(dir / "junk.ckpt", "not a checkpoint at all");
  CHECK_THROWS_AS(CrossEncoderParams::load((dir / "junk.ckpt").string()),
                  IoError);

  // truncated payload
  auto params = CrossEncoderParams::init(small_config(8, 2));
  params.save((dir / "model.ckpt").string());
  std::string bytes = ts::slurp(dir / "model.ckpt");
  ts::write_file(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(CrossEncoderParams::load((dir / "short.ckpt").string()),
                  IoError);
}

}  // TEST_SUITE
