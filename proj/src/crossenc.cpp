#include "sqlink/crossenc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sqlink/checkpoint.hpp"
#include "sqlink/error.hpp"
#include "sqlink/vecops.hpp"

namespace sqlink {

namespace {

constexpr double kProbEps = 1e-7;

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

// ---- provider -----------------------------------------------------------

HashTokenEncoder::HashTokenEncoder(const FeatureConfig& features, std::size_t dim,
                                   std::uint64_t seed)
    : params_(EmbedderParams::init(features, dim, seed)) {}

std::vector<std::vector<double>> HashTokenEncoder::encode_tokens(
    const std::string& span_text) {
  std::vector<std::vector<double>> out;
  for (const auto& tok : whitespace_tokens(span_text)) {
    SparseFeatures x = featurize(tok, params_.features);
    std::vector<double> h(params_.embed_dim, 0.0);
    for (const auto& [idx, val] : x.entries) {
      std::span<const double> row(
          params_.projection.data() + std::size_t(idx) * params_.embed_dim,
          params_.embed_dim);
      vecops::axpy(val, row, h);
    }
    double norm = vecops::l2_norm(h);
    if (norm > 0.0) vecops::scale(1.0 / norm, h);
    out.push_back(std::move(h));  // zero vector for featureless tokens
  }
  return out;
}

// ---- params -------------------------------------------------------------

CrossEncoderParams CrossEncoderParams::init(const CrossEncoderConfig& config) {
  const std::size_t d = config.model_dim;
  if (d == 0 || d % 2 != 0) {
    throw ConfigError("cross encoder: model_dim must be even and positive");
  }
  if (config.heads <= 0 || d % std::size_t(config.heads) != 0) {
    throw ConfigError("cross encoder: model_dim must be divisible by heads");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ConfigError("cross encoder: dropout must be in [0, 1)");
  }

  CrossEncoderParams p;
  p.config = config;
  p.dn_w = Mat(d, d);
  p.dn_b = Mat(1, d);
  p.att_wq = Mat(d, d);
  p.att_wk = Mat(d, d);
  p.att_wv = Mat(d, d);
  p.att_wo = Mat(d, d);
  p.att_bo = Mat(1, d);
  p.fus_wx = Mat(d, d);
  p.fus_ws = Mat(d, d);
  p.fus_b = Mat(1, d);
  p.cl_w1 = Mat(d, 2 * d);
  p.cl_b1 = Mat(1, d);
  p.cl_w2 = Mat(1, d);
  p.cl_b2 = Mat(1, 1);

  std::mt19937_64 rng(config.seed);
  auto fill = [&rng](Mat& m, double fan_in) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(fan_in));
    for (auto& w : m.a) w = dist(rng);
  };
  fill(p.dn_w, double(d));
  fill(p.att_wq, double(d));
  fill(p.att_wk, double(d));
  fill(p.att_wv, double(d));
  fill(p.att_wo, double(d));
  fill(p.fus_wx, double(d));
  fill(p.fus_ws, double(d));
  fill(p.cl_w1, double(2 * d));
  fill(p.cl_w2, double(d));
  // biases start at zero
  return p;
}

std::vector<std::pair<std::string, Mat*>> CrossEncoderParams::tensors() {
  return {{"dn_w", &dn_w},     {"dn_b", &dn_b},     {"att_wq", &att_wq},
          {"att_wk", &att_wk}, {"att_wv", &att_wv}, {"att_wo", &att_wo},
          {"att_bo", &att_bo}, {"fus_wx", &fus_wx}, {"fus_ws", &fus_ws},
          {"fus_b", &fus_b},   {"cl_w1", &cl_w1},   {"cl_b1", &cl_b1},
          {"cl_w2", &cl_w2},   {"cl_b2", &cl_b2}};
}

std::vector<std::pair<std::string, const Mat*>> CrossEncoderParams::tensors() const {
  auto* self = const_cast<CrossEncoderParams*>(this);
  std::vector<std::pair<std::string, const Mat*>> out;
  for (auto& [name, mat] : self->tensors()) out.emplace_back(name, mat);
  return out;
}

void CrossEncoderParams::save(const std::string& path) const {
  nlohmann::json meta;
  meta["model_dim"] = config.model_dim;
  meta["heads"] = config.heads;
  meta["dropout"] = config.dropout;
  meta["token_budget"] = config.token_budget;
  meta["fusion"] = config.fusion == FusionKind::recurrent ? "recurrent" : "mean_pool";
  meta["seed"] = config.seed;
  std::vector<NamedTensor> specs;
  for (const auto& [name, mat] : tensors()) {
    specs.push_back(NamedTensor{name, mat->rows, mat->cols, mat->a.data()});
  }
  save_checkpoint(path, "crossenc", meta, specs);
}

CrossEncoderParams CrossEncoderParams::load(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "crossenc") {
    throw IoError("checkpoint kind '" + ckpt.kind + "' is not a cross encoder");
  }
  CrossEncoderConfig config;
  config.model_dim = ckpt.meta.at("model_dim").get<std::size_t>();
  config.heads = ckpt.meta.at("heads").get<int>();
  config.dropout = ckpt.meta.at("dropout").get<double>();
  config.token_budget = ckpt.meta.at("token_budget").get<int>();
  config.fusion = ckpt.meta.at("fusion").get<std::string>() == "mean_pool"
                      ? FusionKind::mean_pool
                      : FusionKind::recurrent;
  config.seed = ckpt.meta.value("seed", std::uint64_t(0));
  CrossEncoderParams p = init(config);
  for (auto& [name, mat] : p.tensors()) {
    mat->a = ckpt.require(name, mat->rows, mat->cols).data;
  }
  return p;
}

// ---- span fusion ----------------------------------------------------------

namespace {

struct SpanFwd {
  std::vector<std::vector<double>> tokens;
  std::vector<std::vector<double>> states;  // recurrent states
  std::vector<double> out;
};

SpanFwd fuse_span(const CrossEncoderParams& p,
                  std::vector<std::vector<double>> tokens) {
  const std::size_t d = p.config.model_dim;
  SpanFwd f;
  f.tokens = std::move(tokens);
  f.out.assign(d, 0.0);
  if (f.tokens.empty()) return f;

  if (p.config.fusion == FusionKind::mean_pool) {
    for (const auto& t : f.tokens) vecops::axpy(1.0, t, f.out);
    vecops::scale(1.0 / double(f.tokens.size()), f.out);
    return f;
  }

  std::vector<double> state(d, 0.0);
  std::vector<double> z(d);
  for (const auto& x : f.tokens) {
    vecops::matvec(p.fus_wx.a, d, d, x, z);
    std::vector<double> ws(d);
    vecops::matvec(p.fus_ws.a, d, d, state, ws);
    for (std::size_t i = 0; i < d; ++i) {
      state[i] = std::tanh(z[i] + ws[i] + p.fus_b.a[i]);
    }
    f.states.push_back(state);
  }
  f.out = state;
  return f;
}

// Accumulates fusion-weight gradients for one span given d loss / d out.
void fuse_span_backward(const CrossEncoderParams& p, const SpanFwd& f,
                        std::vector<double> dout, Mat& g_wx, Mat& g_ws,
                        Mat& g_b) {
  const std::size_t d = p.config.model_dim;
  if (f.tokens.empty()) return;
  if (p.config.fusion == FusionKind::mean_pool) return;  // no parameters

  std::vector<double> ds = std::move(dout);
  for (std::size_t k = f.tokens.size(); k-- > 0;) {
    const auto& s = f.states[k];
    std::vector<double> dz(d);
    for (std::size_t i = 0; i < d; ++i) dz[i] = ds[i] * (1.0 - s[i] * s[i]);
    vecops::axpy(1.0, dz, g_b.a);
    vecops::ger(g_wx.a, d, d, 1.0, dz, f.tokens[k]);
    const std::vector<double> prev =
        k > 0 ? f.states[k - 1] : std::vector<double>(d, 0.0);
    vecops::ger(g_ws.a, d, d, 1.0, dz, prev);
    std::vector<double> dprev(d);
    vecops::matvec_t(p.fus_ws.a, d, d, dz, dprev);
    ds = std::move(dprev);
  }
}

// Truncating token fetch honoring the shared budget.
std::vector<std::vector<double>> take_tokens(TokenEncoder& provider,
                                             const std::string& text,
                                             int& budget) {
  if (budget <= 0) return {};
  auto toks = provider.encode_tokens(text);
  if (static_cast<int>(toks.size()) > budget) toks.resize(budget);
  budget -= static_cast<int>(toks.size());
  return toks;
}

std::string crossenc_column_text(const ColumnSchema& c) {
  std::string out = c.name + " (" + std::string(value_type_name(c.value_type)) + ")";
  if (!c.sample_values.empty()) {
    out += ":";
    for (std::size_t i = 0; i < c.sample_values.size(); ++i) {
      out += (i == 0 ? " " : ", ");
      out += c.sample_values[i];
    }
  }
  return out;
}

}  // namespace

SequenceEmbeddings encode_sequences(TokenEncoder& provider,
                                    const CrossEncoderParams& params,
                                    const std::string& anchor,
                                    const TableSchema& table) {
  if (provider.dim() != params.config.model_dim) {
    throw ConfigError("token encoder dimension does not match model_dim");
  }
  int budget = params.config.token_budget;
  SequenceEmbeddings out;
  out.question = fuse_span(params, take_tokens(provider, anchor, budget)).out;
  out.table = fuse_span(params, take_tokens(provider, table.name, budget)).out;
  for (const auto& c : table.columns) {
    out.columns.push_back(
        fuse_span(params, take_tokens(provider, crossenc_column_text(c), budget)).out);
  }
  return out;
}

// ---- public building blocks ----------------------------------------------

Disentangled disentangle(const CrossEncoderParams& params,
                         std::span<const double> e_q) {
  const std::size_t d = params.config.model_dim;
  if (e_q.size() != d) throw PreconditionError("disentangle: wrong input dim");
  std::vector<double> z(d);
  vecops::matvec(params.dn_w.a, d, d, e_q, z);
  vecops::axpy(1.0, params.dn_b.a, z);
  Disentangled out;
  out.unrelated.assign(z.begin(), z.begin() + d / 2);
  out.related.assign(z.begin() + d / 2, z.end());
  for (auto& v : out.unrelated) v = std::max(v, 0.0);
  for (auto& v : out.related) v = std::max(v, 0.0);
  return out;
}

std::vector<double> multi_head_attention(
    const CrossEncoderParams& params, std::span<const double> query,
    const std::vector<std::vector<double>>& keys,
    const std::vector<std::vector<double>>& values,
    std::vector<std::vector<double>>* head_weights) {
  const std::size_t d = params.config.model_dim;
  const std::size_t h = std::size_t(params.config.heads);
  const std::size_t dh = d / h;
  if (keys.empty() || keys.size() != values.size()) {
    throw PreconditionError("attention: empty or mismatched key/value lists");
  }

  std::vector<double> q(d);
  vecops::matvec(params.att_wq.a, d, d, query, q);
  std::vector<std::vector<double>> ks(keys.size(), std::vector<double>(d));
  std::vector<std::vector<double>> vs(keys.size(), std::vector<double>(d));
  for (std::size_t c = 0; c < keys.size(); ++c) {
    vecops::matvec(params.att_wk.a, d, d, keys[c], ks[c]);
    vecops::matvec(params.att_wv.a, d, d, values[c], vs[c]);
  }

  if (head_weights != nullptr) head_weights->clear();
  std::vector<double> concat(d, 0.0);
  const double scale = 1.0 / std::sqrt(double(dh));
  for (std::size_t i = 0; i < h; ++i) {
    std::span<const double> qi(q.data() + i * dh, dh);
    std::vector<double> logits(keys.size());
    for (std::size_t c = 0; c < keys.size(); ++c) {
      logits[c] = scale * vecops::dot(qi, {ks[c].data() + i * dh, dh});
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    std::vector<double> alpha(keys.size());
    for (std::size_t c = 0; c < keys.size(); ++c) {
      alpha[c] = std::exp(logits[c] - mx);
      sum += alpha[c];
    }
    for (auto& a : alpha) a /= sum;
    for (std::size_t c = 0; c < keys.size(); ++c) {
      vecops::axpy(alpha[c], {vs[c].data() + i * dh, dh},
                   {concat.data() + i * dh, dh});
    }
    if (head_weights != nullptr) head_weights->push_back(std::move(alpha));
  }

  std::vector<double> out(d);
  vecops::matvec(params.att_wo.a, d, d, concat, out);
  vecops::axpy(1.0, params.att_bo.a, out);
  return out;
}

std::vector<double> fuse_norm(std::span<const double> e_t,
                              std::span<const double> e_t_attended) {
  if (e_t.size() != e_t_attended.size()) {
    throw PreconditionError("fuse_norm: dimension mismatch");
  }
  std::vector<double> v(e_t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = e_t[i] + e_t_attended[i];
  double norm = vecops::l2_norm(v);
  if (norm == 0.0) {
    throw DegenerateInputError("fuse_norm: zero fused vector");
  }
  vecops::scale(1.0 / norm, v);
  return v;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Cosine similarity that treats a zero vector as "no signal": score 0.
double cos_sim0(std::span<const double> a, std::span<const double> b) {
  double na = vecops::l2_norm(a);
  double nb = vecops::l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return vecops::dot(a, b) / (na * nb);
}

std::vector<double> pad_to(std::span<const double> half, std::size_t d) {
  std::vector<double> out(d, 0.0);
  std::copy(half.begin(), half.end(), out.begin());
  return out;
}

}  // namespace

PairScores pair_scores(const CrossEncoderParams& params,
                       std::span<const double> e_q_related,
                       const std::vector<std::vector<double>>& targets) {
  const std::size_t d = params.config.model_dim;
  if (e_q_related.size() != d / 2) {
    throw PreconditionError("pair_scores: related half must have dim d_m/2");
  }
  std::vector<double> padded = pad_to(e_q_related, d);
  PairScores out;
  for (const auto& target : targets) {
    out.cos.push_back(cos_sim0(padded, target));
    std::vector<double> input(2 * d);
    std::copy(padded.begin(), padded.end(), input.begin());
    std::copy(target.begin(), target.end(), input.begin() + d);
    std::vector<double> z1(d);
    vecops::matvec(params.cl_w1.a, d, 2 * d, input, z1);
    vecops::axpy(1.0, params.cl_b1.a, z1);
    for (auto& v : z1) v = std::max(v, 0.0);
    double logit = vecops::dot(params.cl_w2.a, z1) + params.cl_b2.a[0];
    out.cl.push_back(sigmoid(logit));
  }
  return out;
}

TableLevelLoss table_level_loss(std::span<const double> cos_scores,
                                std::span<const double> cl_probs,
                                std::span<const int> labels) {
  if (cos_scores.size() != labels.size() || cl_probs.size() != labels.size() ||
      labels.empty()) {
    throw PreconditionError("table_level_loss: mismatched or empty inputs");
  }
  auto bce = [](double p, double y) {
    p = std::clamp(p, kProbEps, 1.0 - kProbEps);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  };
  TableLevelLoss out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.l_cos += bce((1.0 + cos_scores[i]) / 2.0, double(labels[i]));
    out.l_cl += bce(cl_probs[i], double(labels[i]));
  }
  out.l_cos /= double(labels.size());
  out.l_cl /= double(labels.size());
  out.l_t = out.l_cos + out.l_cl;
  return out;
}

// ---- full forward/backward ------------------------------------------------

namespace {

struct TrainCtx {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct TargetFwd {
  std::vector<double> cl_input;  // 2*d_m
  std::vector<double> cl_z1;     // pre-ReLU
  std::vector<double> cl_r1;     // post-ReLU
  double cl_logit = 0;
  double cos = 0;
  double cl = 0;
};

struct TableFwd {
  const TableSchema* table = nullptr;
  std::vector<std::size_t> perm;  // encoded column order
  SpanFwd anchor_span, table_span;
  std::vector<SpanFwd> col_spans;            // perm order
  std::vector<double> dn_z, dn_rd;           // pre-ReLU; post ReLU+dropout
  std::vector<double> dropout_scale;         // per-entry multiplier
  std::vector<double> padded;                // padded e_q^s
  std::vector<double> q;                     // wq e_t
  std::vector<std::vector<double>> ks, vs;   // projected keys/values
  std::vector<std::vector<double>> alpha;    // per head
  std::vector<double> concat_u;
  std::vector<double> e_ta;
  std::vector<double> v;                     // e_t + e_ta
  double vnorm = 0;
  std::vector<double> e_tc;
  std::vector<TargetFwd> targets;            // 0 = table, then perm columns
  std::vector<SchemaElementId> ids;          // aligned with targets
};

TableFwd forward_table(const CrossEncoderParams& p, TokenEncoder& provider,
                       const std::string& anchor, const TableSchema& table,
                       std::vector<std::size_t> perm, const TrainCtx& ctx) {
  const std::size_t d = p.config.model_dim;
  TableFwd f;
  f.table = &table;
  f.perm = std::move(perm);

  int budget = p.config.token_budget;
  f.anchor_span = fuse_span(p, take_tokens(provider, anchor, budget));
  f.table_span = fuse_span(p, take_tokens(provider, table.name, budget));
  for (std::size_t k : f.perm) {
    f.col_spans.push_back(fuse_span(
        p, take_tokens(provider, crossenc_column_text(table.columns[k]), budget)));
  }

  // disentangle
  f.dn_z.assign(d, 0.0);
  vecops::matvec(p.dn_w.a, d, d, f.anchor_span.out, f.dn_z);
  vecops::axpy(1.0, p.dn_b.a, f.dn_z);
  f.dropout_scale.assign(d, 1.0);
  if (ctx.training && ctx.dropout > 0.0) {
    std::bernoulli_distribution drop(ctx.dropout);
    for (auto& s : f.dropout_scale) {
      s = drop(*ctx.rng) ? 0.0 : 1.0 / (1.0 - ctx.dropout);
    }
  }
  f.dn_rd.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    f.dn_rd[i] = std::max(f.dn_z[i], 0.0) * f.dropout_scale[i];
  }
  f.padded.assign(d, 0.0);
  std::copy(f.dn_rd.begin() + d / 2, f.dn_rd.end(), f.padded.begin());

  // attention over columns (skipped for zero-column tables)
  const std::size_t m = f.col_spans.size();
  f.e_ta.assign(d, 0.0);
  if (m > 0) {
    const std::size_t h = std::size_t(p.config.heads);
    const std::size_t dh = d / h;
    f.q.assign(d, 0.0);
    vecops::matvec(p.att_wq.a, d, d, f.table_span.out, f.q);
    f.ks.assign(m, std::vector<double>(d));
    f.vs.assign(m, std::vector<double>(d));
    for (std::size_t c = 0; c < m; ++c) {
      vecops::matvec(p.att_wk.a, d, d, f.col_spans[c].out, f.ks[c]);
      vecops::matvec(p.att_wv.a, d, d, f.col_spans[c].out, f.vs[c]);
    }
    f.concat_u.assign(d, 0.0);
    const double scale = 1.0 / std::sqrt(double(dh));
    for (std::size_t i = 0; i < h; ++i) {
      std::span<const double> qi(f.q.data() + i * dh, dh);
      std::vector<double> logits(m);
      for (std::size_t c = 0; c < m; ++c) {
        logits[c] = scale * vecops::dot(qi, {f.ks[c].data() + i * dh, dh});
      }
      double mx = *std::max_element(logits.begin(), logits.end());
      std::vector<double> alpha(m);
      double sum = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        alpha[c] = std::exp(logits[c] - mx);
        sum += alpha[c];
      }
      for (auto& a : alpha) a /= sum;
      for (std::size_t c = 0; c < m; ++c) {
        vecops::axpy(alpha[c], {f.vs[c].data() + i * dh, dh},
                     {f.concat_u.data() + i * dh, dh});
      }
      f.alpha.push_back(std::move(alpha));
    }
    vecops::matvec(p.att_wo.a, d, d, f.concat_u, f.e_ta);
    vecops::axpy(1.0, p.att_bo.a, f.e_ta);
  }

  // residual + normalization
  f.v.resize(d);
  for (std::size_t i = 0; i < d; ++i) f.v[i] = f.table_span.out[i] + f.e_ta[i];
  f.vnorm = vecops::l2_norm(f.v);
  if (f.vnorm == 0.0) {
    throw DegenerateInputError("cross encoder: zero fused table vector");
  }
  f.e_tc = f.v;
  vecops::scale(1.0 / f.vnorm, f.e_tc);

  // scores: table target first, then columns in perm order
  auto score_target = [&](const std::vector<double>& target) {
    TargetFwd t;
    t.cos = cos_sim0(f.padded, target);
    t.cl_input.assign(2 * d, 0.0);
    std::copy(f.padded.begin(), f.padded.end(), t.cl_input.begin());
    std::copy(target.begin(), target.end(), t.cl_input.begin() + d);
    t.cl_z1.assign(d, 0.0);
    vecops::matvec(p.cl_w1.a, d, 2 * d, t.cl_input, t.cl_z1);
    vecops::axpy(1.0, p.cl_b1.a, t.cl_z1);
    t.cl_r1.resize(d);
    for (std::size_t i = 0; i < d; ++i) t.cl_r1[i] = std::max(t.cl_z1[i], 0.0);
    t.cl_logit = vecops::dot(p.cl_w2.a, t.cl_r1) + p.cl_b2.a[0];
    t.cl = sigmoid(t.cl_logit);
    return t;
  };

  f.targets.push_back(score_target(f.e_tc));
  f.ids.push_back(SchemaElementId::table_id(table.name));
  for (std::size_t c = 0; c < m; ++c) {
    f.targets.push_back(score_target(f.col_spans[c].out));
    f.ids.push_back(
        SchemaElementId::column_id(table.name, table.columns[f.perm[c]].name));
  }
  return f;
}

struct GradSet {
  std::vector<Mat> mats;

  explicit GradSet(const CrossEncoderParams& p) {
    for (auto& [name, mat] : p.tensors()) mats.emplace_back(mat->rows, mat->cols);
  }
  // order mirrors CrossEncoderParams::tensors()
  Mat& dn_w() { return mats[0]; }
  Mat& dn_b() { return mats[1]; }
  Mat& att_wq() { return mats[2]; }
  Mat& att_wk() { return mats[3]; }
  Mat& att_wv() { return mats[4]; }
  Mat& att_wo() { return mats[5]; }
  Mat& att_bo() { return mats[6]; }
  Mat& fus_wx() { return mats[7]; }
  Mat& fus_ws() { return mats[8]; }
  Mat& fus_b() { return mats[9]; }
  Mat& cl_w1() { return mats[10]; }
  Mat& cl_b1() { return mats[11]; }
  Mat& cl_w2() { return mats[12]; }
  Mat& cl_b2() { return mats[13]; }
};

// d cos_sim0(a, b) / d a given cached norms; zero when either side is zero.
void cos_backward(std::span<const double> a, std::span<const double> b,
                  double cos_value, double dcos, std::vector<double>& da,
                  std::vector<double>& db) {
  double na = vecops::l2_norm(a);
  double nb = vecops::l2_norm(b);
  if (na == 0.0 || nb == 0.0 || dcos == 0.0) return;
  for (std::size_t i = 0; i < a.size(); ++i) {
    da[i] += dcos * (b[i] / (na * nb) - cos_value * a[i] / (na * na));
    db[i] += dcos * (a[i] / (na * nb) - cos_value * b[i] / (nb * nb));
  }
}

// Backward through one table's forward given per-target score gradients.
// dcos[t]: d loss / d raw cosine score; dlogit[t]: d loss / d classifier logit.
void backward_table(const CrossEncoderParams& p, const TableFwd& f,
                    const std::vector<double>& dcos,
                    const std::vector<double>& dlogit, GradSet& g) {
  const std::size_t d = p.config.model_dim;
  const std::size_t m = f.col_spans.size();

  std::vector<double> d_padded(d, 0.0);
  std::vector<double> d_etc(d, 0.0);
  std::vector<std::vector<double>> d_cols(m, std::vector<double>(d, 0.0));

  for (std::size_t t = 0; t < f.targets.size(); ++t) {
    const TargetFwd& tf = f.targets[t];
    const std::vector<double>& target = t == 0 ? f.e_tc : f.col_spans[t - 1].out;
    std::vector<double>& d_target = t == 0 ? d_etc : d_cols[t - 1];

    cos_backward(f.padded, target, tf.cos, dcos[t], d_padded, d_target);

    if (dlogit[t] != 0.0) {
      // classifier: logit = w2 . relu(w1 x + b1) + b2
      g.cl_b2().a[0] += dlogit[t];
      vecops::axpy(dlogit[t], tf.cl_r1, g.cl_w2().a);
      std::vector<double> dz1(d);
      for (std::size_t i = 0; i < d; ++i) {
        dz1[i] = tf.cl_z1[i] > 0.0 ? dlogit[t] * p.cl_w2.a[i] : 0.0;
      }
      vecops::axpy(1.0, dz1, g.cl_b1().a);
      vecops::ger(g.cl_w1().a, d, 2 * d, 1.0, dz1, tf.cl_input);
      std::vector<double> dx(2 * d);
      vecops::matvec_t(p.cl_w1.a, d, 2 * d, dz1, dx);
      for (std::size_t i = 0; i < d; ++i) d_padded[i] += dx[i];
      for (std::size_t i = 0; i < d; ++i) d_target[i] += dx[d + i];
    }
  }

  // e_tc = v / |v|
  std::vector<double> d_et(d, 0.0);
  {
    double proj = vecops::dot(d_etc, f.e_tc);
    std::vector<double> dv(d);
    for (std::size_t i = 0; i < d; ++i) {
      dv[i] = (d_etc[i] - proj * f.e_tc[i]) / f.vnorm;
    }
    d_et = dv;  // residual branch
    if (m > 0) {
      // attention output branch: e_ta = wo u + bo
      vecops::axpy(1.0, dv, g.att_bo().a);
      vecops::ger(g.att_wo().a, d, d, 1.0, dv, f.concat_u);
      std::vector<double> du(d);
      vecops::matvec_t(p.att_wo.a, d, d, dv, du);

      const std::size_t h = std::size_t(p.config.heads);
      const std::size_t dh = d / h;
      const double scale = 1.0 / std::sqrt(double(dh));
      std::vector<double> dq(d, 0.0);
      std::vector<std::vector<double>> dks(m, std::vector<double>(d, 0.0));
      std::vector<std::vector<double>> dvs(m, std::vector<double>(d, 0.0));
      for (std::size_t i = 0; i < h; ++i) {
        std::span<const double> dhead(du.data() + i * dh, dh);
        std::span<const double> qi(f.q.data() + i * dh, dh);
        const auto& alpha = f.alpha[i];
        std::vector<double> dalpha(m);
        for (std::size_t c = 0; c < m; ++c) {
          dalpha[c] = vecops::dot(dhead, {f.vs[c].data() + i * dh, dh});
          vecops::axpy(alpha[c], dhead, {dvs[c].data() + i * dh, dh});
        }
        double mix = 0.0;
        for (std::size_t c = 0; c < m; ++c) mix += alpha[c] * dalpha[c];
        for (std::size_t c = 0; c < m; ++c) {
          double dlogit_att = alpha[c] * (dalpha[c] - mix);
          vecops::axpy(dlogit_att * scale, {f.ks[c].data() + i * dh, dh},
                       {dq.data() + i * dh, dh});
          vecops::axpy(dlogit_att * scale, qi, {dks[c].data() + i * dh, dh});
        }
      }
      vecops::ger(g.att_wq().a, d, d, 1.0, dq, f.table_span.out);
      std::vector<double> tmp(d);
      vecops::matvec_t(p.att_wq.a, d, d, dq, tmp);
      vecops::axpy(1.0, tmp, d_et);
      for (std::size_t c = 0; c < m; ++c) {
        vecops::ger(g.att_wk().a, d, d, 1.0, dks[c], f.col_spans[c].out);
        vecops::matvec_t(p.att_wk.a, d, d, dks[c], tmp);
        vecops::axpy(1.0, tmp, d_cols[c]);
        vecops::ger(g.att_wv().a, d, d, 1.0, dvs[c], f.col_spans[c].out);
        vecops::matvec_t(p.att_wv.a, d, d, dvs[c], tmp);
        vecops::axpy(1.0, tmp, d_cols[c]);
      }
    }
  }

  // disentangle: padded = [relu-dropout second half; zeros], first half unused
  {
    std::vector<double> d_rd(d, 0.0);
    for (std::size_t i = 0; i < d / 2; ++i) d_rd[d / 2 + i] = d_padded[i];
    std::vector<double> dz(d);
    for (std::size_t i = 0; i < d; ++i) {
      dz[i] = f.dn_z[i] > 0.0 ? d_rd[i] * f.dropout_scale[i] : 0.0;
    }
    vecops::axpy(1.0, dz, g.dn_b().a);
    vecops::ger(g.dn_w().a, d, d, 1.0, dz, f.anchor_span.out);
    std::vector<double> d_eq(d);
    vecops::matvec_t(p.dn_w.a, d, d, dz, d_eq);
    fuse_span_backward(p, f.anchor_span, std::move(d_eq), g.fus_wx(), g.fus_ws(),
                       g.fus_b());
  }

  fuse_span_backward(p, f.table_span, std::move(d_et), g.fus_wx(), g.fus_ws(),
                     g.fus_b());
  for (std::size_t c = 0; c < m; ++c) {
    fuse_span_backward(p, f.col_spans[c], std::move(d_cols[c]), g.fus_wx(),
                       g.fus_ws(), g.fus_b());
  }
}

std::vector<std::size_t> identity_perm(std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  return perm;
}

struct InstanceForward {
  std::vector<TableFwd> tables;
  std::vector<int> labels;  // aligned with concatenated targets
  TableLevelLoss loss;
};

InstanceForward forward_instance(const CrossEncoderParams& p,
                                 TokenEncoder& provider, const Instance& instance,
                                 const SchemaCatalog& catalog,
                                 const SchemaSet* gold, const TrainCtx& ctx,
                                 std::vector<std::vector<std::size_t>> perms = {}) {
  InstanceForward out;
  const std::string anchor = anchor_text(instance);
  std::vector<double> cos_scores, cl_probs;
  for (std::size_t j = 0; j < catalog.tables.size(); ++j) {
    const TableSchema& table = catalog.tables[j];
    std::vector<std::size_t> perm = perms.empty() || perms[j].empty()
                                        ? identity_perm(table.columns.size())
                                        : perms[j];
    TableFwd f = forward_table(p, provider, anchor, table, std::move(perm), ctx);
    for (std::size_t t = 0; t < f.targets.size(); ++t) {
      cos_scores.push_back(f.targets[t].cos);
      cl_probs.push_back(f.targets[t].cl);
      if (gold != nullptr) out.labels.push_back(gold->contains(f.ids[t]) ? 1 : 0);
    }
    out.tables.push_back(std::move(f));
  }
  if (gold != nullptr) {
    out.loss = table_level_loss(cos_scores, cl_probs, out.labels);
  }
  return out;
}

GradSet backward_instance(const CrossEncoderParams& p, const InstanceForward& fwd) {
  GradSet g(p);
  const double n = double(fwd.labels.size());
  std::size_t offset = 0;
  for (const TableFwd& f : fwd.tables) {
    std::vector<double> dcos(f.targets.size(), 0.0);
    std::vector<double> dlogit(f.targets.size(), 0.0);
    for (std::size_t t = 0; t < f.targets.size(); ++t) {
      double y = double(fwd.labels[offset + t]);
      // cosine branch through p = (1+s)/2, zero outside the clamp window
      double pc = (1.0 + f.targets[t].cos) / 2.0;
      if (pc > kProbEps && pc < 1.0 - kProbEps) {
        dcos[t] = (pc - y) / (pc * (1.0 - pc)) / 2.0 / n;
      }
      // classifier branch directly through the sigmoid logit
      double pl = f.targets[t].cl;
      if (pl > kProbEps && pl < 1.0 - kProbEps) {
        dlogit[t] = (pl - y) / n;
      }
    }
    backward_table(p, f, dcos, dlogit, g);
    offset += f.targets.size();
  }
  return g;
}

}  // namespace

TableLevelLoss cross_encoder_loss(const CrossEncoderParams& params,
                                  TokenEncoder& provider, const Instance& instance,
                                  const SchemaCatalog& catalog,
                                  const SchemaSet& gold) {
  TrainCtx ctx;  // inference mode
  return forward_instance(params, provider, instance, catalog, &gold, ctx).loss;
}

CrossEncoderGradient cross_encoder_gradient(const CrossEncoderParams& params,
                                            TokenEncoder& provider,
                                            const Instance& instance,
                                            const SchemaCatalog& catalog,
                                            const SchemaSet& gold) {
  TrainCtx ctx;
  auto fwd = forward_instance(params, provider, instance, catalog, &gold, ctx);
  GradSet g = backward_instance(params, fwd);
  CrossEncoderGradient out;
  out.loss = fwd.loss;
  out.grads = std::move(g.mats);
  return out;
}

SchemaSet select_by_rule(const std::vector<BranchTableScores>& tables,
                         const SelectionRule& rule) {
  SchemaSet set;
  std::vector<std::pair<double, std::size_t>> selected;  // (score, table idx)
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (tables[i].table_score > rule.table_threshold) {
      selected.emplace_back(tables[i].table_score, i);
    }
  }
  std::stable_sort(selected.begin(), selected.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t rank = 0; rank < selected.size(); ++rank) {
    const BranchTableScores& e = tables[selected[rank].second];
    int keep = rank < std::size_t(rule.top_tables) ? rule.cols_top : rule.cols_rest;
    set.insert(SchemaElementId::table_id(e.table_name));
    auto cols = e.columns;
    std::stable_sort(cols.begin(), cols.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    for (std::size_t c = 0; c < cols.size() && c < std::size_t(keep); ++c) {
      set.insert(cols[c].element);
    }
  }
  return set;
}

TablePrediction predict_table_level(const CrossEncoderParams& params,
                                    TokenEncoder& provider,
                                    const Instance& instance,
                                    const SchemaCatalog& catalog,
                                    const SelectionRule& rule) {
  TrainCtx ctx;
  auto fwd = forward_instance(params, provider, instance, catalog, nullptr, ctx);

  TablePrediction out;
  std::vector<BranchTableScores> cos_branch, cl_branch;
  for (std::size_t j = 0; j < fwd.tables.size(); ++j) {
    const TableFwd& f = fwd.tables[j];
    BranchTableScores bc{catalog.tables[j].name, f.targets[0].cos, {}};
    BranchTableScores bl{catalog.tables[j].name, f.targets[0].cl, {}};
    out.score_cos.push_back(ScoredElement{f.ids[0], f.targets[0].cos, "table.cos"});
    out.score_cl.push_back(ScoredElement{f.ids[0], f.targets[0].cl, "table.cl"});
    // column scores reported in catalog order regardless of encode order
    std::vector<std::pair<std::size_t, std::size_t>> order;  // (col idx, target idx)
    for (std::size_t c = 0; c < f.perm.size(); ++c) {
      order.emplace_back(f.perm[c], c + 1);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [col, t] : order) {
      out.score_cos.push_back(ScoredElement{f.ids[t], f.targets[t].cos, "table.cos"});
      out.score_cl.push_back(ScoredElement{f.ids[t], f.targets[t].cl, "table.cl"});
      bc.columns.push_back(out.score_cos.back());
      bl.columns.push_back(out.score_cl.back());
    }
    cos_branch.push_back(std::move(bc));
    cl_branch.push_back(std::move(bl));
  }

  out.pred_cos = select_by_rule(cos_branch, rule);
  out.pred_cl = select_by_rule(cl_branch, rule);
  out.fused = SchemaSet::set_union(out.pred_cos, out.pred_cl);
  return out;
}

CrossEncoderParams train_cross_encoder(const std::vector<LabeledExample>& examples,
                                       TokenEncoder& provider,
                                       const CrossTrainConfig& config,
                                       CrossTrainReport* report) {
  if (examples.empty()) {
    throw PreconditionError("train_cross_encoder: no labeled examples");
  }
  for (const auto& ex : examples) {
    if (ex.instance == nullptr || ex.catalog == nullptr || ex.gold == nullptr) {
      throw PreconditionError("train_cross_encoder: incomplete example");
    }
  }
  CrossEncoderParams params = CrossEncoderParams::init(config.model);
  std::mt19937_64 rng(config.seed ^ 0xcafef00dd15ea5e5ull);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const LabeledExample& ex = examples[idx];
      // column order shuffled per batch
      std::vector<std::vector<std::size_t>> perms;
      for (const auto& table : ex.catalog->tables) {
        auto perm = identity_perm(table.columns.size());
        std::shuffle(perm.begin(), perm.end(), rng);
        perms.push_back(std::move(perm));
      }
      TrainCtx ctx{true, config.model.dropout, &rng};
      auto fwd = forward_instance(params, provider, *ex.instance, *ex.catalog,
                                  ex.gold, ctx, std::move(perms));
      if (!std::isfinite(fwd.loss.l_t)) {
        throw TrainingDivergedError("train_cross_encoder: non-finite loss", epoch);
      }
      loss_sum += fwd.loss.l_t;
      GradSet g = backward_instance(params, fwd);
      auto tensors = params.tensors();
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        vecops::axpy(-config.learning_rate, g.mats[i].a, tensors[i].second->a);
      }
    }
    if (report != nullptr) {
      report->epoch_mean_loss.push_back(loss_sum / double(examples.size()));
    }
  }
  return params;
}

}  // namespace sqlink
