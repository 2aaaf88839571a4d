#include "sqlink/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "sqlink/checkpoint.hpp"
#include "sqlink/error.hpp"
#include "sqlink/vecops.hpp"

namespace sqlink {

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull ^ (seed * 1099511628211ull);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

SparseFeatures featurize(const std::string& text, const FeatureConfig& config) {
  std::string lowered;
  lowered.reserve(text.size());
  for (unsigned char c : text) lowered.push_back(static_cast<char>(std::tolower(c)));

  std::map<std::uint32_t, double> counts;
  for (int n : config.ngram_sizes) {
    if (n <= 0 || lowered.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + n <= lowered.size(); ++i) {
      std::uint64_t h = fnv1a(std::string_view(lowered).substr(i, n), config.seed);
      counts[static_cast<std::uint32_t>(h % config.hash_dim)] += 1.0;
    }
  }
  SparseFeatures out;
  out.entries.assign(counts.begin(), counts.end());
  return out;
}

EmbedderParams EmbedderParams::init(const FeatureConfig& features,
                                    std::size_t embed_dim, std::uint64_t seed) {
  EmbedderParams p;
  p.features = features;
  p.embed_dim = embed_dim;
  p.projection.resize(static_cast<std::size_t>(features.hash_dim) * embed_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(embed_dim)));
  for (auto& w : p.projection) w = dist(rng);
  return p;
}

namespace {

// h = P^T x for sparse x; returns (h, norm).
std::pair<std::vector<double>, double> project(const EmbedderParams& params,
                                               const SparseFeatures& x) {
  std::vector<double> h(params.embed_dim, 0.0);
  for (const auto& [idx, val] : x.entries) {
    std::span<const double> row(params.projection.data() +
                                    static_cast<std::size_t>(idx) * params.embed_dim,
                                params.embed_dim);
    vecops::axpy(val, row, h);
  }
  double norm = vecops::l2_norm(h);
  return {std::move(h), norm};
}

}  // namespace

std::vector<double> embed(const EmbedderParams& params, const std::string& text) {
  SparseFeatures x = featurize(text, params.features);
  if (x.empty()) {
    throw DegenerateInputError("embed: text has no features: '" + text + "'");
  }
  auto [h, norm] = project(params, x);
  if (norm == 0.0) {
    throw DegenerateInputError("embed: zero projection for text: '" + text + "'");
  }
  vecops::scale(1.0 / norm, h);
  return h;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  return 1.0 - vecops::dot(u, v);
}

double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double beta) {
  return std::max(cosine_distance(a, p) - cosine_distance(a, n) + beta, 0.0);
}

double triplet_loss_value(const EmbedderParams& params, const TripletExample& t,
                          double beta) {
  auto a = embed(params, t.anchor_text);
  auto p = embed(params, t.positive_text);
  auto n = embed(params, t.negative_text);
  return triplet_loss(a, p, n, beta);
}

namespace {

struct TripletForward {
  SparseFeatures xa, xp, xn;
  std::vector<double> ua, up, un;  // unit vectors
  double ra = 0, rp = 0, rn = 0;   // pre-normalization norms
  double loss = 0;
};

TripletForward triplet_forward(const EmbedderParams& params, const TripletExample& t,
                               double beta) {
  TripletForward f;
  f.xa = featurize(t.anchor_text, params.features);
  f.xp = featurize(t.positive_text, params.features);
  f.xn = featurize(t.negative_text, params.features);
  if (f.xa.empty() || f.xp.empty() || f.xn.empty()) {
    throw DegenerateInputError("triplet contains text with no features");
  }
  auto [ha, ra] = project(params, f.xa);
  auto [hp, rp] = project(params, f.xp);
  auto [hn, rn] = project(params, f.xn);
  if (ra == 0.0 || rp == 0.0 || rn == 0.0) {
    throw DegenerateInputError("triplet embeds to a zero vector");
  }
  f.ua = std::move(ha);
  f.up = std::move(hp);
  f.un = std::move(hn);
  vecops::scale(1.0 / ra, f.ua);
  vecops::scale(1.0 / rp, f.up);
  vecops::scale(1.0 / rn, f.un);
  f.ra = ra;
  f.rp = rp;
  f.rn = rn;
  f.loss = triplet_loss(f.ua, f.up, f.un, beta);
  return f;
}

// d loss / d h for h the pre-normalization projection of one leg:
// grad wrt h of <u, w> with u = h/r is (w - <u,w> u) / r.
std::vector<double> direction_grad(const std::vector<double>& u, double r,
                                   const std::vector<double>& w, double sign) {
  std::vector<double> g(u.size());
  double uw = vecops::dot(u, w);
  for (std::size_t i = 0; i < u.size(); ++i) {
    g[i] = sign * (w[i] - uw * u[i]) / r;
  }
  return g;
}

// Accumulates outer(x, g) into the flattened F x D gradient.
void accumulate(std::vector<double>& grad, std::size_t embed_dim,
                const SparseFeatures& x, const std::vector<double>& g) {
  for (const auto& [idx, val] : x.entries) {
    std::span<double> row(grad.data() + static_cast<std::size_t>(idx) * embed_dim,
                          embed_dim);
    vecops::axpy(val, g, row);
  }
}

}  // namespace

std::vector<double> triplet_gradient(const EmbedderParams& params,
                                     const TripletExample& t, double beta) {
  std::vector<double> grad(params.projection.size(), 0.0);
  TripletForward f = triplet_forward(params, t, beta);
  if (f.loss <= 0.0) return grad;  // hinge inactive

  // loss = <ua,un> - <ua,up> + beta
  std::vector<double> w(params.embed_dim);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = f.un[i] - f.up[i];
  accumulate(grad, params.embed_dim, f.xa, direction_grad(f.ua, f.ra, w, 1.0));
  accumulate(grad, params.embed_dim, f.xp, direction_grad(f.up, f.rp, f.ua, -1.0));
  accumulate(grad, params.embed_dim, f.xn, direction_grad(f.un, f.rn, f.ua, 1.0));
  return grad;
}

namespace {

// One SGD pass over the given triplets; returns the mean loss.
double sgd_epoch(EmbedderParams& params, const std::vector<TripletExample>& triplets,
                 const TripletTrainConfig& config, std::mt19937_64& rng,
                 int epoch_number) {
  std::vector<std::size_t> order(triplets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t batch = std::max(1, config.batch_size);
  std::vector<double> batch_grad(params.projection.size(), 0.0);
  double loss_sum = 0.0;
  std::size_t in_batch = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const TripletExample& t = triplets[order[k]];
    TripletForward f = triplet_forward(params, t, config.margin);
    if (!std::isfinite(f.loss)) {
      throw TrainingDivergedError("train_embedder: non-finite loss", epoch_number);
    }
    loss_sum += f.loss;
    if (f.loss > 0.0) {
      std::vector<double> w(params.embed_dim);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = f.un[i] - f.up[i];
      accumulate(batch_grad, params.embed_dim, f.xa,
                 direction_grad(f.ua, f.ra, w, 1.0));
      accumulate(batch_grad, params.embed_dim, f.xp,
                 direction_grad(f.up, f.rp, f.ua, -1.0));
      accumulate(batch_grad, params.embed_dim, f.xn,
                 direction_grad(f.un, f.rn, f.ua, 1.0));
    }
    ++in_batch;
    if (in_batch == batch || k + 1 == order.size()) {
      vecops::axpy(-config.learning_rate / double(in_batch), batch_grad,
                   params.projection);
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      in_batch = 0;
    }
  }
  return loss_sum / double(triplets.size());
}

}  // namespace

EmbedderParams train_embedder(const std::vector<TripletExample>& triplets,
                              const TripletTrainConfig& config,
                              EmbedderTrainReport* report) {
  if (triplets.empty()) {
    throw PreconditionError("train_embedder: need at least one triplet");
  }
  if (config.margin <= 0.0) {
    throw ConfigError("train_embedder: margin must be > 0");
  }
  EmbedderParams params =
      EmbedderParams::init(config.features, config.embed_dim, config.seed);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double mean_loss = sgd_epoch(params, triplets, config, rng, epoch);
    if (report != nullptr) report->epoch_mean_loss.push_back(mean_loss);
  }
  return params;
}

EmbedderParams train_embedder_remine(const std::vector<MinedExample>& examples,
                                     const TripletTrainConfig& config,
                                     EmbedderTrainReport* report) {
  if (examples.empty()) {
    throw PreconditionError("train_embedder_remine: no examples");
  }
  for (const auto& ex : examples) {
    if (ex.instance == nullptr || ex.catalog == nullptr || ex.gold == nullptr) {
      throw PreconditionError("train_embedder_remine: incomplete example");
    }
  }
  if (config.margin <= 0.0) {
    throw ConfigError("train_embedder_remine: margin must be > 0");
  }
  EmbedderParams params =
      EmbedderParams::init(config.features, config.embed_dim, config.seed);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<TripletExample> triplets;
    for (const auto& ex : examples) {
      auto mined = mine_triplets(*ex.instance, *ex.gold, *ex.catalog, rng);
      triplets.insert(triplets.end(), std::make_move_iterator(mined.begin()),
                      std::make_move_iterator(mined.end()));
    }
    if (triplets.empty()) {
      throw PreconditionError("train_embedder_remine: no triplets mineable");
    }
    double mean_loss = sgd_epoch(params, triplets, config, rng, epoch);
    if (report != nullptr) report->epoch_mean_loss.push_back(mean_loss);
  }
  return params;
}

void save_embedder(const EmbedderParams& params, const std::string& path) {
  nlohmann::json meta;
  meta["hash_dim"] = params.features.hash_dim;
  meta["ngram_sizes"] = params.features.ngram_sizes;
  meta["feature_seed"] = params.features.seed;
  meta["embed_dim"] = params.embed_dim;
  save_checkpoint(path, "embedder", meta,
                  {NamedTensor{"projection", params.features.hash_dim,
                               params.embed_dim, params.projection.data()}});
}

EmbedderParams load_embedder(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "embedder") {
    throw IoError("checkpoint kind '" + ckpt.kind + "' is not an embedder");
  }
  EmbedderParams params;
  params.features.hash_dim = ckpt.meta.at("hash_dim").get<std::uint32_t>();
  params.features.ngram_sizes =
      ckpt.meta.at("ngram_sizes").get<std::vector<int>>();
  params.features.seed = ckpt.meta.at("feature_seed").get<std::uint64_t>();
  params.embed_dim = ckpt.meta.at("embed_dim").get<std::size_t>();
  params.projection =
      ckpt.require("projection", params.features.hash_dim, params.embed_dim).data;
  return params;
}

std::string column_text(const TableSchema& table, const ColumnSchema& column) {
  std::string out = table.name + "." + column.name + " (" +
                    std::string(value_type_name(column.value_type)) + ")";
  if (!column.sample_values.empty()) {
    out += ":";
    for (std::size_t i = 0; i < column.sample_values.size(); ++i) {
      out += (i == 0 ? " " : ", ");
      out += column.sample_values[i];
    }
  }
  return out;
}

std::vector<TripletExample> mine_triplets(const Instance& instance,
                                          const SchemaSet& gold,
                                          const SchemaCatalog& catalog,
                                          std::mt19937_64& rng) {
  for (const auto& e : gold.elements()) {
    if (!catalog.contains(e)) {
      throw PreconditionError("mine_triplets: gold element '" + e.to_string() +
                              "' not in catalog");
    }
  }

  struct ColumnDesc {
    SchemaElementId id;
    std::string text;
    const TableSchema* table;
    bool is_gold;
  };
  std::vector<ColumnDesc> columns;
  for (const auto& t : catalog.tables) {
    for (const auto& c : t.columns) {
      auto id = SchemaElementId::column_id(t.name, c.name);
      columns.push_back({id, column_text(t, c), &t, gold.contains(id)});
    }
  }

  const std::string anchor = anchor_text(instance);
  std::vector<TripletExample> out;
  for (const auto& pos : columns) {
    if (!pos.is_gold) continue;
    std::vector<const ColumnDesc*> same_table;
    std::vector<const ColumnDesc*> other_tables;
    for (const auto& cand : columns) {
      if (cand.is_gold) continue;
      (cand.table == pos.table ? same_table : other_tables).push_back(&cand);
    }
    const auto& pool = !same_table.empty() ? same_table : other_tables;
    if (pool.empty()) continue;  // gold covers every column
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    out.push_back(TripletExample{anchor, pos.text, pool[pick(rng)]->text});
  }
  return out;
}

std::vector<std::vector<double>> LocalHashEmbedder::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(params_, t));
  return out;
}

namespace {

ColumnScores score_columns_impl(const std::vector<std::vector<double>>& vectors,
                                const std::vector<SchemaElementId>& ids,
                                double threshold) {
  ColumnScores out;
  const auto& anchor = vectors.front();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double score = 1.0 - cosine_distance(anchor, vectors[i + 1]);
    out.scores.push_back(ScoredElement{ids[i], score, "column"});
    if (score > threshold) out.filtered.insert(ids[i]);
  }
  return out;
}

void check_threshold(double threshold) {
  if (threshold < -1.0 || threshold > 1.0) {
    throw PreconditionError("score_and_filter_columns: threshold outside [-1, 1]");
  }
}

std::pair<std::vector<std::string>, std::vector<SchemaElementId>> column_texts(
    const Instance& instance, const SchemaCatalog& catalog) {
  std::vector<std::string> texts = {anchor_text(instance)};
  std::vector<SchemaElementId> ids;
  for (const auto& t : catalog.tables) {
    for (const auto& c : t.columns) {
      texts.push_back(column_text(t, c));
      ids.push_back(SchemaElementId::column_id(t.name, c.name));
    }
  }
  return {std::move(texts), std::move(ids)};
}

}  // namespace

ColumnScores score_and_filter_columns(const EmbedderParams& params,
                                      const Instance& instance,
                                      const SchemaCatalog& catalog,
                                      double threshold) {
  check_threshold(threshold);
  LocalHashEmbedder backend(params);
  return score_and_filter_columns(backend, instance, catalog, threshold);
}

ColumnScores score_and_filter_columns(EmbeddingBackend& backend,
                                      const Instance& instance,
                                      const SchemaCatalog& catalog,
                                      double threshold) {
  check_threshold(threshold);
  auto [texts, ids] = column_texts(instance, catalog);
  auto vectors = backend.embed_batch(texts);
  if (vectors.size() != texts.size()) {
    throw ClientError("embedding backend returned wrong batch size");
  }
  return score_columns_impl(vectors, ids, threshold);
}

}  // namespace sqlink
