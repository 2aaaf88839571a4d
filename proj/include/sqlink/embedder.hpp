#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqlink/catalog.hpp"
#include "sqlink/types.hpp"

// Column-level schema linking: a trainable hashed character-n-gram embedder,
// triplet-loss training, and threshold filtering of column scores.
namespace sqlink {

struct FeatureConfig {
  std::vector<int> ngram_sizes = {2, 3};
  std::uint32_t hash_dim = 4096;  // F
  std::uint64_t seed = 0x5eedf00d;
};

// Sparse n-gram counts, entries sorted by bucket index.
struct SparseFeatures {
  std::vector<std::pair<std::uint32_t, double>> entries;
  bool empty() const { return entries.empty(); }
};

SparseFeatures featurize(const std::string& text, const FeatureConfig& config);

struct EmbedderParams {
  FeatureConfig features;
  std::size_t embed_dim = 256;  // D
  std::vector<double> projection;  // F x D, row-major

  static EmbedderParams init(const FeatureConfig& features, std::size_t embed_dim,
                             std::uint64_t seed);
};

// L2-normalized projection of featurize(text). Throws DegenerateInputError
// when the feature vector (or its projection) is identically zero.
std::vector<double> embed(const EmbedderParams& params, const std::string& text);

// 1 - <u, v> for unit-norm inputs; range [0, 2].
double cosine_distance(std::span<const double> u, std::span<const double> v);

// max(phi(a,p) - phi(a,n) + beta, 0)
double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double beta);

struct TripletExample {
  std::string anchor_text;
  std::string positive_text;
  std::string negative_text;
};

struct TripletTrainConfig {
  double margin = 0.3;  // beta > 0
  double learning_rate = 0.05;
  int epochs = 50;
  int batch_size = 1;
  std::uint64_t seed = 1;
  FeatureConfig features;
  std::size_t embed_dim = 256;
};

// Loss of one triplet under the given params (texts embedded first).
double triplet_loss_value(const EmbedderParams& params, const TripletExample& t,
                          double beta);

// Exact subgradient of triplet_loss_value over the projection matrix,
// flattened row-major (F x D). Zero when the hinge is inactive.
std::vector<double> triplet_gradient(const EmbedderParams& params,
                                     const TripletExample& t, double beta);

struct EmbedderTrainReport {
  std::vector<double> epoch_mean_loss;
};

// Seeded SGD over the fixed triplet list. 0 epochs returns the initialization.
EmbedderParams train_embedder(const std::vector<TripletExample>& triplets,
                              const TripletTrainConfig& config,
                              EmbedderTrainReport* report = nullptr);

struct MinedExample {
  const Instance* instance = nullptr;
  const SchemaCatalog* catalog = nullptr;
  const SchemaSet* gold = nullptr;
};

// Training with per-epoch negative re-sampling: one uniform negative per
// positive, re-mined each epoch with a seeded RNG.
EmbedderParams train_embedder_remine(const std::vector<MinedExample>& examples,
                                     const TripletTrainConfig& config,
                                     EmbedderTrainReport* report = nullptr);

void save_embedder(const EmbedderParams& params, const std::string& path);
EmbedderParams load_embedder(const std::string& path);

// The description text scored for a column: "table.column (type): v1, v2, v3".
std::string column_text(const TableSchema& table, const ColumnSchema& column);

// One triplet per gold column; the negative is sampled uniformly from the
// positive's own table first, falling back to the other tables. Returns an
// empty list when no negatives exist.
std::vector<TripletExample> mine_triplets(const Instance& instance,
                                          const SchemaSet& gold,
                                          const SchemaCatalog& catalog,
                                          std::mt19937_64& rng);

// Pluggable embedding backend so a remote embedding endpoint can stand in
// for the local hash embedder behind the same scoring code.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  // Returns one vector per input text, request order preserved.
  virtual std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) = 0;
};

class LocalHashEmbedder final : public EmbeddingBackend {
 public:
  explicit LocalHashEmbedder(EmbedderParams params) : params_(std::move(params)) {}
  std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts) override;
  const EmbedderParams& params() const { return params_; }

 private:
  EmbedderParams params_;
};

struct ColumnScores {
  std::vector<ScoredElement> scores;  // one per column, catalog order
  SchemaSet filtered;                 // score > threshold, ownership-closed
};

ColumnScores score_and_filter_columns(const EmbedderParams& params,
                                      const Instance& instance,
                                      const SchemaCatalog& catalog,
                                      double threshold);

ColumnScores score_and_filter_columns(EmbeddingBackend& backend,
                                      const Instance& instance,
                                      const SchemaCatalog& catalog,
                                      double threshold);

}  // namespace sqlink
