#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sqlink/catalog.hpp"
#include "sqlink/embedder.hpp"
#include "sqlink/types.hpp"

// Table-level schema linking: a cross encoder over (question, table, columns)
// with a disentangled question embedding, column->table attention fusion,
// dual cosine/classifier heads, and the top-k selection rule.
namespace sqlink {

// Per-token sequence encoding provider. The provider is frozen: training
// never propagates gradients into it.
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual std::size_t dim() const = 0;
  // One vector per whitespace token of `span_text` (possibly zero vectors
  // for tokens with no features). Order preserved.
  virtual std::vector<std::vector<double>> encode_tokens(
      const std::string& span_text) = 0;
};

// Local provider: the hash embedder applied per token.
class HashTokenEncoder final : public TokenEncoder {
 public:
  HashTokenEncoder(const FeatureConfig& features, std::size_t dim,
                   std::uint64_t seed);
  std::size_t dim() const override { return params_.embed_dim; }
  std::vector<std::vector<double>> encode_tokens(
      const std::string& span_text) override;

 private:
  EmbedderParams params_;
};

enum class FusionKind { recurrent, mean_pool };

struct CrossEncoderConfig {
  std::size_t model_dim = 64;  // d_m; even and divisible by heads
  int heads = 4;               // h
  double dropout = 0.1;        // training mode only
  int token_budget = 512;      // tokens beyond this are truncated
  FusionKind fusion = FusionKind::recurrent;
  std::uint64_t seed = 7;
};

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  std::span<double> row(std::size_t r) { return {a.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {a.data() + r * cols, cols};
  }
};

struct CrossEncoderParams {
  CrossEncoderConfig config;

  Mat dn_w, dn_b;                  // disentangle: d_m x d_m, 1 x d_m
  Mat att_wq, att_wk, att_wv, att_wo, att_bo;  // attention projections
  Mat fus_wx, fus_ws, fus_b;       // recurrent fusion cell
  Mat cl_w1, cl_b1, cl_w2, cl_b2;  // classifier: 2*d_m -> d_m -> 1

  // Throws ConfigError for odd model_dim or model_dim % heads != 0.
  static CrossEncoderParams init(const CrossEncoderConfig& config);

  // Stable-ordered view over every trainable tensor (for finite-difference
  // checks and serialization).
  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;

  void save(const std::string& path) const;
  static CrossEncoderParams load(const std::string& path);
};

struct SequenceEmbeddings {
  std::vector<double> question;               // e_q
  std::vector<double> table;                  // e_t
  std::vector<std::vector<double>> columns;   // e_c^k, catalog order
};

// Encodes (anchor, table name, each column) spans with the provider, fuses
// each span to a fixed d_m vector, enforcing the token budget across the
// whole (anchor, table, columns...) sequence in order.
SequenceEmbeddings encode_sequences(TokenEncoder& provider,
                                    const CrossEncoderParams& params,
                                    const std::string& anchor,
                                    const TableSchema& table);

// ReLU(DN(e_q)) split into halves: first = unrelated, second = related.
// Inference mode (no dropout).
struct Disentangled {
  std::vector<double> unrelated;  // e_q^n
  std::vector<double> related;    // e_q^s
};
Disentangled disentangle(const CrossEncoderParams& params,
                         std::span<const double> e_q);

// Scaled dot-product attention with a single query. head_weights, when
// given, receives the per-head softmax weights (h rows, one entry per key).
std::vector<double> multi_head_attention(
    const CrossEncoderParams& params, std::span<const double> query,
    const std::vector<std::vector<double>>& keys,
    const std::vector<std::vector<double>>& values,
    std::vector<std::vector<double>>* head_weights = nullptr);

// L2-normalize(e_t + e_t_attended). Throws DegenerateInputError on a zero sum.
std::vector<double> fuse_norm(std::span<const double> e_t,
                              std::span<const double> e_t_attended);

// Scores of e_q^s (half dim, zero-padded) against each target vector.
struct PairScores {
  std::vector<double> cos;  // raw cosine similarity in [-1, 1]
  std::vector<double> cl;   // sigmoid classifier output in (0, 1)
};
PairScores pair_scores(const CrossEncoderParams& params,
                       std::span<const double> e_q_related,
                       const std::vector<std::vector<double>>& targets);

// Binary cross entropy per branch, averaged per element; cosine scores are
// mapped by (1+s)/2 for the loss. Probabilities clamped to [eps, 1-eps].
struct TableLevelLoss {
  double l_cos = 0;
  double l_cl = 0;
  double l_t = 0;
};
TableLevelLoss table_level_loss(std::span<const double> cos_scores,
                                std::span<const double> cl_probs,
                                std::span<const int> labels);

struct SelectionRule {
  double table_threshold = 0.5;
  int top_tables = 2;
  int cols_top = 8;
  int cols_rest = 4;
};

struct TablePrediction {
  std::vector<ScoredElement> score_cos;  // all elements, catalog order
  std::vector<ScoredElement> score_cl;
  SchemaSet pred_cos;
  SchemaSet pred_cl;
  SchemaSet fused;  // pred_cos union pred_cl
};

// One branch's scores for one table.
struct BranchTableScores {
  std::string table_name;
  double table_score = 0.0;
  std::vector<ScoredElement> columns;  // catalog order
};

// Tables with table_score > threshold are ranked by score (ties keep input
// order); the top `top_tables` keep their `cols_top` best columns, the rest
// keep `cols_rest`. The result is ownership-closed by construction.
SchemaSet select_by_rule(const std::vector<BranchTableScores>& tables,
                         const SelectionRule& rule);

TablePrediction predict_table_level(const CrossEncoderParams& params,
                                    TokenEncoder& provider,
                                    const Instance& instance,
                                    const SchemaCatalog& catalog,
                                    const SelectionRule& rule);

// Full forward loss of one labeled instance, inference mode (no dropout).
TableLevelLoss cross_encoder_loss(const CrossEncoderParams& params,
                                  TokenEncoder& provider,
                                  const Instance& instance,
                                  const SchemaCatalog& catalog,
                                  const SchemaSet& gold);

// Analytic gradient of l_t over every trainable tensor, same order and
// shapes as params.tensors(). Inference mode (no dropout).
struct CrossEncoderGradient {
  TableLevelLoss loss;
  std::vector<Mat> grads;
};
CrossEncoderGradient cross_encoder_gradient(const CrossEncoderParams& params,
                                            TokenEncoder& provider,
                                            const Instance& instance,
                                            const SchemaCatalog& catalog,
                                            const SchemaSet& gold);

struct CrossTrainConfig {
  CrossEncoderConfig model;
  double learning_rate = 0.05;
  int epochs = 20;
  std::uint64_t seed = 7;
};

struct LabeledExample {
  const Instance* instance = nullptr;
  const SchemaCatalog* catalog = nullptr;
  const SchemaSet* gold = nullptr;
};

struct CrossTrainReport {
  std::vector<double> epoch_mean_loss;
};

// Seeded SGD over l_t with per-instance column-order shuffling and dropout.
// 0 epochs returns the initialization.
CrossEncoderParams train_cross_encoder(const std::vector<LabeledExample>& examples,
                                       TokenEncoder& provider,
                                       const CrossTrainConfig& config,
                                       CrossTrainReport* report = nullptr);

}  // namespace sqlink
