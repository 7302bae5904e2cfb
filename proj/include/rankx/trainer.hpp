#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rankx/corpus.hpp"
#include "rankx/pipeline.hpp"
#include "rankx/ranklosses.hpp"
#include "rankx/scorer.hpp"

namespace rankx {

enum class Objective { kPairwise, kListwise, kBce, kMse };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view name);

enum class OptimizerKind { kGradientDescent, kAdam };

/// Where the re-ranker's parameters start from.
enum class RerankerInit { kFromRanker, kFresh };

/// Learning rate reported for the transformer cross-encoder setting. The
/// feature scorer trains with kDefaultLearningRate instead.
inline constexpr double kTransformerLearningRate = 5e-6;
inline constexpr double kDefaultLearningRate = 5e-3;

struct TrainConfig {
  Objective objective = Objective::kPairwise;
  double learning_rate = kDefaultLearningRate;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double base_margin = losses::kDefaultBaseMargin;
  /// 0 means "use the pipeline's listwise_k".
  std::size_t listwise_k = 0;
  bool shuffle = true;
  OptimizerKind optimizer = OptimizerKind::kGradientDescent;
  std::vector<std::size_t> layer_dims = kDefaultLayerDims;
  std::size_t locator_positives = losses::kDefaultLocatorPositives;
  bool locator_use_spans = false;
  RerankerInit reranker_init = RerankerInit::kFromRanker;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
void merge_json(TrainConfig& config, const nlohmann::json& j);

struct TrainResult {
  ScoringModel model;
  /// Mean per-update training loss of each epoch.
  std::vector<double> loss_history;
};

/// Features and gold labels of one instance, computed once.
struct PreparedInstance {
  const QueryInstance* instance = nullptr;
  std::vector<FeatureVector> features;
  std::vector<double> gold_relevance;
};

std::vector<PreparedInstance> prepare_corpus(const Corpus& corpus);

/// Loss and parameter gradient of one objective over a list of items.
/// `targets` holds gold relevance (pairwise, listwise, mse) or 0/1 labels (bce).
struct ObjectiveTerm {
  Objective objective = Objective::kPairwise;
  std::vector<FeatureVector> features;
  std::vector<double> targets;
  double base_margin = losses::kDefaultBaseMargin;
  std::size_t listwise_k = 1;
};

std::pair<double, ParameterGradient> evaluate_term(const ScoringModel& model,
                                                   const ObjectiveTerm& term);

TrainResult train_ranker(const Corpus& corpus, const TrainConfig& config,
                         const PipelineConfig& pipeline_config);

TrainResult train_reranker(const Corpus& corpus, const ScoringModel& stage1_model,
                           const TrainConfig& config, const PipelineConfig& pipeline_config);

TrainResult train_baseline(const Corpus& corpus, const TrainConfig& config,
                           const PipelineConfig& pipeline_config);

/// Dispatches on config.objective. kListwise needs `stage1_model`.
TrainResult train(const Corpus& corpus, const TrainConfig& config,
                  const PipelineConfig& pipeline_config, const ScoringModel* stage1_model = nullptr);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

inline constexpr double kGradCheckThreshold = 1e-4;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::vector<double> relative_errors;
  std::vector<double> analytic;
  std::vector<double> numeric;
  double threshold = kGradCheckThreshold;
  // Entries where both values sit below the roundoff floor of the
  // difference quotient. They are listed but do not count against `pass`.
  std::vector<std::size_t> below_resolution;
  bool pass = true;
};

nlohmann::json to_json(const GradCheckReport& report);

/// Loss value and its analytic parameter gradient at a model state.
using LossAssembly = std::function<std::pair<double, ParameterGradient>(const ScoringModel&)>;

/// Central differences over every parameter; relative error per parameter is
/// |a - n| / max(1e-12, |a| + |n|). max_relative_error and `pass` cover the
/// entries the difference quotient can resolve: a parameter whose analytic
/// and numeric values are both under 256 * eps_machine * max(1, |L|) / h is
/// roundoff on both sides (the output bias of a shift-invariant loss, for
/// one) and is reported in below_resolution instead.
GradCheckReport grad_check(const LossAssembly& loss, const ScoringModel& model, double epsilon,
                           double threshold = kGradCheckThreshold);

/// A random scorer and a random objective term over `items` feature
/// vectors. Pairwise points are redrawn until every hinge is at least
/// 1e-3 away from its kink.
struct GradCheckPoint {
  ScoringModel model;
  ObjectiveTerm term;
};

GradCheckPoint random_gradcheck_point(Objective objective, std::mt19937_64& rng,
                                      std::size_t items = 8);

}  // namespace rankx
