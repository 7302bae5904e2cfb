#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rankx/corpus.hpp"
#include "rankx/ranklosses.hpp"
#include "rankx/scorer.hpp"

namespace rankx {

struct PipelineConfig {
  std::size_t sample_size = kDefaultSampleSize;
  std::size_t per_sample_top = 4;
  std::size_t top_k = 10;
  /// 0 means "same as top_k".
  std::size_t listwise_k = 0;
  double base_margin = losses::kDefaultBaseMargin;
  std::size_t token_budget = 1024;
  bool rerank_enabled = true;

  std::size_t effective_listwise_k() const { return listwise_k == 0 ? top_k : listwise_k; }
  /// Throws ValidationError when a field is out of range.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Fields missing from `j` keep the values already in `config`.
void merge_json(PipelineConfig& config, const nlohmann::json& j);

/// Sample members sorted by predicted score descending.
struct RankedSample {
  std::size_t sample_id = 0;
  std::vector<std::size_t> order;    // utterance indices
  std::vector<double> scores;        // aligned with order
};

struct Candidate {
  std::size_t utterance_index = 0;
  std::size_t sample_id = 0;
  std::size_t rank_in_sample = 0;
  double stage1_score = 0.0;
};

/// Pooled candidates in pooling order (sample by sample, rank by rank).
using CandidatePool = std::vector<Candidate>;

/// A global ordering of candidates with the scores that produced it.
struct GlobalOrder {
  std::vector<std::size_t> utterance_indices;
  std::vector<double> scores;
};

struct ExtractionResult {
  std::string instance_id;
  /// Rank order; selection_scores is aligned.
  std::vector<std::size_t> selected_indices;
  std::vector<double> selection_scores;
  /// Query, a blank separator line, then "SPEAKER: text" per selected
  /// utterance in transcript order.
  std::string generator_input;
  std::vector<std::vector<std::size_t>> stage1_orders;
  /// Set when the first utterance alone exceeded the token budget and was cut.
  bool truncated = false;

  bool operator==(const ExtractionResult&) const = default;
};

nlohmann::json to_json(const ExtractionResult& result);

/// Whitespace-delimited token count (the unit of the token budget).
std::size_t count_whitespace_tokens(std::string_view text);

RankedSample stage1_rank(const RankSample& sample, std::size_t sample_id,
                         const ScoringModel& ranker, std::span<const FeatureVector> features);

CandidatePool pool_candidates(std::span<const RankedSample> samples, std::size_t per_sample_top);

GlobalOrder stage2_rerank(const CandidatePool& pool, const ScoringModel& reranker,
                          std::span<const FeatureVector> features);

/// Pool ordered by its stage-1 scores (the re-ranking ablation).
GlobalOrder order_by_stage1(const CandidatePool& pool);

ExtractionResult select_topk(const GlobalOrder& global_order, std::size_t top_k,
                             std::size_t token_budget, const QueryInstance& instance);

/// Everything run_pipeline computes, for evaluation and training.
struct PipelineTrace {
  std::vector<RankedSample> ranked_samples;
  CandidatePool pool;
  GlobalOrder global_order;
  ExtractionResult result;
};

PipelineTrace run_pipeline_traced(const QueryInstance& instance,
                                  std::span<const FeatureVector> features,
                                  const ScoringModel& ranker, const ScoringModel& reranker,
                                  const PipelineConfig& config);

ExtractionResult run_pipeline(const QueryInstance& instance, const ScoringModel& ranker,
                              const ScoringModel& reranker, const PipelineConfig& config);

}  // namespace rankx
