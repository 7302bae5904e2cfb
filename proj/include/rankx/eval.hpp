#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankx/corpus.hpp"
#include "rankx/pipeline.hpp"
#include "rankx/rouge.hpp"
#include "rankx/trainer.hpp"

namespace rankx::eval {

/// DCG with gain = relevance and discount 1/log2(rank + 1), over the first
/// k entries of `predicted_order`, divided by the ideal DCG@k over all of
/// `gold_relevance`. Returns 1 when the ideal DCG is 0.
double ndcg_at_k(std::span<const std::size_t> predicted_order,
                 std::span<const double> gold_relevance, std::size_t k);

/// (concordant - discordant) / C(n, 2) between two orderings of one set.
/// Orders of fewer than two elements score 1.
double kendall_tau(std::span<const std::size_t> order_a, std::span<const std::size_t> order_b);

/// Spearman rank correlation between two orderings of one set.
double spearman(std::span<const std::size_t> order_a, std::span<const std::size_t> order_b);

struct RankingMetrics {
  double ndcg_at_k = 0.0;
  double kendall_tau = 0.0;
  double spearman = 0.0;
};

/// Metrics of a full ordering of all items against the gold order.
RankingMetrics ranking_metrics(std::span<const std::size_t> full_order,
                               std::span<const double> gold_relevance, std::size_t k);

struct TopkRouge {
  std::size_t k = 0;
  rouge::RougeTriple scores;
};

/// For each k: the first k selected utterances, re-sorted into transcript
/// order and joined by spaces, scored against the gold summary.
std::vector<TopkRouge> topk_rouge_overlap(const ExtractionResult& extraction,
                                          const QueryInstance& instance,
                                          std::span<const std::size_t> k_values);

inline const std::vector<std::string> kAllComparisonRows{"pairwise+listwise", "pairwise-only",
                                                         "bce", "mse", "lead", "gold"};

/// One extractor. Rank metrics use the row's ordering of the whole
/// transcript: the re-ranked pool followed by the remaining utterances by
/// stage-1 score (pairwise+listwise), the stage-1 scores alone
/// (pairwise-only), the model's own scores (bce, mse), transcript order
/// (lead) or gold order (gold). ROUGE columns use the row's extraction.
struct ComparisonRow {
  std::string objective;
  rouge::RougeTriple top5;
  rouge::RougeTriple top10;
  double mean_ndcg = 0.0;
  double mean_tau = 0.0;
  double mean_spearman = 0.0;
  std::vector<double> ndcg_per_instance;
  std::vector<double> tau_per_instance;
  std::vector<double> top10_overlap_per_instance;
};

struct ComparisonConfig {
  PipelineConfig pipeline;
  TrainConfig train;
};

nlohmann::json to_json(const ComparisonConfig& config);

struct ComparisonReport {
  std::string corpus_id;
  nlohmann::json config;
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(const std::string& objective) const;
};

/// Trains every requested objective on `train` with the same seed and
/// scorer shape, then evaluates each row on `test`. Gold and LEAD rows are
/// always included.
ComparisonReport run_comparison(const Corpus& train, const Corpus& test,
                                std::vector<std::string> objectives,
                                const ComparisonConfig& config,
                                const std::string& corpus_id = "");

nlohmann::json to_json(const ComparisonReport& report);
std::string format_table(const ComparisonReport& report);

}  // namespace rankx::eval
