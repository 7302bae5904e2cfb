#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rankx/corpus.hpp"

namespace rankx::losses {

/// Loss value and its gradient with respect to each input score.
struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
};

/// Items sorted by gold score descending (ties by position) with the
/// scores kept aligned to item positions.
struct GoldOrder {
  std::vector<std::size_t> permutation;
  std::vector<double> gold_scores;
};

GoldOrder make_gold_order(std::span<const double> gold_scores);

inline constexpr double kDefaultBaseMargin = 0.01;

/// Margin ranking loss over every ordered pair of a gold-sorted list:
///   sum_{i<j} max(0, s_j - s_i + (j - i) * base_margin)
/// `scores[i]` must be the score of the item at gold rank i. The
/// subgradient at a hinge kink is 0.
LossResult pairwise_margin_loss(std::span<const double> scores, double base_margin);

/// Plackett-Luce probability of the full ordering `pi` under exp scores.
double perm_prob(std::span<const double> scores, std::span<const std::size_t> pi);

/// Probability that the first `k` positions of `pi` come out in that order.
double topk_perm_prob(std::span<const double> scores, std::span<const std::size_t> pi,
                      std::size_t k);

/// log of topk_perm_prob, for every prefix length 1..k.
std::vector<double> log_topk_prefix_probs(std::span<const double> scores,
                                          std::span<const std::size_t> pi, std::size_t k);

/// (P^1, ..., P^k) of the prefixes of `reference_pi`.
std::vector<double> topk_distribution(std::span<const double> scores,
                                      std::span<const std::size_t> reference_pi, std::size_t k);

/// sum_{i=1..k} P*^i log(P*^i / P^i), both distributions taken over the
/// prefixes of the gold order of `gold_scores`. Gradient is w.r.t.
/// `pred_scores`.
LossResult kl_listwise_loss(std::span<const double> pred_scores,
                            std::span<const double> gold_scores, std::size_t k);

/// Mean binary cross-entropy of logistic(scores) against 0/1 labels.
LossResult bce_locator_loss(std::span<const double> scores, std::span<const double> labels);

/// Mean squared error against the gold relevance values.
LossResult mse_simulator_loss(std::span<const double> scores, std::span<const double> gold);

inline constexpr std::size_t kDefaultLocatorPositives = 8;

/// Binary Locator labels: the top `num_positive` utterances by gold relevance,
/// or, when `spans` is given, every utterance inside a relevant span.
std::vector<double> locator_labels(std::span<const double> gold_relevance,
                                   std::size_t num_positive,
                                   const std::optional<std::vector<IndexSpan>>& spans = {});

}  // namespace rankx::losses
