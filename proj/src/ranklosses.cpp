#include "rankx/ranklosses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankx/error.hpp"
#include "rankx/ordering.hpp"

namespace rankx::losses {

namespace {

void require_permutation(std::span<const std::size_t> pi, std::size_t n, const char* op) {
  if (!is_permutation_of(pi, n))
    throw ValidationError(std::string(op) + ": pi is not a permutation of 0.." +
                          std::to_string(n == 0 ? 0 : n - 1));
}

void require_k(std::size_t k, std::size_t n, const char* op) {
  if (k < 1 || k > n)
    throw ValidationError(std::string(op) + ": k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
}

void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b)
    throw ValidationError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
}

/// exp(s - max) in the order of `pi`, and the suffix sums of those weights.
struct PrefixTerms {
  std::vector<double> weight;      // weight[j] = exp(s_{pi(j)} - max)
  std::vector<double> suffix_sum;  // suffix_sum[j] = sum_{t>=j} weight[t]
};

PrefixTerms prefix_terms(std::span<const double> scores, std::span<const std::size_t> pi) {
  const double top = *std::max_element(scores.begin(), scores.end());
  const std::size_t n = pi.size();
  PrefixTerms t{std::vector<double>(n), std::vector<double>(n + 1, 0.0)};
  for (std::size_t j = 0; j < n; ++j) t.weight[j] = std::exp(scores[pi[j]] - top);
  for (std::size_t j = n; j-- > 0;) t.suffix_sum[j] = t.suffix_sum[j + 1] + t.weight[j];
  return t;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

GoldOrder make_gold_order(std::span<const double> gold_scores) {
  return {argsort_descending(gold_scores), std::vector<double>(gold_scores.begin(), gold_scores.end())};
}

LossResult pairwise_margin_loss(std::span<const double> scores, double base_margin) {
  const std::size_t n = scores.size();
  if (n < 2) throw ValidationError("pairwise_margin_loss: need at least 2 scores");
  LossResult r{0.0, std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double margin = static_cast<double>(j - i) * base_margin;
      const double hinge = scores[j] - scores[i] + margin;
      if (hinge > 0.0) {
        r.value += hinge;
        r.grad[j] += 1.0;
        r.grad[i] -= 1.0;
      }
    }
  }
  return r;
}

std::vector<double> log_topk_prefix_probs(std::span<const double> scores,
                                          std::span<const std::size_t> pi, std::size_t k) {
  require_permutation(pi, scores.size(), "topk_perm_prob");
  require_k(k, scores.size(), "topk_perm_prob");
  const PrefixTerms t = prefix_terms(scores, pi);
  std::vector<double> out(k);
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    acc += std::log(t.weight[j]) - std::log(t.suffix_sum[j]);
    out[j] = acc;
  }
  return out;
}

double topk_perm_prob(std::span<const double> scores, std::span<const std::size_t> pi,
                      std::size_t k) {
  return std::exp(log_topk_prefix_probs(scores, pi, k).back());
}

double perm_prob(std::span<const double> scores, std::span<const std::size_t> pi) {
  require_permutation(pi, scores.size(), "perm_prob");
  if (scores.empty()) return 1.0;
  return topk_perm_prob(scores, pi, scores.size());
}

std::vector<double> topk_distribution(std::span<const double> scores,
                                      std::span<const std::size_t> reference_pi, std::size_t k) {
  std::vector<double> out = log_topk_prefix_probs(scores, reference_pi, k);
  for (double& v : out) v = std::exp(v);
  return out;
}

LossResult kl_listwise_loss(std::span<const double> pred_scores,
                            std::span<const double> gold_scores, std::size_t k) {
  const std::size_t n = pred_scores.size();
  require_same_length(n, gold_scores.size(), "kl_listwise_loss");
  if (n < 2) throw ValidationError("kl_listwise_loss: need at least 2 scores");
  require_k(k, n, "kl_listwise_loss");

  const std::vector<std::size_t> pi = argsort_descending(gold_scores);
  const std::vector<double> log_gold = log_topk_prefix_probs(gold_scores, pi, k);
  const std::vector<double> log_pred = log_topk_prefix_probs(pred_scores, pi, k);

  LossResult r{0.0, std::vector<double>(n, 0.0)};
  std::vector<double> gold_prob(k);
  for (std::size_t i = 0; i < k; ++i) {
    gold_prob[i] = std::exp(log_gold[i]);
    r.value += gold_prob[i] * (log_gold[i] - log_pred[i]);
  }

  // dL/ds_{pi(q)} = -sum_i P*^i d log P^i / d s_{pi(q)}, where
  //   d log P^i / d s_{pi(q)} = [q < i] - sum_{m <= min(q, i-1)} w_q / S_m
  // with i the prefix length. tail[m] = sum_{i > m} P*^i.
  std::vector<double> tail(k + 1, 0.0);
  for (std::size_t m = k; m-- > 0;) tail[m] = tail[m + 1] + gold_prob[m];
  const PrefixTerms t = prefix_terms(pred_scores, pi);
  double inv_suffix_acc = 0.0;  // sum_{m <= min(q, k-1)} tail[m] / S_m
  for (std::size_t q = 0; q < n; ++q) {
    if (q < k) inv_suffix_acc += tail[q] / t.suffix_sum[q];
    const double indicator = q < k ? tail[q] : 0.0;
    r.grad[pi[q]] = -(indicator - t.weight[q] * inv_suffix_acc);
  }
  // The loss ignores a common shift, so the gradient sums to zero. Pinning the
  // last entry to minus the running sum of the others makes that exact in
  // floating point when the entries are accumulated in index order.
  double others = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) others += r.grad[i];
  r.grad[n - 1] = -others;
  return r;
}

LossResult bce_locator_loss(std::span<const double> scores, std::span<const double> labels) {
  const std::size_t n = scores.size();
  require_same_length(n, labels.size(), "bce_locator_loss");
  if (n == 0) throw ValidationError("bce_locator_loss: empty input");
  LossResult r{0.0, std::vector<double>(n, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    // -[y log p + (1-y) log(1-p)] = softplus(s) - y s
    r.value += softplus(scores[i]) - labels[i] * scores[i];
    r.grad[i] = (sigmoid(scores[i]) - labels[i]) * inv_n;
  }
  r.value *= inv_n;
  return r;
}

LossResult mse_simulator_loss(std::span<const double> scores, std::span<const double> gold) {
  const std::size_t n = scores.size();
  require_same_length(n, gold.size(), "mse_simulator_loss");
  if (n == 0) throw ValidationError("mse_simulator_loss: empty input");
  LossResult r{0.0, std::vector<double>(n, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = scores[i] - gold[i];
    r.value += d * d;
    r.grad[i] = 2.0 * d * inv_n;
  }
  r.value *= inv_n;
  return r;
}

std::vector<double> locator_labels(std::span<const double> gold_relevance,
                                   std::size_t num_positive,
                                   const std::optional<std::vector<IndexSpan>>& spans) {
  std::vector<double> labels(gold_relevance.size(), 0.0);
  if (spans) {
    for (const auto& [first, last] : *spans)
      for (std::size_t i = first; i <= last && i < labels.size(); ++i) labels[i] = 1.0;
    return labels;
  }
  const auto order = argsort_descending(gold_relevance);
  for (std::size_t r = 0; r < std::min(num_positive, order.size()); ++r) labels[order[r]] = 1.0;
  return labels;
}

}  // namespace rankx::losses
