#include "rankx/rouge.hpp"

#include <algorithm>
#include <cctype>

#include "rankx/error.hpp"
#include "rankx/ordering.hpp"

namespace rankx::rouge {

double f1_of(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (uc < 0x80 && std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

NgramCounts ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  if (n == 0) throw ValidationError("ngram_counts: n must be positive");
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < n; ++j) {
      key.push_back(' ');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

namespace {

RougeScore score_from_counts(std::size_t overlap, std::size_t candidate_total,
                             std::size_t reference_total) {
  RougeScore s;
  s.precision = candidate_total > 0 ? static_cast<double>(overlap) / candidate_total : 0.0;
  s.recall = reference_total > 0 ? static_cast<double>(overlap) / reference_total : 0.0;
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

}  // namespace

RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
                   std::size_t n) {
  if (n == 0) throw ValidationError("rouge_n: n must be positive");
  const NgramCounts cand = ngram_counts(candidate, n);
  const NgramCounts ref = ngram_counts(reference, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  const std::size_t cand_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  const std::size_t ref_total = reference.size() >= n ? reference.size() - n + 1 : 0;
  return score_from_counts(overlap, cand_total, ref_total);
}

RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
  return rouge_n(tokenize(candidate), tokenize(reference), n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  // Two-row table over b.
  std::vector<std::size_t> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return score_from_counts(lcs_length(candidate, reference), candidate.size(), reference.size());
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l(tokenize(candidate), tokenize(reference));
}

RougeTriple rouge_all(std::string_view candidate, std::string_view reference) {
  const TokenSequence cand = tokenize(candidate);
  const TokenSequence ref = tokenize(reference);
  return {rouge_n(cand, ref, 1), rouge_n(cand, ref, 2), rouge_l(cand, ref)};
}

double gold_relevance(std::string_view utterance, std::string_view gold_summary) {
  const RougeTriple t = rouge_all(utterance, gold_summary);
  return (t.r1.f1 + t.r2.f1 + t.rl.f1) / 3.0;
}

std::vector<double> gold_relevances(std::span<const std::string> utterances,
                                    std::string_view gold_summary) {
  const TokenSequence ref = tokenize(gold_summary);
  std::vector<double> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) {
    const TokenSequence cand = tokenize(u);
    out.push_back((rouge_n(cand, ref, 1).f1 + rouge_n(cand, ref, 2).f1 + rouge_l(cand, ref).f1) /
                  3.0);
  }
  return out;
}

std::vector<std::size_t> gold_order(std::span<const std::string> utterances,
                                    std::string_view gold_summary) {
  if (utterances.empty()) throw ValidationError("gold_order: at least one utterance required");
  const std::vector<double> rel = gold_relevances(utterances, gold_summary);
  return argsort_descending(rel);
}

}  // namespace rankx::rouge
