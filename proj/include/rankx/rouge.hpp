#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rankx::rouge {

/// Lowercased alphanumeric tokens.
using TokenSequence = std::vector<std::string>;

/// An n-gram is stored as its tokens joined by a single space.
using NgramCounts = std::map<std::string, std::size_t>;

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Harmonic mean; 0 when precision + recall is 0.
double f1_of(double precision, double recall);

/// Lowercases ASCII letters and splits on every run of non-alphanumeric
/// bytes. Non-ASCII bytes count as separators.
TokenSequence tokenize(std::string_view text);

NgramCounts ngram_counts(std::span<const std::string> tokens, std::size_t n);

RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n);
RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
                   std::size_t n);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

RougeScore rouge_l(std::string_view candidate, std::string_view reference);
RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

/// R-1, R-2 and R-L in one pass over the tokenized texts.
struct RougeTriple {
  RougeScore r1;
  RougeScore r2;
  RougeScore rl;
};

RougeTriple rouge_all(std::string_view candidate, std::string_view reference);

/// Mean of the R-1, R-2 and R-L F1 scores of an utterance against the
/// reference summary. This is the training label of an utterance.
double gold_relevance(std::string_view utterance, std::string_view gold_summary);

/// gold_relevance for each text, in order.
std::vector<double> gold_relevances(std::span<const std::string> utterances,
                                    std::string_view gold_summary);

/// Indices sorted by gold relevance descending, ties by ascending index.
std::vector<std::size_t> gold_order(std::span<const std::string> utterances,
                                    std::string_view gold_summary);

}  // namespace rankx::rouge
