#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "rankx/scorer.hpp"

namespace rankx {

namespace {

constexpr std::string_view kStopwords[] = {
    "a",     "about", "above", "after", "again", "all",   "also",  "am",    "an",    "and",
    "any",   "are",   "as",    "at",    "be",    "been",  "before", "being", "both",  "but",
    "by",    "can",   "could", "did",   "do",    "does",  "doing", "down",  "during", "each",
    "few",   "for",   "from",  "further", "had", "has",   "have",  "having", "he",   "her",
    "here",  "hers",  "him",   "his",   "how",   "i",     "if",    "in",    "into",  "is",
    "it",    "its",   "just",  "me",    "more",  "most",  "my",    "no",    "nor",   "not",
    "now",   "of",    "off",   "on",    "once",  "only",  "or",    "other", "our",   "out",
    "over",  "own",   "s",     "same",  "she",   "should", "so",   "some",  "such",  "t",
    "than",  "that",  "the",   "their", "them",  "then",  "there", "these", "they",  "this",
    "those", "through", "to",  "too",   "under", "until", "up",    "very",  "was",   "we",
    "were",  "what",  "when",  "where", "which", "while", "who",   "whom",  "why",   "will",
    "with",  "would", "you",   "your",
};

std::unordered_map<std::string, double> tfidf(const rouge::TokenSequence& tokens,
                                              const InstanceStats& stats) {
  std::unordered_map<std::string, double> v;
  for (const auto& t : tokens) v[t] += 1.0;
  for (auto& [term, w] : v) w *= stats.idf(term);
  return v;
}

double cosine(const std::unordered_map<std::string, double>& a,
              const std::unordered_map<std::string, double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, w] : a) {
    na += w * w;
    if (auto it = b.find(t); it != b.end()) dot += w * it->second;
  }
  for (const auto& [t, w] : b) nb += w * w;
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

bool contains_run(const rouge::TokenSequence& haystack, const rouge::TokenSequence& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

}  // namespace

bool is_stopword(std::string_view token) {
  return std::find(std::begin(kStopwords), std::end(kStopwords), token) != std::end(kStopwords);
}

double InstanceStats::idf(const std::string& term) const {
  const auto it = document_frequency.find(term);
  const double df = it == document_frequency.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(num_utterances)) / (1.0 + df)) + 1.0;
}

InstanceStats compute_instance_stats(const QueryInstance& instance) {
  InstanceStats stats;
  stats.num_utterances = instance.utterances.size();
  for (const auto& u : instance.utterances) {
    const auto tokens = rouge::tokenize(u.text);
    const std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
    for (const auto& t : unique) ++stats.document_frequency[t];
  }
  return stats;
}

FeatureVector featurize(std::string_view query, const Utterance& utterance,
                        const InstanceStats& stats) {
  const auto q = rouge::tokenize(query);
  const auto u = rouge::tokenize(utterance.text);
  FeatureVector f(kFeatureDim, 0.0);

  f[static_cast<std::size_t>(Feature::kUnigramF1)] = rouge::rouge_n(u, q, 1).f1;
  f[static_cast<std::size_t>(Feature::kBigramF1)] = rouge::rouge_n(u, q, 2).f1;
  f[static_cast<std::size_t>(Feature::kTfidfCosine)] = cosine(tfidf(q, stats), tfidf(u, stats));
  f[static_cast<std::size_t>(Feature::kLength)] =
      std::min(1.0, static_cast<double>(u.size()) / 100.0);
  f[static_cast<std::size_t>(Feature::kPosition)] =
      stats.num_utterances > 1
          ? static_cast<double>(utterance.index) / static_cast<double>(stats.num_utterances - 1)
          : 0.0;

  std::set<std::string> content;
  for (const auto& t : q)
    if (!is_stopword(t)) content.insert(t);
  if (content.empty()) content.insert(q.begin(), q.end());
  if (!content.empty()) {
    const std::unordered_set<std::string> present(u.begin(), u.end());
    std::size_t hits = 0;
    for (const auto& t : content) hits += present.count(t);
    f[static_cast<std::size_t>(Feature::kQueryCoverage)] =
        static_cast<double>(hits) / static_cast<double>(content.size());
  }

  f[static_cast<std::size_t>(Feature::kSpeakerInQuery)] =
      contains_run(q, rouge::tokenize(utterance.speaker)) ? 1.0 : 0.0;
  return f;
}

std::vector<FeatureVector> featurize_instance(const QueryInstance& instance) {
  const InstanceStats stats = compute_instance_stats(instance);
  std::vector<FeatureVector> out;
  out.reserve(instance.utterances.size());
  for (const auto& u : instance.utterances) out.push_back(featurize(instance.query, u, stats));
  return out;
}

}  // namespace rankx
