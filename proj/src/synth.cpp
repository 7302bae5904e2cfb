#include "rankx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rankx/error.hpp"

namespace rankx::synth {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kFillerWords = 2000;
constexpr std::size_t kTopicWords = 4000;
constexpr std::size_t kQueryTopics = 5;
constexpr std::size_t kSummaryOnlyTopics = 5;
constexpr std::size_t kSpeakersPerMeeting = 4;

constexpr std::string_view kNames[] = {"Alice", "Bruno", "Carla", "Dmitri", "Elena",
                                       "Farid", "Grace", "Hiro",  "Ines",   "Jonas"};

/// `count` distinct values from [lo, hi).
std::vector<std::size_t> distinct(std::mt19937_64& rng, std::size_t lo, std::size_t hi,
                                  std::size_t count) {
  std::vector<std::size_t> out;
  std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
  while (out.size() < count) {
    const std::size_t v = pick(rng);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string sentence(std::vector<std::string> words) {
  if (!words.empty() && !words[0].empty())
    words[0][0] = static_cast<char>(std::toupper(static_cast<unsigned char>(words[0][0])));
  return join(words) + ".";
}

}  // namespace

std::string pseudo_word(std::size_t id) {
  const std::size_t base = kConsonants.size() * kVowels.size();
  std::string w;
  for (int s = 0; s < 3; ++s) {
    const std::size_t syl = id % base;
    id /= base;
    w.push_back(kConsonants[syl / kVowels.size()]);
    w.push_back(kVowels[syl % kVowels.size()]);
  }
  return w;
}

std::vector<QueryInstance> generate(const SynthConfig& config) {
  if (config.utterances_per_instance < 2)
    throw ValidationError("synth: need at least 2 utterances per instance");
  if (!(config.noise >= 0.0)) throw ValidationError("synth: noise must be non-negative");

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = config.utterances_per_instance;

  std::vector<QueryInstance> out;
  out.reserve(config.instances);
  for (std::size_t i = 0; i < config.instances; ++i) {
    QueryInstance inst;
    inst.instance_id = "syn-" + std::to_string(config.seed) + "-" + std::to_string(i);
    inst.meeting_id = "meeting-" + std::to_string(config.seed) + "-" + std::to_string(i);

    const auto topic_ids =
        distinct(rng, kFillerWords, kFillerWords + kTopicWords, kQueryTopics + kSummaryOnlyTopics);
    std::vector<std::string> query_words, summary_only;
    for (std::size_t t = 0; t < kQueryTopics; ++t) query_words.push_back(pseudo_word(topic_ids[t]));
    for (std::size_t t = kQueryTopics; t < topic_ids.size(); ++t)
      summary_only.push_back(pseudo_word(topic_ids[t]));

    std::vector<std::string> summary_seq = query_words;
    summary_seq.insert(summary_seq.end(), summary_only.begin(), summary_only.end());
    std::shuffle(summary_seq.begin(), summary_seq.end(), rng);
    inst.gold_summary = sentence(summary_seq);

    const auto speaker_ids = distinct(rng, 0, std::size(kNames), kSpeakersPerMeeting);
    const bool mention = unit(rng) < 0.3;
    const std::size_t focus = speaker_ids[static_cast<std::size_t>(unit(rng) * kSpeakersPerMeeting)];
    inst.query = mention ? "What did " + std::string(kNames[focus]) + " say about "
                         : std::string("What was said about ");
    inst.query += join(query_words) + "?";

    const std::size_t span_len = std::min<std::size_t>(n, 6 + static_cast<std::size_t>(unit(rng) * 5));
    const std::size_t span_start = static_cast<std::size_t>(unit(rng) * (n - span_len + 1));
    inst.relevant_spans = std::vector<IndexSpan>{{span_start, span_start + span_len - 1}};

    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t speaker =
          speaker_ids[static_cast<std::size_t>(unit(rng) * kSpeakersPerMeeting)];
      const bool in_span = j >= span_start && j < span_start + span_len;
      double r = in_span ? 0.35 + 0.65 * unit(rng) : 0.25 * std::pow(unit(rng), 3.0);
      if (mention && speaker == focus) r = std::min(1.0, r + 0.2);
      const double noisy = std::clamp(r + config.noise * gauss(rng), 0.0, 1.0);
      const auto visible = static_cast<std::size_t>(std::lround(r * kQueryTopics));
      const auto hidden = static_cast<std::size_t>(std::lround(noisy * kSummaryOnlyTopics));

      // Topic words keep their summary order so bigrams can match.
      std::vector<std::string> chosen;
      for (std::size_t t : distinct(rng, 0, kQueryTopics, visible)) chosen.push_back(query_words[t]);
      for (std::size_t t : distinct(rng, 0, kSummaryOnlyTopics, hidden))
        chosen.push_back(summary_only[t]);
      std::vector<std::string> block;
      for (const auto& w : summary_seq)
        if (std::find(chosen.begin(), chosen.end(), w) != chosen.end()) block.push_back(w);

      const std::size_t filler_len = 6 + static_cast<std::size_t>(unit(rng) * 13);
      std::vector<std::string> words;
      for (std::size_t f = 0; f < filler_len; ++f)
        words.push_back(pseudo_word(static_cast<std::size_t>(unit(rng) * kFillerWords)));
      const auto at = static_cast<std::ptrdiff_t>(unit(rng) * (filler_len + 1));
      words.insert(words.begin() + std::min<std::ptrdiff_t>(at, filler_len), block.begin(),
                   block.end());

      inst.utterances.push_back({inst.meeting_id, j, std::string(kNames[speaker]), sentence(words)});
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace rankx::synth
