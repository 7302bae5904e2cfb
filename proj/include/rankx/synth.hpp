#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rankx/corpus.hpp"

namespace rankx::synth {

/// Planted-order corpus generator.
///
/// Each instance draws ten topic words: five appear in the query and all ten
/// form the gold summary. Every utterance gets a latent relevance r (high
/// inside one planted relevant span, near zero elsewhere). The utterance
/// carries round(5 r) query words, visible to the scorer's features, and
/// round(5 clamp(r + N(0, noise^2))) summary-only words, visible only to the
/// ROUGE labels, embedded in filler text. Labels are therefore a noisy
/// monotone function of the observable features.
struct SynthConfig {
  std::size_t instances = 200;
  std::size_t utterances_per_instance = 40;
  double noise = 0.05;
  std::uint64_t seed = 7;
};

std::vector<QueryInstance> generate(const SynthConfig& config);

/// Deterministic pseudo-word for an id (three consonant-vowel syllables).
std::string pseudo_word(std::size_t id);

}  // namespace rankx::synth
