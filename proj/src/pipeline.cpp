#include "rankx/pipeline.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "rankx/error.hpp"
#include "rankx/ordering.hpp"

namespace rankx {

void PipelineConfig::validate() const {
  if (sample_size < 2) throw ValidationError("sample_size must be >= 2");
  if (per_sample_top < 1) throw ValidationError("per_sample_top must be >= 1");
  if (per_sample_top > sample_size) throw ValidationError("per_sample_top must be <= sample_size");
  if (top_k < 1) throw ValidationError("K must be >= 1");
  if (!(base_margin > 0.0)) throw ValidationError("base_margin must be positive");
  if (token_budget < 1) throw ValidationError("token_budget must be >= 1");
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {{"sample_size", c.sample_size},       {"per_sample_top", c.per_sample_top},
          {"K", c.top_k},                       {"listwise_k", c.effective_listwise_k()},
          {"base_margin", c.base_margin},       {"token_budget", c.token_budget},
          {"rerank_enabled", c.rerank_enabled}};
}

void merge_json(PipelineConfig& c, const nlohmann::json& j) {
  try {
    if (j.contains("sample_size")) j["sample_size"].get_to(c.sample_size);
    if (j.contains("per_sample_top")) j["per_sample_top"].get_to(c.per_sample_top);
    if (j.contains("K")) j["K"].get_to(c.top_k);
    if (j.contains("listwise_k")) j["listwise_k"].get_to(c.listwise_k);
    if (j.contains("base_margin")) j["base_margin"].get_to(c.base_margin);
    if (j.contains("token_budget")) j["token_budget"].get_to(c.token_budget);
    if (j.contains("rerank_enabled")) j["rerank_enabled"].get_to(c.rerank_enabled);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("pipeline config: ") + e.what());
  }
}

nlohmann::json to_json(const ExtractionResult& r) {
  return {{"instance_id", r.instance_id},
          {"selected_indices", r.selected_indices},
          {"selection_scores", r.selection_scores},
          {"generator_input", r.generator_input},
          {"truncated", r.truncated}};
}

std::size_t count_whitespace_tokens(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string tok; in >> tok;) ++n;
  return n;
}

namespace {

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(std::move(tok));
  return out;
}

std::string join_first(const std::vector<std::string>& tokens, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < std::min(count, tokens.size()); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string utterance_line(const Utterance& u) { return u.speaker + ": " + u.text; }

GlobalOrder sort_pool(const CandidatePool& pool, std::vector<double> scores) {
  // Ties are broken by transcript index, not pool position.
  std::vector<std::size_t> pos(pool.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pool[a].utterance_index < pool[b].utterance_index;
  });
  GlobalOrder out;
  for (std::size_t p : pos) {
    out.utterance_indices.push_back(pool[p].utterance_index);
    out.scores.push_back(scores[p]);
  }
  return out;
}

}  // namespace

RankedSample stage1_rank(const RankSample& sample, std::size_t sample_id,
                         const ScoringModel& ranker, std::span<const FeatureVector> features) {
  std::vector<double> scores;
  scores.reserve(sample.member_indices.size());
  for (std::size_t idx : sample.member_indices) scores.push_back(ranker.score(features[idx]));
  // Members are in transcript order, so a stable sort ties by index.
  const auto order = argsort_descending(scores);
  RankedSample out;
  out.sample_id = sample_id;
  for (std::size_t p : order) {
    out.order.push_back(sample.member_indices[p]);
    out.scores.push_back(scores[p]);
  }
  return out;
}

CandidatePool pool_candidates(std::span<const RankedSample> samples, std::size_t per_sample_top) {
  CandidatePool pool;
  std::unordered_set<std::size_t> seen;
  for (const auto& s : samples) {
    const std::size_t take = std::min(per_sample_top, s.order.size());
    for (std::size_t r = 0; r < take; ++r) {
      if (!seen.insert(s.order[r]).second) continue;
      pool.push_back({s.order[r], s.sample_id, r, s.scores[r]});
    }
  }
  return pool;
}

GlobalOrder stage2_rerank(const CandidatePool& pool, const ScoringModel& reranker,
                          std::span<const FeatureVector> features) {
  if (pool.empty()) throw ValidationError("stage2_rerank: empty candidate pool");
  std::vector<double> scores;
  scores.reserve(pool.size());
  for (const auto& c : pool) scores.push_back(reranker.score(features[c.utterance_index]));
  return sort_pool(pool, std::move(scores));
}

GlobalOrder order_by_stage1(const CandidatePool& pool) {
  std::vector<double> scores;
  for (const auto& c : pool) scores.push_back(c.stage1_score);
  return sort_pool(pool, std::move(scores));
}

ExtractionResult select_topk(const GlobalOrder& global_order, std::size_t top_k,
                             std::size_t token_budget, const QueryInstance& instance) {
  ExtractionResult r;
  r.instance_id = instance.instance_id;
  std::string query = instance.query;
  std::size_t used = count_whitespace_tokens(query);
  std::vector<std::string> lines(instance.utterances.size());

  for (std::size_t p = 0; p < global_order.utterance_indices.size(); ++p) {
    if (r.selected_indices.size() >= top_k) break;
    const std::size_t idx = global_order.utterance_indices[p];
    std::string line = utterance_line(instance.utterances.at(idx));
    const std::size_t cost = count_whitespace_tokens(line);
    if (used + cost > token_budget) {
      if (r.selected_indices.empty()) {
        // The top utterance alone does not fit: keep a truncated copy.
        r.truncated = true;
        if (used >= token_budget) {
          query = join_first(whitespace_tokens(query), token_budget);
          used = token_budget;
        }
        const std::size_t room = token_budget - used;
        if (room > 0) {
          lines[idx] = join_first(whitespace_tokens(line), room);
          used += room;
          r.selected_indices.push_back(idx);
          r.selection_scores.push_back(global_order.scores[p]);
        }
      }
      break;
    }
    used += cost;
    lines[idx] = std::move(line);
    r.selected_indices.push_back(idx);
    r.selection_scores.push_back(global_order.scores[p]);
  }

  std::vector<std::size_t> transcript_order = r.selected_indices;
  std::sort(transcript_order.begin(), transcript_order.end());
  r.generator_input = query + "\n\n";
  for (std::size_t i = 0; i < transcript_order.size(); ++i) {
    if (i) r.generator_input.push_back('\n');
    r.generator_input += lines[transcript_order[i]];
  }
  return r;
}

PipelineTrace run_pipeline_traced(const QueryInstance& instance,
                                  std::span<const FeatureVector> features,
                                  const ScoringModel& ranker, const ScoringModel& reranker,
                                  const PipelineConfig& config) {
  config.validate();
  const std::size_t n = instance.utterances.size();
  if (features.size() != n) throw ValidationError("features not aligned with utterances");
  if (n == 0) throw ValidationError("instance '" + instance.instance_id + "' has no utterances");

  PipelineTrace t;
  std::vector<RankSample> samples;
  if (n == 1) {
    samples.push_back({instance.instance_id, {0}, {0.0}});
  } else {
    const std::vector<double> unused_gold(n, 0.0);
    samples = partition_samples(instance, config.sample_size, unused_gold);
  }
  for (std::size_t s = 0; s < samples.size(); ++s)
    t.ranked_samples.push_back(stage1_rank(samples[s], s, ranker, features));
  t.pool = pool_candidates(t.ranked_samples, config.per_sample_top);
  t.global_order = config.rerank_enabled ? stage2_rerank(t.pool, reranker, features)
                                         : order_by_stage1(t.pool);
  t.result = select_topk(t.global_order, config.top_k, config.token_budget, instance);
  for (const auto& rs : t.ranked_samples) t.result.stage1_orders.push_back(rs.order);
  return t;
}

ExtractionResult run_pipeline(const QueryInstance& instance, const ScoringModel& ranker,
                              const ScoringModel& reranker, const PipelineConfig& config) {
  const auto features = featurize_instance(instance);
  return run_pipeline_traced(instance, features, ranker, reranker, config).result;
}

}  // namespace rankx
