#include "rankx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "rankx/error.hpp"
#include "rankx/ordering.hpp"

namespace rankx::eval {

double ndcg_at_k(std::span<const std::size_t> predicted_order,
                 std::span<const double> gold_relevance, std::size_t k) {
  if (k < 1) throw ValidationError("ndcg_at_k: k must be >= 1");
  std::vector<double> ideal(gold_relevance.begin(), gold_relevance.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r)
    idcg += ideal[r] / std::log2(static_cast<double>(r) + 2.0);
  if (idcg <= 0.0) return 1.0;
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, predicted_order.size()); ++r)
    dcg += gold_relevance[predicted_order[r]] / std::log2(static_cast<double>(r) + 2.0);
  return std::clamp(dcg / idcg, 0.0, 1.0);
}

namespace {

std::vector<std::size_t> positions_of(std::span<const std::size_t> order_a,
                                      std::span<const std::size_t> order_b, const char* op) {
  const std::set<std::size_t> a(order_a.begin(), order_a.end());
  const std::set<std::size_t> b(order_b.begin(), order_b.end());
  if (a != b || a.size() != order_a.size() || b.size() != order_b.size())
    throw ValidationError(std::string(op) + ": orders must be permutations of the same set");
  std::size_t max_id = order_b.empty() ? 0 : *b.rbegin();
  std::vector<std::size_t> pos(max_id + 1, 0);
  for (std::size_t i = 0; i < order_b.size(); ++i) pos[order_b[i]] = i;
  return pos;
}

}  // namespace

double kendall_tau(std::span<const std::size_t> order_a, std::span<const std::size_t> order_b) {
  const auto pos_b = positions_of(order_a, order_b, "kendall_tau");
  const std::size_t n = order_a.size();
  if (n < 2) return 1.0;
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      (pos_b[order_a[i]] < pos_b[order_a[j]] ? concordant : discordant) += 1;
  return static_cast<double>(concordant - discordant) / (static_cast<double>(n) * (n - 1) / 2.0);
}

double spearman(std::span<const std::size_t> order_a, std::span<const std::size_t> order_b) {
  const auto pos_b = positions_of(order_a, order_b, "spearman");
  const std::size_t n = order_a.size();
  if (n < 2) return 1.0;
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(pos_b[order_a[i]]);
    d2 += d * d;
  }
  const double nd = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (nd * (nd * nd - 1.0));
}

RankingMetrics ranking_metrics(std::span<const std::size_t> full_order,
                               std::span<const double> gold_relevance, std::size_t k) {
  const auto gold = argsort_descending(gold_relevance);
  return {ndcg_at_k(full_order, gold_relevance, k), kendall_tau(full_order, gold),
          spearman(full_order, gold)};
}

std::vector<TopkRouge> topk_rouge_overlap(const ExtractionResult& extraction,
                                          const QueryInstance& instance,
                                          std::span<const std::size_t> k_values) {
  std::vector<TopkRouge> out;
  for (std::size_t k : k_values) {
    std::vector<std::size_t> chosen(
        extraction.selected_indices.begin(),
        extraction.selected_indices.begin() +
            static_cast<std::ptrdiff_t>(std::min(k, extraction.selected_indices.size())));
    std::sort(chosen.begin(), chosen.end());
    std::string text;
    for (std::size_t idx : chosen) {
      if (!text.empty()) text.push_back(' ');
      text += instance.utterances.at(idx).text;
    }
    out.push_back({k, rouge::rouge_all(text, instance.gold_summary)});
  }
  return out;
}

nlohmann::json to_json(const ComparisonConfig& c) {
  return {{"pipeline", to_json(c.pipeline)}, {"train", to_json(c.train)}};
}

const ComparisonRow& ComparisonReport::row(const std::string& objective) const {
  for (const auto& r : rows)
    if (r.objective == objective) return r;
  throw ValidationError("report has no row '" + objective + "'");
}

namespace {

struct RowOutput {
  std::vector<std::size_t> full_order;
  ExtractionResult extraction;
};

/// All utterances: the pipeline's global order first, the rest by stage-1
/// score.
std::vector<std::size_t> complete_order(const PipelineTrace& trace, std::size_t n) {
  std::vector<double> stage1(n, 0.0);
  for (const auto& rs : trace.ranked_samples)
    for (std::size_t r = 0; r < rs.order.size(); ++r) stage1[rs.order[r]] = rs.scores[r];
  std::vector<std::size_t> out = trace.global_order.utterance_indices;
  std::vector<bool> used(n, false);
  for (std::size_t idx : out) used[idx] = true;
  for (std::size_t idx : argsort_descending(stage1))
    if (!used[idx]) out.push_back(idx);
  return out;
}

RowOutput single_stage(const QueryInstance& inst, std::vector<double> scores,
                       const PipelineConfig& pc) {
  RowOutput o;
  o.full_order = argsort_descending(scores);
  GlobalOrder g;
  g.utterance_indices = o.full_order;
  for (std::size_t idx : o.full_order) g.scores.push_back(scores[idx]);
  o.extraction = select_topk(g, pc.top_k, pc.token_budget, inst);
  return o;
}

void add_triple(rouge::RougeTriple& acc, const rouge::RougeTriple& t) {
  for (auto [a, b] : {std::pair{&acc.r1, &t.r1}, std::pair{&acc.r2, &t.r2},
                      std::pair{&acc.rl, &t.rl}}) {
    a->precision += b->precision;
    a->recall += b->recall;
    a->f1 += b->f1;
  }
}

void scale_triple(rouge::RougeTriple& t, double s) {
  for (auto* r : {&t.r1, &t.r2, &t.rl}) {
    r->precision *= s;
    r->recall *= s;
    r->f1 *= s;
  }
}

}  // namespace

ComparisonReport run_comparison(const Corpus& train, const Corpus& test,
                                std::vector<std::string> objectives,
                                const ComparisonConfig& config, const std::string& corpus_id) {
  config.pipeline.validate();
  for (const auto& o : objectives)
    if (std::find(kAllComparisonRows.begin(), kAllComparisonRows.end(), o) ==
        kAllComparisonRows.end())
      throw ValidationError("unknown comparison row '" + o + "'");
  for (const char* fixed : {"lead", "gold"})
    if (std::find(objectives.begin(), objectives.end(), fixed) == objectives.end())
      objectives.push_back(fixed);
  // Report rows follow the canonical order.
  std::vector<std::string> rows;
  for (const auto& name : kAllComparisonRows)
    if (std::find(objectives.begin(), objectives.end(), name) != objectives.end())
      rows.push_back(name);

  const auto wants = [&](const char* name) {
    return std::find(rows.begin(), rows.end(), name) != rows.end();
  };

  ScoringModel ranker, reranker, bce_model, mse_model;
  if (wants("pairwise+listwise") || wants("pairwise-only")) {
    TrainConfig tc = config.train;
    tc.objective = Objective::kPairwise;
    ranker = train_ranker(train, tc, config.pipeline).model;
    spdlog::info("trained pairwise ranker");
  }
  if (wants("pairwise+listwise")) {
    TrainConfig tc = config.train;
    tc.objective = Objective::kListwise;
    reranker = train_reranker(train, ranker, tc, config.pipeline).model;
    spdlog::info("trained listwise re-ranker");
  }
  if (wants("bce")) {
    TrainConfig tc = config.train;
    tc.objective = Objective::kBce;
    bce_model = train_baseline(train, tc, config.pipeline).model;
  }
  if (wants("mse")) {
    TrainConfig tc = config.train;
    tc.objective = Objective::kMse;
    mse_model = train_baseline(train, tc, config.pipeline).model;
  }

  ComparisonReport report;
  report.corpus_id = corpus_id;
  report.config = to_json(config);
  for (const auto& name : rows) report.rows.push_back(ComparisonRow{name, {}, {}, 0, 0, 0, {}, {}, {}});

  const auto prepared = prepare_corpus(test);
  const std::size_t k_values[] = {5, 10};
  std::size_t evaluated = 0;
  for (const auto& p : prepared) {
    const QueryInstance& inst = *p.instance;
    const std::size_t n = inst.utterances.size();
    if (n == 0) continue;
    ++evaluated;
    for (auto& row : report.rows) {
      RowOutput out;
      if (row.objective == "pairwise+listwise" || row.objective == "pairwise-only") {
        PipelineConfig pc = config.pipeline;
        pc.rerank_enabled = row.objective == "pairwise+listwise";
        const auto trace = run_pipeline_traced(inst, p.features, ranker, reranker, pc);
        // Without re-ranking the ranker's own scores order the transcript.
        out.full_order = pc.rerank_enabled ? complete_order(trace, n)
                                           : argsort_descending(ranker.score_all(p.features));
        out.extraction = trace.result;
      } else if (row.objective == "bce") {
        out = single_stage(inst, bce_model.score_all(p.features), config.pipeline);
      } else if (row.objective == "mse") {
        out = single_stage(inst, mse_model.score_all(p.features), config.pipeline);
      } else if (row.objective == "lead") {
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) scores[i] = -static_cast<double>(i);
        out = single_stage(inst, std::move(scores), config.pipeline);
      } else {
        out = single_stage(inst, p.gold_relevance, config.pipeline);
      }
      const auto m = ranking_metrics(out.full_order, p.gold_relevance, config.pipeline.top_k);
      row.ndcg_per_instance.push_back(m.ndcg_at_k);
      row.tau_per_instance.push_back(m.kendall_tau);
      row.mean_ndcg += m.ndcg_at_k;
      row.mean_tau += m.kendall_tau;
      row.mean_spearman += m.spearman;
      const auto overlap = topk_rouge_overlap(out.extraction, inst, k_values);
      add_triple(row.top5, overlap[0].scores);
      add_triple(row.top10, overlap[1].scores);
      const auto& t10 = overlap[1].scores;
      row.top10_overlap_per_instance.push_back((t10.r1.f1 + t10.r2.f1 + t10.rl.f1) / 3.0);
    }
  }
  if (evaluated == 0) throw ValidationError("test corpus has no instances to evaluate");
  const double inv = 1.0 / static_cast<double>(evaluated);
  for (auto& row : report.rows) {
    row.mean_ndcg *= inv;
    row.mean_tau *= inv;
    row.mean_spearman *= inv;
    scale_triple(row.top5, inv);
    scale_triple(row.top10, inv);
  }
  return report;
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"objective", r.objective},
                    {"top5", {{"r1", r.top5.r1.f1}, {"r2", r.top5.r2.f1}, {"rl", r.top5.rl.f1}}},
                    {"top10", {{"r1", r.top10.r1.f1}, {"r2", r.top10.r2.f1}, {"rl", r.top10.rl.f1}}},
                    {"mean_ndcg", r.mean_ndcg},
                    {"mean_tau", r.mean_tau},
                    {"mean_spearman", r.mean_spearman},
                    {"ndcg_per_instance", r.ndcg_per_instance},
                    {"tau_per_instance", r.tau_per_instance},
                    {"top10_overlap_per_instance", r.top10_overlap_per_instance}});
  }
  return {{"corpus_id", report.corpus_id}, {"config", report.config}, {"rows", rows}};
}

std::string format_table(const ComparisonReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(20) << "objective" << std::right;
  for (const char* h : {"T5 R-1", "T5 R-2", "T5 R-L", "T10 R-1", "T10 R-2", "T10 R-L"})
    out << std::setw(9) << h;
  out << std::setw(9) << "NDCG@K" << std::setw(9) << "tau" << '\n';
  for (const auto& r : report.rows) {
    out << std::left << std::setw(20) << r.objective << std::right;
    for (double v : {r.top5.r1.f1, r.top5.r2.f1, r.top5.rl.f1, r.top10.r1.f1, r.top10.r2.f1,
                     r.top10.rl.f1})
      out << std::setw(9) << 100.0 * v;
    out << std::setprecision(4) << std::setw(9) << r.mean_ndcg << std::setw(9) << r.mean_tau
        << std::setprecision(2) << '\n';
  }
  return out.str();
}

}  // namespace rankx::eval
